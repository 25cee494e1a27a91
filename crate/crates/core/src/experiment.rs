//! Metarule replacement experiments: user-supplied sort metarules are
//! removed one per step while learned metarules take their place.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::{accuracy, top_program, Hypothesis, LearnOptions};
use crate::logic::{canonical_key, Atom, Metarule, Taxon};
use crate::problems::{matrix_h22, punch_upto, MilProblem};
use crate::toil::{toil_learn, ToilConfig};

/// Proof search recurses once per resolution step.
pub const WORKER_STACK: usize = 512 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    /// User metarules only.
    NoReplacement,
    /// Plus metarules learned from matrix metarules.
    Toil2,
    /// Plus metarules learned from punch metarules.
    Toil3,
}

impl Leg {
    pub const ALL: [Leg; 3] = [Leg::NoReplacement, Leg::Toil2, Leg::Toil3];

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::NoReplacement => "no_replacement",
            Leg::Toil2 => "toil2",
            Leg::Toil3 => "toil3",
        })
    }
}

impl FromStr for Leg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Leg> {
        match s {
            "no_replacement" | "leg1" => Ok(Leg::NoReplacement),
            "toil2" | "leg2" => Ok(Leg::Toil2),
            "toil3" | "leg3" => Ok(Leg::Toil3),
            _ => Err(Error::InvalidParameter(format!("unknown leg {s}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Its metarules are the user-defined set that gets replaced.
    pub problem: MilProblem,
    pub runs: usize,
    /// Fraction of each of `E⁺` and `E⁻` used for training.
    pub split: f64,
    pub legs: Vec<Leg>,
    pub matrix: Vec<Metarule>,
    pub punch: Vec<Metarule>,
    pub toil: ToilConfig,
    /// An attempt that spends more than this many inferences scores the
    /// empty hypothesis.
    pub attempt_inferences: Option<u64>,
    pub time_limit: Option<Duration>,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    pub fn new(problem: MilProblem) -> Self {
        ExperimentConfig {
            problem,
            runs: 10,
            split: 0.5,
            legs: Leg::ALL.to_vec(),
            matrix: matrix_h22(),
            punch: punch_upto(3),
            toil: ToilConfig::default(),
            attempt_inferences: None,
            time_limit: None,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::InvalidParameter(format!("split {} is not in (0, 1)", self.split)));
        }
        if let Some(m) = self.problem.metarules.iter().find(|m| m.taxon != Taxon::Sort) {
            return Err(Error::WrongTaxon { expected: "sort".into(), found: m.taxon.to_string() });
        }
        self.toil.validate()?;
        self.problem.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Stat::default();
        }
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Stat { mean, stderr }
    }
}

/// Aggregates for one leg at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub step: usize,
    pub leg: Leg,
    pub accuracy: Stat,
    pub inferences: Stat,
    pub seconds: Stat,
    /// Accuracy of the empty hypothesis on the same test partitions.
    pub baseline: Stat,
    pub failures: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentResult {
    pub cells: Vec<Cell>,
    /// Per run, the names of user metarules in removal order.
    pub removal_orders: Vec<Vec<String>>,
    /// `(run, step, leg, learned metarule names)` for the learned legs.
    pub learned: Vec<(usize, usize, Leg, Vec<String>)>,
    pub seed: u64,
}

impl ExperimentResult {
    pub fn cell(&self, step: usize, leg: Leg) -> Option<&Cell> {
        self.cells.iter().find(|c| c.step == step && c.leg == leg)
    }

    pub fn steps(&self) -> usize {
        self.cells.iter().map(|c| c.step).max().unwrap_or(0)
    }

    /// Columns `step,leg,metric,mean,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,leg,metric,mean,stderr\n");
        for c in &self.cells {
            for (metric, s) in [
                ("accuracy", c.accuracy),
                ("inferences", c.inferences),
                ("seconds", c.seconds),
                ("baseline", c.baseline),
            ] {
                out.push_str(&format!("{},{},{},{},{}\n", c.step, c.leg, metric, s.mean, s.stderr));
            }
        }
        out
    }
}

/// splitmix64 over the parts, for per-attempt seeds.
fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(*p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

struct Split {
    train_pos: Vec<Atom>,
    train_neg: Vec<Atom>,
    test_pos: Vec<Atom>,
    test_neg: Vec<Atom>,
}

fn split_examples(p: &MilProblem, frac: f64, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut part = |xs: &[Atom]| {
        let n = ((frac * xs.len() as f64).round() as usize).min(xs.len());
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.shuffle(&mut rng);
        let chosen: HashSet<usize> = idx[..n].iter().copied().collect();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, a) in xs.iter().enumerate() {
            if chosen.contains(&i) { train.push(a.clone()) } else { test.push(a.clone()) }
        }
        (train, test)
    };
    let (train_pos, test_pos) = part(&p.pos);
    let (train_neg, test_neg) = part(&p.neg);
    Split { train_pos, train_neg, test_pos, test_neg }
}

struct Attempt {
    accuracy: f64,
    baseline: f64,
    inferences: u64,
    seconds: f64,
    failed: bool,
}

fn attempt(cfg: &ExperimentConfig, metarules: &[Metarule], split: &Split) -> Result<Attempt> {
    let p = &cfg.problem;
    let train = MilProblem {
        pos: split.train_pos.clone(),
        neg: split.train_neg.clone(),
        metarules: metarules.to_vec(),
        ..p.clone()
    };
    let start = Instant::now();
    let learned = top_program(&train, LearnOptions::for_problem(&train))?;
    let seconds = start.elapsed().as_secs_f64();
    let over_time = cfg.time_limit.is_some_and(|t| start.elapsed() > t);
    let over_budget = cfg.attempt_inferences.is_some_and(|b| learned.inferences > b);
    let failed = over_time || over_budget;
    let empty = Hypothesis::default();
    let h = if failed { &empty } else { &learned.hypothesis };
    let acc = accuracy(h, &p.bk, &split.test_pos, &split.test_neg, p.config)?;
    let baseline = accuracy(&empty, &p.bk, &split.test_pos, &split.test_neg, p.config)?;
    Ok(Attempt { accuracy: acc, baseline, inferences: learned.inferences, seconds, failed })
}

/// Metarules learned for a leg. TOIL sees the whole problem, as it is
/// trained before the examples are partitioned.
fn learn_metarules(cfg: &ExperimentConfig, leg: Leg, seed: u64) -> Result<Vec<Metarule>> {
    let input = match leg {
        Leg::NoReplacement => return Ok(Vec::new()),
        Leg::Toil2 => &cfg.matrix,
        Leg::Toil3 => &cfg.punch,
    };
    let problem = MilProblem { metarules: input.clone(), ..cfg.problem.clone() };
    let toil = ToilConfig { rng_seed: seed, ..cfg.toil.clone() };
    Ok(toil_learn(&problem, &toil)?.metarules)
}

fn union(a: &[Metarule], b: &[Metarule]) -> Vec<Metarule> {
    let mut keys = HashSet::new();
    a.iter().chain(b).filter(|m| keys.insert(canonical_key(&m.clause))).cloned().collect()
}

struct RunOutput {
    order: Vec<String>,
    /// Indexed by `[step][leg position]`: the accuracy and duration attempts.
    attempts: Vec<Vec<(Attempt, Attempt)>>,
    learned: Vec<(usize, Leg, Vec<String>)>,
}

/// Each run draws its own removal order. Splits are drawn per run and
/// attempt and shared by every leg and step, so that cells of one run
/// differ only in their metarules.
fn run_once(cfg: &ExperimentConfig, run: usize) -> Result<RunOutput> {
    let user = &cfg.problem.metarules;
    let mut order: Vec<usize> = (0..user.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[run as u64])));
    let names = order.iter().map(|&i| user[i].name.clone().unwrap_or_else(|| user[i].to_string())).collect();
    let splits: Vec<Split> = (0..2u64)
        .map(|a| split_examples(&cfg.problem, cfg.split, derive_seed(cfg.rng_seed, &[run as u64, a])))
        .collect();
    let mut replacements = Vec::new();
    for &leg in &cfg.legs {
        let toil_seed = derive_seed(cfg.rng_seed, &[run as u64, leg.index(), 99]);
        replacements.push(learn_metarules(cfg, leg, toil_seed)?);
    }
    let mut out = RunOutput { order: names, attempts: Vec::new(), learned: Vec::new() };
    for step in 1..=user.len() + 1 {
        let removed: HashSet<usize> = order[..step - 1].iter().copied().collect();
        let m1: Vec<Metarule> =
            user.iter().enumerate().filter(|(i, _)| !removed.contains(i)).map(|(_, m)| m.clone()).collect();
        let mut row = Vec::new();
        for (li, &leg) in cfg.legs.iter().enumerate() {
            let metarules = union(&m1, &replacements[li]);
            if leg != Leg::NoReplacement {
                let names = replacements[li].iter().filter_map(|m| m.name.clone()).collect();
                out.learned.push((step, leg, names));
            }
            let acc = attempt(cfg, &metarules, &splits[0])?;
            let dur = attempt(cfg, &metarules, &splits[1])?;
            row.push((acc, dur));
        }
        out.attempts.push(row);
    }
    Ok(out)
}

/// Runs the protocol for `|M| + 1` steps. Runs execute in parallel; the
/// result depends only on the configuration, apart from wall-clock times.
pub fn run_replacement_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let outputs: Vec<Result<RunOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.runs)
            .map(|r| {
                std::thread::Builder::new()
                    .stack_size(WORKER_STACK)
                    .spawn_scoped(s, move || run_once(cfg, r))
                    .expect("spawn experiment run")
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("experiment run panicked")).collect()
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut result = ExperimentResult { seed: cfg.rng_seed, ..ExperimentResult::default() };
    let steps = cfg.problem.metarules.len() + 1;
    for step in 1..=steps {
        for (li, &leg) in cfg.legs.iter().enumerate() {
            let pick = |f: &dyn Fn(&(Attempt, Attempt)) -> f64| -> Stat {
                Stat::of(&outputs.iter().map(|o| f(&o.attempts[step - 1][li])).collect::<Vec<_>>())
            };
            result.cells.push(Cell {
                step,
                leg,
                accuracy: pick(&|a| a.0.accuracy),
                inferences: pick(&|a| a.1.inferences as f64),
                seconds: pick(&|a| a.1.seconds),
                baseline: pick(&|a| a.0.baseline),
                failures: outputs.iter().map(|o| &o.attempts[step - 1][li]).filter(|a| a.0.failed || a.1.failed).count(),
            });
        }
    }
    for (run, o) in outputs.into_iter().enumerate() {
        result.removal_orders.push(o.order);
        result.learned.extend(o.learned.into_iter().map(|(s, l, n)| (run, s, l, n)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{canonical_h22, gen_anbn};

    #[test]
    fn stats() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[4.0]).stderr, 0.0);
    }

    #[test]
    fn seeds_differ_by_part() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(5, &[2]), derive_seed(5, &[2]));
    }

    #[test]
    fn last_step_of_the_first_leg_is_the_baseline() {
        let mut p = gen_anbn(4).unwrap();
        p.metarules = canonical_h22()[..3].to_vec();
        let cfg = ExperimentConfig { runs: 2, legs: vec![Leg::NoReplacement], ..ExperimentConfig::new(p) };
        let r = run_replacement_experiment(&cfg).unwrap();
        assert_eq!(r.steps(), 4);
        let last = r.cell(4, Leg::NoReplacement).unwrap();
        assert_eq!(last.accuracy, last.baseline);
        assert_eq!(last.inferences.mean, 0.0);
        assert!(r.to_csv().starts_with("step,leg,metric,mean,stderr\n1,no_replacement,accuracy,"));
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Like `println!`, but a closed pipe is an error rather than a panic.
macro_rules! out {
    ($($t:tt)*) => {
        writeln!(std::io::stdout().lock(), $($t)*)
    };
}

use mil_core::experiment::{run_replacement_experiment, ExperimentConfig, Leg};
use mil_core::languages::{
    decimal, enumerate_punch, enumerate_sort, language_bound, matrix_bound, matrix_count_exact, metasub_bound,
    punch_count, sort_bound, ground_bound, CountParams, SortOptions,
};
use mil_core::learner::{top_program, ExampleStatus, LearnOptions};
use mil_core::logic::{classify, fully_connected, prettify, Taxon};
use mil_core::problems::{
    gen_analogy_problems, gen_anbn, gen_coloured_graph, gen_grid_world, library_metarule, matrix_h22, parse_problem,
    punch_upto, serialize_problem, MilProblem, Noise,
};
use mil_core::toil::{toil_learn, ToilConfig};

/// Proof search recurses once per resolution step.
const STACK: usize = 512 << 20;

#[derive(Parser)]
#[command(name = "mil", version, about = "Meta-interpretive learning of programs and metarules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a hypothesis with the problem's metarules.
    Learn {
        problem: PathBuf,
        /// Disable predicate invention and dynamic learning.
        #[arg(long)]
        no_invention: bool,
    },
    /// Learn sort metarules from punch or matrix metarules.
    LearnMetarules(LearnMetarules),
    /// Counting results for the given parameters.
    Bounds {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        a: u32,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        p: u32,
        #[arg(long)]
        c: u32,
    },
    /// List punch metarules up to a length, or the sort metarules of a
    /// matrix metarule.
    Enumerate {
        #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
        punch: Option<u32>,
        #[arg(long)]
        matrix: Option<String>,
        #[arg(long)]
        fully_connected: bool,
    },
    /// Write a generated problem.
    Gen(Gen),
    /// Run the metarule replacement experiment described by a JSON file.
    Experiment {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate a problem file and report on its metarules.
    Check { problem: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Matrix,
    Punch,
}

#[derive(Args)]
struct LearnMetarules {
    problem: PathBuf,
    /// Input metarules. Defaults to those of the problem file, or to
    /// Meta-monadic and Meta-dyadic if it has none.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    max_spec: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sample: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cover_set: bool,
}

#[derive(Args)]
struct Gen {
    #[arg(value_enum)]
    dataset: Dataset,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    colours: usize,
    #[arg(long, default_value = "none")]
    noise: String,
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    height: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Dataset {
    Anbn,
    ColouredGraph,
    GridWorld,
    Parents,
    BoundedBy,
}

fn generate(g: &Gen) -> anyhow::Result<MilProblem> {
    Ok(match g.dataset {
        Dataset::Anbn => gen_anbn(g.n)?,
        Dataset::ColouredGraph => gen_coloured_graph(g.nodes, g.colours, g.noise.parse::<Noise>()?, g.rate, g.seed)?,
        Dataset::GridWorld => gen_grid_world(g.width, g.height)?,
        Dataset::Parents => gen_analogy_problems().0,
        Dataset::BoundedBy => gen_analogy_problems().1,
    })
}

fn read_problem(path: &Path) -> anyhow::Result<MilProblem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p = parse_problem(&text)?;
    p.validate()?;
    Ok(p)
}

fn write_out(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn learn(path: &Path, no_invention: bool) -> anyhow::Result<()> {
    let p = read_problem(path)?;
    let mut opts = LearnOptions::for_problem(&p);
    if no_invention {
        opts.invention = false;
        opts.dynamic_learning = false;
    }
    let tp = top_program(&p, opts)?;
    for inst in &tp.hypothesis.clauses {
        let name = inst.metarule.name.clone().unwrap_or_else(|| inst.metarule.clause.arrow());
        out!("{}\t% {}", prettify(&inst.clause).arrow(), name)?;
    }
    for c in &tp.removed {
        out!("% removed by a negative example: {}", prettify(c).arrow())?;
    }
    for (e, s) in p.pos.iter().zip(&tp.status) {
        let s = match s {
            ExampleStatus::Learned(n) => format!("proved, {n} new clauses"),
            ExampleStatus::Unlearned => "no derivation".into(),
            ExampleStatus::Budget => "budget exhausted".into(),
            ExampleStatus::InventionDepthExceeded => "invention pool exhausted".into(),
        };
        out!("% {e}: {s}")?;
    }
    out!("% inferences: {}", tp.inferences)?;
    Ok(())
}

fn learn_metarules(a: &LearnMetarules) -> anyhow::Result<()> {
    let mut p = read_problem(&a.problem)?;
    match a.mode {
        Some(Mode::Matrix) => p.metarules = matrix_h22(),
        Some(Mode::Punch) => p.metarules = punch_upto(3),
        None if p.metarules.is_empty() => p.metarules = matrix_h22(),
        None => {}
    }
    let mut cfg = ToilConfig { sample_rate: a.sample, rng_seed: a.seed, cover_set: a.cover_set, ..ToilConfig::default() };
    if let Some(n) = a.max_spec {
        cfg.max_specialisations = n;
    }
    let r = toil_learn(&p, &cfg)?;
    for m in &r.metarules {
        out!("{m}")?;
    }
    Ok(())
}

fn bounds(params: CountParams) -> anyhow::Result<()> {
    params.validate()?;
    let CountParams { k, a, n, p, c } = params;
    out!("punch metarules: {}", punch_count(k))?;
    out!("matrix metarules (exact): {}", matrix_count_exact(k, a))?;
    out!("matrix metarules (bound): {}", decimal(&matrix_bound(k, a), 3))?;
    out!("sort metarules per literal (bound): {}", decimal(&sort_bound(n), 3))?;
    out!("metasubstitutions (bound): {}", metasub_bound(p, c, k, n))?;
    out!("ground substitutions (bound): {}", ground_bound(c, n))?;
    out!("language (bound): {}", decimal(&language_bound(params)?, 3))?;
    Ok(())
}

fn enumerate(punch: Option<u32>, matrix: Option<&str>, fc: bool) -> anyhow::Result<()> {
    let ms = match (punch, matrix) {
        (Some(k), _) => enumerate_punch(k)?,
        (None, Some(name)) => {
            let m = library_metarule(name)?;
            if m.taxon != Taxon::Matrix {
                bail!("`{name}` is a {} metarule, not a matrix metarule", m.taxon);
            }
            enumerate_sort(&m, SortOptions { fully_connected_only: fc, ..SortOptions::default() })?
        }
        (None, None) => bail!("one of --punch or --matrix is required"),
    };
    for m in &ms {
        out!("{m}")?;
    }
    Ok(())
}

/// The JSON experiment description. The problem is either a file, read
/// relative to the configuration, or a generator call.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    problem: Option<PathBuf>,
    generate: Option<GenSpec>,
    /// Names of library metarules replacing those of the problem.
    metarules: Option<Vec<String>>,
    runs: Option<usize>,
    split: Option<f64>,
    legs: Option<Vec<String>>,
    punch_length: Option<usize>,
    toil_sample: Option<f64>,
    max_specialisations: Option<usize>,
    cover_set: Option<bool>,
    attempt_inferences: Option<u64>,
    time_limit_secs: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenSpec {
    dataset: Dataset,
    n: Option<usize>,
    nodes: Option<usize>,
    colours: Option<usize>,
    noise: Option<String>,
    rate: Option<f64>,
    seed: Option<u64>,
    width: Option<usize>,
    height: Option<usize>,
}

fn experiment_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let f: ExperimentFile = serde_json::from_str(&text).context("parsing the experiment configuration")?;
    let mut problem = match (&f.problem, &f.generate) {
        (Some(p), None) => read_problem(&path.parent().unwrap_or(Path::new(".")).join(p))?,
        (None, Some(g)) => generate(&Gen {
            dataset: g.dataset,
            n: g.n.unwrap_or(3),
            nodes: g.nodes.unwrap_or(6),
            colours: g.colours.unwrap_or(2),
            noise: g.noise.clone().unwrap_or_else(|| "none".into()),
            rate: g.rate.unwrap_or(0.0),
            seed: g.seed.unwrap_or(0),
            width: g.width.unwrap_or(3),
            height: g.height.unwrap_or(3),
            output: None,
        })?,
        _ => bail!("give exactly one of `problem` and `generate`"),
    };
    if let Some(names) = &f.metarules {
        problem.metarules = names.iter().map(|n| library_metarule(n)).collect::<Result<_, _>>()?;
    }
    let mut cfg = ExperimentConfig::new(problem);
    if let Some(r) = f.runs {
        cfg.runs = r;
    }
    if let Some(s) = f.split {
        cfg.split = s;
    }
    if let Some(legs) = &f.legs {
        cfg.legs = legs.iter().map(|l| l.parse::<Leg>()).collect::<Result<_, _>>()?;
    }
    if let Some(k) = f.punch_length {
        cfg.punch = punch_upto(k);
    }
    if let Some(s) = f.toil_sample {
        cfg.toil.sample_rate = s;
    }
    if let Some(m) = f.max_specialisations {
        cfg.toil.max_specialisations = m;
    }
    if let Some(c) = f.cover_set {
        cfg.toil.cover_set = c;
    }
    cfg.attempt_inferences = f.attempt_inferences;
    cfg.time_limit = f.time_limit_secs.map(Duration::from_secs_f64);
    cfg.rng_seed = f.seed.unwrap_or(0);
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(config: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let cfg = experiment_config(config)?;
    let r = run_replacement_experiment(&cfg)?;
    write_out(output, &r.to_csv())?;
    for (run, order) in r.removal_orders.iter().enumerate() {
        eprintln!("run {run}: removal order {}", order.join(", "));
    }
    Ok(())
}

fn check(path: &Path) -> anyhow::Result<()> {
    let p = read_problem(path)?;
    let metarules: Vec<serde_json::Value> = p
        .metarules
        .iter()
        .map(|m| {
            Ok(serde_json::json!({
                "metarule": m.to_string(),
                "taxon": classify(&m.clause)?.to_string(),
                "fully_connected": fully_connected(&m.clause)?,
            }))
        })
        .collect::<mil_core::Result<_>>()?;
    let report = serde_json::json!({
        "ok": true,
        "positives": p.pos.len(),
        "negatives": p.neg.len(),
        "background": p.bk.len(),
        "invented": p.invented,
        "max_depth": p.config.max_depth,
        "max_inferences": p.config.max_inferences,
        "metarules": metarules,
    });
    out!("{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Learn { problem, no_invention } => learn(&problem, no_invention),
        Command::LearnMetarules(a) => learn_metarules(&a),
        Command::Bounds { k, a, n, p, c } => bounds(CountParams { k, a, n, p, c }),
        Command::Enumerate { punch, matrix, fully_connected } => enumerate(punch, matrix.as_deref(), fully_connected),
        Command::Gen(g) => write_out(g.output.as_deref(), &serialize_problem(&generate(&g)?)),
        Command::Experiment { config, output } => experiment(&config, output.as_deref()),
        Command::Check { problem } => check(&problem),
    }
}

/// The variant name of a core error, or a generic kind.
fn error_kind(e: &anyhow::Error) -> String {
    match e.downcast_ref::<mil_core::Error>() {
        Some(core) => {
            let dbg = format!("{core:?}");
            dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
        }
        None if e.downcast_ref::<serde_json::Error>().is_some() => "Config".into(),
        None if e.downcast_ref::<std::io::Error>().is_some() => "Io".into(),
        None => "Error".into(),
    }
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("Usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    let worker = std::thread::Builder::new().stack_size(STACK).spawn(move || run(cli)).expect("spawn worker");
    match worker.join().expect("worker panicked") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            report(&error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

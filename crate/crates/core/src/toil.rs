//! Metarule learning: specialise punch or matrix metarules against the
//! examples and lift the ground instances back into sort metarules.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::{construct, LearnOptions};
use crate::logic::{
    apply, arg_var_name, canonical_key, fully_connected, pred_var_name, prettify, Atom, Clause, MetaSubstitution,
    Metarule, Order, Quantifier, Substitution, Taxon, Term, Value, Var,
};
use crate::problems::{library_name, MilProblem};
use crate::resolution::{push_goals, Flow, Program, ProofConfig, Solver};

/// Constants seen so far with the number of first-order variables each one
/// substitutes. Changes are trailed so they can be undone on backtracking.
#[derive(Clone, Debug, Default)]
pub struct SubstitutionBuffer {
    entries: Vec<(Term, usize)>,
    trail: Vec<usize>,
}

impl SubstitutionBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: &Term) {
        let i = match self.entries.iter().position(|(c, _)| c == t) {
            Some(i) => i,
            None => {
                self.entries.push((t.clone(), 0));
                self.entries.len() - 1
            }
        };
        self.entries[i].1 += 1;
        self.trail.push(i);
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let i = self.trail.pop().expect("trail entry");
            self.entries[i].1 -= 1;
            if self.entries[i].1 == 0 {
                // Entries are created in trail order, so this is the last one.
                debug_assert_eq!(i, self.entries.len() - 1);
                self.entries.pop();
            }
        }
    }

    pub fn count(&self, t: &Term) -> usize {
        self.entries.iter().find(|(c, _)| c == t).map_or(0, |e| e.1)
    }

    /// Constants in first-seen order.
    pub fn constants(&self) -> impl Iterator<Item = &Term> {
        self.entries.iter().map(|(c, _)| c)
    }

    pub fn entries(&self) -> &[(Term, usize)] {
        &self.entries
    }

    pub fn singletons(&self) -> usize {
        self.entries.iter().filter(|e| e.1 == 1).count()
    }
}

/// True if every constant seen only once can still be connected through
/// one of the `free` first-order variables left in the instance.
pub fn look_ahead(free: usize, buffer: &SubstitutionBuffer) -> bool {
    buffer.singletons() <= free
}

/// Replaces ground values by fresh variables. Variables bound to the same
/// constant share one fresh variable. Predicate symbols get one fresh
/// variable per bound variable unless `per_symbol` is set, in which case
/// identical symbols share one.
pub fn lift_with(vars: &[Var], ms: &MetaSubstitution, per_symbol: bool) -> Result<MetaSubstitution> {
    if !ms.is_ground() {
        return Err(Error::NonGround(ms.to_string()));
    }
    let mut out = MetaSubstitution::new();
    let mut terms: HashMap<(Term, Quantifier), Var> = HashMap::new();
    let mut symbols: HashMap<Term, Var> = HashMap::new();
    let mut used: HashSet<String> = HashSet::new();
    let mut fresh = |base: &Var| -> Var {
        let mut i = 1;
        loop {
            let name = format!("{}{}", base.name, i);
            if used.insert(name.clone()) {
                return Var::new(&name, base.order, base.quant);
            }
            i += 1;
        }
    };
    for v in vars {
        let Some(val) = ms.get(v) else { continue };
        let lifted = match (v.order, val) {
            (Order::Second, Value::Term(t)) => {
                let base = Var::new(&v.name, Order::Second, Quantifier::Existential);
                if per_symbol {
                    symbols.entry(t.clone()).or_insert_with(|| fresh(&base)).clone()
                } else {
                    fresh(&base)
                }
            }
            (Order::First, Value::Term(t)) => {
                terms.entry((t.clone(), v.quant)).or_insert_with(|| fresh(v)).clone()
            }
            _ => return Err(Error::Type(format!("cannot lift {v}/{val}"))),
        };
        let value = match lifted.order {
            Order::Third => Value::Atom(Atom::Var(lifted)),
            _ => Value::Term(Term::Var(lifted)),
        };
        out.insert(v.clone(), value);
    }
    Ok(out)
}

/// Lifts in the substitution's own variable order, with predicate symbols
/// shared as in the algorithm's literal form.
pub fn lift(ms: &MetaSubstitution) -> Result<MetaSubstitution> {
    let vars: Vec<Var> = ms.iter().map(|(v, _)| v.clone()).collect();
    lift_with(&vars, ms, true)
}

#[derive(Clone, Debug)]
pub struct ToilConfig {
    pub sample_rate: f64,
    /// Distinct specialisations kept per example and input metarule.
    pub max_specialisations: usize,
    pub cover_set: bool,
    pub rng_seed: u64,
    pub look_ahead: bool,
    /// Share one predicate variable between literals with the same symbol.
    pub per_symbol_lift: bool,
}

impl Default for ToilConfig {
    fn default() -> Self {
        ToilConfig {
            sample_rate: 1.0,
            max_specialisations: 1,
            cover_set: false,
            rng_seed: 0,
            look_ahead: true,
            per_symbol_lift: false,
        }
    }
}

impl ToilConfig {
    pub fn generous() -> Self {
        ToilConfig { max_specialisations: usize::MAX, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!("sample rate {} is not in (0, 1]", self.sample_rate)));
        }
        if self.max_specialisations == 0 {
            return Err(Error::InvalidParameter("max_specialisations must be at least 1".into()));
        }
        Ok(())
    }
}

/// One specialisation step: input `M`, ground `ϑΘ`, output `M'` and the
/// ground instance `G = apply(M, ϑΘ)`.
#[derive(Clone, Debug)]
pub struct Specialisation {
    pub example: Atom,
    pub input: Metarule,
    pub subst: MetaSubstitution,
    pub output: Metarule,
    pub ground: Clause,
}

/// Atoms `P(x1..xn)` of fresh variables, one per arity used by a clause
/// head in `b_star`, in ascending arity.
pub fn matrix_atoms(punch: &Metarule, b_star: &Program) -> Result<Vec<Atom>> {
    if punch.taxon != Taxon::Punch {
        return Err(Error::WrongTaxon { expected: "punch".into(), found: punch.taxon.to_string() });
    }
    let arities: BTreeSet<usize> = b_star.signatures().into_iter().map(|(_, n)| n).filter(|&n| n > 0).collect();
    Ok(arities
        .into_iter()
        .map(|n| Atom::app(Term::Var(Var::predicate("P")), (0..n).map(|i| Term::Var(Var::universal(&arg_var_name(i)))).collect()))
        .collect())
}

/// Ground answers to single-literal queries, memoised.
struct Oracle<'p> {
    program: &'p Program,
    cfg: ProofConfig,
    memo: HashMap<String, Arc<Vec<Atom>>>,
    inferences: u64,
}

impl<'p> Oracle<'p> {
    fn answers(&mut self, query: &Atom) -> Arc<Vec<Atom>> {
        let key = query.to_string();
        if let Some(a) = self.memo.get(&key) {
            return a.clone();
        }
        let mut s = Solver::new(self.program, self.cfg);
        let mut out: Vec<Atom> = Vec::new();
        s.solve(push_goals(std::slice::from_ref(query), 0, None), &mut |s| {
            let a = s.bindings.resolve_atom(query);
            if a.is_ground() && !out.contains(&a) {
                out.push(a);
            }
            Flow::Continue
        });
        self.inferences += s.inferences;
        let out = Arc::new(out);
        self.memo.insert(key, out.clone());
        out
    }
}

/// A matrix-shaped clause to be grounded, and how to report it.
struct Shape {
    clause: Clause,
    look_ahead: bool,
}

struct Search<'a, 'p> {
    oracle: &'a mut Oracle<'p>,
}

impl Search<'_, '_> {
    /// Grounds the body of `shape` literal by literal. `k` receives the
    /// ground substitution and returns false to stop.
    fn ground(
        &mut self,
        shape: &Shape,
        i: usize,
        ms: &mut MetaSubstitution,
        buf: &mut SubstitutionBuffer,
        k: &mut dyn FnMut(&MetaSubstitution, &Clause) -> bool,
    ) -> bool {
        let body = &shape.clause.body;
        if i == body.len() {
            if buf.entries().iter().any(|e| e.1 == 1) {
                return true;
            }
            let Ok(g) = apply(&shape.clause, ms) else { return true };
            // An example proving itself through E⁺ alone teaches nothing.
            if g.body == [g.head.clone()] || !fully_connected(&g).unwrap_or(false) {
                return true;
            }
            return k(ms, &g);
        }
        let lit = &body[i];
        let Atom::App { pred, args } = lit else { return true };
        let pred_var = pred.as_var().cloned();
        // Options per argument: a buffer constant or left free.
        let consts: Vec<Term> = buf.constants().cloned().collect();
        let mut options: Vec<Vec<Option<Term>>> = Vec::new();
        for a in args {
            match a {
                Term::Var(v) => match ms.get(v) {
                    Some(Value::Term(t)) => options.push(vec![Some(t.clone())]),
                    _ => options.push(consts.iter().cloned().map(Some).chain([None]).collect()),
                },
                t => options.push(vec![Some(t.clone())]),
            }
        }
        let mut seen: Vec<Atom> = Vec::new();
        let mut choice = vec![0usize; args.len()];
        loop {
            let picked: Vec<&Option<Term>> = choice.iter().zip(&options).map(|(&c, o)| &o[c]).collect();
            if args.is_empty() || picked.iter().any(|p| p.is_some()) {
                let query_pred = match &pred_var {
                    Some(v) => match ms.get(v) {
                        Some(Value::Term(t)) => t.clone(),
                        _ => Term::Var(Var::predicate("Q")),
                    },
                    None => pred.clone(),
                };
                let qargs = picked
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (*p).clone().unwrap_or_else(|| Term::Var(Var::universal(&format!("_{j}")))))
                    .collect();
                let query = Atom::app(query_pred, qargs);
                for ans in self.oracle.answers(&query).iter() {
                    if seen.contains(ans) {
                        continue;
                    }
                    seen.push(ans.clone());
                    if !self.extend(shape, i, lit, ans, ms, buf, k) {
                        return false;
                    }
                }
            }
            // Next combination, last argument fastest.
            let mut j = args.len();
            loop {
                if j == 0 {
                    return true;
                }
                j -= 1;
                choice[j] += 1;
                if choice[j] < options[j].len() {
                    break;
                }
                choice[j] = 0;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &mut self,
        shape: &Shape,
        i: usize,
        lit: &Atom,
        ans: &Atom,
        ms: &mut MetaSubstitution,
        buf: &mut SubstitutionBuffer,
        k: &mut dyn FnMut(&MetaSubstitution, &Clause) -> bool,
    ) -> bool {
        let saved = ms.clone();
        let mark = buf.mark();
        if let (Some(Term::Var(v)), Some(sym)) = (lit.pred(), ans.pred()) {
            ms.insert(v.clone(), Value::Term(sym.clone()));
        }
        let mut ok = true;
        for (a, t) in lit.args().iter().zip(ans.args()) {
            if let Term::Var(v) = a {
                match ms.get(v) {
                    Some(Value::Term(old)) if old != t => ok = false,
                    Some(_) => {}
                    None => ms.insert(v.clone(), Value::Term(t.clone())),
                }
            }
            buf.add(t);
        }
        let mut go = true;
        if ok {
            let free = free_vars(&shape.clause.body[i + 1..], ms);
            if !shape.look_ahead || look_ahead(free, buf) {
                go = self.ground(shape, i + 1, ms, buf, k);
            }
        }
        buf.undo(mark);
        *ms = saved;
        go
    }
}

fn free_vars(atoms: &[Atom], ms: &MetaSubstitution) -> usize {
    let mut vs: Vec<Var> = Vec::new();
    for a in atoms {
        for v in a.vars() {
            if v.order == Order::First && ms.get(&v).is_none() && !vs.contains(&v) {
                vs.push(v);
            }
        }
    }
    vs.len()
}

/// Binds the head of `shape` to `e`, seeding the buffer.
fn seed_head(shape: &Clause, e: &Atom, ms: &mut MetaSubstitution, buf: &mut SubstitutionBuffer) -> bool {
    let (Atom::App { pred, args }, Some(sym)) = (&shape.head, e.pred()) else { return false };
    if args.len() != e.args().len() {
        return false;
    }
    match pred {
        Term::Var(v) => ms.insert(v.clone(), Value::Term(sym.clone())),
        t if t != sym => return false,
        _ => {}
    }
    for (a, t) in args.iter().zip(e.args()) {
        match a {
            Term::Var(v) => match ms.get(v) {
                Some(Value::Term(old)) if old != t => return false,
                Some(_) => {}
                None => ms.insert(v.clone(), Value::Term(t.clone())),
            },
            c if c != t => return false,
            _ => {}
        }
        buf.add(t);
    }
    true
}

/// Matrix shapes for a punch metarule: the head takes the example's arity
/// and each body literal one of the `matrix_atoms` arities.
fn punch_shapes(punch: &Metarule, head_arity: usize, atoms: &[Atom]) -> Vec<Clause> {
    let arities: Vec<usize> = atoms.iter().filter_map(Atom::arity).collect();
    let n = punch.clause.body.len();
    if arities.is_empty() && n > 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        let mut x = 0;
        let mut lit = |p: usize, arity: usize| {
            let args = (0..arity)
                .map(|_| {
                    x += 1;
                    Term::Var(Var::universal(&arg_var_name(x - 1)))
                })
                .collect();
            Atom::app(Term::Var(Var::predicate(&pred_var_name(p))), args)
        };
        let head = lit(0, head_arity);
        let body = choice.iter().enumerate().map(|(i, &c)| lit(i + 1, arities[c])).collect();
        out.push(Clause::new(head, body));
        let mut j = n;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            choice[j] += 1;
            if choice[j] < arities.len() {
                break;
            }
            choice[j] = 0;
        }
    }
}

/// Streams the specialisations of each input metarule that prove `e`.
/// `k` returns false to stop. Outputs are not deduplicated here.
pub fn vl_specialise_with(
    e: &Atom,
    b_star: &Program,
    metarules: &[Metarule],
    cfg: &ToilConfig,
    proof: ProofConfig,
    k: &mut dyn FnMut(Specialisation) -> bool,
) -> Result<u64> {
    let mut oracle = Oracle { program: b_star, cfg: proof, memo: HashMap::new(), inferences: 0 };
    for m in metarules {
        if !specialise_one(e, m, &mut oracle, cfg, k)? {
            break;
        }
    }
    Ok(oracle.inferences)
}

fn specialise_one(
    e: &Atom,
    m: &Metarule,
    oracle: &mut Oracle<'_>,
    cfg: &ToilConfig,
    k: &mut dyn FnMut(Specialisation) -> bool,
) -> Result<bool> {
    let (shapes, look) = match m.taxon {
        Taxon::Matrix => (vec![m.clause.clone()], cfg.look_ahead),
        Taxon::Punch => {
            let atoms = matrix_atoms(m, oracle.program)?;
            (punch_shapes(m, e.args().len(), &atoms), false)
        }
        _ => return Ok(true),
    };
    for clause in shapes {
        let shape = Shape { clause, look_ahead: look };
        let vars = shape.clause.vars();
        let mut ms = MetaSubstitution::new();
        let mut buf = SubstitutionBuffer::new();
        if !seed_head(&shape.clause, e, &mut ms, &mut buf) {
            continue;
        }
        let mut err = None;
        let per_symbol = cfg.per_symbol_lift;
        let mut search = Search { oracle };
        let go = search.ground(&shape, 0, &mut ms, &mut buf, &mut |ms, g| {
            let lifted = match lift_with(&vars, ms, per_symbol) {
                Ok(l) => l,
                Err(e) => {
                    err = Some(e);
                    return false;
                }
            };
            let out = apply(&shape.clause, &lifted).and_then(|c| Metarule::new(None, prettify(&c)));
            let output = match out {
                Ok(o) => o,
                Err(e) => {
                    err = Some(e);
                    return false;
                }
            };
            let subst = match m.taxon {
                Taxon::Punch => {
                    let mut s = MetaSubstitution::new();
                    for (v, a) in m.clause.atoms().zip(g.atoms()) {
                        if let Atom::Var(v) = v {
                            s.insert(v.clone(), Value::Atom(a.clone()));
                        }
                    }
                    s
                }
                _ => ms.clone(),
            };
            k(Specialisation { example: e.clone(), input: m.clone(), subst, output, ground: g.clone() })
        });
        if let Some(e) = err {
            return Err(e);
        }
        if !go {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Distinct specialisations (by output) of each input metarule, at most
/// `cfg.max_specialisations` per input.
pub fn vl_specialise(
    e: &Atom,
    b_star: &Program,
    metarules: &[Metarule],
    cfg: &ToilConfig,
    proof: ProofConfig,
) -> Result<Vec<Specialisation>> {
    let mut out = Vec::new();
    for m in metarules {
        let mut keys = HashSet::new();
        vl_specialise_with(e, b_star, std::slice::from_ref(m), cfg, proof, &mut |s| {
            if keys.insert(canonical_key(&s.output.clause)) {
                out.push(s);
            }
            keys.len() < cfg.max_specialisations
        })?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct ToilResult {
    pub metarules: Vec<Metarule>,
    /// Every specialisation kept, in order.
    pub log: Vec<Specialisation>,
    /// Indices into `E⁺` of the sampled examples.
    pub sample: Vec<usize>,
    pub inferences: u64,
}

/// Names outputs after the library where possible, else `M1, M2, ..`.
fn name_outputs(ms: &mut [Metarule]) {
    let mut fresh = 0;
    for m in ms {
        m.name = Some(library_name(m).unwrap_or_else(|| {
            fresh += 1;
            format!("M{fresh}")
        }));
    }
}

/// Learns sort metarules from a problem whose metarules are punch or
/// matrix metarules.
pub fn toil_learn(problem: &MilProblem, cfg: &ToilConfig) -> Result<ToilResult> {
    cfg.validate()?;
    if let Some(m) = problem.metarules.iter().find(|m| !matches!(m.taxon, Taxon::Punch | Taxon::Matrix)) {
        return Err(Error::WrongTaxon { expected: "punch or matrix".into(), found: m.taxon.to_string() });
    }
    let b_star = Program::from_clauses(problem.b_star());
    let n = problem.pos.len();
    let mut sampled: Vec<usize> = if cfg.sample_rate >= 1.0 {
        (0..n).collect()
    } else {
        let size = ((cfg.sample_rate * n as f64).round() as usize).clamp(usize::from(n > 0), n);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        sample(&mut rng, n, size).into_vec()
    };
    sampled.sort_unstable();
    let mut result = ToilResult { sample: sampled.clone(), ..ToilResult::default() };
    let mut keys = HashSet::new();
    let mut queue: Vec<usize> = sampled;
    let mut next = 0;
    while next < queue.len() {
        let e = &problem.pos[queue[next]];
        next += 1;
        for m in &problem.metarules {
            let mut local = HashSet::new();
            let mut fresh = Vec::new();
            result.inferences += vl_specialise_with(e, &b_star, std::slice::from_ref(m), cfg, problem.config, &mut |s| {
                let key = canonical_key(&s.output.clause);
                if local.insert(key.clone()) {
                    if keys.insert(key) {
                        fresh.push(s.output.clone());
                    }
                    result.log.push(s);
                }
                local.len() < cfg.max_specialisations
            })?;
            for learned in fresh {
                if cfg.cover_set {
                    let opts = LearnOptions { invention: false, dynamic_learning: false, keep_tautologies: true };
                    let rest = queue.split_off(next);
                    for i in rest {
                        let c = construct(
                            &problem.pos[i],
                            &b_star,
                            &[],
                            std::slice::from_ref(&learned),
                            &[],
                            &Substitution::new(),
                            problem.config,
                            opts,
                        )?;
                        result.inferences += c.inferences;
                        if c.derivations.is_empty() {
                            queue.push(i);
                        }
                    }
                }
                result.metarules.push(learned);
            }
        }
    }
    name_outputs(&mut result.metarules);
    Ok(result)
}

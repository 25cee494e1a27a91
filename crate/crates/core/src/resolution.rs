//! Unification and depth-bounded SLD resolution.
//!
//! Second-order variables in predicate position unify with symbols, which
//! is resolution over the encapsulated form without building `m/n` atoms.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Literal, Name, Substitution, Term, Value, Var};

/// Environment variable overriding the default inference budget.
pub const BUDGET_ENV: &str = "MIL_MAX_INFERENCES";
pub const DEFAULT_MAX_DEPTH: usize = 32;
pub const DEFAULT_MAX_INFERENCES: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProofConfig {
    /// Longest chain of resolution steps from the query to any subgoal.
    pub max_depth: usize,
    /// Clause-head unification attempts allowed per query.
    pub max_inferences: u64,
    pub occurs_check: bool,
}

impl Default for ProofConfig {
    fn default() -> Self {
        let max_inferences = std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(DEFAULT_MAX_INFERENCES);
        ProofConfig { max_depth: DEFAULT_MAX_DEPTH, max_inferences, occurs_check: true }
    }
}

impl ProofConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
        }
        if self.max_inferences < self.max_depth as u64 {
            return Err(Error::InvalidParameter("max_inferences must be at least max_depth".into()));
        }
        Ok(())
    }
}

/// Triangular bindings with an undo trail.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    map: HashMap<Var, Value>,
    trail: Vec<Var>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_substitution(s: &Substitution) -> Self {
        let mut b = Bindings::new();
        for (k, v) in s {
            b.bind(k.clone(), v.clone());
        }
        b
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail entry");
            self.map.remove(&v);
        }
    }

    pub fn bind(&mut self, var: Var, value: Value) {
        self.trail.push(var.clone());
        self.map.insert(var, value);
    }

    pub fn get(&self, var: &Var) -> Option<&Value> {
        self.map.get(var)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Dereferences a term one variable chain deep.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.map.get(v) {
                Some(Value::Term(next)) => t = next,
                _ => break,
            }
        }
        t
    }

    pub fn resolve_term(&self, t: &Term) -> Term {
        match self.walk(t) {
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| self.resolve_term(a)).collect())
            }
            other => other.clone(),
        }
    }

    fn walk_atom<'a>(&'a self, mut a: &'a Atom) -> &'a Atom {
        while let Atom::Var(v) = a {
            match self.map.get(v) {
                Some(Value::Atom(next)) => a = next,
                _ => break,
            }
        }
        a
    }

    pub fn resolve_atom(&self, a: &Atom) -> Atom {
        match self.walk_atom(a) {
            Atom::App { pred, args } => Atom::App {
                pred: self.resolve_term(pred),
                args: args.iter().map(|t| self.resolve_term(t)).collect(),
            },
            v => v.clone(),
        }
    }

    pub fn resolve_value(&self, v: &Value) -> Value {
        match v {
            Value::Term(t) => Value::Term(self.resolve_term(t)),
            Value::Atom(a) => Value::Atom(self.resolve_atom(a)),
        }
    }

    fn occurs(&self, v: &Var, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => w == v,
            Term::Const(_) => false,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(v, a)),
        }
    }

    /// Extends the bindings to a most general unifier of `a` and `b`. On
    /// failure the bindings are left partially extended; callers undo to a
    /// mark.
    pub fn unify_terms(&mut self, a: &Term, b: &Term, occurs_check: bool) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), _) => {
                if occurs_check && self.occurs(x, &b) {
                    return false;
                }
                self.bind(x.clone(), Value::Term(b));
                true
            }
            (_, Term::Var(y)) => {
                if occurs_check && self.occurs(y, &a) {
                    return false;
                }
                self.bind(y.clone(), Value::Term(a));
                true
            }
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify_terms(x, y, occurs_check))
            }
            _ => false,
        }
    }

    pub fn unify_atoms(&mut self, a: &Atom, b: &Atom, occurs_check: bool) -> bool {
        let a = self.walk_atom(a).clone();
        let b = self.walk_atom(b).clone();
        match (&a, &b) {
            (Atom::Var(x), Atom::Var(y)) if x == y => true,
            (Atom::Var(x), _) => {
                self.bind(x.clone(), Value::Atom(b));
                true
            }
            (_, Atom::Var(y)) => {
                self.bind(y.clone(), Value::Atom(a));
                true
            }
            (Atom::App { pred: p, args: xs }, Atom::App { pred: q, args: ys }) => {
                xs.len() == ys.len()
                    && self.unify_terms(p, q, occurs_check)
                    && xs.iter().zip(ys).all(|(x, y)| self.unify_terms(x, y, occurs_check))
            }
        }
    }

    /// Fully dereferenced bindings for the given variables.
    pub fn project(&self, vars: &[Var]) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if let Some(val) = self.map.get(v) {
                out.insert(v.clone(), self.resolve_value(val));
            }
        }
        out
    }

    pub fn triangular(&self) -> Substitution {
        self.map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    /// Every binding, fully dereferenced.
    pub fn to_substitution(&self) -> Substitution {
        self.map.iter().map(|(k, v)| (k.clone(), self.resolve_value(v))).collect()
    }
}

/// Two terms or two atoms.
#[derive(Clone, Debug)]
pub enum Unifiable {
    Term(Term),
    Atom(Atom),
}

/// Functional MGU: returns the idempotent extension of `base`, or `None`.
/// Without the occurs check the result may be cyclic, so it is returned in
/// triangular form.
pub fn unify(a: &Unifiable, b: &Unifiable, base: &Substitution, occurs_check: bool) -> Option<Substitution> {
    let mut bs = Bindings::from_substitution(base);
    let ok = match (a, b) {
        (Unifiable::Term(x), Unifiable::Term(y)) => bs.unify_terms(x, y, occurs_check),
        (Unifiable::Atom(x), Unifiable::Atom(y)) => bs.unify_atoms(x, y, occurs_check),
        _ => false,
    };
    ok.then(|| if occurs_check { bs.to_substitution() } else { bs.triangular() })
}

#[derive(Clone, Debug)]
struct Entry {
    clause: Arc<Clause>,
    ground: bool,
}

/// A clause set with first-argument-free indexing on predicate and arity.
#[derive(Clone, Debug, Default)]
pub struct Program {
    entries: Vec<Entry>,
    index: HashMap<(Name, usize), Vec<usize>>,
    var_heads: Vec<usize>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_clauses<I: IntoIterator<Item = Clause>>(clauses: I) -> Self {
        let mut p = Program::new();
        for c in clauses {
            p.push(c);
        }
        p
    }

    pub fn push(&mut self, clause: Clause) -> usize {
        let id = self.entries.len();
        match (&clause.head, clause.head.arity()) {
            (Atom::App { pred: Term::Const(s), .. }, Some(n)) => {
                self.index.entry((s.clone(), n)).or_default().push(id)
            }
            _ => self.var_heads.push(id),
        }
        let ground = clause.is_ground();
        self.entries.push(Entry { clause: Arc::new(clause), ground });
        id
    }

    pub fn extend<I: IntoIterator<Item = Clause>>(&mut self, clauses: I) {
        for c in clauses {
            self.push(c);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clause(&self, id: usize) -> &Clause {
        &self.entries[id].clause
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.entries.iter().map(|e| &*e.clause)
    }

    /// Distinct `(symbol, arity)` pairs of clause heads, in first-use order.
    pub fn signatures(&self) -> Vec<(Name, usize)> {
        let mut out: Vec<(Name, usize)> = Vec::new();
        for e in &self.entries {
            if let (Some(s), Some(n)) = (e.clause.head.symbol(), e.clause.head.arity()) {
                if !out.iter().any(|(t, m)| t == s && *m == n) {
                    out.push((s.clone(), n));
                }
            }
        }
        out
    }

    fn candidates(&self, goal: &Atom) -> Vec<usize> {
        match goal {
            Atom::App { pred: Term::Const(s), args } => {
                let mut ids = self.index.get(&(s.clone(), args.len())).cloned().unwrap_or_default();
                if !self.var_heads.is_empty() {
                    ids.extend(self.var_heads.iter().copied());
                    ids.sort_unstable();
                }
                ids
            }
            Atom::App { args, .. } => (0..self.entries.len())
                .filter(|&i| self.entries[i].clause.head.arity().is_none_or(|n| n == args.len()))
                .collect(),
            Atom::Var(_) => (0..self.entries.len()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Persistent goal list; each node carries its derivation depth.
#[derive(Debug)]
pub struct Goal {
    pub atom: Atom,
    pub depth: usize,
    pub next: Option<Rc<Goal>>,
}

pub type Goals = Option<Rc<Goal>>;

pub fn push_goals(atoms: &[Atom], depth: usize, rest: Goals) -> Goals {
    let mut acc = rest;
    for a in atoms.iter().rev() {
        acc = Some(Rc::new(Goal { atom: a.clone(), depth, next: acc }));
    }
    acc
}

/// A single-threaded SLD engine over a shared program plus a stack of
/// dynamic clauses that callers may push and pop between calls.
pub struct Solver<'p> {
    pub program: &'p Program,
    pub dynamic: Vec<Arc<Clause>>,
    pub bindings: Bindings,
    pub cfg: ProofConfig,
    pub inferences: u64,
    pub budget_hit: bool,
    pub depth_hit: bool,
    /// Clause ids used on the current branch; dynamic clause `i` has id
    /// `program.len() + i`.
    pub trace: Vec<usize>,
    next_tag: u32,
}

impl<'p> Solver<'p> {
    pub fn new(program: &'p Program, cfg: ProofConfig) -> Self {
        Solver {
            program,
            dynamic: Vec::new(),
            bindings: Bindings::new(),
            cfg,
            inferences: 0,
            budget_hit: false,
            depth_hit: false,
            trace: Vec::new(),
            next_tag: 1,
        }
    }

    pub fn fresh_tag(&mut self) -> u32 {
        let t = self.next_tag;
        self.next_tag += 1;
        t
    }

    /// Counts one inference; false once the budget is spent.
    pub fn tick(&mut self) -> bool {
        if self.inferences >= self.cfg.max_inferences {
            self.budget_hit = true;
            return false;
        }
        self.inferences += 1;
        true
    }

    fn rename(&mut self, c: &Arc<Clause>, ground: bool) -> Arc<Clause> {
        if ground {
            c.clone()
        } else {
            let t = self.fresh_tag();
            Arc::new(c.retag(t))
        }
    }

    /// Proves `goals` left to right, calling `k` on every refutation.
    pub fn solve(&mut self, goals: Goals, k: &mut dyn FnMut(&mut Solver<'p>) -> Flow) -> Flow {
        let Some(goal) = goals else {
            return k(self);
        };
        if goal.depth >= self.cfg.max_depth {
            self.depth_hit = true;
            return Flow::Continue;
        }
        let atom = match self.bindings.walk_atom(&goal.atom) {
            Atom::App { pred, args } => Atom::App { pred: self.bindings.walk(pred).clone(), args: args.clone() },
            v => v.clone(),
        };
        let program = self.program;
        let mut cands: Vec<(usize, Arc<Clause>, bool)> = program
            .candidates(&atom)
            .into_iter()
            .map(|i| (i, program.entries[i].clause.clone(), program.entries[i].ground))
            .collect();
        let base = program.len();
        for (i, c) in self.dynamic.iter().enumerate() {
            if heads_may_match(&atom, &c.head) {
                cands.push((base + i, c.clone(), c.is_ground()));
            }
        }
        for (id, clause, ground) in cands {
            if !self.tick() {
                return Flow::Stop;
            }
            let mark = self.bindings.mark();
            let renamed = self.rename(&clause, ground);
            if self.bindings.unify_atoms(&atom, &renamed.head, self.cfg.occurs_check) {
                let next = push_goals(&renamed.body, goal.depth + 1, goal.next.clone());
                self.trace.push(id);
                let flow = self.solve(next, k);
                self.trace.pop();
                self.bindings.undo(mark);
                if flow == Flow::Stop {
                    return Flow::Stop;
                }
            } else {
                self.bindings.undo(mark);
            }
        }
        Flow::Continue
    }
}

fn heads_may_match(goal: &Atom, head: &Atom) -> bool {
    match (goal, head) {
        (Atom::App { pred: Term::Const(a), args: x }, Atom::App { pred: Term::Const(b), args: y }) => {
            a == b && x.len() == y.len()
        }
        (Atom::App { args: x, .. }, Atom::App { args: y, .. }) => x.len() == y.len(),
        _ => true,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// The search space within the depth bound was exhausted.
    Exhausted,
    /// The inference budget ran out.
    Budget,
    /// The caller's answer limit was reached.
    Stopped,
}

#[derive(Clone, Debug)]
pub struct Refutation {
    pub answers: Vec<Substitution>,
    pub outcome: Outcome,
    pub inferences: u64,
    pub depth_limited: bool,
}

/// Collects refutations of a negative goal clause, up to `limit` answers.
pub fn sld_refute(goal: &[Literal], program: &Program, cfg: ProofConfig, limit: Option<usize>) -> Result<Refutation> {
    cfg.validate()?;
    if goal.iter().any(|l| l.positive) {
        return Err(Error::Type("goal literals must be negative".into()));
    }
    let atoms: Vec<Atom> = goal.iter().map(|l| l.atom.clone()).collect();
    let mut vars = Vec::new();
    for a in &atoms {
        a.collect_vars(&mut vars);
    }
    let mut solver = Solver::new(program, cfg);
    let mut answers = Vec::new();
    let flow = solver.solve(push_goals(&atoms, 0, None), &mut |s| {
        answers.push(s.bindings.project(&vars));
        if limit.is_some_and(|n| answers.len() >= n) {
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    let outcome = if solver.budget_hit {
        Outcome::Budget
    } else if flow == Flow::Stop {
        Outcome::Stopped
    } else {
        Outcome::Exhausted
    };
    Ok(Refutation { answers, outcome, inferences: solver.inferences, depth_limited: solver.depth_hit })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entailment {
    True,
    False,
    /// The budget ran out before a proof was found.
    Unknown,
}

impl Entailment {
    /// Policy used by accuracy scoring: unknown counts as not entailed.
    pub fn holds(self) -> bool {
        self == Entailment::True
    }
}

pub fn entails(program: &Program, atom: &Atom, cfg: ProofConfig) -> Result<Entailment> {
    entails_counted(program, atom, cfg).map(|(e, _)| e)
}

/// Like [`entails`] but also reports the inferences spent.
pub fn entails_counted(program: &Program, atom: &Atom, cfg: ProofConfig) -> Result<(Entailment, u64)> {
    let (e, n, _) = first_proof(program, atom, cfg)?;
    Ok((e, n))
}

/// Searches for one proof of a ground atom by iterative deepening, so that
/// shallow proofs are found before deep or looping branches eat the
/// budget. The budget covers all iterations. On success also returns the
/// ids of the clauses the proof used, in resolution order.
pub fn first_proof(program: &Program, atom: &Atom, cfg: ProofConfig) -> Result<(Entailment, u64, Option<Vec<usize>>)> {
    cfg.validate()?;
    if !atom.is_ground() {
        return Err(Error::NonGround(atom.to_string()));
    }
    let mut spent = 0;
    for depth in 1..=cfg.max_depth {
        let bounded = ProofConfig { max_depth: depth, max_inferences: cfg.max_inferences - spent, ..cfg };
        let mut s = Solver::new(program, bounded);
        let mut trace = None;
        s.solve(push_goals(std::slice::from_ref(atom), 0, None), &mut |s| {
            trace = Some(s.trace.clone());
            Flow::Stop
        });
        spent += s.inferences;
        if trace.is_some() {
            return Ok((Entailment::True, spent, trace));
        }
        if s.budget_hit {
            return Ok((Entailment::Unknown, spent, None));
        }
        if !s.depth_hit {
            break;
        }
    }
    Ok((Entailment::False, spent, None))
}

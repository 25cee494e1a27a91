//! Clause construction by resolution against `B* = B ∪ E⁺`, with predicate
//! invention, and Top Program Construction on top of it.
//!
//! For each metarule instance whose head matches the goal, the body is first
//! proved as a whole. Only when no metarule proves the goal that way are the
//! metarules with two or more body literals retried literal by literal: a
//! literal with no proof and an unbound predicate variable gets a fresh `$k`
//! symbol and a recursive construction. Invented clauses become
//! visible to later literals as soon as their own sub-proof is complete.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logic::{
    apply, canonical_key, prettify, Atom, Clause, MetaSubstitution, Metarule, Order, Quantifier, Substitution, Term,
    Value, Var,
};
use crate::problems::MilProblem;
use crate::resolution::{entails, first_proof, push_goals, Bindings, Entailment, Flow, Program, ProofConfig, Solver};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LearnOptions {
    pub invention: bool,
    /// Clauses learned from earlier examples join `B*` for later ones.
    pub dynamic_learning: bool,
    /// Keep clauses whose head also occurs in their body.
    pub keep_tautologies: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions { invention: true, dynamic_learning: true, keep_tautologies: false }
    }
}

impl LearnOptions {
    /// Invention and dynamic learning go together: both only when the
    /// problem has invented symbols to hand out.
    pub fn for_problem(p: &MilProblem) -> Self {
        let invent = !p.invented.is_empty();
        LearnOptions { invention: invent, dynamic_learning: invent, keep_tautologies: false }
    }
}

/// A metarule instance: `clause = apply(metarule, subst)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub metarule: Metarule,
    pub subst: MetaSubstitution,
    pub clause: Clause,
}

/// Instances that together prove one example. Invented clauses come
/// before the clause whose head matches the example.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Derivation {
    pub instances: Vec<Instance>,
}

#[derive(Clone, Debug, Default)]
pub struct Construction {
    pub derivations: Vec<Derivation>,
    pub inferences: u64,
    pub budget_hit: bool,
    pub pool_exhausted: bool,
}

struct Path {
    instances: Vec<Instance>,
    used: Vec<String>,
    /// Invention nesting of the clause currently being built.
    level: usize,
    pool_exhausted: bool,
    /// Instances accepted so far, counting ones later backtracked over.
    emitted: usize,
}

struct Ctx<'a> {
    metarules: &'a [Metarule],
    pool: Vec<String>,
    opts: LearnOptions,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Whole,
    Invent,
}

type Cont<'k, 'p> = dyn FnMut(&mut Solver<'p>, &mut Path) -> Flow + 'k;

fn strip_tag(v: &Var) -> Var {
    v.with_tag(0)
}

impl<'a> Ctx<'a> {
    fn construct_goal<'p>(&self, s: &mut Solver<'p>, goal: &Atom, path: &mut Path, k: &mut Cont<'_, 'p>) -> Flow {
        let mut found = false;
        for phase in [Phase::Whole, Phase::Invent] {
            if phase == Phase::Invent && (found || !self.opts.invention || self.pool.is_empty()) {
                break;
            }
            for m in self.metarules {
                if phase == Phase::Invent && m.clause.body.len() < 2 {
                    continue;
                }
                if !s.tick() {
                    return Flow::Stop;
                }
                let tag = s.fresh_tag();
                let inst = m.clause.retag(tag);
                let mark = s.bindings.mark();
                let flow = if !s.bindings.unify_atoms(goal, &inst.head, s.cfg.occurs_check) {
                    Flow::Continue
                } else if phase == Phase::Whole {
                    let before = path.emitted;
                    let flow = s.solve(push_goals(&inst.body, 0, None), &mut |s| self.emit(s, m, &inst, path, k));
                    found |= path.emitted > before;
                    flow
                } else {
                    self.literalwise(s, m, &inst, 0, path, k)
                };
                s.bindings.undo(mark);
                if flow == Flow::Stop {
                    return Flow::Stop;
                }
            }
        }
        Flow::Continue
    }

    fn literalwise<'p>(
        &self,
        s: &mut Solver<'p>,
        m: &Metarule,
        inst: &Clause,
        i: usize,
        path: &mut Path,
        k: &mut Cont<'_, 'p>,
    ) -> Flow {
        if i == inst.body.len() {
            return self.emit(s, m, inst, path, k);
        }
        let lit = &inst.body[i];
        let mut found = false;
        let flow = s.solve(push_goals(std::slice::from_ref(lit), 0, None), &mut |s| {
            found = true;
            self.literalwise(s, m, inst, i + 1, path, k)
        });
        if flow == Flow::Stop || found {
            return flow;
        }
        let pred_var = match lit {
            Atom::App { pred, .. } => match s.bindings.walk(pred) {
                Term::Var(v) if v.order == Order::Second => Some(v.clone()),
                _ => None,
            },
            Atom::Var(_) => None,
        };
        let Some(pred_var) = pred_var else {
            return Flow::Continue;
        };
        // Invented predicates are learned from ground goals only.
        if !lit.args().iter().all(|t| s.bindings.resolve_term(t).is_ground()) {
            return Flow::Continue;
        }
        let taken: HashSet<&str> = path.used.iter().map(String::as_str).collect();
        let defined: HashSet<String> = s.dynamic.iter().filter_map(|c| c.head.symbol().map(|n| n.to_string())).collect();
        let Some(sym) = self.pool.iter().find(|p| !taken.contains(p.as_str()) && !defined.contains(*p)).cloned() else {
            path.pool_exhausted = true;
            return Flow::Continue;
        };
        let mark = s.bindings.mark();
        s.bindings.bind(pred_var, Value::Term(Term::constant(&sym)));
        path.used.push(sym);
        path.level += 1;
        let flow = self.construct_goal(s, lit, path, &mut |s, path| {
            path.level -= 1;
            let f = self.literalwise(s, m, inst, i + 1, path, k);
            path.level += 1;
            f
        });
        path.level -= 1;
        path.used.pop();
        s.bindings.undo(mark);
        flow
    }

    /// Records a finished instance and continues with it on the path.
    fn emit<'p>(&self, s: &mut Solver<'p>, m: &Metarule, inst: &Clause, path: &mut Path, k: &mut Cont<'_, 'p>) -> Flow {
        let Some(subst) = existential_bindings(&s.bindings, inst) else {
            return Flow::Continue;
        };
        let Ok(clause) = apply(&m.clause, &subst) else {
            return Flow::Continue;
        };
        if clause.is_tautology() && !self.opts.keep_tautologies {
            return Flow::Continue;
        }
        path.emitted += 1;
        let invented = path.level > 0;
        if invented {
            s.dynamic.push(Arc::new(clause.clone()));
        }
        path.instances.push(Instance { metarule: m.clone(), subst, clause });
        let flow = k(s, path);
        path.instances.pop();
        if invented {
            s.dynamic.pop();
        }
        flow
    }
}

/// The ground values of a renamed instance's existential variables, keyed
/// by the original metarule variables. `None` if any is unbound.
fn existential_bindings(b: &Bindings, inst: &Clause) -> Option<MetaSubstitution> {
    let mut ms = MetaSubstitution::new();
    for v in inst.vars() {
        if v.quant != Quantifier::Existential {
            continue;
        }
        let val = match v.order {
            Order::Third => Value::Atom(b.resolve_atom(&Atom::Var(v.clone()))),
            _ => Value::Term(b.resolve_term(&Term::Var(v.clone()))),
        };
        if !val.is_ground() {
            return None;
        }
        ms.insert(strip_tag(&v), val);
    }
    Some(ms)
}

/// Every way of proving `e` with one instance of a metarule at its head,
/// body literals resolved against `b_star` plus `learned`, inventing
/// predicates from `pool` where a literal has no proof.
#[allow(clippy::too_many_arguments)]
pub fn construct(
    e: &Atom,
    b_star: &Program,
    learned: &[Clause],
    metarules: &[Metarule],
    pool: &[String],
    seed: &Substitution,
    cfg: ProofConfig,
    opts: LearnOptions,
) -> Result<Construction> {
    cfg.validate()?;
    let mut s = Solver::new(b_star, cfg);
    s.bindings = Bindings::from_substitution(seed);
    s.dynamic = learned.iter().cloned().map(Arc::new).collect();
    let ctx = Ctx { metarules, pool: pool.to_vec(), opts };
    let mut path = Path { instances: Vec::new(), used: Vec::new(), level: 0, pool_exhausted: false, emitted: 0 };
    let mut derivations = Vec::new();
    ctx.construct_goal(&mut s, e, &mut path, &mut |_, path| {
        derivations.push(Derivation { instances: path.instances.clone() });
        Flow::Continue
    });
    if derivations.is_empty() && path.pool_exhausted {
        return Err(Error::InventionDepthExceeded);
    }
    Ok(Construction { derivations, inferences: s.inferences, budget_hit: s.budget_hit, pool_exhausted: path.pool_exhausted })
}

/// A set of clauses, each remembered with the metarule instance it came
/// from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Hypothesis {
    pub clauses: Vec<Instance>,
}

impl Hypothesis {
    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clause_list(&self) -> Vec<Clause> {
        self.clauses.iter().map(|i| i.clause.clone()).collect()
    }

    /// Canonical keys of the clauses, for order-free comparison.
    pub fn keys(&self) -> HashSet<String> {
        self.clauses.iter().map(|i| canonical_key(&i.clause)).collect()
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.clauses {
            writeln!(f, "{}", prettify(&i.clause).arrow())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExampleStatus {
    /// Proved; the count is the clauses this example added.
    Learned(usize),
    Unlearned,
    Budget,
    InventionDepthExceeded,
}

#[derive(Clone, Debug, Default)]
pub struct TopProgram {
    pub hypothesis: Hypothesis,
    /// Clauses removed because they helped prove a negative example.
    pub removed: Vec<Clause>,
    pub status: Vec<ExampleStatus>,
    pub inferences: u64,
}

fn add_unique(h: &mut Hypothesis, seen: &mut HashSet<String>, inst: Instance) -> bool {
    seen.insert(canonical_key(&inst.clause)) && {
        h.clauses.push(inst);
        true
    }
}

/// Generalise: union of constructions over `E⁺`. Specialise: drop clauses
/// that take part in proofs of negative examples, to a fixpoint.
pub fn top_program(problem: &MilProblem, opts: LearnOptions) -> Result<TopProgram> {
    let b_star = Program::from_clauses(problem.b_star());
    let mut out = TopProgram::default();
    let mut seen = HashSet::new();
    let mut learned: Vec<Clause> = Vec::new();
    for e in &problem.pos {
        let dynamic: &[Clause] = if opts.dynamic_learning { &learned } else { &[] };
        let result = construct(
            e,
            &b_star,
            dynamic,
            &problem.metarules,
            &problem.invented,
            &Substitution::new(),
            problem.config,
            opts,
        );
        let c = match result {
            Ok(c) => c,
            Err(Error::InventionDepthExceeded) => {
                out.status.push(ExampleStatus::InventionDepthExceeded);
                continue;
            }
            Err(e) => return Err(e),
        };
        out.inferences += c.inferences;
        let mut added = 0;
        let proved = !c.derivations.is_empty();
        for d in c.derivations {
            for inst in d.instances {
                let clause = inst.clause.clone();
                if add_unique(&mut out.hypothesis, &mut seen, inst) {
                    added += 1;
                    learned.push(clause);
                }
            }
        }
        out.status.push(if proved {
            ExampleStatus::Learned(added)
        } else if c.budget_hit {
            ExampleStatus::Budget
        } else {
            ExampleStatus::Unlearned
        });
    }
    out.removed = specialise(&mut out.hypothesis, &problem.bk, &problem.pos, &problem.neg, problem.config)?;
    Ok(out)
}

fn program_with(bk: &[Clause], h: &Hypothesis) -> Program {
    let mut p = Program::from_clauses(bk.iter().cloned());
    p.extend(h.clause_list());
    p
}

/// The H clause indices used by the first proof of `atom`, if any.
fn proof_clauses(program: &Program, bk_len: usize, atom: &Atom, cfg: ProofConfig) -> Result<Option<Vec<usize>>> {
    let (_, _, trace) = first_proof(program, atom, cfg)?;
    Ok(trace.map(|t| {
        let mut ids: Vec<usize> = t.into_iter().filter(|&i| i >= bk_len).map(|i| i - bk_len).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }))
}

/// Removes clauses responsible for proofs of negative examples and returns
/// them in removal order. First each clause is tested on its own against
/// `B ∪ E⁺`; then, while `B ∪ H` still proves a negative, the clauses whose
/// single removal breaks that proof go (all of its clauses if none does).
pub fn specialise(h: &mut Hypothesis, bk: &[Clause], pos: &[Atom], neg: &[Atom], cfg: ProofConfig) -> Result<Vec<Clause>> {
    let mut removed = Vec::new();
    if neg.is_empty() {
        return Ok(removed);
    }
    let b_star: Vec<Clause> = bk.iter().cloned().chain(pos.iter().cloned().map(Clause::fact)).collect();
    let mut kept = Vec::new();
    for inst in std::mem::take(&mut h.clauses) {
        let mut program = b_star.clone();
        program.push(inst.clause.clone());
        let program = Program::from_clauses(program);
        let mut bad = false;
        for e in neg {
            if entails(&program, e, cfg)? == Entailment::True {
                bad = true;
                break;
            }
        }
        if bad {
            removed.push(inst.clause);
        } else {
            kept.push(inst);
        }
    }
    h.clauses = kept;
    loop {
        let mut changed = false;
        for e in neg {
            loop {
                let program = program_with(bk, h);
                let Some(used) = proof_clauses(&program, bk.len(), e, cfg)? else { break };
                if used.is_empty() {
                    // Background knowledge alone proves it; nothing to remove.
                    break;
                }
                let mut culprits = Vec::new();
                for &i in &used {
                    let mut without = h.clone();
                    without.clauses.remove(i);
                    if entails(&program_with(bk, &without), e, cfg)? != Entailment::True {
                        culprits.push(i);
                    }
                }
                if culprits.is_empty() {
                    culprits = used;
                }
                for &i in culprits.iter().rev() {
                    removed.push(h.clauses.remove(i).clause);
                }
                changed = true;
            }
        }
        if !changed {
            return Ok(removed);
        }
    }
}

/// `(TP + TN) / (|pos| + |neg|)` with `B ∪ H`. Unknown entailments count
/// as not entailed.
pub fn accuracy(h: &Hypothesis, bk: &[Clause], test_pos: &[Atom], test_neg: &[Atom], cfg: ProofConfig) -> Result<f64> {
    accuracy_counted(h, bk, test_pos, test_neg, cfg).map(|(a, _)| a)
}

/// Accuracy together with the inferences spent on it.
pub fn accuracy_counted(h: &Hypothesis, bk: &[Clause], test_pos: &[Atom], test_neg: &[Atom], cfg: ProofConfig) -> Result<(f64, u64)> {
    let total = test_pos.len() + test_neg.len();
    if total == 0 {
        return Ok((1.0, 0));
    }
    let program = program_with(bk, h);
    let mut correct = 0usize;
    let mut spent = 0u64;
    for (atoms, want) in [(test_pos, true), (test_neg, false)] {
        for a in atoms {
            let (e, n) = crate::resolution::entails_counted(&program, a, cfg)?;
            spent += n;
            if e.holds() == want {
                correct += 1;
            }
        }
    }
    Ok((correct as f64 / total as f64, spent))
}

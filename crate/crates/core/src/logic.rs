//! Terms, atoms, clauses and metarules at orders 0 to 3.
//!
//! Predicate positions hold a [`Term`], so a second-order variable sits in
//! the same slot as a predicate symbol. Resolving over these atoms is the
//! same thing as resolving over their encapsulation `m(P, t1, .., tn)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Reserved functor of list cells.
pub const LIST_CONS: &str = ".";
/// Reserved constant for the empty list.
pub const LIST_NIL: &str = "[]";
/// Default encapsulation symbol.
pub const ENCAPSULATION_SYMBOL: &str = "m";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    /// Ranges over constants.
    First,
    /// Ranges over predicate symbols.
    Second,
    /// Ranges over atoms.
    Third,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantifier {
    Universal,
    Existential,
}

/// A variable. `tag` is zero for variables written by hand and nonzero for
/// the renamed copies the prover makes of clauses.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: Name,
    pub order: Order,
    pub quant: Quantifier,
    pub tag: u32,
}

impl Var {
    pub fn new(name: &str, order: Order, quant: Quantifier) -> Self {
        Var { name: Arc::from(name), order, quant, tag: 0 }
    }

    pub fn universal(name: &str) -> Self {
        Var::new(name, Order::First, Quantifier::Universal)
    }

    pub fn existential(name: &str) -> Self {
        Var::new(name, Order::First, Quantifier::Existential)
    }

    pub fn predicate(name: &str) -> Self {
        Var::new(name, Order::Second, Quantifier::Existential)
    }

    pub fn atom(name: &str) -> Self {
        Var::new(name, Order::Third, Quantifier::Existential)
    }

    pub fn with_tag(&self, tag: u32) -> Var {
        Var { tag, ..self.clone() }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tag == 0 {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}_{}", self.name, self.tag)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Const(Name),
    Compound(Name, Arc<[Term]>),
}

impl Term {
    pub fn constant(s: &str) -> Term {
        Term::Const(Arc::from(s))
    }

    pub fn var(v: Var) -> Term {
        Term::Var(v)
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::constant(functor)
        } else {
            Term::Compound(Arc::from(functor), args.into())
        }
    }

    pub fn nil() -> Term {
        Term::constant(LIST_NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Compound(Arc::from(LIST_CONS), vec![head, tail].into())
    }

    /// Builds a proper list, or a partial one when `tail` is given.
    pub fn list(items: Vec<Term>, tail: Option<Term>) -> Term {
        let mut acc = tail.unwrap_or_else(Term::nil);
        for item in items.into_iter().rev() {
            acc = Term::cons(item, acc);
        }
        acc
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Const(_) => {}
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn map_vars(&self, f: &mut impl FnMut(&Var) -> Term) -> Term {
        match self {
            Term::Var(v) => f(v),
            Term::Const(_) => self.clone(),
            Term::Compound(fun, args) => {
                Term::Compound(fun.clone(), args.iter().map(|a| a.map_vars(f)).collect())
            }
        }
    }
}

fn needs_quotes(s: &str) -> bool {
    if s == LIST_NIL {
        return false;
    }
    let mut chars = s.chars();
    match chars.next() {
        None => true,
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '$' => {
            !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        Some(_) => true,
    }
}

fn write_symbol(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if needs_quotes(s) {
        write!(f, "'{}'", s.replace('\'', "\\'"))
    } else {
        write!(f, "{s}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write_symbol(f, c),
            Term::Compound(fun, args) if &**fun == LIST_CONS && args.len() == 2 => {
                write!(f, "[{}", args[0])?;
                let mut tail = &args[1];
                loop {
                    match tail {
                        Term::Compound(g, rest) if &**g == LIST_CONS && rest.len() == 2 => {
                            write!(f, ",{}", rest[0])?;
                            tail = &rest[1];
                        }
                        Term::Const(c) if &**c == LIST_NIL => break,
                        other => {
                            write!(f, "|{other}")?;
                            break;
                        }
                    }
                }
                write!(f, "]")
            }
            Term::Compound(fun, args) => {
                write_symbol(f, fun)?;
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// An atom: a predicate (symbol or second-order variable) applied to
/// arguments, or a third-order variable standing for a whole atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    App { pred: Term, args: Vec<Term> },
    Var(Var),
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom::App { pred: Term::constant(pred), args }
    }

    pub fn app(pred: Term, args: Vec<Term>) -> Atom {
        Atom::App { pred, args }
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            Atom::App { args, .. } => Some(args.len()),
            Atom::Var(_) => None,
        }
    }

    pub fn pred(&self) -> Option<&Term> {
        match self {
            Atom::App { pred, .. } => Some(pred),
            Atom::Var(_) => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Atom::App { args, .. } => args,
            Atom::Var(_) => &[],
        }
    }

    /// Predicate symbol name, if the predicate is a symbol.
    pub fn symbol(&self) -> Option<&Name> {
        match self.pred() {
            Some(Term::Const(c)) => Some(c),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Atom::App { pred, args } => pred.is_ground() && args.iter().all(Term::is_ground),
            Atom::Var(_) => false,
        }
    }

    /// Name used by the literal ordering: symbol or variable name.
    pub fn sort_name(&self) -> String {
        match self {
            Atom::App { pred, .. } => match pred {
                Term::Var(v) => v.to_string(),
                Term::Const(c) => c.to_string(),
                t => t.to_string(),
            },
            Atom::Var(v) => v.to_string(),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Atom::App { pred, args } => {
                pred.collect_vars(out);
                args.iter().for_each(|a| a.collect_vars(out));
            }
            Atom::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    /// Renames every variable by setting its tag.
    pub fn retag(&self, tag: u32) -> Atom {
        match self {
            Atom::App { pred, args } => {
                let mut f = |v: &Var| Term::Var(v.with_tag(tag));
                Atom::App {
                    pred: pred.map_vars(&mut f),
                    args: args.iter().map(|a| a.map_vars(&mut f)).collect(),
                }
            }
            Atom::Var(v) => Atom::Var(v.with_tag(tag)),
        }
    }

    fn rename(&self, map: &HashMap<Var, Var>) -> Atom {
        let mut f = |v: &Var| Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone()));
        match self {
            Atom::App { pred, args } => Atom::App {
                pred: pred.map_vars(&mut f),
                args: args.iter().map(|a| a.map_vars(&mut f)).collect(),
            },
            Atom::Var(v) => Atom::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::App { pred, args } => {
                match pred {
                    Term::Const(c) if c.chars().next().is_some_and(|c| c.is_ascii_uppercase()) => {
                        // Upper-case predicate symbols are legal in predicate position.
                        write!(f, "{c}")?
                    }
                    p => write!(f, "{p}")?,
                }
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            Atom::Var(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, positive: false }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "¬{}", self.atom)
        }
    }
}

/// A definite clause. The body keeps the order it was written in; duplicate
/// literals are retained.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Clause { head, body }
    }

    pub fn fact(head: Atom) -> Self {
        Clause { head, body: Vec::new() }
    }

    /// Builds a clause from an unordered literal collection.
    pub fn from_literals(literals: Vec<Literal>) -> Result<Self> {
        let positives = literals.iter().filter(|l| l.positive).count();
        if positives != 1 {
            return Err(Error::NotDefinite { positives });
        }
        let mut head = None;
        let mut body = Vec::new();
        for l in literals {
            if l.positive {
                head = Some(l.atom);
            } else {
                body.push(l.atom);
            }
        }
        Ok(Clause { head: head.expect("one positive literal"), body })
    }

    pub fn literals(&self) -> Vec<Literal> {
        std::iter::once(Literal::pos(self.head.clone()))
            .chain(self.body.iter().cloned().map(Literal::neg))
            .collect()
    }

    pub fn len(&self) -> usize {
        1 + self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter())
    }

    /// Variables in order of first occurrence, head first.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for a in self.atoms() {
            a.collect_vars(&mut out);
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        self.atoms().all(Atom::is_ground)
    }

    /// No compound terms other than constants, and every head variable
    /// occurs in the body.
    pub fn is_datalog(&self) -> bool {
        let flat = self
            .atoms()
            .all(|a| a.args().iter().all(|t| !matches!(t, Term::Compound(..))));
        if !flat {
            return false;
        }
        let mut body_vars = Vec::new();
        for b in &self.body {
            b.collect_vars(&mut body_vars);
        }
        self.head.vars().iter().all(|v| body_vars.contains(v))
    }

    /// True when the head atom also occurs in the body.
    pub fn is_tautology(&self) -> bool {
        self.body.contains(&self.head)
    }

    pub fn retag(&self, tag: u32) -> Clause {
        Clause {
            head: self.head.retag(tag),
            body: self.body.iter().map(|b| b.retag(tag)).collect(),
        }
    }

    pub fn rename(&self, map: &HashMap<Var, Var>) -> Clause {
        Clause {
            head: self.head.rename(map),
            body: self.body.iter().map(|b| b.rename(map)).collect(),
        }
    }

    pub fn max_order(&self) -> Option<Order> {
        self.vars().iter().map(|v| v.order).max()
    }

    /// Renders in the `P(x,y)←Q(x,z),R(z,y)` style.
    pub fn arrow(&self) -> String {
        let mut s = self.head.to_string();
        if !self.body.is_empty() {
            s.push('←');
            let body: Vec<String> = self.body.iter().map(|b| b.to_string()).collect();
            s.push_str(&body.join(","));
        }
        s
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{b}")?;
            }
        }
        Ok(())
    }
}

/// Target of a binding: a term (also used for predicate symbols) or an atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Term(Term),
    Atom(Atom),
}

impl Value {
    pub fn is_ground(&self) -> bool {
        match self {
            Value::Term(t) => t.is_ground(),
            Value::Atom(a) => a.is_ground(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Term(t) => write!(f, "{t}"),
            Value::Atom(a) => write!(f, "{a}"),
        }
    }
}

/// A plain variable-to-value map.
pub type Substitution = BTreeMap<Var, Value>;

/// Paired bindings: `theta` for universally and `big_theta` for
/// existentially quantified variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaSubstitution {
    pub theta: Substitution,
    pub big_theta: Substitution,
}

impl MetaSubstitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: Var, value: Value) {
        match var.quant {
            Quantifier::Universal => self.theta.insert(var, value),
            Quantifier::Existential => self.big_theta.insert(var, value),
        };
    }

    pub fn with(mut self, var: Var, value: Value) -> Self {
        self.insert(var, value);
        self
    }

    pub fn get(&self, var: &Var) -> Option<&Value> {
        self.theta.get(var).or_else(|| self.big_theta.get(var))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Value)> {
        self.theta.iter().chain(self.big_theta.iter())
    }

    pub fn len(&self) -> usize {
        self.theta.len() + self.big_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_ground(&self) -> bool {
        self.iter().all(|(_, v)| v.is_ground())
    }

    /// Domains are disjoint and no target mentions a bound variable.
    pub fn is_idempotent(&self) -> bool {
        let bound: BTreeSet<&Var> = self.iter().map(|(v, _)| v).collect();
        self.iter().all(|(_, val)| {
            let mut vs = Vec::new();
            match val {
                Value::Term(t) => t.collect_vars(&mut vs),
                Value::Atom(a) => a.collect_vars(&mut vs),
            }
            vs.iter().all(|v| !bound.contains(v))
        }) && self.theta.keys().all(|k| !self.big_theta.contains_key(k))
    }
}

impl fmt::Display for MetaSubstitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.big_theta.iter().chain(self.theta.iter()).enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}/{v}")?;
        }
        write!(f, "}}")
    }
}

fn check_binding(var: &Var, value: &Value) -> Result<()> {
    match (var.order, value) {
        (Order::Third, Value::Atom(_)) => Ok(()),
        (Order::Third, Value::Term(t)) => {
            Err(Error::Type(format!("third-order variable {var} bound to non-atom {t}")))
        }
        (_, Value::Atom(a)) => Err(Error::Type(format!("{var} is not third-order but is bound to atom {a}"))),
        (Order::Second, Value::Term(Term::Compound(..))) => {
            Err(Error::Type(format!("second-order variable {var} bound to a compound term")))
        }
        _ => Ok(()),
    }
}

fn apply_term(t: &Term, ms: &MetaSubstitution) -> Result<Term> {
    Ok(match t {
        Term::Var(v) => match ms.get(v) {
            Some(Value::Term(b)) => b.clone(),
            Some(Value::Atom(a)) => {
                return Err(Error::Type(format!("variable {v} in term position bound to atom {a}")))
            }
            None => t.clone(),
        },
        Term::Const(_) => t.clone(),
        Term::Compound(f, args) => Term::Compound(
            f.clone(),
            args.iter().map(|a| apply_term(a, ms)).collect::<Result<Vec<_>>>()?.into(),
        ),
    })
}

pub fn apply_atom(atom: &Atom, ms: &MetaSubstitution) -> Result<Atom> {
    Ok(match atom {
        Atom::App { pred, args } => Atom::App {
            pred: apply_term(pred, ms)?,
            args: args.iter().map(|a| apply_term(a, ms)).collect::<Result<_>>()?,
        },
        Atom::Var(v) => match ms.get(v) {
            Some(Value::Atom(a)) => a.clone(),
            Some(Value::Term(t)) => {
                return Err(Error::Type(format!("third-order variable {v} bound to non-atom {t}")))
            }
            None => atom.clone(),
        },
    })
}

/// Simultaneous replacement of every bound variable.
pub fn apply(clause: &Clause, ms: &MetaSubstitution) -> Result<Clause> {
    for (v, val) in ms.iter() {
        check_binding(v, val)?;
    }
    Ok(Clause {
        head: apply_atom(&clause.head, ms)?,
        body: clause.body.iter().map(|b| apply_atom(b, ms)).collect::<Result<_>>()?,
    })
}

/// Positive literal first, then negatives by symbol or variable name and
/// then by ascending arity. Remaining ties fall back to the printed form.
pub fn order_literals(literals: &[Literal]) -> Result<Vec<Literal>> {
    let positives = literals.iter().filter(|l| l.positive).count();
    if positives != 1 {
        return Err(Error::NotDefinite { positives });
    }
    let mut out: Vec<Literal> = literals.iter().filter(|l| l.positive).cloned().collect();
    let mut negs: Vec<&Literal> = literals.iter().filter(|l| !l.positive).collect();
    negs.sort_by_cached_key(|l| (l.atom.sort_name(), l.atom.arity().unwrap_or(0), l.atom.to_string()));
    out.extend(negs.into_iter().cloned());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Taxon {
    Punch,
    Matrix,
    Sort,
    FirstOrder,
}

impl fmt::Display for Taxon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Taxon::Punch => "punch",
            Taxon::Matrix => "matrix",
            Taxon::Sort => "sort",
            Taxon::FirstOrder => "first_order",
        };
        f.write_str(s)
    }
}

pub fn classify(clause: &Clause) -> Result<Taxon> {
    let atom_vars = clause.atoms().filter(|a| matches!(a, Atom::Var(_))).count();
    if atom_vars == clause.len() {
        return Ok(Taxon::Punch);
    }
    if atom_vars > 0 {
        return Err(Error::IllFormed("mixes atom variables with applied literals".into()));
    }
    if !clause.vars().iter().any(|v| v.order >= Order::Second) {
        return Ok(Taxon::FirstOrder);
    }
    let per_literal: Vec<Vec<Var>> = clause.atoms().map(Atom::vars).collect();
    for (i, vs) in per_literal.iter().enumerate() {
        for other in &per_literal[i + 1..] {
            if vs.iter().any(|v| other.contains(v)) {
                return Ok(Taxon::Sort);
            }
        }
    }
    Ok(Taxon::Matrix)
}

/// Every literal occurs once and all literals are linked through shared
/// first-order argument terms.
pub fn fully_connected(clause: &Clause) -> Result<bool> {
    if clause.atoms().any(|a| matches!(a, Atom::Var(_))) {
        return Err(Error::OrderTooHigh("fully-connectedness is undefined for punch metarules".into()));
    }
    let lits = clause.literals();
    for (i, l) in lits.iter().enumerate() {
        if lits[i + 1..].contains(l) {
            return Ok(false);
        }
    }
    let terms: Vec<Vec<&Term>> = clause.atoms().map(|a| a.args().iter().collect()).collect();
    let n = terms.len();
    let mut reached = vec![false; n];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !reached[j] && terms[i].iter().any(|t| terms[j].contains(t)) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    Ok(reached.into_iter().all(|r| r))
}

/// A metarule, or a first-order clause carried in the same wrapper.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Metarule {
    pub name: Option<String>,
    pub clause: Clause,
    pub taxon: Taxon,
}

impl Metarule {
    pub fn new(name: Option<&str>, clause: Clause) -> Result<Self> {
        let taxon = classify(&clause)?;
        Ok(Metarule { name: name.map(str::to_string), clause, taxon })
    }

    pub fn named(name: &str, clause: Clause) -> Result<Self> {
        Self::new(Some(name), clause)
    }

    pub fn len(&self) -> usize {
        self.clause.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn existential_vars(&self) -> Vec<Var> {
        self.clause.vars().into_iter().filter(|v| v.quant == Quantifier::Existential).collect()
    }

    pub fn universal_vars(&self) -> Vec<Var> {
        self.clause.vars().into_iter().filter(|v| v.quant == Quantifier::Universal).collect()
    }

    /// Quantifier prefix plus clause, e.g. `∃.P,Q,R ∀.x,y,z: P(x,y)←Q(x,z),R(z,y)`.
    pub fn quantified(&self) -> String {
        let ex: Vec<String> = self.existential_vars().iter().map(|v| v.to_string()).collect();
        let un: Vec<String> = self.universal_vars().iter().map(|v| v.to_string()).collect();
        let mut s = String::new();
        if !ex.is_empty() {
            s.push_str(&format!("∃.{} ", ex.join(",")));
        }
        if !un.is_empty() {
            s.push_str(&format!("∀.{} ", un.join(",")));
        }
        if !s.is_empty() {
            s.pop();
            s.push_str(": ");
        }
        s.push_str(&self.clause.arrow());
        s
    }

    /// Alpha-equivalence test.
    pub fn alpha_eq(&self, other: &Metarule) -> bool {
        canonical_clause(&self.clause) == canonical_clause(&other.clause)
    }
}

impl fmt::Display for Metarule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "({n}) ")?;
        }
        write!(f, "{}", self.quantified())
    }
}

fn canonical_var_name(v: &Var, counters: &mut [usize; 4]) -> Var {
    let (slot, prefix) = match (v.order, v.quant) {
        (Order::Second, _) => (0, "P"),
        (Order::First, Quantifier::Universal) => (1, "x"),
        (Order::First, Quantifier::Existential) => (2, "X"),
        (Order::Third, _) => (3, "A"),
    };
    let n = counters[slot];
    counters[slot] += 1;
    Var { name: Arc::from(format!("{prefix}{n}").as_str()), order: v.order, quant: v.quant, tag: 0 }
}

fn rename_first_occurrence(head: &Atom, body: &[&Atom]) -> Clause {
    let mut map = HashMap::new();
    let mut counters = [0usize; 4];
    let mut seen = Vec::new();
    head.collect_vars(&mut seen);
    for b in body {
        b.collect_vars(&mut seen);
    }
    for v in &seen {
        if !map.contains_key(v) {
            let nv = canonical_var_name(v, &mut counters);
            map.insert(v.clone(), nv);
        }
    }
    Clause {
        head: head.rename(&map),
        body: body.iter().map(|b| b.rename(&map)).collect(),
    }
}

/// Canonical representative of a clause modulo variable renaming.
/// Variables are renamed by first occurrence, head first and then the body
/// in its stored order, to `P0..`, `x0..`, `X0..` and `A0..`. Body order
/// is significant: `P(x,y)←Q(x,y),R(y,x)` and `P(x,y)←Q(y,x),R(x,y)` are
/// different metarules.
pub fn canonical_clause(clause: &Clause) -> Clause {
    let body: Vec<&Atom> = clause.body.iter().collect();
    rename_first_occurrence(&clause.head, &body)
}

pub fn canonical_form(m: &Metarule) -> Metarule {
    Metarule { name: m.name.clone(), clause: canonical_clause(&m.clause), taxon: m.taxon }
}

/// String key for alpha-equivalence classes.
pub fn canonical_key(clause: &Clause) -> String {
    canonical_clause(clause).to_string()
}

/// Maps each literal `S(t1..tn)` to `m(S,t1..tn)`.
pub fn encapsulate(m: &Metarule, symbol: &str) -> Result<Clause> {
    let enc = |a: &Atom| -> Result<Atom> {
        match a {
            Atom::App { pred, args } => {
                if let Term::Const(c) = pred {
                    if &**c == symbol {
                        return Err(Error::ReservedSymbol(symbol.to_string()));
                    }
                }
                let mut new_args = Vec::with_capacity(args.len() + 1);
                new_args.push(pred.clone());
                new_args.extend(args.iter().cloned());
                Ok(Atom::App { pred: Term::constant(symbol), args: new_args })
            }
            Atom::Var(_) => Err(Error::OrderTooHigh("punch metarules cannot be encapsulated".into())),
        }
    };
    Ok(Clause {
        head: enc(&m.clause.head)?,
        body: m.clause.body.iter().map(enc).collect::<Result<_>>()?,
    })
}

/// Inverse of [`encapsulate`].
pub fn decapsulate(c: &Clause, symbol: &str) -> Result<Metarule> {
    let dec = |a: &Atom| -> Result<Atom> {
        match a {
            Atom::App { pred: Term::Const(s), args } if &**s == symbol && !args.is_empty() => {
                Ok(Atom::App { pred: args[0].clone(), args: args[1..].to_vec() })
            }
            other => Err(Error::IllFormed(format!("{other} is not an encapsulated literal"))),
        }
    };
    let clause = Clause { head: dec(&c.head)?, body: c.body.iter().map(dec).collect::<Result<_>>()? };
    Metarule::new(None, clause)
}

const PRED_NAMES: [&str; 8] = ["P", "Q", "R", "S", "T", "U", "V", "W"];
const ARG_NAMES: [&str; 6] = ["x", "y", "z", "u", "v", "w"];
const EX_NAMES: [&str; 6] = ["X", "Y", "Z", "U", "V", "W"];

fn cycle_name(names: &[&str], i: usize) -> String {
    let base = names[i % names.len()];
    match i / names.len() {
        0 => base.to_string(),
        n => format!("{base}{n}"),
    }
}

/// `P, Q, R, ..` for the i-th predicate variable.
pub fn pred_var_name(i: usize) -> String {
    cycle_name(&PRED_NAMES, i)
}

/// `x, y, z, u, v, w, x1, ..` for the i-th universal variable.
pub fn arg_var_name(i: usize) -> String {
    cycle_name(&ARG_NAMES, i)
}

/// Renames variables by first occurrence to the conventional letters:
/// `P, Q, R` for predicates and atoms, `x, y, z` for universal and
/// `X, Y, Z` for existential first-order variables.
pub fn prettify(clause: &Clause) -> Clause {
    let mut map = HashMap::new();
    let (mut p, mut x, mut e) = (0, 0, 0);
    for v in clause.vars() {
        let n = match (v.order, v.quant) {
            (Order::First, Quantifier::Universal) => {
                x += 1;
                arg_var_name(x - 1)
            }
            (Order::First, Quantifier::Existential) => {
                e += 1;
                cycle_name(&EX_NAMES, e - 1)
            }
            _ => {
                p += 1;
                pred_var_name(p - 1)
            }
        };
        map.insert(v.clone(), Var { name: Arc::from(n.as_str()), tag: 0, ..v });
    }
    clause.rename(&map)
}

//! Metarule languages, their cardinality bounds and brute-force
//! enumerators that check those bounds.
//!
//! Bounds are exact rationals. Enumerators refuse to run when the projected
//! output exceeds [`ENUMERATION_GUARD`].

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::logic::{
    arg_var_name, canonical_key, fully_connected, pred_var_name, prettify, Atom, Clause, Metarule,
    Order, Quantifier, Taxon, Term, Var,
};

pub const ENUMERATION_GUARD: u128 = 1_000_000;

/// Literal counts or arities: a single value, an inclusive range, or an
/// explicit sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Spec {
    Exactly(usize),
    Between(usize, usize),
    Sequence(Vec<usize>),
}

impl Spec {
    fn values(&self) -> Vec<usize> {
        match self {
            Spec::Exactly(n) => vec![*n],
            Spec::Between(a, b) => (*a..=*b).collect(),
            Spec::Sequence(v) => v.clone(),
        }
    }
}

/// The language of metarules with `literal_count` literals whose arities
/// follow `arities`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageDescriptor {
    pub literal_count: Spec,
    pub arities: Option<Spec>,
}

impl LanguageDescriptor {
    pub fn new(literal_count: Spec, arities: Option<Spec>) -> Result<Self> {
        let d = LanguageDescriptor { literal_count, arities };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match &self.literal_count {
            Spec::Exactly(0) => return bad("literal count must be at least 1"),
            Spec::Between(a, b) if *a == 0 || a > b => return bad("literal count range is empty or starts at 0"),
            Spec::Sequence(_) => return bad("literal count cannot be a sequence"),
            _ => {}
        }
        if let Some(Spec::Sequence(v)) = &self.arities {
            if self.literal_count != Spec::Exactly(v.len()) {
                return bad("arity sequence length must equal the literal count");
            }
        }
        if let Some(Spec::Between(a, b)) = &self.arities {
            if a > b {
                return bad("arity range is empty");
            }
        }
        Ok(())
    }

    /// Whether a metarule belongs to the language.
    pub fn contains(&self, m: &Metarule) -> bool {
        let len = m.clause.len();
        if !self.literal_count.values().contains(&len) {
            return false;
        }
        let arities: Vec<Option<usize>> = m.clause.atoms().map(Atom::arity).collect();
        match &self.arities {
            None => true,
            Some(Spec::Sequence(v)) => arities.iter().zip(v).all(|(a, b)| *a == Some(*b)),
            Some(spec) => {
                let allowed = spec.values();
                arities.iter().all(|a| a.is_some_and(|a| allowed.contains(&a)))
            }
        }
    }

    /// H²₂: at most two body literals, arities at most two.
    pub fn h22() -> Self {
        LanguageDescriptor { literal_count: Spec::Between(1, 3), arities: Some(Spec::Between(0, 2)) }
    }
}

/// Parameters of the cardinality results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountParams {
    /// Maximum number of literals.
    pub k: u32,
    /// Size of the matrix atom set.
    pub a: u32,
    /// Existential plus universal variables.
    pub n: u32,
    /// Predicate symbols.
    pub p: u32,
    /// Constants.
    pub c: u32,
}

impl CountParams {
    pub fn validate(&self) -> Result<()> {
        if [self.k, self.a, self.n, self.p, self.c].contains(&0) {
            return Err(Error::InvalidParameter("all counting parameters must be at least 1".into()));
        }
        Ok(())
    }
}

fn big(n: u64) -> BigInt {
    BigInt::from(n)
}

fn ratio(n: BigInt) -> BigRational {
    BigRational::from_integer(n)
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * big(i))
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn pow(b: u64, e: u64) -> BigInt {
    num_traits::pow(big(b), e as usize)
}

/// Renders a rational with `digits` decimals, rounding toward zero.
pub fn decimal(r: &BigRational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (r * ratio(scale.clone())).to_integer();
    let neg = scaled < BigInt::zero();
    let s = if neg { -scaled.clone() } else { scaled.clone() };
    let int = &s / &scale;
    let frac = &s % &scale;
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = digits)
    }
}

/// Punch metarules of length 1 to `k`.
pub fn punch_count(k: u32) -> u64 {
    k as u64
}

/// Matrix metarules of length `k` over `a` distinct atoms: `k·C(a,k)`.
pub fn matrix_count_exact(k: u32, a: u32) -> BigInt {
    big(k as u64) * binomial(a as u64, k as u64)
}

/// `k·a^k/k!`.
pub fn matrix_bound(k: u32, a: u32) -> BigRational {
    BigRational::new(big(k as u64) * pow(a as u64, k as u64), factorial(k as u64))
}

/// `(2n−1)^n/n!`.
pub fn sort_bound(n: u32) -> BigRational {
    BigRational::new(pow(2 * n as u64 - 1, n as u64), factorial(n as u64))
}

/// The multiset coefficient `C(2n−1, n)`: size-`n` multisets over `n` items.
pub fn multiset_count(n: u32) -> BigInt {
    binomial(2 * n as u64 - 1, n as u64)
}

/// `p^k·c^n`.
pub fn metasub_bound(p: u32, c: u32, k: u32, n: u32) -> BigInt {
    pow(p as u64, k as u64) * pow(c as u64, n as u64)
}

/// `h·b^(k−1)·c^(e−k)`: head symbol, body symbols, existential constants.
pub fn metasub_exact(h: u32, b: u32, c: u32, k: u32, e: u32) -> Result<BigInt> {
    if k == 0 || e < k {
        return Err(Error::InvalidParameter("need k ≥ 1 and e ≥ k".into()));
    }
    Ok(big(h as u64) * pow(b as u64, (k - 1) as u64) * pow(c as u64, (e - k) as u64))
}

/// `c^n`.
pub fn ground_bound(c: u32, n: u32) -> BigInt {
    pow(c as u64, n as u64)
}

/// `c^u`.
pub fn ground_exact(c: u32, u: u32) -> BigInt {
    pow(c as u64, u as u64)
}

/// `Σ_{i=1}^{k} i·a^i·(2n−1)^n·p^i·c^{2n} / (i!·n!)`.
pub fn language_bound(params: CountParams) -> Result<BigRational> {
    params.validate()?;
    let CountParams { k, a, n, p, c } = params;
    let (a, n, p, c) = (a as u64, n as u64, p as u64, c as u64);
    let common = pow(2 * n - 1, n) * pow(c, 2 * n);
    let mut sum = BigRational::zero();
    for i in 1..=k as u64 {
        let num = big(i) * pow(a, i) * &common * pow(p, i);
        sum += BigRational::new(num, factorial(i) * factorial(n));
    }
    Ok(sum)
}

fn guard(projected: u128) -> Result<()> {
    if projected > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded { projected, guard: ENUMERATION_GUARD });
    }
    Ok(())
}

fn to_u128(b: &BigInt) -> u128 {
    b.to_u128().unwrap_or(u128::MAX)
}

/// One punch metarule per length in `[1, k]`.
pub fn enumerate_punch(k: u32) -> Result<Vec<Metarule>> {
    guard(k as u128)?;
    let atom = |i: usize| Atom::Var(Var::new(&pred_var_name(i), Order::Third, Quantifier::Existential));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for len in 1..=k as usize {
        let c = Clause::new(atom(0), (1..len).map(atom).collect());
        if seen.insert(canonical_key(&c)) {
            out.push(Metarule::new(None, c)?);
        }
    }
    Ok(out)
}

/// `a` pairwise variable-disjoint atoms `P_i(x_i, y_i)`.
pub fn distinct_atoms(a: usize) -> Vec<Atom> {
    (0..a)
        .map(|i| {
            Atom::app(
                Term::Var(Var::predicate(&format!("P{i}"))),
                vec![Term::Var(Var::universal(&format!("x{i}"))), Term::Var(Var::universal(&format!("y{i}")))],
            )
        })
        .collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Every length-`k` matrix metarule over the given atoms: each `k`-subset,
/// with each member as the head in turn. Atoms are treated as distinct.
pub fn enumerate_matrix_from_atoms(k: usize, atoms: &[Atom]) -> Result<Vec<Metarule>> {
    guard(to_u128(&matrix_count_exact(k as u32, atoms.len() as u32)))?;
    let mut out = Vec::new();
    for subset in combinations(atoms.len(), k) {
        for &h in &subset {
            let body = subset.iter().filter(|&&i| i != h).map(|&i| atoms[i].clone()).collect();
            out.push(Metarule::new(None, Clause::new(atoms[h].clone(), body))?);
        }
    }
    Ok(out)
}

fn matrix_of_arities(arities: &[usize]) -> Result<Metarule> {
    let mut x = 0;
    let atoms: Vec<Atom> = arities
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let args = (0..n)
                .map(|_| {
                    x += 1;
                    Term::Var(Var::universal(&arg_var_name(x - 1)))
                })
                .collect();
            Atom::app(Term::Var(Var::predicate(&pred_var_name(i))), args)
        })
        .collect();
    Metarule::new(None, Clause::new(atoms[0].clone(), atoms[1..].to_vec()))
}

/// Matrix metarules of length `k` with arities drawn from `arities`,
/// deduplicated modulo renaming and body order.
pub fn enumerate_matrix(k: usize, arities: &Spec) -> Result<Vec<Metarule>> {
    if k == 0 {
        return Err(Error::InvalidParameter("length must be at least 1".into()));
    }
    let seqs: Vec<Vec<usize>> = match arities {
        Spec::Sequence(v) if v.len() == k => vec![v.clone()],
        Spec::Sequence(_) => return Err(Error::InvalidParameter("arity sequence length must equal k".into())),
        spec => {
            let vals = spec.values();
            guard((vals.len() as u128).saturating_pow(k as u32))?;
            let mut seqs = vec![vec![]];
            for _ in 0..k {
                seqs = seqs
                    .into_iter()
                    .flat_map(|s| vals.iter().map(move |&v| [s.clone(), vec![v]].concat()))
                    .collect();
            }
            seqs
        }
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for seq in seqs {
        let m = matrix_of_arities(&seq)?;
        if seen.insert(canonical_key(&m.clause)) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Filters for [`enumerate_sort`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SortOptions {
    /// Also let predicate variables coincide.
    pub share_predicates: bool,
    /// Also try existential quantification for each first-order variable.
    pub existential: bool,
    pub fully_connected_only: bool,
    /// Reject heads that repeat a variable, e.g. `P(x,x)`.
    pub distinct_head_vars: bool,
}

/// Restricted growth strings: every set partition of `n` positions.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max {
            cur.push(b);
            go(i + 1, n, if b == max { max + 1 } else { max }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, 0, &mut Vec::new(), &mut out);
    out
}

pub fn bell(n: usize) -> BigInt {
    // Bell triangle.
    let mut row = vec![BigInt::one()];
    for _ in 1..=n {
        let mut next = vec![row.last().cloned().expect("nonempty row")];
        for v in &row {
            let x = next.last().expect("nonempty") + v;
            next.push(x);
        }
        row = next;
    }
    row[0].clone()
}

/// Sort metarules obtained from a matrix metarule by identifying variable
/// positions, one set partition at a time.
pub fn enumerate_sort(m: &Metarule, opts: SortOptions) -> Result<Vec<Metarule>> {
    if m.taxon != Taxon::Matrix {
        return Err(Error::WrongTaxon { expected: "matrix".into(), found: m.taxon.to_string() });
    }
    let shape: Vec<usize> = m.clause.atoms().map(|a| a.arity().unwrap_or(0)).collect();
    let npos: usize = shape.iter().sum();
    let nlit = shape.len();
    let mut projected = bell(npos);
    if opts.existential {
        projected *= pow(2, npos as u64);
    }
    if opts.share_predicates {
        projected *= bell(nlit);
    }
    guard(to_u128(&projected))?;

    let pred_parts = if opts.share_predicates { set_partitions(nlit) } else { vec![(0..nlit).collect()] };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for arg_part in set_partitions(npos) {
        let classes = arg_part.iter().max().map_or(0, |m| m + 1);
        let quant_masks: u32 = if opts.existential { 1 << classes } else { 1 };
        for mask in 0..quant_masks {
            for pp in &pred_parts {
                let var = |cls: usize| {
                    if mask & (1 << cls) != 0 {
                        Var::existential(&format!("X{cls}"))
                    } else {
                        Var::universal(&format!("x{cls}"))
                    }
                };
                let mut pos = 0;
                let atoms: Vec<Atom> = shape
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| {
                        let args = (0..n)
                            .map(|_| {
                                pos += 1;
                                Term::Var(var(arg_part[pos - 1]))
                            })
                            .collect();
                        Atom::app(Term::Var(Var::predicate(&format!("P{}", pp[i]))), args)
                    })
                    .collect();
                let clause = Clause::new(atoms[0].clone(), atoms[1..].to_vec());
                let Ok(taxon) = crate::logic::classify(&clause) else { continue };
                if taxon != Taxon::Sort {
                    continue;
                }
                if opts.fully_connected_only && !fully_connected(&clause)? {
                    continue;
                }
                if opts.distinct_head_vars {
                    let hv = clause.head.args();
                    if (0..hv.len()).any(|i| hv[i + 1..].contains(&hv[i])) {
                        continue;
                    }
                }
                if seen.insert(canonical_key(&clause)) {
                    out.push(Metarule::new(None, prettify(&clause))?);
                }
            }
        }
    }
    Ok(out)
}

/// Size-`n` multisets over `n` variables, as multiplicity vectors.
pub fn variable_multisets(n: usize) -> Result<Vec<Vec<usize>>> {
    guard(to_u128(&multiset_count(n as u32)))?;
    fn go(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for m in 0..=left {
            cur[i] = m;
            go(i + 1, left - m, cur, out);
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        go(0, n, &mut vec![0; n], &mut out);
    }
    Ok(out)
}

/// The multisets that can occur in sort metarules: some variable is
/// shared, so some multiplicity is at least two.
pub fn sort_multisets(n: usize) -> Result<Vec<Vec<usize>>> {
    Ok(variable_multisets(n)?.into_iter().filter(|m| m.iter().any(|&x| x >= 2)).collect())
}

fn product(choices: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out = vec![vec![]];
    for c in choices {
        out = out
            .into_iter()
            .flat_map(|prefix| c.iter().map(move |x| [prefix.clone(), vec![x.clone()]].concat()))
            .collect();
    }
    out
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// The `e`-tuples `(H, B1..B(k−1), c1..c(e−k))` substituted into a sort
/// metarule of length `k`.
pub fn metasub_tuples(heads: &[&str], bodies: &[&str], consts: &[&str], k: usize, e: usize) -> Result<Vec<Vec<String>>> {
    let projected = metasub_exact(heads.len() as u32, bodies.len() as u32, consts.len() as u32, k as u32, e as u32)?;
    guard(to_u128(&projected))?;
    let mut choices = vec![owned(heads)];
    choices.extend(std::iter::repeat_n(owned(bodies), k - 1));
    choices.extend(std::iter::repeat_n(owned(consts), e - k));
    Ok(product(&choices))
}

/// The `u`-tuples of constants for the universal variables.
pub fn ground_tuples(consts: &[&str], u: usize) -> Result<Vec<Vec<String>>> {
    guard(to_u128(&ground_exact(consts.len() as u32, u as u32)))?;
    Ok(product(&vec![owned(consts); u]))
}

/// Symbol names `s0, s1, ..` for brute-force enumerations.
pub fn symbols(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_metarule;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn closed_forms() {
        assert_eq!(punch_count(3), 3);
        assert_eq!(matrix_count_exact(3, 3), BigInt::from(3));
        assert_eq!(matrix_count_exact(2, 1), BigInt::zero());
        assert_eq!(matrix_count_exact(3, 5), BigInt::from(30));
        assert_eq!(sort_bound(2), q(9, 2));
        assert_eq!(sort_bound(1), q(1, 1));
        assert_eq!(metasub_exact(1, 2, 3, 3, 4).unwrap(), BigInt::from(12));
        assert_eq!(ground_exact(3, 3), BigInt::from(27));
        assert_eq!(decimal(&q(9, 2), 3), "4.500");
    }

    #[test]
    fn listed_tuples_match_the_worked_examples() {
        let t = metasub_tuples(&["p"], &["q", "r"], &["a", "b", "c"], 3, 4).unwrap();
        assert_eq!(t.len(), 12);
        assert_eq!(t[0], ["p", "q", "q", "a"]);
        assert_eq!(t[11], ["p", "r", "r", "c"]);
        let g = ground_tuples(&["a", "b", "c"], 3).unwrap();
        assert_eq!(g.len(), 27);
        assert_eq!(g[1], ["a", "a", "b"]);
    }

    #[test]
    fn language_bound_single_summand() {
        let p = CountParams { k: 1, a: 3, n: 2, p: 2, c: 2 };
        // a·(2n−1)^n·p·c^{2n}/n! = 3·9·2·16/2
        assert_eq!(language_bound(p).unwrap(), q(432, 1));
        let doubled = CountParams { c: 4, ..p };
        assert_eq!(language_bound(doubled).unwrap(), q(432 * 16, 1));
    }

    #[test]
    fn enumerators() {
        assert_eq!(enumerate_punch(4).unwrap().len(), 4);
        let mono = enumerate_matrix(2, &Spec::Exactly(2)).unwrap();
        assert_eq!(mono.len(), 1);
        assert_eq!(mono[0].clause.arrow(), "P(x,y)←Q(z,u)");
        assert_eq!(variable_multisets(2).unwrap().len(), 3);
        assert_eq!(set_partitions(4).len(), 15);
        assert_eq!(bell(4), BigInt::from(15));
        let m = parse_metarule("P(x,y) :- Q(z,u)").unwrap();
        let opts = SortOptions { fully_connected_only: true, ..Default::default() };
        let sorts: Vec<String> = enumerate_sort(&m, opts).unwrap().iter().map(|m| m.clause.arrow()).collect();
        assert!(sorts.contains(&"P(x,y)←Q(x,y)".to_string()));
        assert!(sorts.contains(&"P(x,y)←Q(y,x)".to_string()));
        assert!(sorts.contains(&"P(x,x)←Q(x,x)".to_string()));
    }

    #[test]
    fn guard_refuses_large_enumerations() {
        let e = enumerate_matrix_from_atoms(6, &distinct_atoms(60)).unwrap_err();
        assert!(matches!(e, Error::GuardExceeded { .. }));
    }

    #[test]
    fn descriptors() {
        assert!(LanguageDescriptor::new(Spec::Exactly(0), None).is_err());
        assert!(LanguageDescriptor::new(Spec::Exactly(3), Some(Spec::Sequence(vec![2, 2]))).is_err());
        let h22 = LanguageDescriptor::h22();
        assert!(h22.contains(&parse_metarule("P(x,y) :- Q(x,z), R(z,y)").unwrap()));
        assert!(!h22.contains(&parse_metarule("P(x,y,z) :- Q(x,z), R(y,z)").unwrap()));
    }
}

//! Meta-subsumption and the v-, l- and vl-specialisation relations, plus
//! generalisation from sort up to matrix and punch metarules.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::logic::{
    apply, arg_var_name, pred_var_name, Atom, Clause, Literal, MetaSubstitution, Metarule, Order,
    Quantifier, Taxon, Term, Value, Var,
};

/// Literals of a clause with duplicates collapsed, head first.
fn literal_set(c: &Clause) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::new();
    for l in c.literals() {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

type Map = BTreeMap<Var, Value>;

fn bind(map: &mut Map, v: &Var, val: Value) -> bool {
    match map.get(v) {
        Some(old) => *old == val,
        None => {
            map.insert(v.clone(), val);
            true
        }
    }
}

/// One-way matching: variables of `c` bind, everything in `d` is rigid.
fn match_term(c: &Term, d: &Term, map: &mut Map) -> bool {
    match (c, d) {
        (Term::Var(v), _) => {
            if let Term::Var(w) = d {
                if w.order != v.order {
                    return false;
                }
            }
            bind(map, v, Value::Term(d.clone()))
        }
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| match_term(x, y, map))
        }
        _ => false,
    }
}

fn match_atom(c: &Atom, d: &Atom, map: &mut Map) -> bool {
    match (c, d) {
        (Atom::Var(v), _) => bind(map, v, Value::Atom(d.clone())),
        (Atom::App { .. }, Atom::Var(_)) => false,
        (Atom::App { pred: p, args: xs }, Atom::App { pred: q, args: ys }) => {
            xs.len() == ys.len() && match_term(p, q, map) && xs.iter().zip(ys).all(|(x, y)| match_term(x, y, map))
        }
    }
}

/// Enumerates maps from the literals of `c` to those of `d` under one
/// consistent substitution. `k` gets the substitution and the image indices
/// and returns true to stop.
fn search(
    c: &[Literal],
    d: &[Literal],
    injective: bool,
    i: usize,
    map: &mut Map,
    image: &mut Vec<usize>,
    k: &mut dyn FnMut(&Map, &[usize]) -> bool,
) -> bool {
    if i == c.len() {
        return k(map, image);
    }
    for (j, dl) in d.iter().enumerate() {
        if dl.positive != c[i].positive || (injective && image.contains(&j)) {
            continue;
        }
        let mut m = map.clone();
        if match_atom(&c[i].atom, &dl.atom, &mut m) {
            image.push(j);
            let stop = search(c, d, injective, i + 1, &mut m, image, k);
            image.pop();
            if stop {
                *map = m;
                return true;
            }
        }
    }
    false
}

fn to_meta(map: &Map) -> MetaSubstitution {
    let mut ms = MetaSubstitution::new();
    for (k, v) in map {
        ms.insert(k.clone(), v.clone());
    }
    ms
}

fn find(c: &Clause, d: &Clause, injective: bool, mut accept: impl FnMut(&Map, &[usize], usize) -> bool) -> Option<MetaSubstitution> {
    let cl = literal_set(c);
    let dl = literal_set(d);
    if injective && cl.len() > dl.len() {
        return None;
    }
    let mut map = Map::new();
    let mut image = Vec::new();
    let n = dl.len();
    let found = search(&cl, &dl, injective, 0, &mut map, &mut image, &mut |m, img| accept(m, img, n));
    found.then(|| to_meta(&map))
}

/// Returns a witness `ϑΘ` with `apply(c, ϑΘ) ⊆ d`, mapping the literals of
/// `c` injectively into those of `d`.
pub fn meta_subsumes(c: &Clause, d: &Clause) -> Option<MetaSubstitution> {
    find(c, d, true, |_, _, _| true)
}

/// Checks a witness: `apply(c, ms)` is a literal subset of `d`.
pub fn verify_witness(c: &Clause, d: &Clause, ms: &MetaSubstitution) -> bool {
    let Ok(inst) = apply(c, ms) else {
        return false;
    };
    let dl = literal_set(d);
    literal_set(&inst).iter().all(|l| dl.contains(l))
}

/// Literals of `d` not covered by `apply(c, ms)`.
pub fn residual(c: &Clause, d: &Clause, ms: &MetaSubstitution) -> Result<Vec<Literal>> {
    let inst = literal_set(&apply(c, ms)?);
    Ok(literal_set(d).into_iter().filter(|l| !inst.contains(l)).collect())
}

/// `m2` is `m1` under some substitution, compared as literal sets.
pub fn is_v_spec(m1: &Clause, m2: &Clause) -> bool {
    find(m1, m2, false, |_, img, n| (0..n).all(|j| img.contains(&j))).is_some()
}

/// `m2` is `m1` (up to a renaming) plus extra literals.
pub fn is_l_spec(m1: &Clause, m2: &Clause) -> bool {
    find(m1, m2, true, |m, _, _| {
        let mut seen = Vec::new();
        m.iter().all(|(k, v)| {
            let w = match v {
                Value::Term(Term::Var(w)) => w,
                Value::Atom(Atom::Var(w)) => w,
                _ => return false,
            };
            if w.order != k.order || w.quant != k.quant || seen.contains(&w) {
                return false;
            }
            seen.push(w);
            true
        })
    })
    .is_some()
}

/// Both kinds at once: `apply(m1, ϑΘ) ∪ L = m2` for some `ϑΘ` and `L`.
pub fn is_vl_spec(m1: &Clause, m2: &Clause) -> bool {
    find(m1, m2, false, |_, _, _| true).is_some()
}

/// Replaces every variable occurrence in every literal with a fresh one.
pub fn generalise_to_matrix(m: &Metarule) -> Result<Metarule> {
    if !matches!(m.taxon, Taxon::Sort | Taxon::Matrix) {
        return Err(Error::WrongTaxon { expected: "sort".into(), found: m.taxon.to_string() });
    }
    let (mut p, mut x) = (0, 0);
    let mut fresh = |a: &Atom| -> Atom {
        let args = a
            .args()
            .iter()
            .map(|_| {
                x += 1;
                Term::Var(Var::universal(&arg_var_name(x - 1)))
            })
            .collect();
        p += 1;
        Atom::app(Term::Var(Var::predicate(&pred_var_name(p - 1))), args)
    };
    let head = fresh(&m.clause.head);
    let body = m.clause.body.iter().map(&mut fresh).collect();
    Metarule::new(None, Clause::new(head, body))
}

/// Replaces every literal with a fresh third-order variable.
pub fn generalise_to_punch(m: &Metarule) -> Result<Metarule> {
    if !matches!(m.taxon, Taxon::Sort | Taxon::Matrix) {
        return Err(Error::WrongTaxon { expected: "matrix".into(), found: m.taxon.to_string() });
    }
    let var = |i: usize| Atom::Var(Var::new(&pred_var_name(i), Order::Third, Quantifier::Existential));
    let body = (1..m.clause.len()).map(var).collect();
    Metarule::new(None, Clause::new(var(0), body))
}

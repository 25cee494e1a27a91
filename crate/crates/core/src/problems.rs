//! MIL problems: the text format, built-in metarule libraries and
//! dataset generators.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logic::{canonical_key, Atom, Clause, Metarule, Taxon, Term, ENCAPSULATION_SYMBOL};
use crate::resolution::ProofConfig;
use crate::syntax::{lex, parse_metarule, Mode, Parser, Tok};

pub const DEFAULT_INVENTED: usize = 8;

/// The sextuple of positive and negative examples, background knowledge,
/// metarules and invented symbols, plus the proof configuration.
#[derive(Clone, Debug)]
pub struct MilProblem {
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
    pub bk: Vec<Clause>,
    pub metarules: Vec<Metarule>,
    pub invented: Vec<String>,
    pub config: ProofConfig,
}

impl Default for MilProblem {
    fn default() -> Self {
        MilProblem {
            pos: Vec::new(),
            neg: Vec::new(),
            bk: Vec::new(),
            metarules: Vec::new(),
            invented: invented_pool(DEFAULT_INVENTED),
            config: ProofConfig::default(),
        }
    }
}

/// `$1 .. $n`.
pub fn invented_pool(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("${i}")).collect()
}

impl MilProblem {
    /// Checks that examples are ground and disjoint, and that the
    /// encapsulation symbol is not used as an object-level predicate.
    pub fn validate(&self) -> Result<()> {
        for a in self.pos.iter().chain(&self.neg) {
            if !a.is_ground() {
                return Err(Error::NonGround(a.to_string()));
            }
        }
        let pos: HashSet<&Atom> = self.pos.iter().collect();
        if let Some(a) = self.neg.iter().find(|a| pos.contains(a)) {
            return Err(Error::InvalidProblem(format!("{a} is both a positive and a negative example")));
        }
        let reserved = |a: &Atom| a.symbol().is_some_and(|s| &**s == ENCAPSULATION_SYMBOL);
        let all = self.pos.iter().chain(&self.neg).chain(self.bk.iter().flat_map(|c| c.atoms()));
        for a in all {
            if reserved(a) {
                return Err(Error::ReservedSymbol(ENCAPSULATION_SYMBOL.into()));
            }
        }
        for m in &self.metarules {
            let t = crate::logic::classify(&m.clause)?;
            if t != m.taxon {
                return Err(Error::WrongTaxon { expected: m.taxon.to_string(), found: t.to_string() });
            }
        }
        self.config.validate()
    }

    /// `B ∪ E⁺`.
    pub fn b_star(&self) -> Vec<Clause> {
        self.bk.iter().cloned().chain(self.pos.iter().cloned().map(Clause::fact)).collect()
    }

    /// Predicate symbols with arities of the examples, in first-use order.
    pub fn target_signatures(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for a in &self.pos {
            if let (Some(s), Some(n)) = (a.symbol(), a.arity()) {
                if !out.iter().any(|(t, m)| **t == **s && *m == n) {
                    out.push((s.to_string(), n));
                }
            }
        }
        out
    }
}

fn mr(name: &str, text: &str) -> Metarule {
    let mut m = parse_metarule(text).expect("library metarules parse");
    m.name = Some(name.to_string());
    m
}

/// The fourteen fully-connected H²₂ metarules in their usual order.
pub fn canonical_h22() -> Vec<Metarule> {
    [
        ("Identity", "P(x,y) :- Q(x,y)"),
        ("Inverse", "P(x,y) :- Q(y,x)"),
        ("XY-XY-XY", "P(x,y) :- Q(x,y), R(x,y)"),
        ("XY-XY-YX", "P(x,y) :- Q(x,y), R(y,x)"),
        ("Chain", "P(x,y) :- Q(x,z), R(z,y)"),
        ("XY-XZ-YZ", "P(x,y) :- Q(x,z), R(y,z)"),
        ("XY-YX-XY", "P(x,y) :- Q(y,x), R(x,y)"),
        ("XY-YX-YX", "P(x,y) :- Q(y,x), R(y,x)"),
        ("XY-YZ-XZ", "P(x,y) :- Q(y,z), R(x,z)"),
        ("XY-YZ-ZX", "P(x,y) :- Q(y,z), R(z,x)"),
        ("XY-ZX-YZ", "P(x,y) :- Q(z,x), R(y,z)"),
        ("XY-ZX-ZY", "P(x,y) :- Q(z,x), R(z,y)"),
        ("XY-ZY-XZ", "P(x,y) :- Q(z,y), R(x,z)"),
        ("XY-ZY-ZX", "P(x,y) :- Q(z,y), R(z,x)"),
    ]
    .iter()
    .map(|(n, t)| mr(n, t))
    .collect()
}

pub fn matrix_h22() -> Vec<Metarule> {
    vec![mr("Meta-monadic", "P(x,y) :- Q(z,u)"), mr("Meta-dyadic", "P(x,y) :- Q(z,u), R(v,w)")]
}

/// Punch metarules of length 2 to `k`: `TOM-2 .. TOM-k`.
pub fn punch_upto(k: usize) -> Vec<Metarule> {
    const VARS: [&str; 8] = ["P", "Q", "R", "S", "T", "U", "V", "W"];
    (2..=k.min(VARS.len()))
        .map(|len| {
            let text = format!("{} :- {}", VARS[0], VARS[1..len].join(", "));
            mr(&format!("TOM-{len}"), &text)
        })
        .collect()
}

fn normalise(name: &str) -> String {
    name.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Every named library metarule.
pub fn library() -> Vec<Metarule> {
    let mut all = canonical_h22();
    all.extend(matrix_h22());
    all.extend(punch_upto(8));
    all
}

/// Looks up a library metarule by name, ignoring case and punctuation.
pub fn library_metarule(name: &str) -> Result<Metarule> {
    let key = normalise(name);
    library()
        .into_iter()
        .find(|m| m.name.as_deref().map(normalise).as_deref() == Some(key.as_str()))
        .ok_or_else(|| Error::UnknownMetarule(name.to_string()))
}

/// The library name of the first metarule alpha-equivalent to `m`.
pub fn library_name(m: &Metarule) -> Option<String> {
    let key = canonical_key(&m.clause);
    library().into_iter().find(|l| canonical_key(&l.clause) == key).and_then(|l| l.name)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Pos,
    Neg,
    Bk,
    Metarules,
}

fn header_number(rest: &str, keyword: &str, line: usize, col: usize) -> Result<u64> {
    rest.split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Syntax { line, col, msg: format!("`%{keyword}` needs a number") })
}

fn parse_metarule_statement(p: &mut Parser) -> Result<Metarule> {
    let (line, col) = p.here();
    let keyword = match p.next().map(|s| s.tok) {
        Some(Tok::Ident { text, .. }) => text,
        _ => return Err(Error::Syntax { line, col, msg: "expected `name` or a taxon keyword".into() }),
    };
    if keyword == "name" {
        let (l2, c2) = p.here();
        let name = match p.next().map(|s| s.tok) {
            Some(Tok::Ident { text, .. }) | Some(Tok::Quoted(text)) => text,
            _ => return Err(Error::Syntax { line: l2, col: c2, msg: "expected a metarule name".into() }),
        };
        match p.next().map(|s| s.tok) {
            Some(Tok::End) => {}
            _ => return Err(p.error("expected `.`")),
        }
        return library_metarule(&name);
    }
    let expected = match keyword.as_str() {
        "sort" => Taxon::Sort,
        "matrix" => Taxon::Matrix,
        "punch" => Taxon::Punch,
        "first_order" => Taxon::FirstOrder,
        other => return Err(Error::Syntax { line, col, msg: format!("unknown metarule keyword `{other}`") }),
    };
    let clause = p.clause(Mode::Meta)?;
    let m = Metarule::new(None, clause)?;
    if m.taxon != expected {
        return Err(Error::WrongTaxon { expected: expected.to_string(), found: m.taxon.to_string() });
    }
    Ok(m)
}

/// Reads the line-oriented problem format. Sections may come in any order.
pub fn parse_problem(text: &str) -> Result<MilProblem> {
    let mut p = Parser::new(lex(text, true)?, text);
    let mut prob = MilProblem::default();
    let mut section: Option<Section> = None;
    while let Some(s) = p.peek().cloned() {
        if let Tok::Header { keyword, rest } = &s.tok {
            p.next();
            let num = || header_number(rest, keyword, s.line, s.col);
            section = match keyword.as_str() {
                "pos" => Some(Section::Pos),
                "neg" => Some(Section::Neg),
                "bk" => Some(Section::Bk),
                "metarules" => Some(Section::Metarules),
                "punch" => {
                    prob.metarules.extend(punch_upto(num()? as usize));
                    None
                }
                "matrix" => {
                    match rest.trim() {
                        "h22" | "" => prob.metarules.extend(matrix_h22()),
                        other => return Err(Error::UnknownMetarule(format!("matrix library `{other}`"))),
                    }
                    None
                }
                "invented" => {
                    prob.invented = invented_pool(num()? as usize);
                    None
                }
                "depth" => {
                    prob.config.max_depth = num()? as usize;
                    None
                }
                "inferences" => {
                    prob.config.max_inferences = num()?;
                    None
                }
                _ => unreachable!("the lexer only emits known sections"),
            };
            continue;
        }
        match section {
            None => return Err(Error::Syntax { line: s.line, col: s.col, msg: "statement outside a section".into() }),
            Some(Section::Pos) | Some(Section::Neg) => {
                let c = p.clause(Mode::Object)?;
                if !c.body.is_empty() {
                    return Err(Error::Syntax { line: s.line, col: s.col, msg: "examples cannot have a body".into() });
                }
                if !c.head.is_ground() {
                    return Err(Error::NonGround(c.head.to_string()));
                }
                if section == Some(Section::Pos) {
                    prob.pos.push(c.head);
                } else {
                    prob.neg.push(c.head);
                }
            }
            Some(Section::Bk) => prob.bk.push(p.clause(Mode::Object)?),
            Some(Section::Metarules) => prob.metarules.push(parse_metarule_statement(&mut p)?),
        }
    }
    prob.validate()?;
    Ok(prob)
}

fn metarule_text(m: &Metarule) -> String {
    if let Some(name) = &m.name {
        if let Ok(lib) = library_metarule(name) {
            if canonical_key(&lib.clause) == canonical_key(&m.clause) {
                return format!("name {}.", normalise(name));
            }
        }
    }
    format!("{} {}.", m.taxon, m.clause)
}

/// Writes a problem in the format read by [`parse_problem`].
pub fn serialize_problem(p: &MilProblem) -> String {
    let mut s = String::new();
    let defaults = ProofConfig::default();
    if p.config.max_depth != defaults.max_depth {
        let _ = writeln!(s, "%depth {}", p.config.max_depth);
    }
    if p.config.max_inferences != defaults.max_inferences {
        let _ = writeln!(s, "%inferences {}", p.config.max_inferences);
    }
    let _ = writeln!(s, "%invented {}", p.invented.len());
    s.push_str("%pos\n");
    for a in &p.pos {
        let _ = writeln!(s, "{a}.");
    }
    s.push_str("%neg\n");
    for a in &p.neg {
        let _ = writeln!(s, "{a}.");
    }
    s.push_str("%bk\n");
    for c in &p.bk {
        let _ = writeln!(s, "{c}.");
    }
    s.push_str("%metarules\n");
    for m in &p.metarules {
        let _ = writeln!(s, "{}", metarule_text(m));
    }
    s
}

fn list_of(symbols: &[&str]) -> Term {
    Term::list(symbols.iter().map(|s| Term::constant(s)).collect(), None)
}

fn fact(text: &str) -> Clause {
    crate::syntax::parse_clause(text).expect("generator clauses parse")
}

/// Strings `aⁿbⁿ` for `n` in `1..=n_max`, with the two terminal rules as
/// background knowledge and Chain as the only metarule.
pub fn gen_anbn(n_max: usize) -> Result<MilProblem> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let pos = (1..=n_max)
        .map(|n| {
            let mut w = vec!["a"; n];
            w.extend(vec!["b"; n]);
            Atom::new("S", vec![list_of(&w), Term::nil()])
        })
        .collect();
    Ok(MilProblem {
        pos,
        bk: vec![fact("A([a|X],X)"), fact("B([b|X],X)")],
        metarules: vec![library_metarule("chain")?],
        ..MilProblem::default()
    })
}

/// The two problems of the analogy experiment: `parents/3` and
/// `bounded_by/3`, with no metarules.
pub fn gen_analogy_problems() -> (MilProblem, MilProblem) {
    let atoms = |xs: &[&str]| xs.iter().map(|s| crate::syntax::parse_atom(s).expect("atom")).collect::<Vec<_>>();
    let parents = MilProblem {
        pos: atoms(&["parents(kostas,dora,stassa)"]),
        bk: ["father(kostas,stassa)", "mother(dora,stassa)"].iter().map(|s| fact(s)).collect(),
        ..MilProblem::default()
    };
    let bounded = MilProblem {
        pos: atoms(&["bounded_by(1,2,3)", "bounded_by(3,2,1)"]),
        bk: ["lt(1,3)", "lt(1,2)", "lt(2,3)", "gt(2,1)", "gt(3,1)", "gt(3,2)"].iter().map(|s| fact(s)).collect(),
        ..MilProblem::default()
    };
    (parents, bounded)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Noise {
    None,
    FalsePos,
    FalseNeg,
    Ambiguities,
}

impl std::str::FromStr for Noise {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Noise::None),
            "false_pos" | "false-pos" => Ok(Noise::FalsePos),
            "false_neg" | "false-neg" => Ok(Noise::FalseNeg),
            "ambiguities" => Ok(Noise::Ambiguities),
            other => Err(Error::InvalidParameter(format!("unknown noise kind `{other}`"))),
        }
    }
}

const COLOURS: [&str; 6] = ["red", "blue", "green", "yellow", "cyan", "magenta"];

fn colour_name(i: usize) -> String {
    COLOURS.get(i).map_or_else(|| format!("colour{i}"), |s| s.to_string())
}

/// A complete directed graph whose nodes are coloured round-robin. The
/// target `connected(x,y)` holds for distinct nodes of the same colour.
/// Noise moves `round(rate·|E⁻|)` negatives into `E⁺` (false positives),
/// `round(rate·|E⁺|)` positives into `E⁻` (false negatives), or both.
pub fn gen_coloured_graph(nodes: usize, colours: usize, noise: Noise, rate: f64, seed: u64) -> Result<MilProblem> {
    if nodes < 2 {
        return Err(Error::InvalidParameter("a coloured graph needs at least 2 nodes".into()));
    }
    if colours == 0 {
        return Err(Error::InvalidParameter("at least one colour is needed".into()));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter("noise rate must lie in [0, 1]".into()));
    }
    let node = |i: usize| Term::constant(&format!("n{i}"));
    let mut bk = Vec::new();
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j {
                bk.push(Clause::fact(Atom::new("edge", vec![node(i), node(j)])));
            }
        }
    }
    for i in 0..nodes {
        bk.push(Clause::fact(Atom::new(&colour_name(i % colours), vec![node(i)])));
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j {
                let a = Atom::new("connected", vec![node(i), node(j)]);
                if i % colours == j % colours {
                    pos.push(a);
                } else {
                    neg.push(a);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flip_count = |n: usize| (rate * n as f64).round() as usize;
    let to_pos = if matches!(noise, Noise::FalsePos | Noise::Ambiguities) { flip_count(neg.len()) } else { 0 };
    let to_neg = if matches!(noise, Noise::FalseNeg | Noise::Ambiguities) { flip_count(pos.len()) } else { 0 };
    let moved_pos: Vec<Atom> = neg.choose_multiple(&mut rng, to_pos).cloned().collect();
    let moved_neg: Vec<Atom> = pos.choose_multiple(&mut rng, to_neg).cloned().collect();
    pos.retain(|a| !moved_neg.contains(a));
    neg.retain(|a| !moved_pos.contains(a));
    pos.extend(moved_pos);
    neg.extend(moved_neg);
    let config = ProofConfig { max_depth: 4, max_inferences: 20_000, ..ProofConfig::default() };
    Ok(MilProblem { pos, neg, bk, metarules: canonical_h22(), invented: Vec::new(), config })
}

/// Cells `c_x_y` of a `width × height` grid with four step relations and
/// a `stay` goal test; one `move(start, goal)` task per ordered cell pair.
pub fn gen_grid_world(width: usize, height: usize) -> Result<MilProblem> {
    if width < 1 || height < 1 {
        return Err(Error::InvalidParameter("grid dimensions must be at least 1".into()));
    }
    let cell = |x: usize, y: usize| Term::constant(&format!("c_{x}_{y}"));
    let mut bk = Vec::new();
    let mut step = |name: &str, from: Term, to: Term| bk.push(Clause::fact(Atom::new(name, vec![from, to])));
    for x in 0..width {
        for y in 0..height {
            if y + 1 < height {
                step("up", cell(x, y), cell(x, y + 1));
                step("down", cell(x, y + 1), cell(x, y));
            }
            if x + 1 < width {
                step("right", cell(x, y), cell(x + 1, y));
                step("left", cell(x + 1, y), cell(x, y));
            }
        }
    }
    for x in 0..width {
        for y in 0..height {
            bk.push(Clause::fact(Atom::new("stay", vec![cell(x, y), cell(x, y)])));
        }
    }
    let cells: Vec<Term> = (0..width).flat_map(|x| (0..height).map(move |y| (x, y))).map(|(x, y)| cell(x, y)).collect();
    let pos = cells
        .iter()
        .flat_map(|s| cells.iter().map(move |g| Atom::new("move", vec![s.clone(), g.clone()])))
        .collect();
    let config = ProofConfig { max_depth: 8, max_inferences: 50_000, ..ProofConfig::default() };
    Ok(MilProblem { pos, bk, metarules: canonical_h22(), invented: Vec::new(), config, ..MilProblem::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::fully_connected;

    const ANBN: &str = "% the a^n b^n grammar
%pos
S([a,b],[]).
S([a,a,b,b],[]).
S([a,a,a,b,b,b],[]).
%neg
%bk
A([a|X],X).
B([b|X],X).
%metarules
name chain.
";

    #[test]
    fn parses_the_grammar_problem() {
        let p = parse_problem(ANBN).unwrap();
        assert_eq!(p.pos.len(), 3);
        assert_eq!(p.bk.len(), 2);
        assert_eq!(p.metarules.len(), 1);
        assert_eq!(p.metarules[0].name.as_deref(), Some("Chain"));
        assert_eq!(p.invented.len(), DEFAULT_INVENTED);
        let g = gen_anbn(3).unwrap();
        assert_eq!(g.pos, p.pos);
        assert_eq!(g.bk, p.bk);
    }

    #[test]
    fn round_trip_is_stable() {
        let mut p = parse_problem(ANBN).unwrap();
        p.metarules.push(parse_metarule("P(x,y,z) :- Q(x,z), R(y,z)").unwrap());
        let once = serialize_problem(&p);
        let q = parse_problem(&once).unwrap();
        assert_eq!(serialize_problem(&q), once);
        assert_eq!(q.metarules.len(), 2);
    }

    #[test]
    fn shorthand_sections_and_order() {
        let p = parse_problem("%punch 3\n%matrix h22\n%neg\np(b).\n%pos\np(a).\n").unwrap();
        let names: Vec<_> = p.metarules.iter().filter_map(|m| m.name.clone()).collect();
        assert_eq!(names, ["TOM-2", "TOM-3", "Meta-monadic", "Meta-dyadic"]);
        assert_eq!(p.pos.len(), 1);
        assert_eq!(p.neg.len(), 1);
    }

    #[test]
    fn format_errors() {
        assert!(matches!(parse_problem("%metarules\nname nosuch.\n"), Err(Error::UnknownMetarule(_))));
        assert!(matches!(parse_problem("%pos\np(X).\n"), Err(Error::NonGround(_))));
        assert!(matches!(parse_problem("%pos\np(a\n"), Err(Error::Syntax { line: 2, .. })));
        assert!(matches!(parse_problem("%metarules\nmatrix P(x,y) :- Q(x,y).\n"), Err(Error::WrongTaxon { .. })));
        assert!(matches!(parse_problem("%pos\nm(a).\n"), Err(Error::ReservedSymbol(_))));
    }

    #[test]
    fn libraries() {
        let h22 = canonical_h22();
        assert_eq!(h22.len(), 14);
        assert!(h22.iter().all(|m| fully_connected(&m.clause).unwrap()));
        let keys: HashSet<String> = h22.iter().map(|m| canonical_key(&m.clause)).collect();
        assert_eq!(keys.len(), 14);
        assert_eq!(punch_upto(3).len(), 2);
        assert!(matrix_h22().iter().all(|m| m.taxon == Taxon::Matrix));
        assert_eq!(library_metarule("XY-ZY-ZX").unwrap().clause.arrow(), "P(x,y)←Q(z,y),R(z,x)");
    }

    #[test]
    fn generators() {
        assert_eq!(gen_anbn(1).unwrap().pos.len(), 1);
        let (parents, bounded) = gen_analogy_problems();
        assert_eq!(parents.pos[0].to_string(), "parents(kostas,dora,stassa)");
        assert_eq!(bounded.bk.len(), 6);
        assert!(parents.neg.is_empty() && bounded.neg.is_empty());

        let g = gen_coloured_graph(4, 1, Noise::None, 0.0, 7).unwrap();
        assert_eq!(g.pos.len() + g.neg.len(), 12);
        assert!(g.neg.is_empty());
        let a = gen_coloured_graph(6, 2, Noise::FalsePos, 0.0, 1).unwrap();
        let b = gen_coloured_graph(6, 2, Noise::None, 0.5, 1).unwrap();
        assert_eq!(a.pos, b.pos);
        let c = gen_coloured_graph(6, 2, Noise::Ambiguities, 0.2, 9).unwrap();
        let d = gen_coloured_graph(6, 2, Noise::Ambiguities, 0.2, 9).unwrap();
        assert_eq!((c.pos.clone(), c.neg.clone()), (d.pos, d.neg));
        assert_eq!(c.pos.len() + c.neg.len(), 30);
        assert!(gen_coloured_graph(1, 1, Noise::None, 0.0, 0).is_err());

        let w = gen_grid_world(3, 3).unwrap();
        assert_eq!(w.pos.len(), 81);
        assert!(w.bk.iter().all(Clause::is_ground));
        assert_eq!(gen_grid_world(1, 1).unwrap().pos.len(), 1);
        assert!(gen_grid_world(0, 3).is_err());
    }
}

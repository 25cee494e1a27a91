//! Prolog-ish concrete syntax for clauses and metarules.
//!
//! Two reading modes exist. In object mode an identifier in predicate
//! position is always a symbol, and an argument starting with an upper-case
//! letter or `_` is a variable. In metarule mode an upper-case predicate is a
//! second-order variable, a bare upper-case atom is a third-order variable,
//! lower-case arguments are universal and upper-case ones existential.

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Metarule, Order, Quantifier, Term, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Object,
    Meta,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Identifier, number or `$`-symbol. `upper` marks variable-like names.
    Ident { text: String, upper: bool },
    Quoted(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Bar,
    Neck,
    End,
    /// `%keyword rest` at the start of a line.
    Header { keyword: String, rest: String },
}

#[derive(Clone, Debug)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) const SECTION_KEYWORDS: &[&str] =
    &["pos", "neg", "bk", "metarules", "punch", "matrix", "invented", "depth", "inferences"];

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, col, msg: msg.into() }
}

/// Splits text into tokens. `headers` turns `%keyword` lines into
/// [`Tok::Header`]; any other `%` starts a comment.
pub(crate) fn lex(text: &str, headers: bool) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut line_start = true;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |i: &mut usize, col: &mut usize, n: usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            bump(&mut i, &mut col, 1);
            continue;
        }
        if c == '%' {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != '\n' {
                j += 1;
            }
            let body: String = chars[i + 1..j].iter().collect();
            if headers && line_start && body.starts_with(|ch: char| ch.is_ascii_alphabetic()) {
                let mut parts = body.splitn(2, char::is_whitespace);
                let keyword = parts.next().unwrap_or("").to_string();
                if !SECTION_KEYWORDS.contains(&keyword.as_str()) {
                    return Err(syntax(tl, tc, format!("unknown section `%{keyword}`")));
                }
                let rest = parts.next().unwrap_or("").trim().to_string();
                out.push(Spanned { tok: Tok::Header { keyword, rest }, line: tl, col: tc });
            }
            col += j - i;
            i = j;
            continue;
        }
        line_start = false;
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBrack),
            ']' => Some(Tok::RBrack),
            ',' => Some(Tok::Comma),
            '|' => Some(Tok::Bar),
            '←' => Some(Tok::Neck),
            '.' => Some(Tok::End),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: tl, col: tc });
            bump(&mut i, &mut col, 1);
            continue;
        }
        if c == ':' && chars.get(i + 1) == Some(&'-') {
            out.push(Spanned { tok: Tok::Neck, line: tl, col: tc });
            bump(&mut i, &mut col, 2);
            continue;
        }
        if c == '\'' {
            let mut j = i + 1;
            let mut s = String::new();
            loop {
                match chars.get(j) {
                    None | Some('\n') => return Err(syntax(tl, tc, "unterminated quoted atom")),
                    Some('\\') if chars.get(j + 1) == Some(&'\'') => {
                        s.push('\'');
                        j += 2;
                    }
                    Some('\'') => break,
                    Some(&ch) => {
                        s.push(ch);
                        j += 1;
                    }
                }
            }
            out.push(Spanned { tok: Tok::Quoted(s), line: tl, col: tc });
            let n = j + 1 - i;
            bump(&mut i, &mut col, n);
            continue;
        }
        if c.is_alphanumeric() || c == '_' || c == '$' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            if text == "$" {
                return Err(syntax(tl, tc, "`$` must be followed by a name"));
            }
            let upper = c.is_uppercase() || c == '_';
            out.push(Spanned { tok: Tok::Ident { text, upper }, line: tl, col: tc });
            let n = j - i;
            bump(&mut i, &mut col, n);
            continue;
        }
        return Err(syntax(tl, tc, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    pub(crate) fn new(toks: Vec<Spanned>, text: &str) -> Self {
        let line = text.lines().count().max(1);
        let col = text.lines().last().map_or(0, |l| l.chars().count()) + 1;
        Parser { toks, pos: 0, eof: (line, col) }
    }

    pub(crate) fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    pub(crate) fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.eof, |s| (s.line, s.col))
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, msg)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|s| &s.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn arg_var(text: &str, upper: bool, mode: Mode) -> Option<Var> {
        match mode {
            Mode::Object => upper.then(|| Var::universal(text)),
            Mode::Meta => {
                if text.starts_with('$') || text.starts_with(|c: char| c.is_ascii_digit()) {
                    None
                } else if upper {
                    Some(Var::existential(text))
                } else {
                    Some(Var::universal(text))
                }
            }
        }
    }

    fn term(&mut self, mode: Mode) -> Result<Term> {
        let Some(s) = self.next() else {
            return Err(self.error("expected a term"));
        };
        match s.tok {
            Tok::Ident { text, upper } => {
                if self.eat(&Tok::LParen) {
                    let args = self.args(mode)?;
                    return Ok(Term::compound(&text, args));
                }
                Ok(match Self::arg_var(&text, upper, mode) {
                    Some(v) => Term::Var(v),
                    None => Term::constant(&text),
                })
            }
            Tok::Quoted(text) => {
                if self.eat(&Tok::LParen) {
                    let args = self.args(mode)?;
                    return Ok(Term::compound(&text, args));
                }
                Ok(Term::constant(&text))
            }
            Tok::LBrack => {
                if self.eat(&Tok::RBrack) {
                    return Ok(Term::nil());
                }
                let mut items = vec![self.term(mode)?];
                while self.eat(&Tok::Comma) {
                    items.push(self.term(mode)?);
                }
                let tail = if self.eat(&Tok::Bar) { Some(self.term(mode)?) } else { None };
                self.expect(&Tok::RBrack, "`]`")?;
                Ok(Term::list(items, tail))
            }
            _ => Err(syntax(s.line, s.col, "expected a term")),
        }
    }

    fn args(&mut self, mode: Mode) -> Result<Vec<Term>> {
        let mut args = vec![self.term(mode)?];
        while self.eat(&Tok::Comma) {
            args.push(self.term(mode)?);
        }
        self.expect(&Tok::RParen, "`,` or `)`")?;
        Ok(args)
    }

    pub(crate) fn atom(&mut self, mode: Mode) -> Result<Atom> {
        let Some(s) = self.next() else {
            return Err(self.error("expected an atom"));
        };
        let (text, upper) = match s.tok {
            Tok::Ident { text, upper } => (text, upper),
            Tok::Quoted(text) => (text, false),
            _ => return Err(syntax(s.line, s.col, "expected an atom")),
        };
        let args = if self.eat(&Tok::LParen) { self.args(mode)? } else { Vec::new() };
        let pred = if mode == Mode::Meta && upper {
            if args.is_empty() {
                return Ok(Atom::Var(Var::new(&text, Order::Third, Quantifier::Existential)));
            }
            Term::Var(Var::predicate(&text))
        } else {
            Term::constant(&text)
        };
        Ok(Atom::App { pred, args })
    }

    /// Reads `head.` or `head :- b1, .., bn.`; the final `.` is optional
    /// only at the end of input.
    pub(crate) fn clause(&mut self, mode: Mode) -> Result<Clause> {
        let head = self.atom(mode)?;
        let mut body = Vec::new();
        if self.eat(&Tok::Neck) {
            body.push(self.atom(mode)?);
            while self.eat(&Tok::Comma) {
                body.push(self.atom(mode)?);
            }
        }
        if !self.eat(&Tok::End) && !self.at_end() {
            return Err(self.error("expected `,` or `.`"));
        }
        Ok(Clause::new(head, body))
    }
}

fn single<T>(text: &str, f: impl FnOnce(&mut Parser) -> Result<T>) -> Result<T> {
    let mut p = Parser::new(lex(text, false)?, text);
    let v = f(&mut p)?;
    p.eat(&Tok::End);
    if !p.at_end() {
        return Err(p.error("trailing input"));
    }
    Ok(v)
}

pub fn parse_term(text: &str) -> Result<Term> {
    single(text, |p| p.term(Mode::Object))
}

pub fn parse_atom(text: &str) -> Result<Atom> {
    single(text, |p| p.atom(Mode::Object))
}

pub fn parse_clause(text: &str) -> Result<Clause> {
    single(text, |p| p.clause(Mode::Object))
}

/// Parses a metarule such as `P(x,y) :- Q(x,z), R(z,y)` or `P :- Q, R`.
pub fn parse_metarule(text: &str) -> Result<Metarule> {
    let clause = single(text, |p| p.clause(Mode::Meta))?;
    Metarule::new(None, clause)
}

/// Parses a sequence of `.`-terminated object-level clauses.
pub fn parse_program(text: &str) -> Result<Vec<Clause>> {
    let mut p = Parser::new(lex(text, false)?, text);
    let mut out = Vec::new();
    while !p.at_end() {
        out.push(p.clause(Mode::Object)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Taxon;

    #[test]
    fn lists_desugar_to_cons_cells() {
        let t = parse_term("[a,b|X]").unwrap();
        assert_eq!(t.to_string(), "[a,b|X]");
        let Term::Compound(f, args) = &t else { panic!() };
        assert_eq!(&**f, ".");
        assert_eq!(args[0], Term::constant("a"));
        assert_eq!(parse_term("[]").unwrap(), Term::nil());
    }

    #[test]
    fn predicate_position_is_a_symbol_in_object_mode() {
        let c = parse_clause("A([a|X],X).").unwrap();
        assert_eq!(c.head.symbol().map(|s| &**s), Some("A"));
        assert!(c.head.args()[1].as_var().is_some());
        assert_eq!(c.to_string(), "A([a|X],X)");
    }

    #[test]
    fn metarule_mode_assigns_orders() {
        let m = parse_metarule("P(x,y) :- Q(x,Z), R(Z,y)").unwrap();
        assert_eq!(m.taxon, Taxon::Sort);
        let vs = m.clause.vars();
        assert_eq!(vs[0].order, Order::Second);
        assert_eq!(vs[1].quant, Quantifier::Universal);
        assert!(vs.iter().any(|v| &*v.name == "Z" && v.quant == Quantifier::Existential));
        assert_eq!(parse_metarule("P :- Q, R.").unwrap().taxon, Taxon::Punch);
        assert_eq!(parse_metarule("P(x,y) ← Q(x,y)").unwrap().taxon, Taxon::Sort);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_program("p(a).\nq(b :- r.").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 2, .. }), "{e:?}");
        let e = parse_clause("p(a) & q").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 1, col: 6, .. }), "{e:?}");
    }

    #[test]
    fn invented_symbols_and_quotes_round_trip() {
        for s in ["$1(X,Y) :- S(X,Z), B(Z,Y)", "p('hello world',b)", "bounded_by(1,2,3)"] {
            let c = parse_clause(s).unwrap();
            assert_eq!(parse_clause(&c.to_string()).unwrap(), c);
        }
    }
}

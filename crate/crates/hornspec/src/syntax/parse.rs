//! Hand-rolled parser for the CHC text format.
//!
//! ```text
//! clause   ::= atom [":-" bodyitem ("," bodyitem)*] "."
//! bodyitem ::= atom | relexpr
//! ```
//!
//! Relational expressions use infix `=`, `<`, `>`, `=<`, `>=` over
//! `+ - * /` with integer and decimal literals. Variables match
//! `[A-Z_][A-Za-z0-9_]*`, predicates `[a-z][A-Za-z0-9_]*`, `%` starts a
//! line comment, and `true`/`false` are reserved nullary atoms.

use super::*;
use num_bigint::BigInt;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("predicate {pred} used with arities {first} and {second}")]
    ArityClash {
        pred: String,
        first: usize,
        second: usize,
    },
    #[error("constrained fact with non-empty body: {pred}")]
    FactWithBody { pred: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Lower(String),
    Upper(String),
    Num(Rat),
    Turnstile, // :-
    Dot,
    Comma,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Rel(OpRel),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        self.bump();
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else { break };
            let tok = match c {
                b'a'..=b'z' => Tok::Lower(self.ident()),
                b'A'..=b'Z' | b'_' => Tok::Upper(self.ident()),
                b'0'..=b'9' => Tok::Num(self.number()?),
                b':' => {
                    self.bump();
                    if self.peek() == Some(b'-') {
                        self.bump();
                        Tok::Turnstile
                    } else {
                        return Err(self.err("expected ':-'"));
                    }
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'/' => {
                    self.bump();
                    Tok::Slash
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'<') {
                        self.bump();
                        Tok::Rel(OpRel::Le)
                    } else {
                        Tok::Rel(OpRel::Eq)
                    }
                }
                b'<' => {
                    self.bump();
                    // accept both '=<' and '<=' spellings
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Rel(OpRel::Le)
                    } else {
                        Tok::Rel(OpRel::Lt)
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Rel(OpRel::Ge)
                    } else {
                        Tok::Rel(OpRel::Gt)
                    }
                }
                other => return Err(self.err(format!("unexpected character '{}'", other as char))),
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<Rat, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        let int_part: BigInt = String::from_utf8_lossy(&self.src[start..self.pos])
            .parse()
            .map_err(|_| self.err("bad integer literal"))?;
        // a '.' only belongs to the literal when followed by a digit;
        // otherwise it terminates the clause
        if self.peek() == Some(b'.') && matches!(self.peek2(), Some(c) if c.is_ascii_digit()) {
            self.bump();
            let fs = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
            let frac = &self.src[fs..self.pos];
            let digits: BigInt = String::from_utf8_lossy(frac)
                .parse()
                .map_err(|_| self.err("bad decimal literal"))?;
            let denom = BigInt::from(10u32).pow(frac.len() as u32);
            Ok(Rat::from_integer(int_part) + Rat::new(digits, denom))
        } else {
            Ok(Rat::from_integer(int_part))
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    /// per-clause map from source variable name to Var
    scope: HashMap<String, Var>,
}

impl Parser {
    fn err_at(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|&(_, l, c)| (l, c))
            .or_else(|| self.toks.last().map(|&(_, l, c)| (l, c)))
            .unwrap_or((1, 1));
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_at(format!("expected {what}")))
        }
    }

    fn var(&mut self, name: &str) -> Var {
        if let Some(v) = self.scope.get(name) {
            v.clone()
        } else {
            let v = Var::fresh(name);
            self.scope.insert(name.to_string(), v.clone());
            v
        }
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        self.scope.clear();
        let mut extra = Vec::new();
        let head = self.atom(&mut extra)?;
        let mut constraint = Constraint::Conj(extra);
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::Turnstile) {
            self.bump();
            loop {
                self.body_item(&mut constraint, &mut body)?;
                if self.peek() == Some(&Tok::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::Dot, "'.'")?;
        Ok(Clause {
            head,
            constraint,
            body,
        })
    }

    fn body_item(
        &mut self,
        constraint: &mut Constraint,
        body: &mut Vec<Atom>,
    ) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Lower(name)) => {
                let name = name.clone();
                if name == "true" {
                    self.bump();
                    return Ok(());
                }
                if name == "false" {
                    self.bump();
                    *constraint = Constraint::False;
                    return Ok(());
                }
                let mut extra = Vec::new();
                let atom = self.atom(&mut extra)?;
                *constraint = constraint.and(&Constraint::Conj(extra));
                body.push(atom);
                Ok(())
            }
            Some(_) => {
                let c = self.relexpr()?;
                *constraint = constraint.and(&Constraint::Conj(vec![c]));
                Ok(())
            }
            None => Err(self.err_at("unexpected end of input in clause body")),
        }
    }

    /// Parse `pred(arg,...)`. Non-variable or repeated arguments are
    /// replaced by fresh variables plus equality constraints pushed to
    /// `extra`, so atoms always have distinct variable arguments.
    fn atom(&mut self, extra: &mut Vec<AtomicConstraint>) -> Result<Atom, ParseError> {
        let Some(Tok::Lower(name)) = self.bump() else {
            return Err(self.err_at("expected predicate name"));
        };
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            loop {
                let term = self.term()?;
                let v = match &term {
                    Term::Var(v) if !args.contains(v) => v.clone(),
                    _ => {
                        let fresh = Var::fresh("_G");
                        extra.push(equate(Term::Var(fresh.clone()), term));
                        fresh
                    }
                };
                args.push(v);
                match self.bump() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => return Err(self.err_at("expected ',' or ')' in argument list")),
                }
            }
        }
        Ok(Atom { pred: name, args })
    }

    fn relexpr(&mut self) -> Result<AtomicConstraint, ParseError> {
        let lhs = self.term()?;
        let Some(Tok::Rel(rel)) = self.bump() else {
            return Err(self.err_at("expected relational operator"));
        };
        let rhs = self.term()?;
        Ok(make_atomic(lhs, rel, rhs))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut t = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    t = Term::Add(Box::new(t), Box::new(self.factor()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    t = Term::Sub(Box::new(t), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(t)
    }

    fn factor(&mut self) -> Result<Term, ParseError> {
        let mut t = self.primary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    t = Term::Mul(Box::new(t), Box::new(self.primary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    t = Term::Div(Box::new(t), Box::new(self.primary()?));
                }
                _ => break,
            }
        }
        Ok(t)
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.bump() {
            Some(Tok::Upper(name)) => Ok(Term::Var(self.var(&name))),
            Some(Tok::Num(n)) => Ok(Term::Num(n)),
            Some(Tok::Minus) => Ok(Term::Neg(Box::new(self.primary()?))),
            Some(Tok::LParen) => {
                let t = self.term()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(t)
            }
            _ => Err(self.err_at("expected variable, number, or '('")),
        }
    }
}

/// Try to flatten a term into a linear expression; fails on products or
/// quotients of non-constant sub-terms.
pub(crate) fn linearize(t: &Term) -> Option<LinearExpr> {
    match t {
        Term::Var(v) => Some(LinearExpr::var(v.clone())),
        Term::Num(n) => Some(LinearExpr::constant(n.clone())),
        Term::Add(a, b) => Some(linearize(a)?.add(&linearize(b)?)),
        Term::Sub(a, b) => Some(linearize(a)?.sub(&linearize(b)?)),
        Term::Neg(a) => Some(linearize(a)?.neg()),
        Term::Mul(a, b) => {
            let la = linearize(a)?;
            let lb = linearize(b)?;
            if la.is_constant() {
                Some(lb.scale(&la.constant))
            } else if lb.is_constant() {
                Some(la.scale(&lb.constant))
            } else {
                None
            }
        }
        Term::Div(a, b) => {
            let la = linearize(a)?;
            let lb = linearize(b)?;
            if lb.is_constant() && !num_traits::Zero::is_zero(&lb.constant) {
                Some(la.scale(&(rat(1) / lb.constant)))
            } else {
                None
            }
        }
    }
}

/// Build an atomic constraint from `lhs REL rhs`, normalising to
/// `expr REL 0` when both sides are linear and keeping the pair opaque
/// otherwise. `>=` and `>` are normalised by negating the expression.
pub(crate) fn make_atomic(lhs: Term, rel: OpRel, rhs: Term) -> AtomicConstraint {
    match (linearize(&lhs), linearize(&rhs)) {
        (Some(l), Some(r)) => {
            let (expr, rel) = match rel {
                OpRel::Eq => (l.sub(&r), Rel::Eq),
                OpRel::Le => (l.sub(&r), Rel::Le),
                OpRel::Lt => (l.sub(&r), Rel::Lt),
                OpRel::Ge => (r.sub(&l), Rel::Le),
                OpRel::Gt => (r.sub(&l), Rel::Lt),
            };
            AtomicConstraint::Lin { expr, rel }
        }
        _ => AtomicConstraint::Opaque { lhs, rel, rhs },
    }
}

fn equate(lhs: Term, rhs: Term) -> AtomicConstraint {
    make_atomic(lhs, OpRel::Eq, rhs)
}

fn parse_clauses(text: &str) -> Result<Vec<Clause>, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        toks,
        pos: 0,
        scope: HashMap::new(),
    };
    let mut clauses = Vec::new();
    while parser.peek().is_some() {
        clauses.push(parser.clause()?);
    }
    Ok(clauses)
}

fn check_arities(clauses: &[Clause]) -> Result<(), ParseError> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut check = |a: &Atom| -> Result<(), ParseError> {
        match seen.get(&a.pred) {
            Some(&n) if n != a.arity() => Err(ParseError::ArityClash {
                pred: a.pred.clone(),
                first: n,
                second: a.arity(),
            }),
            Some(_) => Ok(()),
            None => {
                seen.insert(a.pred.clone(), a.arity());
                Ok(())
            }
        }
    };
    for c in clauses {
        check(&c.head)?;
        for a in &c.body {
            check(a)?;
        }
    }
    Ok(())
}

/// Parse a CHC program. Every clause gets its own variable scope.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let clauses = parse_clauses(text)?;
    check_arities(&clauses)?;
    Ok(Program::new(clauses))
}

/// Parse a file of constrained facts (clauses with empty atom bodies),
/// as used for property sets and entry points.
pub fn parse_constrained_facts(text: &str) -> Result<Vec<ConstrainedFact>, ParseError> {
    let clauses = parse_clauses(text)?;
    check_arities(&clauses)?;
    let mut out = Vec::new();
    for c in clauses {
        if !c.body.is_empty() {
            return Err(ParseError::FactWithBody {
                pred: c.head.pred.clone(),
            });
        }
        out.push(ConstrainedFact {
            atom: c.head,
            constraint: c.constraint,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_clause_with_guard_and_call() {
        let p = parse_program("while0(X,Y,M) :- X=<0.").unwrap();
        assert_eq!(p.clauses().len(), 1);
        let c = &p.clauses()[0];
        assert!(c.body.is_empty());
        assert_eq!(c.constraint.conjuncts().len(), 1);
        match &c.constraint.conjuncts()[0] {
            AtomicConstraint::Lin { rel, .. } => assert_eq!(*rel, Rel::Le),
            _ => panic!("expected linear conjunct"),
        }
    }

    #[test]
    fn empty_input_is_empty_program() {
        let p = parse_program("").unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn repeated_body_args_get_fresh_var_and_equality() {
        let p = parse_program("p(X) :- q(X,X).").unwrap();
        let c = &p.clauses()[0];
        let q = &c.body[0];
        assert_ne!(q.args[0], q.args[1]);
        assert_eq!(c.constraint.conjuncts().len(), 1);
    }

    #[test]
    fn nonlinear_becomes_opaque() {
        let p = parse_program("w(X,Z,Z1) :- Z1=X*Z.").unwrap();
        match &p.clauses()[0].constraint.conjuncts()[0] {
            AtomicConstraint::Opaque { .. } => {}
            other => panic!("expected opaque, got {other:?}"),
        }
    }

    #[test]
    fn arity_clash_rejected() {
        let e = parse_program("p(X) :- p(X,X).").unwrap_err();
        assert!(matches!(e, ParseError::ArityClash { .. }));
    }

    #[test]
    fn facts_reject_bodies() {
        let e = parse_constrained_facts("p(X) :- q(X).").unwrap_err();
        assert!(matches!(e, ParseError::FactWithBody { .. }));
    }

    #[test]
    fn nullary_fact_defaults_to_true() {
        let fs = parse_constrained_facts("start.").unwrap();
        assert_eq!(fs.len(), 1);
        assert!(fs[0].constraint.is_true());
        assert_eq!(fs[0].atom.arity(), 0);
    }

    #[test]
    fn syntax_error_carries_position() {
        let e = parse_program("p(X) :- \n q(").unwrap_err();
        match e {
            ParseError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scope_hygiene_across_clauses() {
        let p = parse_program("p(X) :- X>0. q(X) :- X<0.").unwrap();
        let v0 = p.clauses()[0].vars();
        let v1 = p.clauses()[1].vars();
        assert!(v0.iter().all(|v| !v1.contains(v)));
    }
}

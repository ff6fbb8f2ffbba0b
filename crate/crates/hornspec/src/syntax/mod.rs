//! Abstract syntax for constrained Horn clause programs.
//!
//! A program is a sequence of clauses `head :- constraint, body-atoms`.
//! Atom arguments are always variables; the parser factors arithmetic
//! sub-terms out into fresh variables and equality constraints, so every
//! clause in memory satisfies that normal form.

mod parse;
mod print;

pub use parse::{parse_constrained_facts, parse_program, ParseError};
pub use print::{render_clause, render_constraint, render_fact, render_program};

use num_rational::BigRational;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

/// Exact rational scalar used throughout.
pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

static VAR_COUNTER: AtomicU64 = AtomicU64::new(1);

/// A logic variable. The `id` keeps variables distinct across
/// renaming-apart generations; the name is only for printing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub id: u64,
}

impl Var {
    /// Fresh variable with a globally unique id.
    pub fn fresh(name: &str) -> Var {
        Var {
            name: name.to_string(),
            id: VAR_COUNTER.fetch_add(1, Ordering::Relaxed),
        }
    }
}

/// A linear expression `sum(coeff_i * var_i) + constant` with exact
/// rational coefficients. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LinearExpr {
    pub terms: BTreeMap<Var, Rat>,
    pub constant: Rat,
}

impl LinearExpr {
    pub fn constant(c: Rat) -> LinearExpr {
        LinearExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> LinearExpr {
        let mut terms = BTreeMap::new();
        terms.insert(v, rat(1));
        LinearExpr {
            terms,
            constant: rat(0),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, v: &Var) -> Rat {
        self.terms.get(v).cloned().unwrap_or_else(|| rat(0))
    }

    pub fn add(&self, other: &LinearExpr) -> LinearExpr {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            let e = out.terms.entry(v.clone()).or_insert_with(|| rat(0));
            *e += c;
        }
        out.constant += &other.constant;
        out.normalize();
        out
    }

    pub fn scale(&self, k: &Rat) -> LinearExpr {
        let mut out = LinearExpr {
            terms: self
                .terms
                .iter()
                .map(|(v, c)| (v.clone(), c * k))
                .collect(),
            constant: &self.constant * k,
        };
        out.normalize();
        out
    }

    pub fn sub(&self, other: &LinearExpr) -> LinearExpr {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn neg(&self) -> LinearExpr {
        self.scale(&rat(-1))
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| !num_traits::Zero::is_zero(c));
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.terms.keys()
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> LinearExpr {
        LinearExpr {
            terms: self
                .terms
                .iter()
                .map(|(v, c)| (map.get(v).cloned().unwrap_or_else(|| v.clone()), c.clone()))
                .collect(),
            constant: self.constant.clone(),
        }
    }
}

/// Relation of a linear atomic constraint, in `expr REL 0` normal form.
/// `>=` and `>` from the source are normalised by negating the expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    /// expr <= 0
    Le,
    /// expr < 0
    Lt,
    /// expr = 0
    Eq,
}

/// Relation symbol of an opaque (non-linear) constraint, kept as written.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpRel {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl OpRel {
    pub fn symbol(self) -> &'static str {
        match self {
            OpRel::Eq => "=",
            OpRel::Lt => "<",
            OpRel::Gt => ">",
            OpRel::Le => "=<",
            OpRel::Ge => ">=",
        }
    }
}

/// Arithmetic term as parsed; only used inside opaque constraints, where
/// a non-linear sub-term (e.g. `X*Z`) prevents linearisation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Num(Rat),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Neg(Box<Term>),
}

impl Term {
    pub fn vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => out.push(v.clone()),
            Term::Num(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Term::Neg(a) => a.vars(out),
        }
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Term {
        match self {
            Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::Num(r) => Term::Num(r.clone()),
            Term::Add(a, b) => Term::Add(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Term::Sub(a, b) => Term::Sub(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Term::Mul(a, b) => Term::Mul(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Term::Div(a, b) => Term::Div(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Term::Neg(a) => Term::Neg(Box::new(a.rename(map))),
        }
    }
}

/// One atomic constraint. Linear atoms are kept in `expr REL 0` form;
/// non-linear atoms are carried verbatim and treated opaquely by the
/// decision procedures.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomicConstraint {
    Lin { expr: LinearExpr, rel: Rel },
    Opaque { lhs: Term, rel: OpRel, rhs: Term },
}

impl AtomicConstraint {
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        match self {
            AtomicConstraint::Lin { expr, .. } => out.extend(expr.vars().cloned()),
            AtomicConstraint::Opaque { lhs, rhs, .. } => {
                lhs.vars(&mut out);
                rhs.vars(&mut out);
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> AtomicConstraint {
        match self {
            AtomicConstraint::Lin { expr, rel } => AtomicConstraint::Lin {
                expr: expr.rename(map),
                rel: *rel,
            },
            AtomicConstraint::Opaque { lhs, rel, rhs } => AtomicConstraint::Opaque {
                lhs: lhs.rename(map),
                rel: *rel,
                rhs: rhs.rename(map),
            },
        }
    }
}

/// A conjunction of atomic constraints. The empty conjunction is `true`;
/// `False` is the distinguished unsatisfiable marker.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    False,
    Conj(Vec<AtomicConstraint>),
}

impl Constraint {
    pub fn tt() -> Constraint {
        Constraint::Conj(Vec::new())
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Constraint::Conj(cs) if cs.is_empty())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Constraint::False)
    }

    pub fn conjuncts(&self) -> &[AtomicConstraint] {
        match self {
            Constraint::False => &[],
            Constraint::Conj(cs) => cs,
        }
    }

    /// Conjoin two constraints, preserving conjunct order.
    pub fn and(&self, other: &Constraint) -> Constraint {
        match (self, other) {
            (Constraint::False, _) | (_, Constraint::False) => Constraint::False,
            (Constraint::Conj(a), Constraint::Conj(b)) => {
                let mut cs = a.clone();
                cs.extend(b.iter().cloned());
                Constraint::Conj(cs)
            }
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for c in self.conjuncts() {
            out.extend(c.vars());
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Constraint {
        match self {
            Constraint::False => Constraint::False,
            Constraint::Conj(cs) => Constraint::Conj(cs.iter().map(|c| c.rename(map)).collect()),
        }
    }
}

/// A predicate atom `p(X1,...,Xn)`. Arguments are variables only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Var>,
}

impl Atom {
    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
                .collect(),
        }
    }
}

/// A constrained Horn clause `head :- constraint, body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub head: Atom,
    pub constraint: Constraint,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.head.args.clone();
        out.extend(self.constraint.vars());
        for a in &self.body {
            out.extend(a.args.iter().cloned());
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Clause {
        Clause {
            head: self.head.rename(map),
            constraint: self.constraint.rename(map),
            body: self.body.iter().map(|a| a.rename(map)).collect(),
        }
    }
}

/// Rename all variables of a clause to fresh ids, keeping names.
pub fn rename_apart(clause: &Clause) -> Clause {
    let map: BTreeMap<Var, Var> = clause
        .vars()
        .into_iter()
        .map(|v| {
            let fresh = Var::fresh(&v.name);
            (v, fresh)
        })
        .collect();
    clause.rename(&map)
}

/// A constrained fact `p(x̄) :- φ` where φ mentions only the atom's
/// variables. The unit of the specialisation worklist and of property sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstrainedFact {
    pub atom: Atom,
    pub constraint: Constraint,
}

impl ConstrainedFact {
    /// Fresh-variable copy, isomorphic to `self`.
    pub fn rename_apart(&self) -> ConstrainedFact {
        let map: BTreeMap<Var, Var> = self
            .atom
            .args
            .iter()
            .map(|v| (v.clone(), Var::fresh(&v.name)))
            .collect();
        ConstrainedFact {
            atom: self.atom.rename(&map),
            constraint: self.constraint.rename(&map),
        }
    }
}

/// A CHC program: an ordered clause sequence plus a predicate index.
#[derive(Clone, Debug, Default)]
pub struct Program {
    clauses: Vec<Clause>,
    index: BTreeMap<String, Vec<usize>>,
}

impl Program {
    pub fn new(clauses: Vec<Clause>) -> Program {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in clauses.iter().enumerate() {
            index.entry(c.head.pred.clone()).or_default().push(i);
        }
        Program { clauses, index }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Clauses whose head predicate is `pred`, in program order.
    pub fn clauses_for(&self, pred: &str) -> impl Iterator<Item = &Clause> {
        self.index
            .get(pred)
            .into_iter()
            .flatten()
            .map(move |&i| &self.clauses[i])
    }

    pub fn clause_count_for(&self, pred: &str) -> usize {
        self.index.get(pred).map_or(0, |v| v.len())
    }

    /// All predicates occurring in heads or bodies, sorted.
    pub fn predicates(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.clauses {
            out.push(c.head.pred.clone());
            for a in &c.body {
                out.push(a.pred.clone());
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Arity of a predicate, from its first occurrence.
    pub fn arity_of(&self, pred: &str) -> Option<usize> {
        for c in &self.clauses {
            if c.head.pred == pred {
                return Some(c.head.arity());
            }
            for a in &c.body {
                if a.pred == pred {
                    return Some(a.arity());
                }
            }
        }
        None
    }
}

/// Structural equality of clauses modulo variable ids: variables are
/// compared by first-occurrence position.
pub fn alpha_eq_clause(a: &Clause, b: &Clause) -> bool {
    fn canon(c: &Clause) -> Clause {
        let mut map = BTreeMap::new();
        let mut next = 0u64;
        let mut touch = |v: &Var, map: &mut BTreeMap<Var, Var>| {
            if !map.contains_key(v) {
                next += 1;
                map.insert(
                    v.clone(),
                    Var {
                        name: String::new(),
                        id: next,
                    },
                );
            }
        };
        for v in &c.head.args {
            touch(v, &mut map);
        }
        for ac in c.constraint.conjuncts() {
            for v in ac.vars() {
                touch(&v, &mut map);
            }
        }
        for a in &c.body {
            for v in &a.args {
                touch(v, &mut map);
            }
        }
        c.rename(&map)
    }
    canon(a) == canon(b)
}

/// Structural program equality modulo variable ids.
pub fn alpha_eq_program(a: &Program, b: &Program) -> bool {
    a.clauses.len() == b.clauses.len()
        && a.clauses
            .iter()
            .zip(b.clauses.iter())
            .all(|(x, y)| alpha_eq_clause(x, y))
}

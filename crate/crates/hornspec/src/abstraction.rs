//! Property sets Ψ and the generalisation operator ρ_Ψ.
//!
//! ρ_Ψ(φ) conjoins every property entailed by φ with the negation of
//! every property whose negation is entailed, provided that negation is
//! itself one of the supplied properties (see [`rho`]); when nothing is
//! entailed the result is `true`. Since Ψ is finite the range of ρ_Ψ is
//! finite, which is what bounds the number of predicate versions the
//! specialiser can generate.
//!
//! ```
//! use hornspec::abstraction::{rho_fact, PropertySet};
//! use hornspec::syntax::{parse_constrained_facts, render_fact};
//!
//! let fact = parse_constrained_facts("p(A,B,C) :- A>0, B>=C, B=<C+1.")
//!     .unwrap()
//!     .remove(0);
//! let props = PropertySet::new(
//!     parse_constrained_facts("p(A,B,C) :- A>0. p(A,B,C) :- B<C.").unwrap(),
//! );
//! // A>0 is entailed; B<C is not, and its negation is not a property
//! assert_eq!(render_fact(&rho_fact(&fact, &props)), "p(A,B,C) :- 0<A.");
//! ```

use crate::constraints::{canonicalize, entails, entails_negation, equivalent, project_onto};
use crate::derivation::{align, canonical_fact};
use crate::syntax::{
    render_fact, Atom, AtomicConstraint, Constraint, ConstrainedFact, Program, Rel, Var,
};
use std::collections::{BTreeMap, BTreeSet};

/// A finite set of constrained facts used as abstraction properties,
/// indexed by predicate.
#[derive(Clone, Debug, Default)]
pub struct PropertySet {
    facts: Vec<ConstrainedFact>,
    index: BTreeMap<String, Vec<usize>>,
}

impl PropertySet {
    pub fn new(facts: Vec<ConstrainedFact>) -> PropertySet {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, f) in facts.iter().enumerate() {
            index.entry(f.atom.pred.clone()).or_default().push(i);
        }
        PropertySet { facts, index }
    }

    pub fn facts(&self) -> &[ConstrainedFact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Properties for `pred`, with constraints renamed positionally onto
    /// the argument tuple `args`.
    pub fn for_atom(&self, pred: &str, args: &[Var]) -> Vec<Constraint> {
        self.index
            .get(pred)
            .into_iter()
            .flatten()
            .filter(|&&i| self.facts[i].atom.arity() == args.len())
            .map(|&i| align(&self.facts[i], args))
            .collect()
    }

    pub fn count_for(&self, pred: &str) -> usize {
        self.index.get(pred).map_or(0, |v| v.len())
    }
}

/// Which predicates the generalisation operator is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbstractionScope {
    All,
    RecursiveOnly,
}

impl AbstractionScope {
    pub fn applies_to(self, pred: &str, recursives: &BTreeSet<String>) -> bool {
        match self {
            AbstractionScope::All => true,
            AbstractionScope::RecursiveOnly => recursives.contains(pred),
        }
    }
}

/// Negate a single atomic linear constraint. Equalities and opaque
/// conjuncts negate to disjunctions, which `Constraint` cannot
/// represent, so they return `None`.
fn negate_atomic(c: &AtomicConstraint) -> Option<AtomicConstraint> {
    match c {
        AtomicConstraint::Lin { expr, rel: Rel::Le } => Some(AtomicConstraint::Lin {
            expr: expr.neg(),
            rel: Rel::Lt,
        }),
        AtomicConstraint::Lin { expr, rel: Rel::Lt } => Some(AtomicConstraint::Lin {
            expr: expr.neg(),
            rel: Rel::Le,
        }),
        _ => None,
    }
}

/// The generalisation operator ρ over an explicit property list (each
/// already renamed onto φ's variables).
///
/// Negations are only representable for single-conjunct inequality
/// properties; other negations are skipped with a warning, which merely
/// weakens the result and so preserves the generalisation property.
pub fn rho(phi: &Constraint, props: &[Constraint]) -> Constraint {
    let mut out: Vec<AtomicConstraint> = Vec::new();
    for psi in props {
        if entails(phi, psi) {
            out.extend(psi.conjuncts().iter().cloned());
        } else if entails_negation(phi, psi) {
            match psi.conjuncts() {
                [single] => {
                    // A negation is only usable as a generalisation when the
                    // complementary constraint is itself one of the supplied
                    // properties: otherwise the result would lie outside the
                    // finite lattice spanned by the property set and the
                    // abstraction could split states the properties were
                    // never meant to distinguish.
                    let in_props = negate_atomic(single).is_some_and(|neg| {
                        let nc = Constraint::Conj(vec![neg]);
                        props.iter().any(|p| equivalent(p, &nc))
                    });
                    if let (true, Some(neg)) = (in_props, negate_atomic(single)) {
                        out.push(neg);
                    } else {
                        log::warn!(
                            "skipping negation of property {} (complement not in the property set)",
                            crate::syntax::render_constraint(psi)
                        );
                    }
                }
                _ => log::warn!(
                    "skipping negation of multi-conjunct property {}",
                    crate::syntax::render_constraint(psi)
                ),
            }
        }
    }
    canonicalize(&Constraint::Conj(out))
}

/// ρ_Ψ lifted to a constrained fact.
pub fn rho_fact(fact: &ConstrainedFact, props: &PropertySet) -> ConstrainedFact {
    let ps = props.for_atom(&fact.atom.pred, &fact.atom.args);
    ConstrainedFact {
        atom: fact.atom.clone(),
        constraint: rho(&fact.constraint, &ps),
    }
}

/// Set-level abstraction α_ρΨ: replace each fact by its ρ image, with
/// the scope restricting which predicates are abstracted. Facts whose
/// abstracted constraint is unsatisfiable are dropped; duplicates are
/// merged up to equivalence.
pub fn alpha(
    facts: &[ConstrainedFact],
    props: &PropertySet,
    scope: AbstractionScope,
    recursives: &BTreeSet<String>,
) -> Vec<ConstrainedFact> {
    let mut out: Vec<ConstrainedFact> = Vec::new();
    for f in facts {
        // an unsatisfiable fact denotes no calls at all; drop it rather
        // than generalising it
        let base = ConstrainedFact {
            atom: f.atom.clone(),
            constraint: canonicalize(&f.constraint),
        };
        if base.constraint.is_false() {
            continue;
        }
        let g = if scope.applies_to(&f.atom.pred, recursives) {
            rho_fact(&base, props)
        } else {
            base
        };
        if g.constraint.is_false() {
            continue;
        }
        let dup = out.iter().any(|h| {
            h.atom.pred == g.atom.pred
                && h.atom.arity() == g.atom.arity()
                && crate::constraints::equivalent(&h.constraint, &align(&g, &h.atom.args))
        });
        if !dup {
            out.push(g);
        }
    }
    out
}

/// Property generator: all constraints appearing in clauses, projected
/// onto each head and body atom and split into atomic properties.
pub fn generate_guard_properties(program: &Program) -> PropertySet {
    let mut out: Vec<ConstrainedFact> = Vec::new();
    for clause in program.clauses() {
        let mut atoms: Vec<&Atom> = vec![&clause.head];
        atoms.extend(clause.body.iter());
        for atom in atoms {
            let proj = canonicalize(&project_onto(&clause.constraint, &atom.args));
            for conjunct in proj.conjuncts() {
                let single = Constraint::Conj(vec![conjunct.clone()]);
                if single.is_true() {
                    continue;
                }
                let fact = canonical_fact(atom, &single);
                let dup = out.iter().any(|h| {
                    h.atom.pred == fact.atom.pred
                        && h.atom.arity() == fact.atom.arity()
                        && crate::constraints::equivalent(
                            &h.constraint,
                            &align(&fact, &h.atom.args),
                        )
                });
                if !dup {
                    out.push(fact);
                }
            }
        }
    }
    PropertySet::new(out)
}

/// Property generator for dimension-instrumented programs: the ladder
/// `last-arg <= j` for `0 <= j <= bound` plus `last-arg >= 0`, for every
/// predicate of the program.
pub fn generate_dimension_properties(program: &Program, bound: i64) -> PropertySet {
    use crate::syntax::{rat, LinearExpr};
    let mut out = Vec::new();
    for pred in program.predicates() {
        let arity = program.arity_of(&pred).unwrap_or(0);
        if arity == 0 {
            continue;
        }
        let atom = Atom {
            pred: pred.clone(),
            args: (0..arity).map(|_| Var::fresh("_G")).collect(),
        };
        let dim = atom.args[arity - 1].clone();
        let mut ladder: Vec<Constraint> = (0..=bound)
            .map(|j| {
                Constraint::Conj(vec![AtomicConstraint::Lin {
                    expr: LinearExpr::var(dim.clone()).add(&LinearExpr::constant(rat(-j))),
                    rel: Rel::Le,
                }])
            })
            .collect();
        ladder.push(Constraint::Conj(vec![AtomicConstraint::Lin {
            expr: LinearExpr::var(dim.clone()).neg(),
            rel: Rel::Le,
        }]));
        for c in ladder {
            out.push(canonical_fact(&atom, &c));
        }
    }
    PropertySet::new(out)
}

/// Parse a Ψ file and report what was read (used by the CLI trace).
pub fn describe(props: &PropertySet) -> String {
    props
        .facts
        .iter()
        .map(render_fact)
        .collect::<Vec<_>>()
        .join("\n")
}

//! Program analyses over CHC programs: the predicate dependency graph,
//! merging of equivalent specialised versions, and the dimension
//! instrumentation for derivation-tree width.
//!
//! ```
//! use hornspec::analysis::{dimension_instrument, emit_dot, pred_dep_graph};
//! use hornspec::syntax::parse_program;
//!
//! let program = parse_program("
//!     t(X) :- X=0.
//!     t(X) :- X>0, L=X-1, R=X-1, t(L), t(R).
//! ").unwrap();
//!
//! let graph = pred_dep_graph(&program);
//! assert_eq!(graph.nodes, vec!["t".to_string()]);
//! assert_eq!(graph.edges.len(), 2); // one edge per body-atom occurrence
//! assert!(emit_dot(&graph).starts_with("digraph g {"));
//!
//! // instrumentation appends a derivation-tree dimension counter
//! let instrumented = dimension_instrument(&program);
//! assert_eq!(instrumented.dim_arg["t"], 1);
//! assert_eq!(instrumented.program.arity_of("t"), Some(2));
//! ```

use crate::constraints::{canonicalize, entails};
use crate::specializer::VersionTable;
use crate::syntax::{
    rat, render_clause, Atom, AtomicConstraint, Clause, Constraint, ConstrainedFact, LinearExpr,
    Program, Rel, Var,
};
use std::collections::{BTreeMap, BTreeSet};

/// Predicate dependency graph: one node per predicate, one edge per body
/// atom occurrence (so multiplicities are preserved).
#[derive(Clone, Debug, Default)]
pub struct PredDepGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

pub fn pred_dep_graph(program: &Program) -> PredDepGraph {
    let nodes = program.predicates();
    let mut edges = Vec::new();
    for c in program.clauses() {
        for a in &c.body {
            edges.push((c.head.pred.clone(), a.pred.clone()));
        }
    }
    PredDepGraph { nodes, edges }
}

/// Graphviz rendering. The empty graph prints as `digraph g {}`.
pub fn emit_dot(graph: &PredDepGraph) -> String {
    if graph.nodes.is_empty() {
        return "digraph g {}".to_string();
    }
    let mut out = String::from("digraph g {\n");
    for n in &graph.nodes {
        out.push_str(&format!("  \"{n}\";\n"));
    }
    for (a, b) in &graph.edges {
        out.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
    }
    out.push('}');
    out
}

fn clause_signature(
    clause: &Clause,
    block_of: &BTreeMap<String, usize>,
    def: Option<&ConstrainedFact>,
) -> String {
    let mut c = clause.clone();
    c.head.pred = String::from("_");
    // A version's defining constraint holds at every call site, so clause
    // conjuncts it entails carry no information for distinguishing versions;
    // drop them before comparing.
    if let Some(def) = def {
        if def.atom.args.len() == c.head.args.len() {
            let map: BTreeMap<Var, Var> = def
                .atom
                .args
                .iter()
                .cloned()
                .zip(c.head.args.iter().cloned())
                .collect();
            let def_c = def.constraint.rename(&map);
            if let Constraint::Conj(atoms) = &c.constraint {
                let kept: Vec<AtomicConstraint> = atoms
                    .iter()
                    .filter(|a| !entails(&def_c, &Constraint::Conj(vec![(*a).clone()])))
                    .cloned()
                    .collect();
                c.constraint = Constraint::Conj(kept);
            }
        }
    }
    c.constraint = canonicalize(&c.constraint);
    for a in &mut c.body {
        a.pred = format!("b{}", block_of[&a.pred]);
    }
    // first-occurrence variable numbering makes the string alpha-invariant
    let mut map = BTreeMap::new();
    for v in c.vars() {
        let n = map.len();
        map.entry(v).or_insert_with(|| Var {
            name: format!("V{n}"),
            id: 0,
        });
    }
    render_clause(&c.rename(&map))
}

fn pred_signature(
    program: &Program,
    pred: &str,
    block_of: &BTreeMap<String, usize>,
    defs: &BTreeMap<String, ConstrainedFact>,
) -> Vec<String> {
    let def = defs.get(pred);
    let mut sigs: Vec<String> = program
        .clauses_for(pred)
        .map(|c| clause_signature(c, block_of, def))
        .collect();
    sigs.sort();
    sigs.dedup();
    sigs
}

/// Merge version predicates that are bisimilar: start from blocks of
/// versions sharing an original predicate and refine until each block's
/// members have identical clause sets up to block identity. Entry-set
/// versions keep their original names.
pub fn minimize_versions(program: &Program, table: &VersionTable) -> Program {
    let orig_of: BTreeMap<String, String> = table
        .entries
        .iter()
        .map(|e| (e.emitted_name().to_string(), e.orig.clone()))
        .collect();
    let defs: BTreeMap<String, ConstrainedFact> = table
        .entries
        .iter()
        .map(|e| (e.emitted_name().to_string(), e.fact.clone()))
        .collect();
    let preds: Vec<String> = program.predicates();

    let mut block_of: BTreeMap<String, usize> = BTreeMap::new();
    {
        let mut by_orig: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &preds {
            let orig = orig_of.get(p).map(String::as_str).unwrap_or(p.as_str());
            let next = by_orig.len();
            let id = *by_orig.entry(orig).or_insert(next);
            block_of.insert(p.clone(), id);
        }
    }

    loop {
        let mut split: BTreeMap<(usize, Vec<String>), usize> = BTreeMap::new();
        let mut next: BTreeMap<String, usize> = BTreeMap::new();
        for p in &preds {
            let key = (block_of[p], pred_signature(program, p, &block_of, &defs));
            let n = split.len();
            let id = *split.entry(key).or_insert(n);
            next.insert(p.clone(), id);
        }
        if next == block_of {
            break;
        }
        block_of = next;
    }

    // representative per block: prefer an entry-set name, else first in
    // program predicate order
    let mut rep: BTreeMap<usize, String> = BTreeMap::new();
    let entry_names: BTreeSet<&str> = table
        .entries
        .iter()
        .filter(|e| e.from_entry_set)
        .map(|e| e.emitted_name())
        .collect();
    for p in &preds {
        let id = block_of[p];
        match rep.get(&id) {
            None => {
                rep.insert(id, p.clone());
            }
            Some(r) => {
                if entry_names.contains(p.as_str()) && !entry_names.contains(r.as_str()) {
                    rep.insert(id, p.clone());
                }
            }
        }
    }

    let mut clauses = Vec::new();
    for c in program.clauses() {
        let id = block_of[&c.head.pred];
        if rep[&id] != c.head.pred {
            continue;
        }
        let mut c = c.clone();
        c.head.pred = rep[&id].clone();
        for a in &mut c.body {
            a.pred = rep[&block_of[&a.pred]].clone();
        }
        clauses.push(c);
    }
    Program::new(clauses)
}

/// A dimension-instrumented program: every predicate gains a trailing
/// argument carrying the dimension of its derivation tree.
#[derive(Clone, Debug)]
pub struct DimProgram {
    pub program: Program,
    /// Position of the dimension argument per predicate (its original arity).
    pub dim_arg: BTreeMap<String, usize>,
}

fn le_zero(e: LinearExpr) -> AtomicConstraint {
    AtomicConstraint::Lin { expr: e, rel: Rel::Le }
}

fn eq_zero(e: LinearExpr) -> AtomicConstraint {
    AtomicConstraint::Lin { expr: e, rel: Rel::Eq }
}

/// Instrument a program with derivation-tree dimension counters.
///
/// Each clause with body atoms `a1..an` is replaced by copies relating
/// the head counter `K` to the body counters `K1..Kn`: either exactly
/// one `Ki` equals `K` and the rest stay below, or at least two equal
/// `K - 1` and the rest stay at most `K - 1`. Facts get `K = 0`. Every
/// copy keeps all counters non-negative.
pub fn dimension_instrument(program: &Program) -> DimProgram {
    let dim_arg: BTreeMap<String, usize> = program
        .predicates()
        .into_iter()
        .map(|p| {
            let a = program.arity_of(&p).unwrap_or(0);
            (p, a)
        })
        .collect();

    let mut clauses = Vec::new();
    for c in program.clauses() {
        let k = Var::fresh("K");
        let head = Atom {
            pred: c.head.pred.clone(),
            args: {
                let mut a = c.head.args.clone();
                a.push(k.clone());
                a
            },
        };
        let ks: Vec<Var> = (0..c.body.len()).map(|i| Var::fresh(&format!("K{i}"))).collect();
        let body: Vec<Atom> = c
            .body
            .iter()
            .zip(&ks)
            .map(|(a, ki)| Atom {
                pred: a.pred.clone(),
                args: {
                    let mut args = a.args.clone();
                    args.push(ki.clone());
                    args
                },
            })
            .collect();
        let nonneg: Vec<AtomicConstraint> = ks
            .iter()
            .map(|ki| le_zero(LinearExpr::var(ki.clone()).neg()))
            .collect();
        let kvar = |v: &Var| LinearExpr::var(v.clone());

        let mut variants: Vec<Vec<AtomicConstraint>> = Vec::new();
        match ks.len() {
            0 => variants.push(vec![eq_zero(kvar(&k))]),
            1 => variants.push(vec![eq_zero(kvar(&k).sub(&kvar(&ks[0])))]),
            n => {
                for i in 0..n {
                    // Ki is the unique maximum: K = Ki, Kj <= K - 1
                    let mut cs = vec![eq_zero(kvar(&k).sub(&kvar(&ks[i])))];
                    for (j, kj) in ks.iter().enumerate() {
                        if j != i {
                            cs.push(le_zero(
                                kvar(kj).sub(&kvar(&k)).add(&LinearExpr::constant(rat(1))),
                            ));
                        }
                    }
                    variants.push(cs);
                }
                for i in 0..n {
                    for j in i + 1..n {
                        // Ki and Kj both reach K - 1, nothing exceeds it
                        let mut cs = vec![
                            eq_zero(kvar(&ks[i]).sub(&kvar(&k)).add(&LinearExpr::constant(rat(1)))),
                            eq_zero(kvar(&ks[j]).sub(&kvar(&k)).add(&LinearExpr::constant(rat(1)))),
                        ];
                        for (m, km) in ks.iter().enumerate() {
                            if m != i && m != j {
                                cs.push(le_zero(
                                    kvar(km).sub(&kvar(&k)).add(&LinearExpr::constant(rat(1))),
                                ));
                            }
                        }
                        variants.push(cs);
                    }
                }
            }
        }
        for extra in variants {
            let mut cs = c.constraint.conjuncts().to_vec();
            cs.extend(extra);
            cs.extend(nonneg.iter().cloned());
            clauses.push(Clause {
                head: head.clone(),
                constraint: if c.constraint.is_false() {
                    Constraint::False
                } else {
                    Constraint::Conj(cs)
                },
                body: body.clone(),
            });
        }
    }
    DimProgram {
        program: Program::new(clauses),
        dim_arg,
    }
}

/// Constraint shape placed on the dimension counter of an entry fact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimensionBound {
    Exact(i64),
    AtMost(i64),
    Above(i64),
}

impl DimensionBound {
    /// The ladder height: properties C<=0 .. C<=d are generated.
    fn ladder(self) -> i64 {
        match self {
            DimensionBound::Exact(d) | DimensionBound::AtMost(d) | DimensionBound::Above(d) => d,
        }
    }
}

/// Build the specialisation inputs for a dimension-bounded run: an entry
/// fact for `pred` whose counter (the trailing argument) is constrained
/// by `bound`, and the ladder property set over every predicate of the
/// instrumented program.
pub fn dimension_bound_setup(
    dim: &DimProgram,
    pred: &str,
    bound: DimensionBound,
) -> (ConstrainedFact, crate::abstraction::PropertySet) {
    let arity = dim.dim_arg.get(pred).map(|a| a + 1).unwrap_or(1);
    let fact = dimension_entry_fact(pred, arity, bound);
    let props = crate::abstraction::generate_dimension_properties(&dim.program, bound.ladder());
    (fact, props)
}

/// Entry fact for an instrumented predicate whose dimension counter (the
/// trailing argument) is constrained by `bound`. The other arguments are
/// unconstrained fresh variables.
pub fn dimension_entry_fact(
    pred: &str,
    instrumented_arity: usize,
    bound: DimensionBound,
) -> ConstrainedFact {
    assert!(instrumented_arity >= 1, "instrumented predicates carry a counter");
    let args: Vec<Var> = (0..instrumented_arity - 1)
        .map(|i| Var::fresh(&format!("A{i}")))
        .chain(std::iter::once(Var::fresh("K")))
        .collect();
    let k = LinearExpr::var(args.last().unwrap().clone());
    let cs = match bound {
        DimensionBound::Exact(d) => vec![eq_zero(k.sub(&LinearExpr::constant(rat(d))))],
        DimensionBound::AtMost(d) => vec![
            le_zero(k.sub(&LinearExpr::constant(rat(d)))),
            le_zero(k.neg()),
        ],
        DimensionBound::Above(d) => vec![le_zero(
            LinearExpr::constant(rat(d + 1)).sub(&k),
        )],
    };
    ConstrainedFact {
        atom: Atom {
            pred: pred.to_string(),
            args,
        },
        constraint: Constraint::Conj(cs),
    }
}

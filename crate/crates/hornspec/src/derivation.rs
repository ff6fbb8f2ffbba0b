//! Unfolding steps, partial derivation trees, partial evaluation of
//! constrained facts, and body-atom collection.
//!
//! ```
//! use hornspec::derivation::{collect, partial_eval, UnfoldingRule};
//! use hornspec::syntax::{parse_constrained_facts, parse_program, render_clause, render_fact};
//!
//! let program = parse_program("
//!     while0(X,Y,M) :- X>0, if0(X,Y,M).
//!     while0(X,Y,M) :- X=<0.
//!     if0(X,Y,M) :- Y<M, Y1=Y+1, while0(X,Y1,M).
//!     if0(X,Y,M) :- Y>=M, X1=X-1, while0(X1,Y,M).
//! ").unwrap();
//! let fact = parse_constrained_facts("while0(A,B,C).").unwrap().remove(0);
//!
//! // every predicate here is a branch point or recursive, so the
//! // branch-or-recursive rule stops after a single unfolding step
//! let rule = UnfoldingRule::BranchOrRecursive { entries: vec!["while0".into()] };
//! let frontier = partial_eval(&fact, &program, &rule).unwrap();
//! assert_eq!(frontier.len(), 2);
//! assert_eq!(render_clause(&frontier[0]), "while0(A,B,C) :- 0<A, if0(A,B,C).");
//!
//! // collect projects each frontier clause's constraint onto its body atoms
//! let calls = collect(&frontier);
//! assert_eq!(calls.len(), 1);
//! assert_eq!(render_fact(&calls[0]), "if0(A,B,C) :- 0<A.");
//! ```

use crate::constraints::{canonicalize, equivalent, is_sat, project_onto, SatResult};
use crate::syntax::{rename_apart, Atom, Clause, Constraint, ConstrainedFact, Program, Var};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DerivationError {
    #[error("predicate mismatch at body index {index}: {found} vs clause head {head}")]
    PredicateMismatch {
        index: usize,
        found: String,
        head: String,
    },
    #[error("partial tree node budget of {budget} exceeded")]
    BudgetExceeded { budget: usize },
}

/// Default cap on partial-tree size; overridable via the
/// `CHCSPEC_NODE_BUDGET` environment variable.
pub const DEFAULT_NODE_BUDGET: usize = 10_000;

pub fn node_budget() -> usize {
    std::env::var("CHCSPEC_NODE_BUDGET")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_NODE_BUDGET)
}

/// Local-termination policy for partial derivation trees. Selection is
/// fixed to leftmost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnfoldingRule {
    /// Stop every branch after one unfolding of the root.
    OneStep,
    /// Unfold until the selected atom's predicate is a branch point
    /// (head of more than one clause) or recursive. The root is always
    /// unfolded at least once. `entries` seeds the dependency-graph
    /// traversal that classifies recursive predicates; when empty, the
    /// evaluated fact's own predicate is used.
    BranchOrRecursive { entries: Vec<String> },
    /// Stop at a fixed depth.
    Depth(usize),
}

impl UnfoldingRule {
    pub fn branch_or_recursive() -> UnfoldingRule {
        UnfoldingRule::BranchOrRecursive {
            entries: Vec::new(),
        }
    }

    pub fn with_entries(&self, entries: &[String]) -> UnfoldingRule {
        match self {
            UnfoldingRule::BranchOrRecursive { entries: e } if e.is_empty() => {
                UnfoldingRule::BranchOrRecursive {
                    entries: entries.to_vec(),
                }
            }
            other => other.clone(),
        }
    }
}

/// Predicates that are the target of a back edge in the predicate
/// dependency graph traversed depth-first from `entries`, in clause
/// order.
pub fn recursive_predicates(program: &Program, entries: &[String]) -> BTreeSet<String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color: BTreeMap<String, Color> = BTreeMap::new();
    let mut recursive = BTreeSet::new();

    fn visit(
        pred: &str,
        program: &Program,
        color: &mut BTreeMap<String, Color>,
        recursive: &mut BTreeSet<String>,
    ) {
        color.insert(pred.to_string(), Color::Grey);
        for clause in program.clauses_for(pred) {
            for atom in &clause.body {
                match color.get(&atom.pred).copied().unwrap_or(Color::White) {
                    Color::White => visit(&atom.pred, program, color, recursive),
                    Color::Grey => {
                        recursive.insert(atom.pred.clone());
                    }
                    Color::Black => {}
                }
            }
        }
        color.insert(pred.to_string(), Color::Black);
    }

    for e in entries {
        if color.get(e).copied().unwrap_or(Color::White) == Color::White {
            visit(e, program, &mut color, &mut recursive);
        }
    }
    recursive
}

/// One derivation step: unfold `c1` with `c2` on the `i`-th body atom.
/// Callers must have renamed the clauses apart. When the combined
/// constraint is unsatisfiable the result is `head :- false`.
pub fn unfold_step(c1: &Clause, c2: &Clause, i: usize) -> Result<Clause, DerivationError> {
    let atom = c1
        .body
        .get(i)
        .ok_or_else(|| DerivationError::PredicateMismatch {
            index: i,
            found: "<none>".to_string(),
            head: c2.head.pred.clone(),
        })?;
    if atom.pred != c2.head.pred || atom.arity() != c2.head.arity() {
        return Err(DerivationError::PredicateMismatch {
            index: i,
            found: format!("{}/{}", atom.pred, atom.arity()),
            head: format!("{}/{}", c2.head.pred, c2.head.arity()),
        });
    }
    // head arguments are distinct variables, so the argument equations
    // x̄ᵢ = ȳ₀ act as a renaming of c2 onto the selected atom
    let map: BTreeMap<Var, Var> = c2
        .head
        .args
        .iter()
        .cloned()
        .zip(atom.args.iter().cloned())
        .collect();
    let constraint = c1.constraint.and(&c2.constraint.rename(&map));
    if is_sat(&constraint) == SatResult::Unsat {
        return Ok(Clause {
            head: c1.head.clone(),
            constraint: Constraint::False,
            body: Vec::new(),
        });
    }
    let mut body: Vec<Atom> = c1.body[..i].to_vec();
    body.extend(c2.body.iter().map(|a| a.rename(&map)));
    body.extend(c1.body[i + 1..].iter().cloned());
    Ok(Clause {
        head: c1.head.clone(),
        constraint,
        body,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Internal,
    CompleteLeaf,
    FailedLeaf,
    IncompleteLeaf,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub clause: Clause,
    pub status: NodeStatus,
    pub depth: usize,
    pub children: Vec<usize>,
}

/// A finite partial derivation tree rooted at `p(x̄) :- φ, p(x̄)`.
#[derive(Clone, Debug)]
pub struct PartialTree {
    pub nodes: Vec<TreeNode>,
}

impl PartialTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Frontier clauses: complete and incomplete leaves, excluding
    /// failing branches, in discovery order.
    pub fn frontier(&self) -> Vec<&Clause> {
        self.nodes
            .iter()
            .filter(|n| {
                matches!(
                    n.status,
                    NodeStatus::CompleteLeaf | NodeStatus::IncompleteLeaf
                )
            })
            .map(|n| &n.clause)
            .collect()
    }

    /// Indented text dump for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, idx: usize, indent: usize, out: &mut String) {
        let n = &self.nodes[idx];
        let tag = match n.status {
            NodeStatus::Internal => "",
            NodeStatus::CompleteLeaf => "  [complete]",
            NodeStatus::FailedLeaf => "  [failed]",
            NodeStatus::IncompleteLeaf => "  [incomplete]",
        };
        out.push_str(&"  ".repeat(indent));
        out.push_str(&crate::syntax::render_clause(&n.clause));
        out.push_str(tag);
        out.push('\n');
        for &c in &n.children {
            self.dump_node(c, indent + 1, out);
        }
    }
}

/// Build the partial derivation tree for fact `A` in `P` under rule `U`.
/// Expansion always selects the leftmost body atom.
pub fn build_partial_tree(
    fact: &ConstrainedFact,
    program: &Program,
    rule: &UnfoldingRule,
) -> Result<PartialTree, DerivationError> {
    build_partial_tree_with_budget(fact, program, rule, node_budget())
}

/// As [`build_partial_tree`], with an explicit node budget.
pub fn build_partial_tree_with_budget(
    fact: &ConstrainedFact,
    program: &Program,
    rule: &UnfoldingRule,
    budget: usize,
) -> Result<PartialTree, DerivationError> {
    let fact = fact.rename_apart();
    let root_clause = Clause {
        head: fact.atom.clone(),
        constraint: fact.constraint.clone(),
        body: vec![fact.atom.clone()],
    };
    let recursive = match rule {
        UnfoldingRule::BranchOrRecursive { entries } => {
            let ents: Vec<String> = if entries.is_empty() {
                vec![fact.atom.pred.clone()]
            } else {
                entries.clone()
            };
            recursive_predicates(program, &ents)
        }
        _ => BTreeSet::new(),
    };
    let mut tree = PartialTree {
        nodes: vec![TreeNode {
            clause: root_clause,
            status: NodeStatus::Internal,
            depth: 0,
            children: Vec::new(),
        }],
    };
    let mut work = vec![0usize];
    while let Some(idx) = work.pop() {
        let (clause, depth) = {
            let n = &tree.nodes[idx];
            (n.clause.clone(), n.depth)
        };
        if clause.constraint.is_false() {
            tree.nodes[idx].status = NodeStatus::FailedLeaf;
            continue;
        }
        if clause.body.is_empty() {
            tree.nodes[idx].status = NodeStatus::CompleteLeaf;
            continue;
        }
        let selected = &clause.body[0];
        let expand = match rule {
            UnfoldingRule::OneStep => depth == 0,
            UnfoldingRule::Depth(k) => depth < *k,
            UnfoldingRule::BranchOrRecursive { .. } => {
                // Stop at branch points, recursive predicates, and source
                // predicates (defined only by constrained facts): unfolding
                // through a source would erase it from every specialised
                // clause, so no version of it could ever be produced.
                let n = program.clause_count_for(&selected.pred);
                let fact_only = n > 0
                    && program
                        .clauses_for(&selected.pred)
                        .all(|c| c.body.is_empty());
                depth == 0
                    || !(recursive.contains(&selected.pred) || n > 1 || fact_only)
            }
        };
        if !expand {
            tree.nodes[idx].status = NodeStatus::IncompleteLeaf;
            continue;
        }
        tree.nodes[idx].status = NodeStatus::Internal;
        let matching: Vec<Clause> = program.clauses_for(&selected.pred).cloned().collect();
        for m in matching {
            let renamed = rename_apart(&m);
            let child = unfold_step(&clause, &renamed, 0)?;
            if tree.nodes.len() >= budget {
                return Err(DerivationError::BudgetExceeded { budget });
            }
            let child_idx = tree.nodes.len();
            tree.nodes.push(TreeNode {
                clause: child,
                status: NodeStatus::Internal,
                depth: depth + 1,
                children: Vec::new(),
            });
            tree.nodes[idx].children.push(child_idx);
            work.push(child_idx);
        }
    }
    Ok(tree)
}

/// Partial evaluation of a constrained fact: the frontier clauses of its
/// partial derivation tree, one per non-failing branch.
pub fn partial_eval(
    fact: &ConstrainedFact,
    program: &Program,
    rule: &UnfoldingRule,
) -> Result<Vec<Clause>, DerivationError> {
    let tree = build_partial_tree(fact, program, rule)?;
    // the root is excluded: with zero children it denotes an empty
    // partial evaluation, not a frontier clause
    Ok(tree
        .nodes
        .iter()
        .skip(1)
        .filter(|n| {
            matches!(
                n.status,
                NodeStatus::CompleteLeaf | NodeStatus::IncompleteLeaf
            )
        })
        .map(|n| n.clause.clone())
        .collect())
}

fn canonical_arg_name(i: usize) -> String {
    const NAMES: [&str; 26] = [
        "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N", "O", "P", "Q", "R",
        "S", "T", "U", "V", "W", "X", "Y", "Z",
    ];
    if i < 26 {
        NAMES[i].to_string()
    } else {
        format!("{}{}", NAMES[i % 26], i / 26)
    }
}

/// Rename a fact onto fresh canonical argument variables A, B, C, ...
pub fn canonical_fact(atom: &Atom, constraint: &Constraint) -> ConstrainedFact {
    let map: BTreeMap<Var, Var> = atom
        .args
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), Var::fresh(&canonical_arg_name(i))))
        .collect();
    ConstrainedFact {
        atom: atom.rename(&map),
        constraint: constraint.rename(&map),
    }
}

/// Collect the constrained body atoms of a clause set: for every body
/// atom, its clause's constraint projected onto the atom's arguments.
/// Duplicates are merged up to constraint equivalence per predicate.
pub fn collect(clauses: &[Clause]) -> Vec<ConstrainedFact> {
    let mut out: Vec<ConstrainedFact> = Vec::new();
    for clause in clauses {
        for atom in &clause.body {
            let proj = canonicalize(&project_onto(&clause.constraint, &atom.args));
            let fact = canonical_fact(atom, &proj);
            let dup = out.iter().any(|f| {
                f.atom.pred == fact.atom.pred
                    && f.atom.arity() == fact.atom.arity()
                    && equivalent(
                        &f.constraint,
                        &align(&fact, &f.atom.args),
                    )
            });
            if !dup {
                out.push(fact);
            }
        }
    }
    out
}

/// Rename a fact's constraint positionally onto another argument tuple.
pub fn align(fact: &ConstrainedFact, onto: &[Var]) -> Constraint {
    let map: BTreeMap<Var, Var> = fact
        .atom
        .args
        .iter()
        .cloned()
        .zip(onto.iter().cloned())
        .collect();
    fact.constraint.rename(&map)
}

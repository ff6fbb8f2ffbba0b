//! The specialisation driver: the fixpoint loop over constrained facts,
//! closedness checking, version-table construction, and the unfold-fold
//! emission of the specialised program.
//!
//! ```
//! use hornspec::abstraction::{AbstractionScope, PropertySet};
//! use hornspec::derivation::UnfoldingRule;
//! use hornspec::specializer::{fixpoint_facts, render_trace_line};
//! use hornspec::syntax::{parse_constrained_facts, parse_program};
//!
//! let program = parse_program("
//!     count(N) :- N>=10.
//!     count(N) :- N<10, N1=N+1, count(N1).
//!     start :- X=0, count(X).
//! ").unwrap();
//! let entry = parse_constrained_facts("start.").unwrap();
//! let props = PropertySet::new(
//!     parse_constrained_facts("count(N) :- N>=0. count(N) :- N>=10.").unwrap(),
//! );
//! let (set, trace, _) = fixpoint_facts(
//!     &program,
//!     &entry,
//!     &props,
//!     &UnfoldingRule::branch_or_recursive(),
//!     AbstractionScope::All,
//! ).unwrap();
//! // start plus one generalised version of count
//! assert_eq!(set.len(), 2);
//! assert_eq!(render_trace_line(&trace[0]), "iteration 1: + count(A) :- 0=<A.");
//! ```

use crate::abstraction::{alpha, rho, AbstractionScope, PropertySet};
use crate::analysis::minimize_versions;
use crate::constraints::{canonicalize, entails, equivalent, project_onto};
use crate::derivation::{
    align, collect, partial_eval, recursive_predicates, DerivationError, UnfoldingRule,
};
use crate::syntax::{render_fact, Atom, Clause, Constraint, ConstrainedFact, Program};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecializeError {
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error("fixpoint iteration budget of {budget} exceeded; the scope/property configuration does not bound the fact set")]
    IterationBudget { budget: usize },
    #[error("facts for {pred} exceeded the finite-range bound {bound} of the property set")]
    RangeBound { pred: String, bound: usize },
    #[error("no fold target for {pred} with constraint {constraint}; closedness violated")]
    FoldTargetMissing { pred: String, constraint: String },
}

/// Default cap on fixpoint iterations.
pub const DEFAULT_ITERATION_BUDGET: usize = 1000;

/// A set of constrained facts with canonical constraints. Insertion
/// order is preserved; no two facts of the same predicate have
/// equivalent constraints.
#[derive(Clone, Debug, Default)]
pub struct FactSet {
    facts: Vec<ConstrainedFact>,
}

impl FactSet {
    pub fn facts(&self) -> &[ConstrainedFact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn count_for(&self, pred: &str) -> usize {
        self.facts.iter().filter(|f| f.atom.pred == pred).count()
    }

    pub fn contains_equivalent(&self, fact: &ConstrainedFact) -> bool {
        self.facts.iter().any(|f| {
            f.atom.pred == fact.atom.pred
                && f.atom.arity() == fact.atom.arity()
                && equivalent(&f.constraint, &align(fact, &f.atom.args))
        })
    }

    /// Insert unless an equivalent fact for the predicate exists; false
    /// facts are rejected. Returns whether the set grew.
    pub fn insert(&mut self, fact: ConstrainedFact) -> bool {
        let fact = ConstrainedFact {
            atom: fact.atom.clone(),
            constraint: canonicalize(&fact.constraint),
        };
        if fact.constraint.is_false() || self.contains_equivalent(&fact) {
            return false;
        }
        self.facts.push(fact);
        true
    }
}

/// One iteration of the fixpoint trace: the facts first reached at this
/// iteration, in insertion order.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub added: Vec<ConstrainedFact>,
}

/// The renaming definitions Def_S: one fresh version predicate per fact
/// of the fixpoint set.
#[derive(Clone, Debug)]
pub struct VersionEntry {
    pub name: String,
    pub orig: String,
    pub fact: ConstrainedFact,
    pub from_entry_set: bool,
}

impl VersionEntry {
    /// The predicate name this version carries in emitted programs:
    /// entry-set versions are renamed back to their original predicate.
    pub fn emitted_name(&self) -> &str {
        if self.from_entry_set {
            &self.orig
        } else {
            &self.name
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VersionTable {
    pub entries: Vec<VersionEntry>,
}

impl VersionTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn apply_pe(
    set: &FactSet,
    program: &Program,
    rule: &UnfoldingRule,
) -> Result<Vec<Clause>, DerivationError> {
    let mut out = Vec::new();
    for f in set.facts() {
        out.extend(partial_eval(f, program, rule)?);
    }
    Ok(out)
}

/// The repeat-loop of the specialisation algorithm: iterate
/// `S <- S ∪ α(collect(pe(S)))` until no new fact is reached. Membership
/// is up to constraint equivalence per predicate.
pub fn fixpoint_facts(
    program: &Program,
    entry_facts: &[ConstrainedFact],
    props: &PropertySet,
    rule: &UnfoldingRule,
    scope: AbstractionScope,
) -> Result<(FactSet, Vec<IterationRecord>, usize), SpecializeError> {
    let entries: Vec<String> = entry_facts.iter().map(|f| f.atom.pred.clone()).collect();
    let rule = rule.with_entries(&entries);
    let recursives = recursive_predicates(program, &entries);

    let mut set = FactSet::default();
    for f in entry_facts {
        set.insert(f.clone());
    }
    let entry_count = set.len();
    let mut trace = Vec::new();
    for iteration in 1..=DEFAULT_ITERATION_BUDGET {
        let unfolded = apply_pe(&set, program, &rule)?;
        let collected = collect(&unfolded);
        let abstracted = alpha(&collected, props, scope, &recursives);
        let mut added = Vec::new();
        for fact in abstracted {
            if set.insert(fact.clone()) {
                if scope == AbstractionScope::All {
                    // ρ has finite range: 3^|Ψ_p| shapes plus the entry facts
                    let bound = 3usize
                        .saturating_pow(props.count_for(&fact.atom.pred).min(12) as u32)
                        + entry_count;
                    if set.count_for(&fact.atom.pred) > bound {
                        return Err(SpecializeError::RangeBound {
                            pred: fact.atom.pred.clone(),
                            bound,
                        });
                    }
                }
                added.push(fact);
            }
        }
        let done = added.is_empty();
        trace.push(IterationRecord { iteration, added });
        if done {
            return Ok((set, trace, entry_count));
        }
    }
    Err(SpecializeError::IterationBudget {
        budget: DEFAULT_ITERATION_BUDGET,
    })
}

/// The loop's exit condition, checked from first principles: every fact
/// of α(collect(pe(S))) is already present in S up to equivalence. This
/// is what guarantees every call site folds onto an existing version.
pub fn check_closedness(
    set: &FactSet,
    program: &Program,
    rule: &UnfoldingRule,
    props: &PropertySet,
    scope: AbstractionScope,
    entries: &[String],
) -> Result<bool, SpecializeError> {
    let rule = rule.with_entries(entries);
    let recursives = recursive_predicates(program, entries);
    let unfolded = apply_pe(set, program, &rule)?;
    let abstracted = alpha(&collect(&unfolded), props, scope, &recursives);
    Ok(abstracted.iter().all(|f| set.contains_equivalent(f)))
}

/// Build Def_S: one fresh version predicate per fact, named
/// `<orig>__v<k>` with `k` the insertion index. The first `entry_count`
/// entries are flagged for rename-back.
pub fn make_definitions(set: &FactSet, entry_count: usize) -> VersionTable {
    let entries = set
        .facts()
        .iter()
        .enumerate()
        .map(|(k, fact)| VersionEntry {
            name: format!("{}__v{}", fact.atom.pred, k),
            orig: fact.atom.pred.clone(),
            fact: fact.clone(),
            from_entry_set: k < entry_count,
        })
        .collect();
    VersionTable { entries }
}

/// Pick the version of `pred` to fold a body atom with constraint
/// `target` onto: first an equivalent version, then the ⪯-least version
/// entailed by `target` (ties broken by table order).
fn fold_target<'t>(
    table: &'t VersionTable,
    pred: &str,
    target: &Constraint,
    raw: &Constraint,
    args: &[crate::syntax::Var],
) -> Option<&'t VersionEntry> {
    let candidates: Vec<&VersionEntry> = table
        .entries
        .iter()
        .filter(|e| e.orig == pred && e.fact.atom.arity() == args.len())
        .collect();
    if let Some(hit) = candidates
        .iter()
        .find(|e| equivalent(&align(&e.fact, args), target))
    {
        return Some(hit);
    }
    // fall back to the least generalisation of the raw projection
    let mut best: Option<&VersionEntry> = None;
    for e in &candidates {
        let ec = align(&e.fact, args);
        if !entails(raw, &ec) {
            continue;
        }
        match best {
            None => best = Some(e),
            Some(b) => {
                let bc = align(&b.fact, args);
                if entails(&ec, &bc) && !entails(&bc, &ec) {
                    best = Some(e);
                }
            }
        }
    }
    best
}

/// The unfold-fold pass: partial-evaluate each version's defining fact,
/// then fold every body atom onto a version predicate. Only clauses for
/// version predicates are emitted; entry-set versions are renamed back
/// to their original predicate names.
pub fn unfoldfold(
    table: &VersionTable,
    program: &Program,
    rule: &UnfoldingRule,
    props: &PropertySet,
    scope: AbstractionScope,
    entries: &[String],
) -> Result<Program, SpecializeError> {
    let rule = rule.with_entries(entries);
    let recursives = recursive_predicates(program, entries);
    let rename: BTreeMap<String, String> = table
        .entries
        .iter()
        .map(|e| (e.name.clone(), e.emitted_name().to_string()))
        .collect();
    let mut clauses = Vec::new();
    for entry in &table.entries {
        for clause in partial_eval(&entry.fact, program, &rule)? {
            let mut body = Vec::new();
            for atom in &clause.body {
                let raw = canonicalize(&project_onto(&clause.constraint, &atom.args));
                let target = if scope.applies_to(&atom.pred, &recursives) {
                    let ps = props.for_atom(&atom.pred, &atom.args);
                    rho(&raw, &ps)
                } else {
                    raw.clone()
                };
                let version = fold_target(table, &atom.pred, &target, &raw, &atom.args)
                    .ok_or_else(|| SpecializeError::FoldTargetMissing {
                        pred: atom.pred.clone(),
                        constraint: crate::syntax::render_constraint(&raw),
                    })?;
                body.push(Atom {
                    pred: rename[&version.name].clone(),
                    args: atom.args.clone(),
                });
            }
            clauses.push(Clause {
                head: Atom {
                    pred: rename[&entry.name].clone(),
                    args: clause.head.args.clone(),
                },
                constraint: clause.constraint.clone(),
                body,
            });
        }
    }
    Ok(Program::new(clauses))
}

#[derive(Clone, Debug, Default)]
pub struct SpecializeOptions {
    /// Merge equivalent versions by partition refinement after emission.
    pub minimize: bool,
}

/// A full specialisation run: the emitted program, the version table,
/// and the iteration trace.
#[derive(Clone, Debug)]
pub struct SpecializeResult {
    pub program: Program,
    pub table: VersionTable,
    pub fixpoint: FactSet,
    pub trace: Vec<IterationRecord>,
}

/// Algorithm SP(P, S0) end to end. Deterministic given its inputs.
pub fn specialize(
    program: &Program,
    entry_facts: &[ConstrainedFact],
    props: &PropertySet,
    rule: &UnfoldingRule,
    scope: AbstractionScope,
    options: &SpecializeOptions,
) -> Result<SpecializeResult, SpecializeError> {
    let entries: Vec<String> = entry_facts.iter().map(|f| f.atom.pred.clone()).collect();
    let (set, trace, entry_count) = fixpoint_facts(program, entry_facts, props, rule, scope)?;
    let table = make_definitions(&set, entry_count);
    let emitted = unfoldfold(&table, program, rule, props, scope, &entries)?;
    let emitted = if options.minimize {
        minimize_versions(&emitted, &table)
    } else {
        emitted
    };
    Ok(SpecializeResult {
        program: emitted,
        table,
        fixpoint: set,
        trace,
    })
}

/// Render a trace line: `iteration N: +fact, +fact`.
pub fn render_trace_line(rec: &IterationRecord) -> String {
    if rec.added.is_empty() {
        format!("iteration {}: fixpoint", rec.iteration)
    } else {
        format!(
            "iteration {}: {}",
            rec.iteration,
            rec.added
                .iter()
                .map(|f| format!("+ {}", render_fact(f)))
                .collect::<Vec<_>>()
                .join("  ")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_constrained_facts, parse_program};
    use std::collections::BTreeSet;

    pub(crate) const LOOP_PROG: &str = "\
start :- while0(X,Y,M).
while0(X,Y,M) :- X>0, if0(X,Y,M).
while0(X,Y,M) :- X=<0.
if0(X,Y,M) :- Y<M, Y1=Y+1, while0(X,Y1,M).
if0(X,Y,M) :- Y>=M, X1=X-1, while0(X1,Y,M).
";

    pub(crate) const LOOP_PSI: &str = "\
while0(A,B,C) :- A>0. while0(A,B,C) :- A=<0.
while0(A,B,C) :- B<C. while0(A,B,C) :- B>=C.
if0(A,B,C) :- B<C. if0(A,B,C) :- B>=C.
";

    fn setup() -> (Program, Vec<ConstrainedFact>, PropertySet) {
        (
            parse_program(LOOP_PROG).unwrap(),
            parse_constrained_facts("start.").unwrap(),
            PropertySet::new(parse_constrained_facts(LOOP_PSI).unwrap()),
        )
    }

    fn fact(src: &str) -> ConstrainedFact {
        parse_constrained_facts(src).unwrap().remove(0)
    }

    #[test]
    fn factset_rejects_equivalent_duplicates() {
        let mut s = FactSet::default();
        assert!(s.insert(fact("p(X) :- X>=1.")));
        assert!(!s.insert(fact("p(Y) :- 2*Y>=2.")));
        assert!(!s.insert(fact("p(X) :- X>0, X<0.")));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn fixpoint_trace_on_nested_loop() {
        let (p, s0, psi) = setup();
        let (set, trace, _) = fixpoint_facts(
            &p,
            &s0,
            &psi,
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::RecursiveOnly,
        )
        .unwrap();
        assert_eq!(set.len(), 6);
        let sizes: Vec<usize> = trace.iter().map(|r| r.added.len()).collect();
        assert_eq!(sizes, vec![1, 1, 2, 1, 0]);
        assert!(set.contains_equivalent(&fact("while0(A,B,C).")));
        assert!(set.contains_equivalent(&fact("if0(A,B,C) :- A>0.")));
        assert!(set.contains_equivalent(&fact("while0(A,B,C) :- A>0.")));
        assert!(set.contains_equivalent(&fact("while0(A,B,C) :- B>=C.")));
        assert!(set.contains_equivalent(&fact("if0(A,B,C) :- A>0, B>=C.")));
    }

    #[test]
    fn fixpoint_with_no_matching_clauses_is_s0() {
        let p = parse_program("q(X) :- X=0.").unwrap();
        let s0 = parse_constrained_facts("p(X).").unwrap();
        let (set, _, _) = fixpoint_facts(
            &p,
            &s0,
            &PropertySet::default(),
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::All,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn closedness_of_fixpoint_and_of_mutilated_sets() {
        let (p, s0, psi) = setup();
        let rule = UnfoldingRule::branch_or_recursive();
        let scope = AbstractionScope::RecursiveOnly;
        let entries = vec!["start".to_string()];
        let (set, _, _) = fixpoint_facts(&p, &s0, &psi, &rule, scope).unwrap();
        assert!(check_closedness(&set, &p, &rule, &psi, scope, &entries).unwrap());
        // S = {start} alone is not closed: collect(pe) reaches while0
        let mut small = FactSet::default();
        small.insert(fact("start."));
        assert!(!check_closedness(&small, &p, &rule, &psi, scope, &entries).unwrap());
        // dropping any non-entry fact breaks closedness
        for skip in 1..set.len() {
            let mut mutilated = FactSet::default();
            for (i, f) in set.facts().iter().enumerate() {
                if i != skip {
                    mutilated.insert(f.clone());
                }
            }
            assert!(
                !check_closedness(&mutilated, &p, &rule, &psi, scope, &entries).unwrap(),
                "dropping fact {skip} kept closedness"
            );
        }
    }

    #[test]
    fn definitions_number_versions_in_insertion_order() {
        let (p, s0, psi) = setup();
        let (set, _, n0) = fixpoint_facts(
            &p,
            &s0,
            &psi,
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::RecursiveOnly,
        )
        .unwrap();
        let table = make_definitions(&set, n0);
        assert_eq!(table.len(), 6);
        assert!(table.entries[0].from_entry_set);
        assert_eq!(table.entries[0].emitted_name(), "start");
        assert!(table.entries[1..].iter().all(|e| !e.from_entry_set));
        let names: Vec<&str> = table.entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "start__v0",
                "while0__v1",
                "if0__v2",
                "while0__v3",
                "while0__v4",
                "if0__v5"
            ]
        );
    }

    #[test]
    fn empty_set_gives_empty_table() {
        let table = make_definitions(&FactSet::default(), 0);
        assert!(table.is_empty());
    }

    #[test]
    fn unfoldfold_emits_six_versions_nine_clauses() {
        let (p, s0, psi) = setup();
        let r = specialize(
            &p,
            &s0,
            &psi,
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::RecursiveOnly,
            &SpecializeOptions::default(),
        )
        .unwrap();
        assert_eq!(r.program.clauses().len(), 9);
        assert_eq!(r.program.predicates().len(), 6);
        // the D> -1, B>=C call folds to the B>=C version, not to true
        let if0v2: Vec<&Clause> = r.program.clauses_for("if0__v2").collect();
        assert_eq!(if0v2.len(), 2);
        let folded: BTreeSet<&str> = if0v2
            .iter()
            .map(|c| c.body[0].pred.as_str())
            .collect();
        assert_eq!(
            folded,
            ["while0__v3", "while0__v4"].into_iter().collect()
        );
    }

    #[test]
    fn single_trivial_entry_round_trips() {
        let p = parse_program("p(X) :- X=0.").unwrap();
        let s0 = parse_constrained_facts("p(X).").unwrap();
        let r = specialize(
            &p,
            &s0,
            &PropertySet::default(),
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::All,
            &SpecializeOptions::default(),
        )
        .unwrap();
        assert_eq!(r.program.clauses().len(), 1);
        assert_eq!(r.program.clauses()[0].head.pred, "p");
    }

    #[test]
    fn false_entry_fact_gives_empty_program() {
        let p = parse_program("p(X) :- X=0.").unwrap();
        let s0 = parse_constrained_facts("p(X) :- false.").unwrap();
        let r = specialize(
            &p,
            &s0,
            &PropertySet::default(),
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::All,
            &SpecializeOptions::default(),
        )
        .unwrap();
        assert!(r.program.is_empty());
    }

    #[test]
    fn trace_is_monotone_under_fact_ordering() {
        let (p, s0, psi) = setup();
        let (set, trace, _) = fixpoint_facts(
            &p,
            &s0,
            &psi,
            &UnfoldingRule::branch_or_recursive(),
            AbstractionScope::RecursiveOnly,
        )
        .unwrap();
        // every added fact is entailment-covered by the final set
        for rec in &trace {
            for f in &rec.added {
                assert!(set
                    .facts()
                    .iter()
                    .any(|g| g.atom.pred == f.atom.pred
                        && entails(&align(f, &g.atom.args), &g.constraint)));
            }
        }
    }

    #[test]
    fn determinism_across_runs() {
        let (p, s0, psi) = setup();
        let run = || {
            let r = specialize(
                &p,
                &s0,
                &psi,
                &UnfoldingRule::branch_or_recursive(),
                AbstractionScope::RecursiveOnly,
                &SpecializeOptions::default(),
            )
            .unwrap();
            crate::syntax::render_program(&r.program)
        };
        assert_eq!(run(), run());
    }
}

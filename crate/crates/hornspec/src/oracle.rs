//! A ground reference oracle: bottom-up evaluation of a program over a
//! finite integer grid. Slow but independent of the symbolic machinery,
//! which makes it usable to cross-check specialisation output.
//!
//! ```
//! use hornspec::oracle::{ground_eval, GridSpec};
//! use hornspec::syntax::parse_program;
//!
//! let program = parse_program("
//!     even(X) :- X=0.
//!     even(X) :- X>=2, X1=X-2, even(X1).
//! ").unwrap();
//! let model = ground_eval(&program, &GridSpec::new(0, 6, 10));
//! let values: Vec<i64> = model.iter().map(|a| a.args[0]).collect();
//! assert_eq!(values, vec![0, 2, 4, 6]);
//! ```

use crate::syntax::{Atom, AtomicConstraint, Clause, OpRel, Program, Rat, Rel, Term, Var};
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// The evaluation domain: every variable ranges over the integers in
/// `[lo, hi]`, and the consequence operator is applied at most `depth`
/// times.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub lo: i64,
    pub hi: i64,
    pub depth: usize,
}

impl GridSpec {
    pub fn new(lo: i64, hi: i64, depth: usize) -> GridSpec {
        assert!(lo <= hi);
        GridSpec { lo, hi, depth }
    }

    fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn values(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// A fully instantiated atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub pred: String,
    pub args: Vec<i64>,
}

type Assignment = BTreeMap<Var, i64>;

fn eval_lin(e: &crate::syntax::LinearExpr, asg: &Assignment) -> Option<Rat> {
    let mut acc = e.constant.clone();
    for (v, c) in &e.terms {
        acc += c * Rat::from_integer((*asg.get(v)?).into());
    }
    Some(acc)
}

fn eval_term(t: &Term, asg: &Assignment) -> Option<Rat> {
    Some(match t {
        Term::Var(v) => Rat::from_integer((*asg.get(v)?).into()),
        Term::Num(r) => r.clone(),
        Term::Add(a, b) => eval_term(a, asg)? + eval_term(b, asg)?,
        Term::Sub(a, b) => eval_term(a, asg)? - eval_term(b, asg)?,
        Term::Mul(a, b) => eval_term(a, asg)? * eval_term(b, asg)?,
        Term::Div(a, b) => {
            let d = eval_term(b, asg)?;
            if d.is_zero() {
                return None;
            }
            eval_term(a, asg)? / d
        }
        Term::Neg(a) => -eval_term(a, asg)?,
    })
}

fn holds(c: &AtomicConstraint, asg: &Assignment) -> Option<bool> {
    match c {
        AtomicConstraint::Lin { expr, rel } => {
            let v = eval_lin(expr, asg)?;
            Some(match rel {
                Rel::Le => !v.is_positive(),
                Rel::Lt => v.is_negative(),
                Rel::Eq => v.is_zero(),
            })
        }
        AtomicConstraint::Opaque { lhs, rel, rhs } => {
            let l = eval_term(lhs, asg)?;
            let r = eval_term(rhs, asg)?;
            Some(match rel {
                OpRel::Eq => l == r,
                OpRel::Lt => l < r,
                OpRel::Gt => l > r,
                OpRel::Le => l <= r,
                OpRel::Ge => l >= r,
            })
        }
    }
}

/// Solve equalities with exactly one unbound variable, to fixpoint.
/// Returns false if a constraint is already violated or a solved value
/// falls off the grid or the integers.
fn propagate(conjuncts: &[AtomicConstraint], asg: &mut Assignment, grid: &GridSpec) -> bool {
    loop {
        let mut progress = false;
        for c in conjuncts {
            if let Some(ok) = holds(c, asg) {
                if !ok {
                    return false;
                }
                continue;
            }
            if let AtomicConstraint::Lin { expr, rel: Rel::Eq } = c {
                let unbound: Vec<&Var> =
                    expr.terms.keys().filter(|v| !asg.contains_key(*v)).collect();
                if let [v] = unbound[..] {
                    let coeff = expr.coeff(v);
                    let mut rest = expr.constant.clone();
                    for (w, cw) in &expr.terms {
                        if w != v {
                            rest += cw * Rat::from_integer(asg[w].into());
                        }
                    }
                    let val = -rest / coeff;
                    if !val.is_integer() {
                        return false;
                    }
                    let val: i64 = match i64::try_from(val.to_integer()) {
                        Ok(v) => v,
                        Err(_) => return false,
                    };
                    if !grid.contains(val) {
                        return false;
                    }
                    asg.insert(v.clone(), val);
                    progress = true;
                }
            }
        }
        if !progress {
            return true;
        }
    }
}

fn check_all(conjuncts: &[AtomicConstraint], asg: &Assignment) -> bool {
    conjuncts.iter().all(|c| holds(c, asg) == Some(true))
}

/// Enumerate all grid assignments of `vars` extending `asg` that make
/// every conjunct hold, calling `emit` for each.
fn enumerate(
    vars: &[Var],
    conjuncts: &[AtomicConstraint],
    asg: &mut Assignment,
    grid: &GridSpec,
    emit: &mut dyn FnMut(&Assignment),
) {
    match vars.split_first() {
        None => {
            if check_all(conjuncts, asg) {
                emit(asg);
            }
        }
        Some((v, rest)) => {
            for val in grid.values() {
                asg.insert(v.clone(), val);
                let mut narrowed = asg.clone();
                if propagate(conjuncts, &mut narrowed, grid) {
                    let remaining: Vec<Var> = rest
                        .iter()
                        .filter(|w| !narrowed.contains_key(w))
                        .cloned()
                        .collect();
                    enumerate(&remaining, conjuncts, &mut narrowed, grid, emit);
                }
            }
            asg.remove(v);
        }
    }
}

fn clause_consequences(
    clause: &Clause,
    model: &BTreeSet<GroundAtom>,
    grid: &GridSpec,
    out: &mut BTreeSet<GroundAtom>,
) {
    if clause.constraint.is_false() {
        return;
    }
    let conjuncts = clause.constraint.conjuncts();

    fn join(
        body: &[Atom],
        conjuncts: &[AtomicConstraint],
        model: &BTreeSet<GroundAtom>,
        grid: &GridSpec,
        asg: &mut Assignment,
        head: &Atom,
        out: &mut BTreeSet<GroundAtom>,
    ) {
        match body.split_first() {
            None => {
                let mut asg = asg.clone();
                if !propagate(conjuncts, &mut asg, grid) {
                    return;
                }
                let free: Vec<Var> = {
                    let mut vs: Vec<Var> = Vec::new();
                    for c in conjuncts {
                        vs.extend(c.vars());
                    }
                    vs.extend(head.args.iter().cloned());
                    vs.sort();
                    vs.dedup();
                    vs.retain(|v| !asg.contains_key(v));
                    vs
                };
                enumerate(&free, conjuncts, &mut asg, grid, &mut |full| {
                    let args: Option<Vec<i64>> =
                        head.args.iter().map(|v| full.get(v).copied()).collect();
                    if let Some(args) = args {
                        if args.iter().all(|&a| grid.contains(a)) {
                            out.insert(GroundAtom {
                                pred: head.pred.clone(),
                                args,
                            });
                        }
                    }
                });
            }
            Some((atom, rest)) => {
                for g in model.iter() {
                    if g.pred != atom.pred || g.args.len() != atom.args.len() {
                        continue;
                    }
                    let mut local = asg.clone();
                    let mut ok = true;
                    for (v, &val) in atom.args.iter().zip(&g.args) {
                        match local.get(v) {
                            Some(&old) if old != val => {
                                ok = false;
                                break;
                            }
                            _ => {
                                local.insert(v.clone(), val);
                            }
                        }
                    }
                    if ok && propagate(conjuncts, &mut local, grid) {
                        join(rest, conjuncts, model, grid, &mut local, head, out);
                    }
                }
            }
        }
    }

    join(
        &clause.body,
        conjuncts,
        model,
        grid,
        &mut Assignment::new(),
        &clause.head,
        out,
    );
}

/// Least model of the program restricted to the grid, computed by at
/// most `grid.depth` rounds of the immediate-consequence operator.
pub fn ground_eval(program: &Program, grid: &GridSpec) -> BTreeSet<GroundAtom> {
    ground_eval_full(program, grid).0
}

/// As [`ground_eval`], also reporting whether a fixpoint was reached
/// within the iteration budget. When false the model is an
/// under-approximation of the grid-restricted least model.
pub fn ground_eval_full(program: &Program, grid: &GridSpec) -> (BTreeSet<GroundAtom>, bool) {
    let mut model = BTreeSet::new();
    for _ in 0..grid.depth {
        let mut next = model.clone();
        for c in program.clauses() {
            clause_consequences(c, &model, grid, &mut next);
        }
        if next == model {
            return (model, true);
        }
        model = next;
    }
    let mut next = model.clone();
    for c in program.clauses() {
        clause_consequences(c, &model, grid, &mut next);
    }
    let done = next == model;
    (model, done)
}

/// A point where two programs disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridWitness {
    pub atom: GroundAtom,
    /// Name the atom carries in the second program.
    pub counterpart: String,
    /// True if the atom is derivable in the first program only.
    pub in_first: bool,
}

/// Compare the grid models of two programs on the predicate pairs of
/// `entry_map` (first-program name to second-program name). Returns the
/// first disagreement found, if any.
pub fn equivalent_on_grid(
    p1: &Program,
    p2: &Program,
    entry_map: &BTreeMap<String, String>,
    grid: &GridSpec,
) -> Option<GridWitness> {
    let m1 = ground_eval(p1, grid);
    let m2 = ground_eval(p2, grid);
    for (a, b) in entry_map {
        let s1: BTreeSet<&Vec<i64>> = m1.iter().filter(|g| &g.pred == a).map(|g| &g.args).collect();
        let s2: BTreeSet<&Vec<i64>> = m2.iter().filter(|g| &g.pred == b).map(|g| &g.args).collect();
        if let Some(args) = s1.difference(&s2).next() {
            return Some(GridWitness {
                atom: GroundAtom {
                    pred: a.clone(),
                    args: (*args).clone(),
                },
                counterpart: b.clone(),
                in_first: true,
            });
        }
        if let Some(args) = s2.difference(&s1).next() {
            return Some(GridWitness {
                atom: GroundAtom {
                    pred: a.clone(),
                    args: (*args).clone(),
                },
                counterpart: b.clone(),
                in_first: false,
            });
        }
    }
    None
}

/// Default cap on tracked dimension values.
pub const DIM_CAP: i64 = 8;

type DimState = (i64, bool);

fn combine(a: DimState, b: DimState) -> DimState {
    match a.0.cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => (a.0, false),
    }
}

fn finish(s: DimState) -> i64 {
    if s.1 {
        s.0
    } else {
        s.0 + 1
    }
}

/// Least model together with, for every atom, the set of dimensions of
/// its derivation trees: a leaf has dimension 0, an inner node the
/// maximum of its children, plus one when at least two children attain
/// it. Dimensions above `cap` are discarded.
pub fn ground_eval_dims(
    program: &Program,
    grid: &GridSpec,
    cap: i64,
) -> BTreeMap<GroundAtom, BTreeSet<i64>> {
    let mut dims: BTreeMap<GroundAtom, BTreeSet<i64>> = BTreeMap::new();
    for _ in 0..grid.depth {
        let model: BTreeSet<GroundAtom> = dims.keys().cloned().collect();
        let mut next = dims.clone();
        for clause in program.clauses() {
            if clause.body.is_empty() {
                let mut heads = BTreeSet::new();
                clause_consequences(clause, &model, grid, &mut heads);
                for h in heads {
                    next.entry(h).or_default().insert(0);
                }
            } else {
                derive_with_dims(clause, &dims, grid, cap, &mut next);
            }
        }
        if next == dims {
            break;
        }
        dims = next;
    }
    dims
}

fn derive_with_dims(
    clause: &Clause,
    dims: &BTreeMap<GroundAtom, BTreeSet<i64>>,
    grid: &GridSpec,
    cap: i64,
    out: &mut BTreeMap<GroundAtom, BTreeSet<i64>>,
) {
    if clause.constraint.is_false() {
        return;
    }
    let conjuncts = clause.constraint.conjuncts();

    fn join(
        body: &[Atom],
        state: Option<DimState>,
        conjuncts: &[AtomicConstraint],
        dims: &BTreeMap<GroundAtom, BTreeSet<i64>>,
        grid: &GridSpec,
        cap: i64,
        asg: &mut Assignment,
        head: &Atom,
        out: &mut BTreeMap<GroundAtom, BTreeSet<i64>>,
    ) {
        match body.split_first() {
            None => {
                let d = finish(state.expect("non-empty body"));
                if d > cap {
                    return;
                }
                let mut asg = asg.clone();
                if !propagate(conjuncts, &mut asg, grid) {
                    return;
                }
                let free: Vec<Var> = {
                    let mut vs: Vec<Var> = Vec::new();
                    for c in conjuncts {
                        vs.extend(c.vars());
                    }
                    vs.extend(head.args.iter().cloned());
                    vs.sort();
                    vs.dedup();
                    vs.retain(|v| !asg.contains_key(v));
                    vs
                };
                enumerate(&free, conjuncts, &mut asg, grid, &mut |full| {
                    let args: Option<Vec<i64>> =
                        head.args.iter().map(|v| full.get(v).copied()).collect();
                    if let Some(args) = args {
                        if args.iter().all(|&a| grid.contains(a)) {
                            out.entry(GroundAtom {
                                pred: head.pred.clone(),
                                args,
                            })
                            .or_default()
                            .insert(d);
                        }
                    }
                });
            }
            Some((atom, rest)) => {
                for (g, ds) in dims.iter() {
                    if g.pred != atom.pred || g.args.len() != atom.args.len() {
                        continue;
                    }
                    let mut local = asg.clone();
                    let mut ok = true;
                    for (v, &val) in atom.args.iter().zip(&g.args) {
                        match local.get(v) {
                            Some(&old) if old != val => {
                                ok = false;
                                break;
                            }
                            _ => {
                                local.insert(v.clone(), val);
                            }
                        }
                    }
                    if !(ok && propagate(conjuncts, &mut local, grid)) {
                        continue;
                    }
                    for &d in ds {
                        let s = (d, true);
                        let next_state = Some(match state {
                            None => s,
                            Some(prev) => combine(prev, s),
                        });
                        if next_state.map(finish) > Some(cap) {
                            continue;
                        }
                        let mut local = local.clone();
                        join(
                            rest, next_state, conjuncts, dims, grid, cap, &mut local, head, out,
                        );
                    }
                }
            }
        }
    }

    join(
        &clause.body,
        None,
        conjuncts,
        dims,
        grid,
        cap,
        &mut Assignment::new(),
        &clause.head,
        out,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn ga(pred: &str, args: &[i64]) -> GroundAtom {
        GroundAtom {
            pred: pred.to_string(),
            args: args.to_vec(),
        }
    }

    #[test]
    fn facts_and_linear_rules() {
        let p = parse_program(
            "nat(X) :- X=0.
             nat(X) :- X=Y+1, nat(Y).",
        )
        .unwrap();
        let m = ground_eval(&p, &GridSpec::new(-3, 3, 10));
        let nats: Vec<i64> = m.iter().map(|g| g.args[0]).collect();
        assert_eq!(nats, vec![0, 1, 2, 3]);
    }

    #[test]
    fn depth_limits_iteration() {
        let p = parse_program(
            "nat(X) :- X=0.
             nat(X) :- X=Y+1, nat(Y).",
        )
        .unwrap();
        let m = ground_eval(&p, &GridSpec::new(0, 100, 3));
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn equality_propagation_reaches_offgrid_intermediates() {
        // Y=X+X is solved by propagation, no grid sweep over Y needed,
        // and off-grid Y kills the instance
        let p = parse_program(
            "base(X) :- X=2.
             double(Y) :- Y=X+X, base(X).",
        )
        .unwrap();
        let m = ground_eval(&p, &GridSpec::new(0, 4, 5));
        assert!(m.contains(&ga("double", &[4])));
        let m2 = ground_eval(&p, &GridSpec::new(0, 3, 5));
        assert!(!m2.iter().any(|g| g.pred == "double"));
    }

    #[test]
    fn strict_and_nonstrict_bounds() {
        let p = parse_program("p(X) :- X>0, X=<2.").unwrap();
        let m = ground_eval(&p, &GridSpec::new(-2, 4, 2));
        assert_eq!(m, [ga("p", &[1]), ga("p", &[2])].into_iter().collect());
    }

    #[test]
    fn opaque_constraints_evaluate_ground() {
        let p = parse_program("p(X,Y) :- Y=X*X, q(X). q(X) :- X>=0, X=<2.").unwrap();
        let m = ground_eval(&p, &GridSpec::new(0, 4, 3));
        let ps: BTreeSet<GroundAtom> = m.into_iter().filter(|g| g.pred == "p").collect();
        assert_eq!(
            ps,
            [ga("p", &[0, 0]), ga("p", &[1, 1]), ga("p", &[2, 4])]
                .into_iter()
                .collect()
        );
    }

    #[test]
    fn nullary_and_binary_joins() {
        let p = parse_program(
            "e(X,Y) :- X=0, Y=1.
             e(X,Y) :- X=1, Y=2.
             path(X,Y) :- e(X,Y).
             path(X,Z) :- e(X,Y), path(Y,Z).
             ok :- path(X,Y), X=0, Y=2.",
        )
        .unwrap();
        let m = ground_eval(&p, &GridSpec::new(0, 2, 6));
        assert!(m.contains(&ga("ok", &[])));
        assert!(m.contains(&ga("path", &[0, 2])));
    }

    #[test]
    fn grid_equivalence_and_witness() {
        let p1 = parse_program("p(X) :- X>=0.").unwrap();
        let p2 = parse_program("q(X) :- X>=1.").unwrap();
        let map: BTreeMap<String, String> = [("p".to_string(), "q".to_string())].into();
        let w = equivalent_on_grid(&p1, &p2, &map, &GridSpec::new(-2, 2, 2)).unwrap();
        assert_eq!(w.atom, ga("p", &[0]));
        assert!(w.in_first);
        let p3 = parse_program("q(X) :- 2*X>=0.").unwrap();
        assert_eq!(equivalent_on_grid(&p1, &p3, &map, &GridSpec::new(-2, 2, 2)), None);
    }

    #[test]
    fn dims_of_lists_and_trees() {
        // a linear chain keeps dimension 0; a binary combination bumps it
        let p = parse_program(
            "leaf(X) :- X=0.
             chain(X) :- X=Y+1, chain(Y).
             chain(X) :- leaf(X).
             tree(X) :- X=Y+1, tree(Y), tree(Z), Z=Y.",
        )
        .unwrap();
        let d = ground_eval_dims(&p, &GridSpec::new(0, 3, 10), DIM_CAP);
        assert_eq!(d[&ga("leaf", &[0])], [0].into_iter().collect());
        assert_eq!(d[&ga("chain", &[3])], [0].into_iter().collect());
        assert!(!d.contains_key(&ga("tree", &[0])));
    }

    #[test]
    fn dims_follow_balanced_growth() {
        // node(N, size): balanced combination raises the dimension once
        // per doubling
        let p = parse_program(
            "t(N) :- N=1.
             t(N) :- N=A+B, t(A), t(B).",
        )
        .unwrap();
        let d = ground_eval_dims(&p, &GridSpec::new(1, 4, 10), DIM_CAP);
        assert_eq!(d[&ga("t", &[1])], [0].into_iter().collect());
        // 2 = 1+1 forces two maximal children: dimension 1 only
        assert_eq!(d[&ga("t", &[2])], [1].into_iter().collect());
        // 3 = 1+2: unique max keeps 1; 4 = 2+2 adds 2, 4 = 1+3 keeps 1
        assert_eq!(d[&ga("t", &[3])], [1].into_iter().collect());
        assert_eq!(d[&ga("t", &[4])], [1, 2].into_iter().collect());
    }

    #[test]
    fn dim_cap_discards_tall_dimensions() {
        let p = parse_program(
            "t(N) :- N=1.
             t(N) :- N=A+B, t(A), t(B).",
        )
        .unwrap();
        let d = ground_eval_dims(&p, &GridSpec::new(1, 8, 12), 1);
        assert!(d[&ga("t", &[8])].iter().all(|&x| x <= 1));
    }
}

//! Shared fixtures for the integration suites: the benchmark programs,
//! their property sets, and a clause-level equivalence matcher used to
//! compare specialised programs against expected listings.

#![allow(dead_code)]

use hornspec::constraints::{equivalent, project_onto};
use hornspec::syntax::{
    parse_constrained_facts, parse_program, Clause, Constraint, ConstrainedFact, Program, Var,
};
use std::collections::BTreeMap;

/// Nested-loop program: an outer counter loop around an if-branch that
/// either advances the inner counter or decrements the outer one.
pub const LOOP_PROG: &str = "\
start :- while0(X,Y,M).
while0(X,Y,M) :- X>0, if0(X,Y,M).
while0(X,Y,M) :- X=<0.
if0(X,Y,M) :- Y<M, Y1=Y+1, while0(X,Y1,M).
if0(X,Y,M) :- Y>=M, X1=X-1, while0(X1,Y,M).
";

pub const LOOP_ENTRY: &str = "start.";

/// Six branch-guard properties for the nested-loop program.
pub const LOOP_PSI_SIX: &str = "\
while0(A,B,C) :- A>0. while0(A,B,C) :- A=<0.
while0(A,B,C) :- B<C. while0(A,B,C) :- B>=C.
if0(A,B,C) :- B<C. if0(A,B,C) :- B>=C.
";

/// Reduced set: only the guards appearing directly in each predicate's
/// own clauses. Too weak to drive any specialisation.
pub const LOOP_PSI_FOUR: &str = "\
while0(A,B,C) :- A>0. while0(A,B,C) :- A=<0.
if0(A,B,C) :- B<C. if0(A,B,C) :- B>=C.
";

/// Enlarged set: extra properties that split more versions than the
/// control flow warrants; minimisation merges them back.
pub const LOOP_PSI_SEVEN: &str = "\
while0(A,B,C) :- A>0. while0(A,B,C) :- A=<0.
while0(A,B,C) :- C>B-1. while0(A,B,C) :- B>=C.
if0(A,B,C) :- A>0. if0(A,B,C) :- B<C. if0(A,B,C) :- B>=C.
";

/// The expected output of specialising `LOOP_PROG` with the six
/// properties: two separated loops.
pub const LOOP_GOLDEN: &str = "\
start :- while0_5(A,B,C).
while0_5(A,B,C) :- A>0, if0_4(A,B,C).
while0_5(A,B,C) :- -A>=0.
if0_4(A,B,C) :- A>0, -B+C>0, B-D= -1, while0_3(A,D,C).
if0_4(A,B,C) :- A>0, B-C>=0, A-D=1, while0_2(D,B,C).
while0_3(A,B,C) :- A>0, if0_4(A,B,C).
while0_2(A,B,C) :- B-C>=0, A>0, if0_1(A,B,C).
while0_2(A,B,C) :- B-C>=0, -A>=0.
if0_1(A,B,C) :- A>0, B-C>=0, A-D=1, while0_2(D,B,C).
";

/// A multiplication loop with a nonlinear update, used to exercise
/// opaque constraints end to end.
pub const POWER_PROG: &str = "\
start :- p0(X,Y,Z).
p0(X,Y,Z) :- Z1=1, while0(X,Y,Z1).
while0(X,Y,Z) :- Y>0, Z1=X*Z, Y1=Y-1, while0(X,Y1,Z1).
while0(X,Y,Z) :- Y=<0.
";

/// Countdown program with a split precondition: the initial value is
/// either reflected at 100 or shifted down by 100 before a decrementing
/// loop that is checked against an error condition.
pub const COUNTDOWN_PROG: &str = "\
init(A,B).
if(A,B) :- A0 =< 100, A = 100-A0, init(A0,B).
if(A,B) :- A0 >= 101, A = A0-100, init(A0,B).
while(A,B) :- if(A,B).
while(A,B) :- A0 >= 1, A = A0-1, B = B0-2, while(A0,B0).
false :- A =< 0, B = 0, while(A,B).
";

pub const COUNTDOWN_ENTRY: &str = "false.";

/// Nine properties for the countdown program.
pub const COUNTDOWN_PSI: &str = "\
if(A,B) :- A>=0. if(A,B) :- A>=1.
init(A,B) :- A>=101. init(A,B) :- A=<100.
while(A,B) :- A>=0. while(A,B) :- A>=1.
while(A,B) :- A=<0, B=0. while(A,B) :- A=<0. while(A,B) :- B=0.
";

/// Plain Fibonacci clauses, uninstrumented.
pub const FIB_PLAIN: &str = "\
fib(A,B) :- A>=0, A=<1, A=B.
fib(A,B) :- A>1, D=A-2, E=A-1, B=F+G, fib(D,G), fib(E,F).
";

/// Fibonacci instrumented with a derivation-tree dimension counter, plus
/// an error clause bounding the dimension by 2.
pub const FIB_INSTR: &str = "\
fib(A,B,K) :- A>=0, A=<1, A=B, K=0.
fib(A,B,K) :- A>1, D=A-2, E=A-1, B=F+G, K1+1=<K, K2=K, fib(D,G,K2), fib(E,F,K1).
fib(A,B,K) :- A>1, D=A-2, E=A-1, B=F+G, K1+1=<K, K=K2, fib(D,G,K1), fib(E,F,K2).
fib(A,B,K) :- A>1, D=A-2, E=A-1, B=F+G, K1=K-1, K2=K1, fib(D,G,K1), fib(E,F,K2).
false(A) :- X>5, Y<X, K=<2, fib(X,Y,K).
";

pub const FIB_ENTRY: &str = "false(A) :- A=<2.";

/// Dimension ladder properties for the instrumented Fibonacci clauses.
pub const FIB_PSI: &str = "\
fib(A,B,C) :- C=<2. fib(A,B,C) :- C=<1. fib(A,B,C) :- C=<0. fib(A,B,C) :- C>=0.
false(A) :- A=<2. false(A) :- A=<1. false(A) :- A=<0. false(A) :- A>=0.
";

pub fn program(text: &str) -> Program {
    parse_program(text).expect("fixture parses")
}

pub fn facts(text: &str) -> Vec<ConstrainedFact> {
    parse_constrained_facts(text).expect("fixture parses")
}

/// Deterministic generator of small linear programs over three
/// predicates `p0`, `p1`, `p2` of arity 2, entered through a nullary
/// `main`. Guards decrease the first argument so grid evaluation
/// saturates quickly.
pub fn random_program(seed: u64) -> Program {
    // splitmix64: small, deterministic, no dependency on RNG crate
    // version behaviour.
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut pick = move |n: u64| (next() % n) as i64;

    let mut text = String::new();
    // entry clause into a random predicate
    let e = pick(3);
    text.push_str(&format!("main :- X={}, Y={}, p{}(X,Y).\n", pick(7) - 3, pick(7) - 3, e));
    for i in 0..3 {
        // one base fact with a random guard
        let c = pick(5) - 2;
        match pick(3) {
            0 => text.push_str(&format!("p{i}(X,Y) :- X=<{c}.\n")),
            1 => text.push_str(&format!("p{i}(X,Y) :- X=<{c}, Y>={}.\n", pick(5) - 2)),
            _ => text.push_str(&format!("p{i}(X,Y) :- X={c}, Y=X.\n")),
        }
        // one or two recursive/forwarding clauses that strictly decrease X
        for _ in 0..=pick(2) {
            let j = pick(3);
            let g = pick(4) - 1;
            let dx = pick(2) + 2; // decrease by 2 or 3
            let dy = pick(5) - 2;
            text.push_str(&format!(
                "p{i}(X,Y) :- X>={g}, X1=X-{dx}, Y1=Y+{dy}, p{j}(X1,Y1).\n"
            ));
        }
    }
    program(&text)
}

/// Check that two programs are the same up to a bijective renaming of
/// predicates, per-clause variable renaming, and constraint equivalence.
/// Returns the predicate bijection on success.
pub fn programs_match(
    expected: &Program,
    actual: &Program,
) -> Option<BTreeMap<String, String>> {
    let ec: Vec<&Clause> = expected.clauses().iter().collect();
    let ac: Vec<&Clause> = actual.clauses().iter().collect();
    if ec.len() != ac.len() {
        return None;
    }
    let mut map = BTreeMap::new();
    let mut used = vec![false; ac.len()];
    if match_clauses(&ec, &ac, 0, &mut used, &mut map) {
        Some(map)
    } else {
        None
    }
}

fn match_clauses(
    ec: &[&Clause],
    ac: &[&Clause],
    i: usize,
    used: &mut Vec<bool>,
    map: &mut BTreeMap<String, String>,
) -> bool {
    if i == ec.len() {
        return true;
    }
    for j in 0..ac.len() {
        if used[j] {
            continue;
        }
        let snapshot = map.clone();
        if clause_matches(ec[i], ac[j], map) {
            used[j] = true;
            if match_clauses(ec, ac, i + 1, used, map) {
                return true;
            }
            used[j] = false;
        }
        *map = snapshot;
    }
    false
}

/// One clause against another under a growing predicate bijection:
/// heads and bodies must align positionally, and the constraints must be
/// equivalent after projecting both onto the atom variables.
fn clause_matches(e: &Clause, a: &Clause, map: &mut BTreeMap<String, String>) -> bool {
    if e.body.len() != a.body.len() || e.head.args.len() != a.head.args.len() {
        return false;
    }
    let mut pairs: Vec<(&str, &str)> = vec![(&e.head.pred, &a.head.pred)];
    for (eb, ab) in e.body.iter().zip(&a.body) {
        if eb.args.len() != ab.args.len() {
            return false;
        }
        pairs.push((&eb.pred, &ab.pred));
    }
    // extend the bijection tentatively
    let mut local = map.clone();
    for (ep, ap) in pairs {
        match local.get(ep) {
            Some(cur) if cur != ap => return false,
            Some(_) => {}
            None => {
                if local.values().any(|v| v == ap) {
                    return false;
                }
                local.insert(ep.to_string(), ap.to_string());
            }
        }
    }
    // align variables positionally over head then body atoms
    let mut vmap: BTreeMap<Var, Var> = BTreeMap::new();
    let evars: Vec<Var> = std::iter::once(&e.head)
        .chain(e.body.iter())
        .flat_map(|at| at.args.iter().cloned())
        .collect();
    let avars: Vec<Var> = std::iter::once(&a.head)
        .chain(a.body.iter())
        .flat_map(|at| at.args.iter().cloned())
        .collect();
    for (ev, av) in evars.iter().zip(&avars) {
        match vmap.get(ev) {
            Some(cur) if cur != av => return false,
            Some(_) => {}
            None => {
                if vmap.values().any(|v| v == av) {
                    return false;
                }
                vmap.insert(ev.clone(), av.clone());
            }
        }
    }
    let ec: Constraint = project_onto(&e.constraint, &evars).rename(&vmap);
    let acs: Constraint = project_onto(&a.constraint, &avars);
    if !equivalent(&ec, &acs) {
        return false;
    }
    *map = local;
    true
}

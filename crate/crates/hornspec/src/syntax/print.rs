//! Deterministic printing in the same grammar the parser accepts.
//! `parse(render(P))` is structurally equal to `P` modulo variable ids.

use super::*;
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;
use std::fmt::Write;

fn render_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Variable display names for one clause: the bare name when no other
/// variable in the clause shares it, otherwise name + id.
fn var_names(vars: &[Var]) -> HashMap<Var, String> {
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for v in vars {
        *by_name.entry(v.name.as_str()).or_insert(0) += 1;
    }
    vars.iter()
        .map(|v| {
            let display = if by_name[v.name.as_str()] > 1 {
                format!("{}_{}", v.name, v.id)
            } else {
                v.name.clone()
            };
            (v.clone(), display)
        })
        .collect()
}

fn render_term(t: &Term, names: &HashMap<Var, String>, out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(names.get(v).unwrap_or(&v.name)),
        Term::Num(n) => out.push_str(&render_rat(n)),
        Term::Add(a, b) => {
            render_term(a, names, out);
            out.push('+');
            render_term_paren(b, names, out);
        }
        Term::Sub(a, b) => {
            render_term(a, names, out);
            out.push('-');
            render_term_paren(b, names, out);
        }
        Term::Mul(a, b) => {
            render_term_paren(a, names, out);
            out.push('*');
            render_term_paren(b, names, out);
        }
        Term::Div(a, b) => {
            render_term_paren(a, names, out);
            out.push('/');
            render_term_paren(b, names, out);
        }
        Term::Neg(a) => {
            out.push('-');
            render_term_paren(a, names, out);
        }
    }
}

fn render_term_paren(t: &Term, names: &HashMap<Var, String>, out: &mut String) {
    let atomic = matches!(t, Term::Var(_) | Term::Num(_));
    if atomic {
        render_term(t, names, out);
    } else {
        out.push('(');
        render_term(t, names, out);
        out.push(')');
    }
}

/// Print `expr REL 0` as `pos-part REL neg-part`, keeping terms with
/// positive coefficients on the left.
fn render_lin(expr: &LinearExpr, rel: Rel, names: &HashMap<Var, String>, out: &mut String) {
    let mut lhs: Vec<String> = Vec::new();
    let mut rhs: Vec<String> = Vec::new();
    for (v, c) in &expr.terms {
        let name = names.get(v).cloned().unwrap_or_else(|| v.name.clone());
        let (side, mag) = if c.is_positive() {
            (&mut lhs, c.clone())
        } else {
            (&mut rhs, -c.clone())
        };
        if mag.is_one() {
            side.push(name);
        } else {
            side.push(format!("{}*{}", render_rat(&mag), name));
        }
    }
    if !expr.constant.is_zero() {
        if expr.constant.is_positive() {
            lhs.push(render_rat(&expr.constant));
        } else {
            rhs.push(render_rat(&-expr.constant.clone()));
        }
    }
    let join = |side: Vec<String>| {
        if side.is_empty() {
            "0".to_string()
        } else {
            side.join("+")
        }
    };
    let sym = match rel {
        Rel::Le => "=<",
        Rel::Lt => "<",
        Rel::Eq => "=",
    };
    let _ = write!(out, "{}{}{}", join(lhs), sym, join(rhs));
}

fn render_atomic(c: &AtomicConstraint, names: &HashMap<Var, String>, out: &mut String) {
    match c {
        AtomicConstraint::Lin { expr, rel } => render_lin(expr, *rel, names, out),
        AtomicConstraint::Opaque { lhs, rel, rhs } => {
            render_term(lhs, names, out);
            out.push_str(rel.symbol());
            render_term(rhs, names, out);
        }
    }
}

fn render_atom(a: &Atom, names: &HashMap<Var, String>, out: &mut String) {
    out.push_str(&a.pred);
    if !a.args.is_empty() {
        out.push('(');
        for (i, v) in a.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(names.get(v).unwrap_or(&v.name));
        }
        out.push(')');
    }
}

/// Render a clause as a single line ending in `.`.
pub fn render_clause(c: &Clause) -> String {
    let names = var_names(&c.vars());
    let mut out = String::new();
    render_atom(&c.head, &names, &mut out);
    let mut items: Vec<String> = Vec::new();
    match &c.constraint {
        Constraint::False => items.push("false".to_string()),
        Constraint::Conj(cs) => {
            for ac in cs {
                let mut s = String::new();
                render_atomic(ac, &names, &mut s);
                items.push(s);
            }
        }
    }
    for a in &c.body {
        let mut s = String::new();
        render_atom(a, &names, &mut s);
        items.push(s);
    }
    if !items.is_empty() {
        out.push_str(" :- ");
        out.push_str(&items.join(", "));
    }
    out.push('.');
    out
}

/// Render a constraint on its own (debug output, traces).
pub fn render_constraint(c: &Constraint) -> String {
    match c {
        Constraint::False => "false".to_string(),
        Constraint::Conj(cs) if cs.is_empty() => "true".to_string(),
        Constraint::Conj(cs) => {
            let vars: Vec<Var> = c.vars();
            let names = var_names(&vars);
            let mut items = Vec::new();
            for ac in cs {
                let mut s = String::new();
                render_atomic(ac, &names, &mut s);
                items.push(s);
            }
            items.join(", ")
        }
    }
}

/// Render a constrained fact as a clause line.
pub fn render_fact(f: &ConstrainedFact) -> String {
    render_clause(&Clause {
        head: f.atom.clone(),
        constraint: f.constraint.clone(),
        body: Vec::new(),
    })
}

/// Render a whole program, one clause per line, in clause order.
pub fn render_program(p: &Program) -> String {
    let mut out = String::new();
    for c in p.clauses() {
        out.push_str(&render_clause(c));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq_program, parse_program};

    const LOOP_PROG: &str = "\
start :- while0(X,Y,M).
while0(X,Y,M) :- X>0, if0(X,Y,M).
while0(X,Y,M) :- X=<0.
if0(X,Y,M) :- Y<M, Y1=Y+1, while0(X,Y1,M).
if0(X,Y,M) :- Y>=M, X1=X-1, while0(X1,Y,M).
";

    #[test]
    fn empty_program_renders_empty() {
        assert_eq!(render_program(&Program::new(vec![])), "");
    }

    #[test]
    fn loop_program_round_trips_in_order() {
        let p = parse_program(LOOP_PROG).unwrap();
        assert_eq!(p.clauses().len(), 5);
        let text = render_program(&p);
        let q = parse_program(&text).unwrap();
        assert!(alpha_eq_program(&p, &q));
        // clause order preserved
        assert!(text.starts_with("start :-"));
    }

    #[test]
    fn opaque_round_trips() {
        let p = parse_program("while0(X,Y,Z) :- Y>0, Z1=X*Z, Y1=Y-1, while0(X,Y1,Z1).").unwrap();
        let q = parse_program(&render_program(&p)).unwrap();
        assert!(alpha_eq_program(&p, &q));
    }

    #[test]
    fn false_clause_round_trips() {
        let p = parse_program("p(X) :- false.").unwrap();
        assert!(p.clauses()[0].constraint.is_false());
        let q = parse_program(&render_program(&p)).unwrap();
        assert!(alpha_eq_program(&p, &q));
    }
}

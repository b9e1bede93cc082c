//! Negation normal form, ite lifting and clausal form.

use super::term::{Op, Sort, Term};

/// Push negations down to atoms and eliminate `=>`, boolean `=` and boolean `ite`.
pub fn nnf(t: &Term) -> Term {
    go(t, true)
}

fn go(t: &Term, pos: bool) -> Term {
    let lit = |t: &Term| if pos { t.clone() } else { Term::not(t.clone()) };
    match t {
        Term::Const(_) | Term::Var(_) | Term::Invoke { .. } => lit(t),
        Term::Ite(b) if b.1.sort() == Sort::Bool => {
            let (c, x, y) = (&b.0, &b.1, &b.2);
            let f = Term::or(vec![
                Term::and(vec![c.clone(), x.clone()]),
                Term::and(vec![Term::not(c.clone()), y.clone()]),
            ]);
            go(&f, pos)
        }
        Term::Ite(_) => lit(t),
        Term::App(op, a) => match op {
            Op::Not => go(&a[0], !pos),
            Op::And | Op::Or => {
                let kids: Vec<Term> = a.iter().map(|x| go(x, pos)).collect();
                if (*op == Op::And) == pos {
                    Term::and(kids)
                } else {
                    Term::or(kids)
                }
            }
            Op::Implies => go(&Term::or(vec![Term::not(a[0].clone()), a[1].clone()]), pos),
            Op::Eq if a[0].sort() == Sort::Bool => {
                let f = Term::or(vec![
                    Term::and(vec![a[0].clone(), a[1].clone()]),
                    Term::and(vec![Term::not(a[0].clone()), Term::not(a[1].clone())]),
                ]);
                go(&f, pos)
            }
            _ => lit(t),
        },
    }
}

fn first_ite(t: &Term) -> Option<&Term> {
    if let Term::Ite(b) = t {
        if b.1.sort() != Sort::Bool {
            return Some(t);
        }
    }
    if let Term::Invoke { .. } = t {
        return None;
    }
    t.children().into_iter().find_map(first_ite)
}

fn replace(t: &Term, from: &Term, to: &Term) -> Term {
    if t == from {
        return to.clone();
    }
    let kids = t.children();
    if kids.is_empty() {
        return t.clone();
    }
    t.with_children(kids.into_iter().map(|c| replace(c, from, to)).collect())
}

/// Hoist term-level `ite` out of atoms so every atom is ite-free.
pub fn lift_ite(t: &Term) -> Term {
    match t {
        Term::App(op, a) if matches!(op, Op::Not | Op::And | Op::Or | Op::Implies) => {
            Term::App(op.clone(), a.iter().map(lift_ite).collect())
        }
        Term::App(Op::Eq, a) if a[0].sort() == Sort::Bool => Term::App(Op::Eq, a.iter().map(lift_ite).collect()),
        Term::Ite(b) if b.1.sort() == Sort::Bool => {
            Term::Ite(Box::new((lift_ite(&b.0), lift_ite(&b.1), lift_ite(&b.2))))
        }
        _ => match first_ite(t) {
            None => t.clone(),
            Some(ite) => {
                let Term::Ite(b) = ite else { unreachable!() };
                let c = lift_ite(&b.0);
                let then_ = lift_ite(&replace(t, ite, &b.1));
                let else_ = lift_ite(&replace(t, ite, &b.2));
                Term::or(vec![Term::and(vec![c.clone(), then_]), Term::and(vec![Term::not(c), else_])])
            }
        },
    }
}

pub type Clause = Vec<Term>;

/// Clausal form by distribution. Exponential in the worst case, which is fine
/// for specifications of the size handled here.
pub fn to_cnf(t: &Term) -> Vec<Clause> {
    let n = nnf(&lift_ite(t));
    let mut out = Vec::new();
    for c in cnf_of(&n) {
        if let Some(c) = clean_clause(c) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

fn cnf_of(t: &Term) -> Vec<Clause> {
    match t {
        Term::App(Op::And, a) => a.iter().flat_map(cnf_of).collect(),
        Term::App(Op::Or, a) => {
            let mut acc: Vec<Clause> = vec![vec![]];
            for x in a {
                let cx = cnf_of(x);
                let mut next = Vec::with_capacity(acc.len() * cx.len());
                for c1 in &acc {
                    for c2 in &cx {
                        let mut c = c1.clone();
                        c.extend(c2.iter().cloned());
                        next.push(c);
                    }
                }
                acc = next;
            }
            acc
        }
        _ if t.is_true() => vec![],
        _ => vec![vec![t.clone()]],
    }
}

fn clean_clause(c: Clause) -> Option<Clause> {
    let mut out: Clause = Vec::new();
    for l in c {
        if l.is_true() {
            return None;
        }
        if l.is_false() || out.contains(&l) {
            continue;
        }
        if out.contains(&Term::not(l.clone())) {
            return None;
        }
        out.push(l);
    }
    Some(out)
}

pub fn from_cnf(cnf: &[Clause]) -> Term {
    Term::and(cnf.iter().map(|c| Term::or(c.clone())).collect())
}

/// Negate a literal, keeping it a literal.
pub fn negate_literal(l: &Term) -> Term {
    Term::not(l.clone())
}

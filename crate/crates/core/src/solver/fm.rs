//! Fourier-Motzkin elimination over the rationals.

use crate::logic::linear::{LinAtom, LinExpr, Rel};
use crate::logic::term::Var;
use std::collections::BTreeSet;

/// Scale so the first coefficient has magnitude one; drops trivially true atoms.
fn canon(a: LinAtom) -> Option<LinAtom> {
    if a.expr.is_constant() {
        return if a.holds_q(&a.expr.constant) { None } else { Some(a) };
    }
    let first = a.expr.coeffs.values().next().unwrap().clone();
    let k = if a.rel == Rel::Eq { first.recip() } else { first.abs().recip() };
    Some(LinAtom::new(a.expr.scale(&k), a.rel))
}

fn push(out: &mut Vec<LinAtom>, a: LinAtom) {
    if let Some(a) = canon(a) {
        if !out.contains(&a) {
            out.push(a);
        }
    }
}

/// Eliminate `v` from the conjunction, returning an equisatisfiable projection.
pub fn eliminate(atoms: &[LinAtom], v: &Var) -> Vec<LinAtom> {
    if let Some(eq) = atoms.iter().find(|a| a.rel == Rel::Eq && !a.expr.coeff(v).is_zero()) {
        // v = -(rest) / c
        let c = eq.expr.coeff(v);
        let mut rest = eq.expr.clone();
        rest.coeffs.remove(v);
        let by = rest.scale(&(-c.recip()));
        let mut out = Vec::new();
        for a in atoms {
            if std::ptr::eq(a, eq) {
                continue;
            }
            push(&mut out, LinAtom::new(a.expr.substitute(v, &by), a.rel));
        }
        return out;
    }
    let mut lows = Vec::new();
    let mut ups = Vec::new();
    let mut out = Vec::new();
    for a in atoms {
        let c = a.expr.coeff(v);
        if c.is_zero() {
            push(&mut out, a.clone());
        } else if c.is_negative() {
            lows.push(a);
        } else {
            ups.push(a);
        }
    }
    for l in &lows {
        for u in &ups {
            let a = l.expr.coeff(v);
            let b = u.expr.coeff(v);
            let e: LinExpr = l.expr.scale(&b).add(&u.expr.scale(&(-a)));
            let rel = if l.rel == Rel::Lt || u.rel == Rel::Lt { Rel::Lt } else { Rel::Le };
            let mut e = e;
            e.coeffs.remove(v);
            push(&mut out, LinAtom::new(e, rel));
        }
    }
    out
}

/// Project onto `keep` by eliminating every other variable.
pub fn project(atoms: &[LinAtom], keep: &BTreeSet<Var>) -> Vec<LinAtom> {
    let mut cur: Vec<LinAtom> = Vec::new();
    for a in atoms {
        push(&mut cur, a.clone());
    }
    loop {
        let vars: BTreeSet<Var> = cur.iter().flat_map(|a| a.expr.vars().cloned()).collect();
        let Some(v) = pick_var(&cur, vars.iter().filter(|v| !keep.contains(*v))) else { return cur };
        cur = eliminate(&cur, &v);
    }
}

/// Cheapest variable to eliminate: equalities first, then fewest produced pairs.
fn pick_var<'a>(atoms: &[LinAtom], cands: impl Iterator<Item = &'a Var>) -> Option<Var> {
    let mut best: Option<(usize, Var)> = None;
    for v in cands {
        let has_eq = atoms.iter().any(|a| a.rel == Rel::Eq && !a.expr.coeff(v).is_zero());
        let cost = if has_eq {
            0
        } else {
            let lo = atoms.iter().filter(|a| a.expr.coeff(v).is_negative()).count();
            let hi = atoms.iter().filter(|a| a.expr.coeff(v).is_positive()).count();
            1 + lo * hi
        };
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, v.clone()));
        }
    }
    best.map(|(_, v)| v)
}

/// Rational satisfiability by complete elimination.
pub fn feasible(atoms: &[LinAtom]) -> bool {
    let rest = project(atoms, &BTreeSet::new());
    rest.iter().all(|a| a.holds_q(&a.expr.constant))
}

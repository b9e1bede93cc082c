//! Conditional linear expressions.

pub mod nonsep;
pub mod separable;

use crate::logic::eval::eval;
use crate::logic::linear::{linearize, literal_to_lin, IntNorm, LinAtom, LinExpr, LinLit, Rel};
use crate::logic::subst::{free_vars, subst};
use crate::logic::term::{Name, Op, Sort, Term, Valuation, Value, Var};
use crate::rational::Q;
use std::collections::BTreeMap;
use std::fmt;

/// A decision tree over linear guards. `Top` is the program of an empty
/// space; `Bottom` is undefined.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cle {
    Leaf(Term),
    If(Box<(Term, Cle, Cle)>),
    Top,
    Bottom,
}

impl Cle {
    pub fn ite(g: Term, a: Cle, b: Cle) -> Cle {
        if g.is_true() || a == b {
            return a;
        }
        if g.is_false() {
            return b;
        }
        Cle::If(Box::new((g, a, b)))
    }

    /// `if good then a else if bad then b else bottom`, with the bottom
    /// branch dropped because the two guards cover the enclosing space.
    pub fn unify(good: &Term, a: Cle, b: Cle) -> Cle {
        match (a, b) {
            (Cle::Top, b) => b,
            (a, Cle::Top) => a,
            (a, b) => Cle::ite(good.clone(), a, b),
        }
    }

    /// The program as a term; unreachable `Top`/`Bottom` leaves become `0`.
    pub fn to_term(&self, sort: Sort) -> Term {
        match self {
            Cle::Leaf(t) => t.clone(),
            Cle::If(b) => Term::ite(b.0.clone(), b.1.to_term(sort), b.2.to_term(sort)).expect("well-sorted"),
            Cle::Top | Cle::Bottom => Term::Const(Value::default_of(sort)),
        }
    }

    pub fn eval(&self, env: &Valuation) -> Option<Value> {
        match self {
            Cle::Leaf(t) => eval(t, env).ok(),
            Cle::If(b) => {
                if eval(&b.0, env).ok()?.as_bool()? {
                    b.1.eval(env)
                } else {
                    b.2.eval(env)
                }
            }
            Cle::Top | Cle::Bottom => None,
        }
    }

    /// Leaves with their path conditions.
    pub fn paths(&self) -> Vec<(Vec<Term>, &Cle)> {
        let mut out = Vec::new();
        self.collect_paths(&mut Vec::new(), &mut out);
        out
    }

    fn collect_paths<'a>(&'a self, cond: &mut Vec<Term>, out: &mut Vec<(Vec<Term>, &'a Cle)>) {
        match self {
            Cle::If(b) => {
                cond.push(b.0.clone());
                b.1.collect_paths(cond, out);
                cond.pop();
                cond.push(Term::not(b.0.clone()));
                b.2.collect_paths(cond, out);
                cond.pop();
            }
            leaf => out.push((cond.clone(), leaf)),
        }
    }

    pub fn map_terms(&self, f: &mut dyn FnMut(&Term) -> Term) -> Cle {
        match self {
            Cle::Leaf(t) => Cle::Leaf(f(t)),
            Cle::If(b) => {
                let g = f(&b.0);
                let x = b.1.map_terms(f);
                let y = b.2.map_terms(f);
                Cle::If(Box::new((g, x, y)))
            }
            c => c.clone(),
        }
    }

    pub fn rename(&self, map: &BTreeMap<Name, Term>) -> Cle {
        self.map_terms(&mut |t| subst(t, map))
    }

    pub fn leaves(&self) -> usize {
        match self {
            Cle::If(b) => b.1.leaves() + b.2.leaves(),
            _ => 1,
        }
    }
}

impl fmt::Display for Cle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cle::Leaf(t) => write!(f, "{t}"),
            Cle::If(b) => write!(f, "(ite {} {} {})", b.0, b.1, b.2),
            Cle::Top => write!(f, "top"),
            Cle::Bottom => write!(f, "bottom"),
        }
    }
}

/// A bound `o <= term` (upper) or `o >= term` (lower), `strict` for `<`/`>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub upper: bool,
    pub term: Term,
    pub strict: bool,
}

fn ceil_div(e: &LinExpr, c: &Q, sort: Sort) -> Term {
    if c.is_one() {
        return e.to_term(sort);
    }
    let shifted = e.add(&LinExpr::constant(c - &Q::one()));
    Term::app(Op::FloorDiv(c.clone()), vec![shifted.to_term(sort)]).expect("integer term")
}

fn floor_div(e: &LinExpr, c: &Q, sort: Sort) -> Term {
    if c.is_one() {
        return e.to_term(sort);
    }
    Term::app(Op::FloorDiv(c.clone()), vec![e.to_term(sort)]).expect("integer term")
}

/// Bounds on `o` expressed by a literal, or `None` when the literal does not
/// constrain `o` linearly. Disequalities become the strict side that holds at `at`.
pub fn bounds_of(lit: &Term, o: &Var, at: &Valuation) -> Option<Vec<Bound>> {
    if !free_vars(lit).contains(o) {
        return None;
    }
    let atom = match literal_to_lin(lit)? {
        LinLit::Atom(a) => a,
        LinLit::Ne(e) => {
            let v = e.eval(at)?;
            if v.is_negative() {
                LinAtom::new(e, Rel::Lt)
            } else {
                LinAtom::new(e.neg(), Rel::Lt)
            }
        }
    };
    let int = o.sort == Sort::Int;
    let atom = if int && atom.expr.all_int() {
        match atom.normalize_int() {
            IntNorm::Atom(a) => a,
            _ => return None,
        }
    } else {
        atom
    };
    let k = atom.expr.coeff(o);
    if k.is_zero() {
        return None;
    }
    let mut rest = atom.expr.clone();
    rest.coeffs.remove(o);
    let sort = o.sort;
    let mut out = Vec::new();
    if int {
        // k*o + rest rel 0 with integral coefficients and rel non-strict.
        let c = k.abs();
        let neg_rest = rest.neg();
        let up = || Bound { upper: true, term: floor_div(&if k.is_positive() { neg_rest.clone() } else { rest.clone() }, &c, sort), strict: false };
        let lo = || Bound { upper: false, term: ceil_div(&if k.is_positive() { neg_rest.clone() } else { rest.clone() }, &c, sort), strict: false };
        match (atom.rel, k.is_positive()) {
            (Rel::Eq, _) => {
                out.push(lo());
                out.push(up());
            }
            (_, true) => out.push(up()),
            (_, false) => out.push(lo()),
        }
    } else {
        let phi = rest.scale(&(-k.recip()));
        let t = phi.to_term(sort);
        let strict = atom.rel == Rel::Lt;
        match atom.rel {
            Rel::Eq => {
                out.push(Bound { upper: false, term: t.clone(), strict: false });
                out.push(Bound { upper: true, term: t, strict: false });
            }
            _ => out.push(Bound { upper: k.is_positive(), term: t, strict }),
        }
    }
    Some(out)
}

fn value_at(t: &Term, at: &Valuation) -> Option<Q> {
    eval(t, at).ok()?.as_num().cloned()
}

fn lin_or_none(t: &Term) -> Option<LinExpr> {
    linearize(t)
}

/// Strictest lower and upper bounds at `at`, then the leaf between them.
/// `None` when the bounds cross at `at`.
pub fn leaf_between(bounds: &[Bound], sort: Sort, at: &Valuation) -> Option<Term> {
    let mut lb: Option<(&Bound, Q)> = None;
    let mut ub: Option<(&Bound, Q)> = None;
    for b in bounds {
        let v = value_at(&b.term, at)?;
        let slot = if b.upper { &mut ub } else { &mut lb };
        let better = match slot {
            None => true,
            Some((old, ov)) => {
                let tighter = if b.upper { v < *ov } else { v > *ov };
                tighter || (v == *ov && b.strict && !old.strict)
            }
        };
        if better {
            *slot = Some((b, v));
        }
    }
    let int = sort == Sort::Int;
    let one = LinExpr::constant(Q::one());
    Some(match (lb, ub) {
        (None, None) => Term::num(sort, Q::zero()),
        (Some((l, _)), None) => {
            if l.strict {
                linearize(&l.term)?.add(&one).to_term(sort)
            } else {
                l.term.clone()
            }
        }
        (None, Some((u, _))) => {
            if u.strict {
                linearize(&u.term)?.sub(&one).to_term(sort)
            } else {
                u.term.clone()
            }
        }
        (Some((l, lv)), Some((u, uv))) => {
            if lv > uv || (lv == uv && (l.strict || u.strict)) {
                return None;
            }
            if l.term == u.term {
                return Some(l.term.clone());
            }
            match (lin_or_none(&l.term), lin_or_none(&u.term)) {
                (Some(a), Some(b)) => {
                    let sum = a.add(&b);
                    if !int {
                        return Some(sum.scale(&Q::new(1, 2)).to_term(sort));
                    }
                    let half = sum.scale(&Q::new(1, 2));
                    if half.coeffs.values().all(Q::is_integer) && half.constant.is_integer() {
                        half.to_term(sort)
                    } else {
                        floor_div(&sum, &Q::int(2), sort)
                    }
                }
                _ => {
                    debug_assert!(int);
                    Term::app(Op::FloorDiv(Q::int(2)), vec![Term::add(l.term.clone(), u.term.clone())]).ok()?
                }
            }
        }
    })
}

/// Canonical form of a conjunction of literals: linear atoms normalized,
/// trivially true ones dropped, duplicates removed.
pub fn tidy(t: &Term) -> Term {
    let parts: Vec<Term> = match t {
        Term::App(Op::And, a) => a.clone(),
        t => vec![t.clone()],
    };
    let mut out: Vec<Term> = Vec::new();
    for p in parts {
        let q = match literal_to_lin(&p) {
            Some(LinLit::Atom(a)) => {
                let a = if a.expr.all_int() && !a.expr.is_constant() {
                    match a.normalize_int() {
                        IntNorm::True => continue,
                        IntNorm::False => return Term::ff(),
                        IntNorm::Atom(a) => a,
                    }
                } else {
                    a
                };
                if a.expr.is_constant() {
                    if a.holds_q(&a.expr.constant) {
                        continue;
                    }
                    return Term::ff();
                }
                a.to_term()
            }
            Some(LinLit::Ne(e)) if e.is_constant() => {
                if e.constant.is_zero() {
                    return Term::ff();
                }
                continue;
            }
            _ => crate::logic::subst::simplify(&p),
        };
        if q.is_true() {
            continue;
        }
        if q.is_false() {
            return Term::ff();
        }
        if !out.contains(&q) {
            out.push(q);
        }
    }
    Term::and(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(n: &str) -> Var {
        Var::new(n, Sort::Int)
    }

    fn env(p: &[(&str, i64)]) -> Valuation {
        p.iter().map(|(n, v)| (Name::from(*n), Value::Int(Q::int(*v)))).collect()
    }

    #[test]
    fn integer_bounds_use_floor_and_ceiling() {
        let (o, x) = (iv("o"), iv("x"));
        let two_o = Term::App(Op::Scale(Q::int(2)), vec![Term::var(&o)]);
        // 2o <= x + 1  gives  o <= floor((x + 1) / 2)
        let b = bounds_of(&Term::le(two_o, Term::add(Term::var(&x), Term::int(1))), &o, &env(&[("x", 4)])).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].upper);
        assert_eq!(b[0].term.to_string(), "(div (+ x 1) 2)");
        // 3o >= x at x = 5 gives o >= 2
        let three_o = Term::App(Op::Scale(Q::int(3)), vec![Term::var(&o)]);
        let b = bounds_of(&Term::ge(three_o, Term::var(&x)), &o, &env(&[("x", 5)])).unwrap();
        assert!(!b[0].upper);
        assert_eq!(value_at(&b[0].term, &env(&[("x", 5)])), Some(Q::int(2)));
        // c = 1 leaves the bound alone
        let b = bounds_of(&Term::le(Term::var(&o), Term::var(&x)), &o, &env(&[("x", 5)])).unwrap();
        assert_eq!(b[0].term, Term::var(&x));
    }

    #[test]
    fn rational_midpoint() {
        let o = Var::new("o", Sort::Real);
        let x = Var::new("x", Sort::Real);
        let at: Valuation = [(Name::from("x"), Value::Real(Q::zero()))].into_iter().collect();
        let one = Term::num(Sort::Real, Q::one());
        let mut bs = bounds_of(&Term::gt(Term::var(&o), Term::var(&x)), &o, &at).unwrap();
        bs.extend(bounds_of(&Term::lt(Term::var(&o), Term::add(Term::var(&x), one)), &o, &at).unwrap());
        let leaf = leaf_between(&bs, Sort::Real, &at).unwrap();
        assert_eq!(linearize(&leaf), linearize(&Term::add(Term::var(&x), Term::num(Sort::Real, Q::new(1, 2)))));
    }

    #[test]
    fn max2_leaf_is_y() {
        let (o, x, y) = (iv("o"), iv("x"), iv("y"));
        let at = env(&[("x", 2), ("y", 3)]);
        let mut bs = Vec::new();
        for l in [Term::ge(Term::var(&o), Term::var(&x)), Term::ge(Term::var(&o), Term::var(&y)), Term::eq(Term::var(&o), Term::var(&y))] {
            bs.extend(bounds_of(&l, &o, &at).unwrap());
        }
        assert_eq!(leaf_between(&bs, Sort::Int, &at), Some(Term::var(&y)));
    }

    #[test]
    fn unify_and_eval() {
        let (x, y) = (iv("x"), iv("y"));
        let g = Term::ge(Term::var(&y), Term::var(&x));
        let p = Cle::unify(&g, Cle::Leaf(Term::var(&y)), Cle::Leaf(Term::var(&x)));
        for a in -3..=3 {
            for b in -3..=3 {
                let v = p.eval(&env(&[("x", a), ("y", b)])).unwrap();
                assert_eq!(v, Value::Int(Q::int(a.max(b))));
            }
        }
        assert_eq!(Cle::unify(&g, Cle::Leaf(Term::var(&x)), Cle::Top), Cle::Leaf(Term::var(&x)));
        assert_eq!(p.paths().len(), 2);
    }

    #[test]
    fn tidy_drops_trivial_atoms() {
        let (x, y) = (iv("x"), iv("y"));
        let t = Term::and(vec![Term::ge(Term::var(&y), Term::var(&x)), Term::ge(Term::var(&y), Term::var(&y))]);
        let r = tidy(&t);
        assert!(!matches!(r, Term::App(Op::And, _)));
    }
}

//! Linear normal form over rationals.

use super::term::{Op, Sort, Term, Valuation, Value, Var};
use crate::rational::Q;
use num_integer::Integer;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LinExpr {
    pub coeffs: BTreeMap<Var, Q>,
    pub constant: Q,
}

impl LinExpr {
    pub fn zero() -> LinExpr {
        LinExpr::default()
    }

    pub fn constant(q: Q) -> LinExpr {
        LinExpr { coeffs: BTreeMap::new(), constant: q }
    }

    pub fn var(v: &Var) -> LinExpr {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v.clone(), Q::one());
        LinExpr { coeffs, constant: Q::zero() }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, v: &Var) -> Q {
        self.coeffs.get(v).cloned().unwrap_or_default()
    }

    pub fn add(&self, o: &LinExpr) -> LinExpr {
        let mut r = self.clone();
        r.constant += &o.constant;
        for (v, c) in &o.coeffs {
            let e = r.coeffs.entry(v.clone()).or_default();
            *e += c;
            if e.is_zero() {
                r.coeffs.remove(v);
            }
        }
        r
    }

    pub fn scale(&self, k: &Q) -> LinExpr {
        if k.is_zero() {
            return LinExpr::zero();
        }
        LinExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn sub(&self, o: &LinExpr) -> LinExpr {
        self.add(&o.scale(&Q::int(-1)))
    }

    pub fn neg(&self) -> LinExpr {
        self.scale(&Q::int(-1))
    }

    /// Replace `v` by `by`.
    pub fn substitute(&self, v: &Var, by: &LinExpr) -> LinExpr {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(c) => {
                let mut rest = self.clone();
                let c = c.clone();
                rest.coeffs.remove(v);
                rest.add(&by.scale(&c))
            }
        }
    }

    pub fn eval(&self, env: &Valuation) -> Option<Q> {
        let mut s = self.constant.clone();
        for (v, c) in &self.coeffs {
            s += &(c * env.get(&v.name)?.as_num()?);
        }
        Some(s)
    }

    pub fn eval_map(&self, m: &BTreeMap<Var, Q>) -> Q {
        let mut s = self.constant.clone();
        for (v, c) in &self.coeffs {
            if let Some(x) = m.get(v) {
                s += &(c * x);
            }
        }
        s
    }

    pub fn sort(&self, default: Sort) -> Sort {
        self.coeffs.keys().next().map(|v| v.sort).unwrap_or(default)
    }

    pub fn to_term(&self, sort: Sort) -> Term {
        let mut pos: Vec<Term> = Vec::new();
        let mut neg: Vec<Term> = Vec::new();
        for (v, c) in &self.coeffs {
            let base = Term::var(v);
            let mag = c.abs();
            let t = if mag.is_one() { base } else { Term::App(Op::Scale(mag), vec![base]) };
            if c.is_negative() {
                neg.push(t);
            } else {
                pos.push(t);
            }
        }
        let k = &self.constant;
        if k.is_positive() || (pos.is_empty() && neg.is_empty()) {
            pos.push(Term::num(sort, k.clone()));
        } else if k.is_negative() {
            neg.push(Term::num(sort, k.abs()));
        }
        let mut acc = match pos.len() {
            0 => {
                let first = neg.remove(0);
                Term::App(Op::Neg, vec![first])
            }
            1 => pos.pop().unwrap(),
            _ => Term::App(Op::Add, pos),
        };
        for n in neg {
            acc = Term::sub(acc, n);
        }
        acc
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    pub fn all_int(&self) -> bool {
        self.coeffs.keys().all(|v| v.sort == Sort::Int)
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term(self.sort(Sort::Real)))
    }
}

/// Linear form of an arithmetic term, if it is linear and ite-free.
pub fn linearize(t: &Term) -> Option<LinExpr> {
    match t {
        Term::Var(v) if v.sort.is_arith() => Some(LinExpr::var(v)),
        Term::Const(Value::Int(q)) | Term::Const(Value::Real(q)) => Some(LinExpr::constant(q.clone())),
        Term::App(Op::Add, a) => {
            let mut acc = LinExpr::zero();
            for x in a {
                acc = acc.add(&linearize(x)?);
            }
            Some(acc)
        }
        Term::App(Op::Sub, a) => Some(linearize(&a[0])?.sub(&linearize(&a[1])?)),
        Term::App(Op::Neg, a) => Some(linearize(&a[0])?.neg()),
        Term::App(Op::Scale(c), a) => Some(linearize(&a[0])?.scale(c)),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

/// `expr rel 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinAtom {
    pub expr: LinExpr,
    pub rel: Rel,
}

pub enum IntNorm {
    True,
    False,
    Atom(LinAtom),
}

impl LinAtom {
    pub fn new(expr: LinExpr, rel: Rel) -> LinAtom {
        LinAtom { expr, rel }
    }

    /// `a rel b` as `a - b rel 0`.
    pub fn cmp(a: &LinExpr, rel: Rel, b: &LinExpr) -> LinAtom {
        LinAtom { expr: a.sub(b), rel }
    }

    pub fn holds_q(&self, v: &Q) -> bool {
        match self.rel {
            Rel::Le => !v.is_positive(),
            Rel::Lt => v.is_negative(),
            Rel::Eq => v.is_zero(),
        }
    }

    pub fn holds(&self, env: &Valuation) -> Option<bool> {
        Some(self.holds_q(&self.expr.eval(env)?))
    }

    pub fn holds_map(&self, m: &BTreeMap<Var, Q>) -> bool {
        self.holds_q(&self.expr.eval_map(m))
    }

    /// Disjuncts of the negation.
    pub fn negate(&self) -> Vec<LinAtom> {
        match self.rel {
            Rel::Le => vec![LinAtom::new(self.expr.neg(), Rel::Lt)],
            Rel::Lt => vec![LinAtom::new(self.expr.neg(), Rel::Le)],
            Rel::Eq => vec![LinAtom::new(self.expr.clone(), Rel::Lt), LinAtom::new(self.expr.neg(), Rel::Lt)],
        }
    }

    pub fn to_term(&self) -> Term {
        let sort = self.expr.sort(Sort::Real);
        let mut pos = LinExpr::zero();
        let mut neg = LinExpr::zero();
        for (v, c) in &self.expr.coeffs {
            if c.is_negative() {
                neg.coeffs.insert(v.clone(), -c.clone());
            } else {
                pos.coeffs.insert(v.clone(), c.clone());
            }
        }
        if pos.coeffs.is_empty() && !neg.coeffs.is_empty() {
            let a = neg.to_term(sort);
            let b = Term::num(sort, self.expr.constant.clone());
            return match self.rel {
                Rel::Eq => Term::eq(a, b),
                Rel::Le => Term::ge(a, b),
                Rel::Lt => Term::gt(a, b),
            };
        }
        neg.constant = -self.expr.constant.clone();
        let (a, b) = (pos.to_term(sort), neg.to_term(sort));
        match self.rel {
            Rel::Eq => Term::eq(a, b),
            Rel::Le => Term::le(a, b),
            Rel::Lt => Term::lt(a, b),
        }
    }

    /// Integer tightening for atoms whose variables are all integers:
    /// integral coefficients, gcd-normalized, strict turned non-strict.
    pub fn normalize_int(&self) -> IntNorm {
        if self.expr.is_constant() {
            return if self.holds_q(&self.expr.constant) { IntNorm::True } else { IntNorm::False };
        }
        let mut l = BigInt::one();
        for c in self.expr.coeffs.values().chain(std::iter::once(&self.expr.constant)) {
            l = l.lcm(&c.denom());
        }
        let e = self.expr.scale(&Q::from_bigint(l));
        let mut g = BigInt::zero();
        for c in e.coeffs.values() {
            g = g.gcd(&c.numer());
        }
        let gq = Q::from_bigint(g);
        let mut coeffs: BTreeMap<Var, Q> = e.coeffs.iter().map(|(v, c)| (v.clone(), c / &gq)).collect();
        let k = &e.constant / &gq;
        let (constant, rel) = match self.rel {
            Rel::Eq => {
                if !k.is_integer() {
                    return IntNorm::False;
                }
                (k, Rel::Eq)
            }
            Rel::Le => (k.ceil(), Rel::Le),
            // e < 0  <=>  e <= -1 on integers, i.e. g*(e/g) <= -1.
            Rel::Lt => ((&e.constant + &Q::one()) / &gq, Rel::Le),
        };
        let constant = if self.rel == Rel::Lt { constant.ceil() } else { constant };
        if rel == Rel::Eq {
            // Canonical sign: first coefficient positive.
            if coeffs.values().next().is_some_and(|c| c.is_negative()) {
                for c in coeffs.values_mut() {
                    *c = -c.clone();
                }
                return IntNorm::Atom(LinAtom::new(LinExpr { coeffs, constant: -constant }, rel));
            }
        }
        IntNorm::Atom(LinAtom::new(LinExpr { coeffs, constant }, rel))
    }
}

impl fmt::Display for LinAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// A linear literal: an atom or a disequality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinLit {
    Atom(LinAtom),
    Ne(LinExpr),
}

/// Interpret a comparison literal (possibly negated) linearly.
pub fn literal_to_lin(l: &Term) -> Option<LinLit> {
    let (atom, neg) = match l {
        Term::App(Op::Not, a) => (&a[0], true),
        t => (t, false),
    };
    let Term::App(op, a) = atom else { return None };
    if !op.is_comparison() || !a[0].sort().is_arith() {
        return None;
    }
    let x = linearize(&a[0])?;
    let y = linearize(&a[1])?;
    let d = x.sub(&y);
    let (rel, expr) = match (op, neg) {
        (Op::Le, false) => (Some(Rel::Le), d),
        (Op::Lt, false) => (Some(Rel::Lt), d),
        (Op::Ge, false) => (Some(Rel::Le), d.neg()),
        (Op::Gt, false) => (Some(Rel::Lt), d.neg()),
        (Op::Eq, false) => (Some(Rel::Eq), d),
        (Op::Le, true) => (Some(Rel::Lt), d.neg()),
        (Op::Lt, true) => (Some(Rel::Le), d.neg()),
        (Op::Ge, true) => (Some(Rel::Lt), d),
        (Op::Gt, true) => (Some(Rel::Le), d),
        (Op::Eq, true) => (None, d),
        _ => return None,
    };
    Some(match rel {
        Some(r) => LinLit::Atom(LinAtom::new(expr, r)),
        None => LinLit::Ne(expr),
    })
}

//! General simplex over delta-rationals: feasibility of conjunctions of linear
//! atoms (strict ones included) and linear optimization.

use super::Deadline;
use crate::logic::linear::{LinAtom, LinExpr, Rel};
use crate::logic::term::Var;
use crate::rational::Q;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// `c + k * delta` for an infinitesimal `delta > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DQ {
    pub c: Q,
    pub k: Q,
}

impl DQ {
    pub fn new(c: Q, k: Q) -> DQ {
        DQ { c, k }
    }

    pub fn real(c: Q) -> DQ {
        DQ { c, k: Q::zero() }
    }

    fn add(&self, o: &DQ) -> DQ {
        DQ { c: &self.c + &o.c, k: &self.k + &o.k }
    }

    fn sub(&self, o: &DQ) -> DQ {
        DQ { c: &self.c - &o.c, k: &self.k - &o.k }
    }

    fn scale(&self, q: &Q) -> DQ {
        DQ { c: &self.c * q, k: &self.k * q }
    }
}

impl Ord for DQ {
    fn cmp(&self, o: &DQ) -> Ordering {
        self.c.cmp(&o.c).then_with(|| self.k.cmp(&o.k))
    }
}

impl PartialOrd for DQ {
    fn partial_cmp(&self, o: &DQ) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(BTreeMap<Var, Q>),
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Optimum {
    Infeasible,
    Unbounded,
    /// Supremum value; `strict` when it is not attained.
    Bounded { value: Q, strict: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedOut;

struct Tableau {
    vars: Vec<Var>,
    n_total: usize,
    rows: Vec<Vec<Q>>,
    basic: Vec<usize>,
    row_of: Vec<Option<usize>>,
    val: Vec<DQ>,
    lo: Vec<Option<DQ>>,
    hi: Vec<Option<DQ>>,
    /// Atom that supplied each bound.
    lo_src: Vec<Option<usize>>,
    hi_src: Vec<Option<usize>>,
    /// Atoms explaining infeasibility after a failed check.
    conflict: Vec<usize>,
}

impl Tableau {
    /// Tableau for `atoms` plus one unbounded row per extra expression.
    /// Single-variable atoms become bounds and atoms over the same
    /// direction share one slack row. `None` when two bounds cross.
    fn build(atoms: &[LinAtom], extra_rows: &[&LinExpr]) -> Result<(Tableau, Vec<usize>), Vec<usize>> {
        let mut idx: BTreeMap<Var, usize> = BTreeMap::new();
        for e in atoms.iter().map(|a| &a.expr).chain(extra_rows.iter().copied()) {
            for v in e.vars() {
                let n = idx.len();
                idx.entry(v.clone()).or_insert(n);
            }
        }
        let n = idx.len();
        let mut vars = vec![Var::new("", crate::logic::Sort::Real); n];
        for (v, i) in &idx {
            vars[*i] = v.clone();
        }
        // Direction (leading coefficient one) -> slack column.
        let mut rows: Vec<Vec<(usize, Q)>> = Vec::new();
        let mut dir_of: BTreeMap<Vec<(usize, Q)>, usize> = BTreeMap::new();
        let mut lo: Vec<Option<DQ>> = vec![None; n];
        let mut hi: Vec<Option<DQ>> = vec![None; n];
        let mut bounds: Vec<(usize, Rel, Q, bool)> = Vec::new();
        let mut lo_src: Vec<Option<usize>> = vec![None; n];
        let mut hi_src: Vec<Option<usize>> = vec![None; n];
        for a in atoms {
            let mut terms: Vec<(usize, Q)> = a.expr.coeffs.iter().map(|(v, c)| (idx[v], c.clone())).collect();
            terms.sort_by_key(|(i, _)| *i);
            let lead = terms[0].1.clone();
            let inv = lead.recip();
            let dir: Vec<(usize, Q)> = terms.iter().map(|(i, c)| (*i, c * &inv)).collect();
            let col = if dir.len() == 1 {
                dir[0].0
            } else if let Some(&c) = dir_of.get(&dir) {
                c
            } else {
                let c = n + rows.len();
                rows.push(dir.clone());
                dir_of.insert(dir, c);
                lo.push(None);
                hi.push(None);
                lo_src.push(None);
                hi_src.push(None);
                c
            };
            // lead * (col + constant / lead) rel 0
            let b = -(&a.expr.constant * &inv);
            bounds.push((col, a.rel, b, lead.is_negative()));
        }
        for (k, (col, rel, b, flip)) in bounds.into_iter().enumerate() {
            let strict = rel == Rel::Lt;
            let upper = DQ::new(b.clone(), if strict { Q::int(-1) } else { Q::zero() });
            let lower = DQ::new(b.clone(), if strict { Q::one() } else { Q::zero() });
            let (set_hi, set_lo) = match (rel, flip) {
                (Rel::Eq, _) => (true, true),
                (_, false) => (true, false),
                (_, true) => (false, true),
            };
            if set_hi {
                let h = if rel == Rel::Eq { DQ::real(b.clone()) } else { upper };
                if hi[col].as_ref().is_none_or(|x| h < *x) {
                    hi[col] = Some(h);
                    hi_src[col] = Some(k);
                }
            }
            if set_lo {
                let l = if rel == Rel::Eq { DQ::real(b.clone()) } else { lower };
                if lo[col].as_ref().is_none_or(|x| l > *x) {
                    lo[col] = Some(l);
                    lo_src[col] = Some(k);
                }
            }
        }
        let mut extra = Vec::new();
        for e in extra_rows {
            extra.push(n + rows.len());
            rows.push(e.coeffs.iter().map(|(v, c)| (idx[v], c.clone())).collect());
            lo.push(None);
            hi.push(None);
            lo_src.push(None);
            hi_src.push(None);
        }
        let total = n + rows.len();
        for i in 0..total {
            if matches!((&lo[i], &hi[i]), (Some(l), Some(h)) if l > h) {
                return Err(vec![lo_src[i].unwrap(), hi_src[i].unwrap()]);
            }
        }
        let mut val = vec![DQ::default(); total];
        for j in 0..n {
            if let Some(l) = &lo[j] {
                val[j] = l.clone();
            } else if let Some(h) = &hi[j] {
                val[j] = h.clone();
            }
        }
        let mut t = Tableau {
            vars,
            n_total: total,
            rows: Vec::with_capacity(rows.len()),
            basic: Vec::with_capacity(rows.len()),
            row_of: vec![None; total],
            val,
            lo,
            hi,
            lo_src,
            hi_src,
            conflict: Vec::new(),
        };
        for (r, terms) in rows.into_iter().enumerate() {
            let mut row = vec![Q::zero(); total];
            let mut v = DQ::default();
            for (j, c) in terms {
                v = v.add(&t.val[j].scale(&c));
                row[j] = c;
            }
            let s = n + r;
            t.val[s] = v;
            t.rows.push(row);
            t.basic.push(s);
            t.row_of[s] = Some(r);
        }
        Ok((t, extra))
    }

    fn below_lo(&self, i: usize) -> bool {
        self.lo[i].as_ref().is_some_and(|l| self.val[i] < *l)
    }

    fn above_hi(&self, i: usize) -> bool {
        self.hi[i].as_ref().is_some_and(|h| self.val[i] > *h)
    }

    fn can_increase(&self, j: usize) -> bool {
        self.hi[j].as_ref().is_none_or(|h| self.val[j] < *h)
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.lo[j].as_ref().is_none_or(|l| self.val[j] > *l)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let i = self.basic[r];
        let a = self.rows[r][j].clone();
        let inv = a.recip();
        let mut nr: Vec<Q> = self.rows[r].iter().map(|c| -(c * &inv)).collect();
        nr[j] = Q::zero();
        nr[i] = inv;
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let c = std::mem::take(&mut row[j]);
            if c.is_zero() {
                continue;
            }
            for (x, y) in row.iter_mut().zip(nr.iter()) {
                if !y.is_zero() {
                    *x += &(&c * y);
                }
            }
            row[j] = Q::zero();
        }
        self.rows[r] = nr;
        self.basic[r] = j;
        self.row_of[i] = None;
        self.row_of[j] = Some(r);
    }

    /// Move nonbasic `j` by `theta`, updating basic values.
    fn shift(&mut self, j: usize, theta: &DQ) {
        self.val[j] = self.val[j].add(theta);
        for r in 0..self.rows.len() {
            let c = &self.rows[r][j];
            if !c.is_zero() {
                let b = self.basic[r];
                self.val[b] = self.val[b].add(&theta.scale(c));
            }
        }
    }

    fn pivot_and_update(&mut self, r: usize, j: usize, target: DQ) {
        let i = self.basic[r];
        let theta = target.sub(&self.val[i]).scale(&self.rows[r][j].recip());
        self.shift(j, &theta);
        self.pivot(r, j);
    }

    fn check(&mut self, deadline: &Deadline) -> Result<bool, TimedOut> {
        let mut iter = 0u64;
        loop {
            iter += 1;
            if iter.is_multiple_of(64) && deadline.expired() {
                return Err(TimedOut);
            }
            let mut viol = None;
            for v in 0..self.n_total {
                if let Some(r) = self.row_of[v] {
                    if self.below_lo(v) || self.above_hi(v) {
                        viol = Some((v, r));
                        break;
                    }
                }
            }
            let Some((i, r)) = viol else { return Ok(true) };
            let raise = self.below_lo(i);
            let mut pick = None;
            for j in 0..self.n_total {
                if self.row_of[j].is_some() {
                    continue;
                }
                let a = &self.rows[r][j];
                if a.is_zero() {
                    continue;
                }
                let ok = if raise == a.is_positive() { self.can_increase(j) } else { self.can_decrease(j) };
                if ok {
                    pick = Some(j);
                    break;
                }
            }
            let Some(j) = pick else {
                let mut c = vec![if raise { self.lo_src[i] } else { self.hi_src[i] }.unwrap()];
                for j in 0..self.n_total {
                    let a = &self.rows[r][j];
                    if self.row_of[j].is_some() || a.is_zero() {
                        continue;
                    }
                    let src = if raise == a.is_positive() { self.hi_src[j] } else { self.lo_src[j] };
                    c.push(src.unwrap());
                }
                c.sort_unstable();
                c.dedup();
                self.conflict = c;
                return Ok(false);
            };
            let target = if raise { self.lo[i].clone().unwrap() } else { self.hi[i].clone().unwrap() };
            self.pivot_and_update(r, j, target);
        }
    }

    /// A concrete rational value for delta that keeps every bound satisfied.
    fn concrete_delta(&self) -> Q {
        let mut d = Q::one();
        for v in 0..self.n_total {
            let x = &self.val[v];
            if let Some(l) = &self.lo[v] {
                if l.c < x.c && l.k > x.k {
                    d = d.min(&(&x.c - &l.c) / &(&l.k - &x.k));
                }
            }
            if let Some(h) = &self.hi[v] {
                if x.c < h.c && x.k > h.k {
                    d = d.min(&(&h.c - &x.c) / &(&x.k - &h.k));
                }
            }
        }
        d
    }

    fn model(&self) -> BTreeMap<Var, Q> {
        let d = self.concrete_delta();
        let n = self.vars.len();
        (0..n).map(|j| (self.vars[j].clone(), &self.val[j].c + &(&self.val[j].k * &d))).collect()
    }
}

/// Is the conjunction of `atoms` satisfiable over the rationals? Returns a model.
pub fn feasible(atoms: &[LinAtom], deadline: &Deadline) -> Result<Feasibility, TimedOut> {
    Ok(match explain(atoms, deadline)? {
        Ok(m) => Feasibility::Feasible(m),
        Err(_) => Feasibility::Infeasible,
    })
}

/// A model, or the indices of an infeasible subset of `atoms`.
pub fn explain(atoms: &[LinAtom], deadline: &Deadline) -> Result<Result<BTreeMap<Var, Q>, Vec<usize>>, TimedOut> {
    let mut keep = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if a.expr.is_constant() {
            if !a.holds_q(&a.expr.constant) {
                return Ok(Err(vec![i]));
            }
        } else {
            keep.push(i);
        }
    }
    let sub: Vec<LinAtom> = keep.iter().map(|&i| atoms[i].clone()).collect();
    let back = |c: Vec<usize>| c.into_iter().map(|k| keep[k]).collect::<Vec<usize>>();
    let mut t = match Tableau::build(&sub, &[]) {
        Ok((t, _)) => t,
        Err(c) => return Ok(Err(back(c))),
    };
    if t.check(deadline)? {
        Ok(Ok(t.model()))
    } else {
        Ok(Err(back(std::mem::take(&mut t.conflict))))
    }
}

/// Supremum of `obj` over the conjunction of `atoms`.
pub fn maximize(atoms: &[LinAtom], obj: &LinExpr, deadline: &Deadline) -> Result<Optimum, TimedOut> {
    for a in atoms {
        if a.expr.is_constant() && !a.holds_q(&a.expr.constant) {
            return Ok(Optimum::Infeasible);
        }
    }
    let atoms: Vec<LinAtom> = atoms.iter().filter(|a| !a.expr.is_constant()).cloned().collect();
    let mut lin = obj.clone();
    lin.constant = Q::zero();
    let Ok((mut t, extra)) = Tableau::build(&atoms, &[&lin]) else { return Ok(Optimum::Infeasible) };
    if !t.check(deadline)? {
        return Ok(Optimum::Infeasible);
    }
    let z = extra[0];
    let mut iter = 0u64;
    loop {
        iter += 1;
        if iter.is_multiple_of(64) && deadline.expired() {
            return Err(TimedOut);
        }
        let zr = t.row_of[z].expect("objective stays basic");
        let mut entering = None;
        for j in 0..t.n_total {
            if t.row_of[j].is_some() {
                continue;
            }
            let c = &t.rows[zr][j];
            if (c.is_positive() && t.can_increase(j)) || (c.is_negative() && t.can_decrease(j)) {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else { break };
        let up = t.rows[zr][j].is_positive();
        let dir = if up { Q::one() } else { Q::int(-1) };
        // Ratio test with ties broken by variable index.
        let mut best: Option<(DQ, usize, Option<usize>)> = None;
        let consider = |lim: DQ, var: usize, who: Option<usize>, best: &mut Option<(DQ, usize, Option<usize>)>| {
            let better = match best {
                None => true,
                Some((b, bv, _)) => lim < *b || (lim == *b && var < *bv),
            };
            if better {
                *best = Some((lim, var, who));
            }
        };
        if up {
            if let Some(h) = &t.hi[j] {
                consider(h.sub(&t.val[j]), j, None, &mut best);
            }
        } else if let Some(l) = &t.lo[j] {
            consider(t.val[j].sub(l), j, None, &mut best);
        }
        for r in 0..t.rows.len() {
            let b = t.basic[r];
            if b == z {
                continue;
            }
            let rate = &t.rows[r][j] * &dir;
            if rate.is_zero() {
                continue;
            }
            let bound = if rate.is_positive() { &t.hi[b] } else { &t.lo[b] };
            if let Some(bd) = bound {
                let lim = bd.sub(&t.val[b]).scale(&rate.recip());
                consider(lim, b, Some(r), &mut best);
            }
        }
        match best {
            None => return Ok(Optimum::Unbounded),
            Some((lim, _, None)) => {
                t.shift(j, &lim.scale(&dir));
            }
            Some((_, _, Some(r))) => {
                let b = t.basic[r];
                let rate = &t.rows[r][j] * &dir;
                let target = if rate.is_positive() { t.hi[b].clone().unwrap() } else { t.lo[b].clone().unwrap() };
                t.pivot_and_update(r, j, target);
            }
        }
    }
    let v = &t.val[z];
    Ok(Optimum::Bounded { value: &v.c + &obj.constant, strict: !v.k.is_zero() })
}

pub fn minimize(atoms: &[LinAtom], obj: &LinExpr, deadline: &Deadline) -> Result<Optimum, TimedOut> {
    Ok(match maximize(atoms, &obj.neg(), deadline)? {
        Optimum::Bounded { value, strict } => Optimum::Bounded { value: -value, strict },
        o => o,
    })
}

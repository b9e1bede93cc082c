//! Conjunctions of difference constraints `x - y <= c` (and bounds on single
//! variables) decided by negative-cycle detection.

use crate::logic::linear::{LinAtom, Rel};
use crate::logic::term::Var;
use crate::rational::Q;
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diff {
    /// Some atom is not a difference constraint.
    Other,
    Consistent,
    /// Atom indices along a negative cycle.
    Conflict(Vec<usize>),
}

/// Weight `c + k * delta`, with `k = -1` for strict edges.
type W = (Q, i64);

struct Edge {
    from: usize,
    to: usize,
    w: W,
    atom: usize,
}

fn add(a: &W, b: &W) -> W {
    (&a.0 + &b.0, a.1 + b.1)
}

/// Edges of `atom`, or `None` when it is not a difference constraint.
/// `x - y rel c` gives an edge `y -> x` of weight `c`. Node 0 is zero.
fn edges(atom: &LinAtom, i: usize, node: &mut dyn FnMut(&Var) -> usize) -> Option<Vec<Edge>> {
    let cs: Vec<(&Var, &Q)> = atom.expr.coeffs.iter().filter(|(_, c)| !c.is_zero()).collect();
    // pos - neg + k rel 0, after dividing by the common magnitude
    let (pos, neg, scale) = match cs.as_slice() {
        [(v, a)] if a.is_positive() => (node(v), 0, (*a).clone()),
        [(v, a)] => (0, node(v), -(*a).clone()),
        [(u, a), (v, b)] if *a == &-(*b).clone() => {
            if a.is_positive() {
                (node(u), node(v), (*a).clone())
            } else {
                (node(v), node(u), (*b).clone())
            }
        }
        _ => return None,
    };
    let k = &atom.expr.constant / &scale;
    let strict = if atom.rel == Rel::Lt { -1 } else { 0 };
    let mut out = vec![Edge { from: neg, to: pos, w: (-k.clone(), strict), atom: i }];
    if atom.rel == Rel::Eq {
        out.push(Edge { from: pos, to: neg, w: (k, 0), atom: i });
    }
    Some(out)
}

pub fn check(atoms: &[LinAtom]) -> Diff {
    let mut ids: HashMap<Var, usize> = HashMap::new();
    let mut all = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if a.expr.coeffs.is_empty() {
            if a.holds_q(&a.expr.constant) {
                continue;
            }
            return Diff::Conflict(vec![i]);
        }
        let mut node = |v: &Var| {
            let n = ids.len() + 1;
            *ids.entry(v.clone()).or_insert(n)
        };
        match edges(a, i, &mut node) {
            Some(es) => all.extend(es),
            None => return Diff::Other,
        }
    }
    let n = ids.len() + 1;
    let mut dist: Vec<W> = vec![(Q::zero(), 0); n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for _ in 0..n {
        last = None;
        for (ei, e) in all.iter().enumerate() {
            let cand = add(&dist[e.from], &e.w);
            if cand < dist[e.to] {
                dist[e.to] = cand;
                pred[e.to] = Some(ei);
                last = Some(e.to);
            }
        }
        if last.is_none() {
            return Diff::Consistent;
        }
    }
    let mut v = last.expect("relaxed in the last round");
    for _ in 0..n {
        let Some(e) = pred[v] else { return Diff::Other };
        v = all[e].from;
    }
    let start = v;
    let mut core = Vec::new();
    loop {
        let Some(e) = pred[v].map(|e| &all[e]) else { return Diff::Other };
        if !core.contains(&e.atom) {
            core.push(e.atom);
        }
        v = e.from;
        if v == start {
            break;
        }
    }
    core.sort_unstable();
    Diff::Conflict(core)
}

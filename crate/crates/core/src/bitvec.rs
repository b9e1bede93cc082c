//! Bit-vector expressions with symbolic constants ("holes") and the
//! size-ordered worklist search over them.

use crate::cle::separable::complete;
use crate::engine::{Ctx, EngineError};
use crate::logic::spec::Separable;
use crate::logic::subst::{free_vars, simplify, subst, subst_values};
use crate::logic::term::{Name, Op, Sort, Term, Valuation, Value, Var};
use std::collections::{BTreeMap, BTreeSet};

pub const HOLE_PREFIX: &str = "s!";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BvConfig {
    pub ops: Vec<Op>,
    /// Maximum number of deepening steps applied to one candidate.
    pub max_depth: u32,
}

impl Default for BvConfig {
    fn default() -> BvConfig {
        BvConfig {
            ops: vec![Op::BvAnd, Op::BvOr, Op::BvXor, Op::BvNot, Op::BvAdd, Op::BvSub, Op::BvShl, Op::BvLshr],
            max_depth: 6,
        }
    }
}

/// Constraints on the holes of a template, one per input valuation.
pub type HoleConstraints = Vec<(Valuation, Term)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub expr: Term,
    pub rho: HoleConstraints,
    pub depth: u32,
}

pub fn is_hole(v: &Var) -> bool {
    v.name.starts_with(HOLE_PREFIX)
}

/// Holes in preorder.
pub fn holes_of(t: &Term) -> Vec<Var> {
    fn go(t: &Term, out: &mut Vec<Var>) {
        if let Term::Var(v) = t {
            if is_hole(v) {
                out.push(v.clone());
            }
        }
        for c in t.children() {
            go(c, out);
        }
    }
    let mut out = Vec::new();
    go(t, &mut out);
    out
}

/// Each hole occurs at most once.
pub fn is_linear(t: &Term) -> bool {
    let h = holes_of(t);
    h.iter().collect::<BTreeSet<_>>().len() == h.len()
}

/// Supply of fresh hole names.
#[derive(Clone, Debug)]
pub struct Holes {
    next: usize,
    width: u32,
}

impl Holes {
    pub fn new(width: u32) -> Holes {
        Holes { next: 0, width }
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var::new(&format!("{HOLE_PREFIX}{}", self.next), Sort::BitVec(self.width));
        self.next += 1;
        v
    }

    /// Make sure future names do not clash with holes already in `t`.
    pub fn avoid(&mut self, t: &Term) {
        for h in holes_of(t) {
            if let Ok(k) = h.name[HOLE_PREFIX.len()..].parse::<usize>() {
                self.next = self.next.max(k + 1);
            }
        }
    }
}

/// Depth-one templates: the inputs, then `op(a)` / `op(a, b)` for each
/// operator with `a, b` drawn from the inputs and a fresh hole. Commutative
/// operators take unordered pairs.
pub fn level_one(inputs: &[Var], ops: &[Op], holes: &mut Holes) -> Vec<Term> {
    let n = inputs.len() + 1;
    let atom = |i: usize, holes: &mut Holes| if i < inputs.len() { Term::var(&inputs[i]) } else { Term::var(&holes.fresh()) };
    let mut out: Vec<Term> = inputs.iter().map(Term::var).collect();
    for op in ops {
        match op.arity() {
            Some(1) => {
                for i in 0..n {
                    out.push(Term::bv_op(op.clone(), vec![atom(i, holes)]));
                }
            }
            Some(2) => {
                for i in 0..n {
                    let from = if op.is_commutative() { i } else { 0 };
                    for j in from..n {
                        let a = atom(i, holes);
                        let b = atom(j, holes);
                        out.push(Term::bv_op(op.clone(), vec![a, b]));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// The condition on the holes of `expr` for it to meet `spec` at `inp`.
pub fn concretize(spec: &Separable, expr: &Term, inp: &Valuation) -> Term {
    subst_values(&spec.with_output(expr), inp)
}

fn assign(t: &Term, m: &Valuation) -> Term {
    let map: BTreeMap<Name, Term> = holes_of(t)
        .iter()
        .map(|h| (h.name.clone(), Term::Const(m.get(&h.name).cloned().unwrap_or_else(|| Value::default_of(h.sort)))))
        .collect();
    simplify(&subst(t, &map))
}

/// Replace hole `h` by `e` in a template and its constraints; inputs of `e`
/// take the values of each constraint's valuation.
fn deepen_with(expr: &Term, rho: &HoleConstraints, h: &Var, e: &Term) -> (Term, HoleConstraints) {
    let mut m = BTreeMap::new();
    m.insert(h.name.clone(), e.clone());
    let expr = subst(expr, &m);
    let rho = rho
        .iter()
        .map(|(v, r)| {
            let mut m = BTreeMap::new();
            m.insert(h.name.clone(), subst_values(e, v));
            (v.clone(), simplify(&subst(r, &m)))
        })
        .collect();
    (expr, rho)
}

/// Syntactic most general unifier of two templates, holes being the only
/// variables.
fn mgu(a: &Term, b: &Term, sigma: &mut BTreeMap<Name, Term>) -> bool {
    let a = walk(a, sigma);
    let b = walk(b, sigma);
    if a == b {
        return true;
    }
    match (&a, &b) {
        (Term::Var(h), t) | (t, Term::Var(h)) if is_hole(h) => {
            if free_vars(t).contains(h) {
                return false;
            }
            sigma.insert(h.name.clone(), t.clone());
            true
        }
        (Term::App(o1, x), Term::App(o2, y)) if o1 == o2 && x.len() == y.len() => {
            x.iter().zip(y).all(|(p, q)| mgu(p, q, sigma))
        }
        _ => false,
    }
}

fn walk(t: &Term, sigma: &BTreeMap<Name, Term>) -> Term {
    let mut t = t.clone();
    loop {
        let next = subst(&t, sigma);
        if next == t {
            return t;
        }
        t = next;
    }
}

fn rename_holes(t: &Term, rho: &HoleConstraints, holes: &mut Holes) -> (Term, HoleConstraints) {
    let m: BTreeMap<Name, Term> = holes_of(t).iter().map(|h| (h.name.clone(), Term::var(&holes.fresh()))).collect();
    (subst(t, &m), rho.iter().map(|(v, r)| (v.clone(), subst(r, &m))).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UnifyError {
    #[error("templates have no common instance")]
    NotUnifiable,
    #[error("no common instance within the depth bound")]
    DepthExceeded,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A common instance of two templates whose combined hole constraints are
/// satisfiable, searched by deepening the holes of their most general
/// unifier breadth-first.
pub fn unify(
    ctx: &mut Ctx,
    inputs: &[Var],
    a: (&Term, &HoleConstraints),
    b: (&Term, &HoleConstraints),
    cfg: &BvConfig,
    holes: &mut Holes,
) -> Result<Candidate, UnifyError> {
    holes.avoid(a.0);
    holes.avoid(b.0);
    let (ea, ra) = rename_holes(a.0, a.1, holes);
    let (eb, rb) = rename_holes(b.0, b.1, holes);
    let mut sigma = BTreeMap::new();
    if !mgu(&ea, &eb, &mut sigma) {
        return Err(UnifyError::NotUnifiable);
    }
    let expr = walk(&ea, &sigma);
    // Constraints of both sides, each hole rewritten through the unifier.
    let mut rho: HoleConstraints = Vec::new();
    for (v, r) in ra.iter().chain(&rb) {
        let m: BTreeMap<Name, Term> = free_vars(r)
            .iter()
            .filter(|h| is_hole(h))
            .map(|h| (h.name.clone(), subst_values(&walk(&Term::var(h), &sigma), v)))
            .collect();
        rho.push((v.clone(), simplify(&subst(r, &m))));
    }
    let mut frontier = vec![Candidate { expr, rho, depth: 0 }];
    for depth in 0..=cfg.max_depth {
        let mut next = Vec::new();
        for c in frontier {
            ctx.tick()?;
            if ctx.sat(&Term::and(c.rho.iter().map(|(_, r)| r.clone()).collect()))? {
                return Ok(c);
            }
            if depth == cfg.max_depth {
                continue;
            }
            for h in holes_of(&c.expr) {
                for e in level_one(inputs, &cfg.ops, holes) {
                    let (expr, rho) = deepen_with(&c.expr, &c.rho, &h, &e);
                    if rho.iter().any(|(_, r)| r.is_false()) {
                        continue;
                    }
                    next.push(Candidate { expr, rho, depth: c.depth + 1 });
                }
            }
        }
        if next.is_empty() {
            return Err(UnifyError::NotUnifiable);
        }
        next.sort_by_key(|c| c.expr.size());
        frontier = next;
    }
    Err(UnifyError::DepthExceeded)
}

/// Worklist key: size, then operators and leaves in preorder, then arrival.
fn key(t: &Term, ops: &[Op], inputs: &[Var], seq: u64) -> (usize, Vec<u16>, u64) {
    fn go(t: &Term, ops: &[Op], inputs: &[Var], out: &mut Vec<u16>) {
        match t {
            Term::App(op, a) => {
                out.push(ops.iter().position(|o| o == op).unwrap_or(ops.len()) as u16);
                for c in a {
                    go(c, ops, inputs, out);
                }
            }
            Term::Var(v) if is_hole(v) => out.push(1000),
            Term::Var(v) => out.push(500 + inputs.iter().position(|i| i == v).unwrap_or(0) as u16),
            _ => out.push(2000),
        }
    }
    let mut out = Vec::new();
    go(t, ops, inputs, &mut out);
    (t.size(), out, seq)
}

/// Search for an expression over `spec.inputs` meeting the separable `spec`.
pub fn synthesize(ctx: &mut Ctx, spec: &Separable, cfg: &BvConfig) -> Result<Option<Term>, EngineError> {
    let width = spec.output.sort.bv_width().ok_or_else(|| EngineError::Unsupported("output is not a bit-vector".into()))?;
    let mut holes = Holes::new(width);
    let mut seq = 0u64;
    let mut work: BTreeMap<(usize, Vec<u16>, u64), Candidate> = BTreeMap::new();
    let start = Term::var(&holes.fresh());
    work.insert(key(&start, &cfg.ops, &spec.inputs, seq), Candidate { expr: start, rho: Vec::new(), depth: 0 });
    while let Some((k, mut c)) = work.pop_first() {
        ctx.tick()?;
        debug_assert!(is_linear(&c.expr));
        let all = Term::and(c.rho.iter().map(|(_, r)| r.clone()).collect());
        let Some(m) = ctx.model(&all)? else {
            deepen(&mut work, &mut seq, &mut holes, c, spec, cfg);
            continue;
        };
        let prog = assign(&c.expr, &m);
        ctx.spend()?;
        let Some(cex) = ctx.counterexample(&spec.with_output(&prog))? else {
            ctx.event("solved", c.depth as usize, Some(prog.to_string()), None, Some("verified"));
            return Ok(Some(prog));
        };
        let inp = complete(&cex, &spec.inputs);
        let r = concretize(spec, &c.expr, &inp);
        if !ctx.sat(&r)? {
            ctx.event("candidate", c.depth as usize, Some(c.expr.to_string()), None, Some("eliminated"));
            continue;
        }
        c.rho.push((inp, r));
        let all = Term::and(c.rho.iter().map(|(_, r)| r.clone()).collect());
        if ctx.sat(&all)? {
            ctx.event("candidate", c.depth as usize, Some(c.expr.to_string()), None, Some("counterexample"));
            work.insert(k, c);
        } else {
            ctx.event("candidate", c.depth as usize, Some(c.expr.to_string()), None, Some("deepen"));
            deepen(&mut work, &mut seq, &mut holes, c, spec, cfg);
        }
    }
    Ok(None)
}

fn deepen(
    work: &mut BTreeMap<(usize, Vec<u16>, u64), Candidate>,
    seq: &mut u64,
    holes: &mut Holes,
    c: Candidate,
    spec: &Separable,
    cfg: &BvConfig,
) {
    if c.depth >= cfg.max_depth {
        return;
    }
    for h in holes_of(&c.expr) {
        for e in level_one(&spec.inputs, &cfg.ops, holes) {
            let (expr, rho) = deepen_with(&c.expr, &c.rho, &h, &e);
            if rho.iter().any(|(_, r)| r.is_false()) {
                continue;
            }
            *seq += 1;
            work.insert(key(&expr, &cfg.ops, &spec.inputs, *seq), Candidate { expr, rho, depth: c.depth + 1 });
        }
    }
}

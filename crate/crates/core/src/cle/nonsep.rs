//! Conditional linear expressions for nonseparable specifications.
//!
//! A specification is checked clause by clause: a clause constrains a
//! candidate only where every invocation in it falls inside the candidate's
//! domain. The outer constraint is an ordered list of (space, leaf) entries,
//! earlier entries taking precedence.

use super::separable::complete;
use super::{bounds_of, leaf_between, Cle};
use crate::engine::{Ctx, Domain, EngineError, Space, Verdict};
use crate::logic::eval::{eval, eval_bool, eval_with, FunBody};
use crate::logic::linear::{literal_to_lin, IntNorm, LinAtom, LinExpr, LinLit, Rel};
use crate::logic::normal::{lift_ite, nnf, to_cnf, Clause};
use crate::logic::spec::{apply_body, Specification};
use crate::logic::subst::{free_vars, has_invocation, invocations, map_invocations, subst};
use crate::logic::term::{Name, Op, Sort, Term, Valuation, Value, Var};
use crate::rational::Q;
use crate::solver::fm;
use crate::solver::simplex::{self, Optimum};
use std::collections::{BTreeMap, BTreeSet};

const MAX_COMBOS: usize = 4096;
const MAX_BRANCHES: usize = 64;
const MAX_POINTS: usize = 16;
const MAX_GROUND: usize = 20_000;
const MAX_TIGHTEN: usize = 32;

/// One commitment: on `space` the function is `prog`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub space: Vec<LinAtom>,
    pub prog: Term,
}

impl Entry {
    pub fn region(&self) -> Term {
        conj(&self.space)
    }
}

pub type UnifSeq = Vec<Entry>;

fn conj(atoms: &[LinAtom]) -> Term {
    Term::and(atoms.iter().map(LinAtom::to_term).collect())
}

/// First-match decision list over the entries, undefined elsewhere.
pub fn program(psi: &[Entry]) -> Cle {
    psi.iter().rev().fold(Cle::Bottom, |rest, e| match rest {
        Cle::Bottom => Cle::Leaf(e.prog.clone()),
        rest => Cle::ite(e.region(), Cle::Leaf(e.prog.clone()), rest),
    })
}

/// Union of the entry spaces.
pub fn domain(psi: &[Entry]) -> Term {
    Term::or(psi.iter().map(Entry::region).collect())
}

fn norm(a: LinAtom) -> IntNorm {
    if a.expr.is_constant() {
        return if a.holds_q(&a.expr.constant) { IntNorm::True } else { IntNorm::False };
    }
    if a.expr.all_int() {
        a.normalize_int()
    } else {
        IntNorm::Atom(a)
    }
}

/// Normalized conjunction, `None` when trivially false.
fn norm_all(atoms: impl IntoIterator<Item = LinAtom>) -> Option<Vec<LinAtom>> {
    let mut out = Vec::new();
    for a in atoms {
        match norm(a) {
            IntNorm::True => {}
            IntNorm::False => return None,
            IntNorm::Atom(a) => {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
        }
    }
    Some(out)
}

/// The side of a linear literal that holds at `env`.
fn side_at(l: &Term, env: &Valuation) -> Option<LinAtom> {
    match literal_to_lin(l)? {
        LinLit::Atom(a) => Some(a),
        LinLit::Ne(e) => {
            if e.eval(env)?.is_negative() {
                Some(LinAtom::new(e, Rel::Lt))
            } else {
                Some(LinAtom::new(e.neg(), Rel::Lt))
            }
        }
    }
}

fn lit_dnf(l: &Term) -> Result<Vec<Vec<LinAtom>>, EngineError> {
    if let Term::Const(Value::Bool(b)) = l {
        return Ok(if *b { vec![vec![]] } else { vec![] });
    }
    match literal_to_lin(l) {
        Some(LinLit::Atom(a)) => Ok(vec![vec![a]]),
        Some(LinLit::Ne(e)) => Ok(vec![vec![LinAtom::new(e.clone(), Rel::Lt)], vec![LinAtom::new(e.neg(), Rel::Lt)]]),
        None => Err(EngineError::Unsupported(format!("nonlinear literal {l}"))),
    }
}

/// Disjunctive normal form of a formula in negation normal form.
fn dnf(t: &Term) -> Result<Vec<Vec<LinAtom>>, EngineError> {
    match t {
        Term::App(Op::Or, kids) => {
            let mut out = Vec::new();
            for k in kids {
                out.extend(dnf(k)?);
                if out.len() > MAX_BRANCHES {
                    return Err(EngineError::Unsupported("too many disjuncts".into()));
                }
            }
            Ok(out)
        }
        Term::App(Op::And, kids) => {
            let mut out = vec![Vec::new()];
            for k in kids {
                let d = dnf(k)?;
                let mut next = Vec::new();
                for a in &out {
                    for b in &d {
                        let mut c: Vec<LinAtom> = a.clone();
                        c.extend(b.iter().cloned());
                        next.push(c);
                    }
                }
                if next.len() > MAX_BRANCHES {
                    return Err(EngineError::Unsupported("too many disjuncts".into()));
                }
                out = next;
            }
            Ok(out)
        }
        l => lit_dnf(l),
    }
}

/// A convex piece of `t` (in negation normal form) containing `at`.
fn convex_at(t: &Term, at: &Valuation) -> Vec<LinAtom> {
    match t {
        Term::App(Op::And, kids) => kids.iter().flat_map(|k| convex_at(k, at)).collect(),
        Term::App(Op::Or, kids) => {
            kids.iter().find(|k| eval_bool(k, at) == Ok(true)).map(|k| convex_at(k, at)).unwrap_or_default()
        }
        l => side_at(l, at).into_iter().collect(),
    }
}

fn has_div(t: &Term) -> bool {
    matches!(t, Term::App(Op::FloorDiv(_), _)) || t.children().into_iter().any(has_div)
}

fn timeout(_: simplex::TimedOut) -> EngineError {
    EngineError::Timeout
}

/// Whether the conjunction `atoms` entails `a`, over the rationals.
fn entails(ctx: &Ctx, atoms: &[LinAtom], a: &LinAtom) -> Result<bool, EngineError> {
    let parts = match a.rel {
        Rel::Eq => vec![LinAtom::new(a.expr.clone(), Rel::Le), LinAtom::new(a.expr.neg(), Rel::Le)],
        _ => vec![a.clone()],
    };
    for p in parts {
        let ok = match simplex::maximize(atoms, &p.expr, &ctx.deadline).map_err(timeout)? {
            Optimum::Infeasible => return Ok(true),
            Optimum::Unbounded => false,
            Optimum::Bounded { value, strict } => match p.rel {
                Rel::Lt => value.is_negative() || (value.is_zero() && strict),
                _ => !value.is_positive(),
            },
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Drop atoms implied by the others.
fn prune(ctx: &Ctx, atoms: Vec<LinAtom>) -> Result<Vec<LinAtom>, EngineError> {
    let mut out = atoms;
    let mut i = 0;
    while i < out.len() {
        let rest: Vec<LinAtom> = out.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, a)| a.clone()).collect();
        if entails(ctx, &rest, &out[i])? {
            out.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(out)
}

fn clause_invs(c: &Clause) -> Vec<Vec<Term>> {
    let mut out: Vec<Vec<Term>> = Vec::new();
    for l in c {
        for a in invocations(l) {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

/// Solve linear equations for `vars`; `None` unless every variable gets a
/// unique value of its sort.
fn solve_unique(eqs: Vec<LinExpr>, vars: &BTreeSet<Var>) -> Option<BTreeMap<Var, Q>> {
    let mut sol: Vec<(Var, LinExpr)> = Vec::new();
    for e in eqs {
        let mut e = e;
        for (v, by) in &sol {
            e = e.substitute(v, by);
        }
        if e.is_constant() {
            if !e.constant.is_zero() {
                return None;
            }
            continue;
        }
        let (v, c) = e.coeffs.iter().next().map(|(v, c)| (v.clone(), c.clone()))?;
        let mut rest = e.clone();
        rest.coeffs.remove(&v);
        let by = rest.scale(&(-c.recip()));
        for s in sol.iter_mut() {
            s.1 = s.1.substitute(&v, &by);
        }
        sol.push((v, by));
    }
    let mut out = BTreeMap::new();
    for v in vars {
        let (_, e) = sol.iter().find(|(w, _)| w == v)?;
        if !e.is_constant() || (v.sort == Sort::Int && !e.constant.is_integer()) {
            return None;
        }
        out.insert(v.clone(), e.constant.clone());
    }
    Some(out)
}

type Point = Vec<Value>;

struct Pieces {
    /// Clauses over parameters and the output that a new leaf must satisfy.
    phi: Vec<Vec<Term>>,
    /// Parameter regions where some output value is ruled out.
    regions: Vec<Vec<LinAtom>>,
}

struct Pending {
    leaf: Term,
    spaces: Vec<Vec<LinAtom>>,
    clauses: Vec<Clause>,
}

/// Nonseparable domain state.
pub struct NonSep {
    name: Name,
    pub params: Vec<Var>,
    ret: Sort,
    o: Var,
    cnf: Vec<Clause>,
    pub widening: bool,
    pending: Option<Pending>,
    chosen: Vec<LinAtom>,
}

impl NonSep {
    pub fn new(spec: &Specification, widening: bool) -> Result<NonSep, EngineError> {
        let map: BTreeMap<Name, Term> =
            spec.vars.iter().map(|v| (v.name.clone(), Term::Var(Var::new(&format!("u!{}", v.name), v.sort)))).collect();
        let phi = subst(&spec.formula(), &map);
        let mut nested = false;
        map_invocations(&phi, &mut |args| {
            nested |= args.iter().any(has_invocation);
            Term::int(0)
        });
        if nested {
            return Err(EngineError::Unsupported("nested invocations".into()));
        }
        if !spec.fun.ret.is_arith() || !spec.fun.params.iter().all(|p| p.sort.is_arith()) {
            return Err(EngineError::Unsupported("non-arithmetic signature".into()));
        }
        Ok(NonSep {
            name: spec.fun.name.clone(),
            params: spec.fun.params.clone(),
            ret: spec.fun.ret,
            o: Var::new("o!", spec.fun.ret),
            cnf: to_cnf(&phi),
            widening,
            pending: None,
            chosen: Vec::new(),
        })
    }

    fn int(&self) -> bool {
        self.ret == Sort::Int && self.params.iter().all(|p| p.sort == Sort::Int)
    }

    fn invoke(&self, p: &Point) -> Term {
        Term::Invoke { name: self.name.clone(), args: p.iter().cloned().map(Term::Const).collect(), sort: self.ret }
    }

    fn env(&self, p: &Point) -> Valuation {
        self.params.iter().zip(p).map(|(v, x)| (v.name.clone(), x.clone())).collect()
    }

    fn body(&self, psi: &[Entry]) -> Term {
        program(psi).to_term(self.ret)
    }

    /// The specification's clauses together with the facts in `beta`.
    pub fn clauses(&self, beta: &[Term]) -> Vec<Clause> {
        let mut out = self.cnf.clone();
        for b in beta {
            out.extend(to_cnf(b));
        }
        out
    }

    /// Whether every clause holds under `f := body` wherever all its
    /// invocations have arguments in `dom`.
    pub fn satisfies_on(&self, ctx: &mut Ctx, body: &Term, dom: &Term, clauses: &[Clause]) -> Result<bool, EngineError> {
        for c in clauses {
            let prem: Vec<Term> = clause_invs(c).iter().map(|a| apply_body(&self.params, dom, a)).collect();
            let inst: Vec<Term> =
                c.iter().map(|l| map_invocations(l, &mut |a| apply_body(&self.params, body, a))).collect();
            if ctx.sat(&Term::and(vec![Term::and(prem), Term::not(Term::or(inst))]))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn consistent(&self, ctx: &mut Ctx, psi: &[Entry], beta: &[Term]) -> Result<bool, EngineError> {
        self.satisfies_on(ctx, &self.body(psi), &domain(psi), &self.clauses(beta))
    }

    /// Bad pieces: for every clause and every way of resolving its
    /// invocations to either the new input or an entry, the projection of
    /// the clause's negation onto parameters and output.
    fn pieces(&self, psi: &[Entry], clauses: &[Clause]) -> Result<Pieces, EngineError> {
        let mut keep: BTreeSet<Var> = self.params.iter().cloned().collect();
        let pkeep = keep.clone();
        keep.insert(self.o.clone());
        let mut out = Pieces { phi: Vec::new(), regions: Vec::new() };
        for c in clauses {
            let invs = clause_invs(c);
            if invs.is_empty() {
                continue;
            }
            let base = psi.len() + 1;
            let total = base
                .checked_pow(invs.len() as u32)
                .filter(|t| *t <= MAX_COMBOS)
                .ok_or_else(|| EngineError::Unsupported("too many invocation combinations".into()))?;
            for code in 0..total {
                let mut slots = Vec::with_capacity(invs.len());
                let mut k = code;
                for _ in 0..invs.len() {
                    slots.push(k % base);
                    k /= base;
                }
                if !slots.contains(&0) {
                    continue;
                }
                let mut parts = Vec::new();
                for (args, s) in invs.iter().zip(&slots) {
                    if *s == 0 {
                        for (a, p) in args.iter().zip(&self.params) {
                            parts.push(Term::eq(a.clone(), Term::var(p)));
                        }
                    } else {
                        parts.push(apply_body(&self.params, &psi[s - 1].region(), args));
                    }
                }
                let mut value = |args: &[Term]| {
                    let i = invs.iter().position(|a| a == args).expect("collected");
                    match slots[i] {
                        0 => Term::var(&self.o),
                        s => apply_body(&self.params, &psi[s - 1].prog, args),
                    }
                };
                for l in c {
                    parts.push(Term::not(map_invocations(l, &mut value)));
                }
                for branch in dnf(&nnf(&lift_ite(&Term::and(parts))))? {
                    let Some(branch) = norm_all(branch) else { continue };
                    let Some(piece) = norm_all(fm::project(&branch, &keep)) else { continue };
                    let clause: Vec<Term> = piece.iter().map(|a| Term::not(a.to_term())).collect();
                    if !out.phi.contains(&clause) {
                        out.phi.push(clause);
                    }
                    if let Some(r) = norm_all(fm::project(&piece, &pkeep)) {
                        if !out.regions.contains(&r) {
                            out.regions.push(r);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn point_atoms(&self, at: &Valuation) -> Vec<LinAtom> {
        self.params
            .iter()
            .map(|p| {
                let v = at[&p.name].as_num().cloned().unwrap_or_default();
                LinAtom::new(LinExpr::var(p).sub(&LinExpr::constant(v)), Rel::Eq)
            })
            .collect()
    }

    fn gen(&mut self, ctx: &mut Ctx, space: &Space, psi: &[Entry], beta: &[Term]) -> Result<Option<Cle>, EngineError> {
        let clauses = self.clauses(beta);
        if !self.satisfies_on(ctx, &self.body(psi), &domain(psi), &clauses)? {
            return Ok(None);
        }
        let pieces = self.pieces(psi, &clauses)?;
        let phi = Term::and(pieces.phi.iter().map(|c| Term::or(c.clone())).collect());
        let s = &space.constraint;
        let mut found = None;
        for r in &pieces.regions {
            if let Some(m) = ctx.model(&Term::and(vec![s.clone(), conj(r), phi.clone()]))? {
                found = Some((m, Some(r.clone())));
                break;
            }
        }
        if found.is_none() {
            if let Some(m) = ctx.model(&Term::and(vec![s.clone(), phi.clone()]))? {
                found = Some((m, None));
            }
        }
        let Some((m, region)) = found else { return Ok(None) };
        let mut vars = self.params.clone();
        vars.push(self.o.clone());
        let at = complete(&m, &vars);
        let spiece = convex_at(&nnf(s), &at);
        let anchor = region.clone().unwrap_or_else(|| spiece.clone());

        let mut on_o = Vec::new();
        let mut guard = Vec::new();
        for c in &pieces.phi {
            let holds: Vec<&Term> = c.iter().filter(|d| eval_bool(d, &at) == Ok(true)).collect();
            if let Some(d) = holds.iter().find(|d| free_vars(d).contains(&self.o)) {
                on_o.push((*d).clone());
                continue;
            }
            let mut pick = None;
            for d in &holds {
                let Some(a) = side_at(d, &at) else { continue };
                if entails(ctx, &anchor, &a)? {
                    pick = Some(a);
                    break;
                }
                pick.get_or_insert(a);
            }
            guard.extend(pick);
        }
        let mut bounds = Vec::new();
        for d in &on_o {
            let b = bounds_of(d, &self.o, &at)
                .ok_or_else(|| EngineError::Unsupported(format!("disjunct {d} is not a linear bound on the output")))?;
            bounds.extend(b);
        }
        let mut leaf = leaf_between(&bounds, self.ret, &at)
            .ok_or_else(|| EngineError::Unsupported("bounds cross at the example".into()))?;
        if has_div(&leaf) {
            leaf = Term::Const(at[&self.o.name].clone());
        }
        let mut omap = BTreeMap::new();
        omap.insert(self.o.name.clone(), leaf.clone());
        for d in &on_o {
            guard.extend(side_at(&subst(d, &omap), &at));
        }
        let point = self.point_atoms(&at);
        let guard = norm_all(guard).unwrap_or_else(|| point.clone());
        let mut first = region.unwrap_or_default();
        first.extend(guard);
        let mut second = first.clone();
        second.extend(spiece);
        let mut spaces: Vec<Vec<LinAtom>> = Vec::new();
        for g in [first, second, point] {
            if let Some(g) = norm_all(g) {
                let g = prune(ctx, g)?;
                if !spaces.contains(&g) {
                    spaces.push(g);
                }
            }
        }
        self.pending = Some(Pending { leaf: leaf.clone(), spaces, clauses });
        Ok(Some(Cle::Leaf(leaf)))
    }

    /// Octagonal directions over the parameters: `±x` then `±(x - y)`.
    fn directions(&self) -> Vec<LinExpr> {
        let mut out = Vec::new();
        for p in &self.params {
            out.push(LinExpr::var(p));
            out.push(LinExpr::var(p).neg());
        }
        for (i, a) in self.params.iter().enumerate() {
            for b in &self.params[i + 1..] {
                let d = LinExpr::var(a).sub(&LinExpr::var(b));
                out.push(d.clone());
                out.push(d.neg());
            }
        }
        out
    }

    /// Octagonal hull of `ij` (plus its own atoms) keeping what `inn` entails.
    pub fn widen_spaces(&self, ctx: &Ctx, ij: &[LinAtom], inn: &[LinAtom]) -> Result<Vec<LinAtom>, EngineError> {
        let mut cands: Vec<LinAtom> = Vec::new();
        for d in self.directions() {
            if let Optimum::Bounded { value, strict } = simplex::maximize(ij, &d, &ctx.deadline).map_err(timeout)? {
                let rel = if strict { Rel::Lt } else { Rel::Le };
                cands.push(LinAtom::new(d.sub(&LinExpr::constant(value)), rel));
            }
        }
        for a in ij {
            match a.rel {
                Rel::Eq => {
                    cands.push(LinAtom::new(a.expr.clone(), Rel::Le));
                    cands.push(LinAtom::new(a.expr.neg(), Rel::Le));
                }
                _ => cands.push(a.clone()),
            }
        }
        let mut out = Vec::new();
        for a in cands {
            if entails(ctx, inn, &a)? {
                out.push(a);
            }
        }
        Ok(norm_all(out).unwrap_or_default())
    }

    /// A template inequality holding on `ij ∪ inn` but not at `c`.
    fn separate(&self, ctx: &Ctx, ij: &[LinAtom], inn: &[LinAtom], c: &Valuation) -> Result<Option<LinAtom>, EngineError> {
        'dirs: for d in self.directions() {
            let Some(dc) = d.eval(c) else { continue };
            let mut hi: Option<(Q, bool)> = None;
            for s in [ij, inn] {
                match simplex::maximize(s, &d, &ctx.deadline).map_err(timeout)? {
                    Optimum::Infeasible => {}
                    Optimum::Unbounded => continue 'dirs,
                    Optimum::Bounded { value, strict } => {
                        let better = match &hi {
                            None => true,
                            Some((v, st)) => value > *v || (value == *v && *st && !strict),
                        };
                        if better {
                            hi = Some((value, strict));
                        }
                    }
                }
            }
            let Some((m, strict)) = hi else { continue };
            if self.int() {
                let k = &dc - &Q::one();
                if m <= k {
                    return Ok(Some(LinAtom::new(d.sub(&LinExpr::constant(k)), Rel::Le)));
                }
            } else if m < dc || (m == dc && strict) {
                return Ok(Some(LinAtom::new(d.sub(&LinExpr::constant(dc)), Rel::Lt)));
            }
        }
        Ok(None)
    }

    fn fact_points(&self, t: &Term) -> Vec<Point> {
        let mut out = Vec::new();
        for args in invocations(t) {
            let p: Option<Point> = args.iter().map(|a| eval(a, &Valuation::new()).ok()).collect();
            if let Some(p) = p {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }

    fn in_space(&self, atoms: &[LinAtom], p: &Point) -> bool {
        let env = self.env(p);
        atoms.iter().all(|a| a.holds(&env) == Some(true))
    }

    /// Widening of the last entry against the latest earlier entry with the
    /// same program.
    pub fn widen_seq(&self, ctx: &mut Ctx, psi: UnifSeq, beta: &[Term]) -> Result<UnifSeq, EngineError> {
        if psi.len() < 2 {
            return Ok(psi);
        }
        let n = psi.len() - 1;
        let same = |a: &Term, b: &Term| match (crate::logic::linear::linearize(a), crate::logic::linear::linearize(b)) {
            (Some(x), Some(y)) => x == y,
            _ => a == b,
        };
        let Some(j) = (0..n).rev().find(|&j| same(&psi[j].prog, &psi[n].prog)) else { return Ok(psi) };
        let (ij, inn) = (psi[j].space.clone(), psi[n].space.clone());
        let mut star = self.widen_spaces(ctx, &ij, &inn)?;
        let mut tightened = 0;
        'tighten: loop {
            let mut cand = psi.clone();
            cand[n].space = star.clone();
            let body = self.body(&cand);
            let interp = FunBody { params: &self.params, body: &body };
            for fact in beta {
                let pts = self.fact_points(fact);
                let covered = |p: &Point| cand.iter().any(|e| self.in_space(&e.space, p));
                if !pts.iter().all(covered) {
                    continue;
                }
                if eval_with(fact, &Valuation::new(), Some(&interp)).ok().and_then(|v| v.as_bool()) != Some(false) {
                    continue;
                }
                let bad: Vec<&Point> = pts
                    .iter()
                    .filter(|p| self.in_space(&star, p) && !psi[..n].iter().any(|e| self.in_space(&e.space, p)))
                    .filter(|p| !self.in_space(&inn, p))
                    .collect();
                if bad.is_empty() {
                    continue;
                }
                tightened += 1;
                if tightened > MAX_TIGHTEN {
                    return Ok(psi);
                }
                for p in bad {
                    match self.separate(ctx, &ij, &inn, &self.env(p))? {
                        Some(a) => star.extend(norm_all([a]).unwrap_or_default()),
                        None => return Ok(psi),
                    }
                }
                continue 'tighten;
            }
            break;
        }
        let st = conj(&star);
        for s in [&ij, &inn] {
            if ctx.sat(&Term::and(vec![conj(s), Term::not(st.clone())]))? {
                log::warn!("widening lost containment; keeping the unwidened sequence");
                return Ok(psi);
            }
        }
        ctx.event("widen", n, Some(psi[n].prog.to_string()), Some(st.to_string()), None);
        let mut out = psi;
        out[n].space = prune(ctx, star)?;
        Ok(out)
    }

    fn sample(&self, ctx: &mut Ctx, t: &Term) -> Result<Option<Point>, EngineError> {
        Ok(ctx.model(t)?.map(|m| {
            let c = complete(&m, &self.params);
            self.params.iter().map(|p| c[&p.name].clone()).collect()
        }))
    }

    /// Argument points to ground the specification on.
    fn probe_points(&self, ctx: &mut Ctx, space: &Space, psi: &[Entry], beta: &[Term]) -> Result<Vec<Point>, EngineError> {
        let mut pts: Vec<Point> = Vec::new();
        let add = |pts: &mut Vec<Point>, p: Point| {
            if pts.len() < MAX_POINTS && !pts.contains(&p) {
                pts.push(p);
            }
        };
        for c in &self.cnf {
            for p in self.fact_points(&Term::or(c.clone())) {
                add(&mut pts, p);
            }
        }
        for b in beta {
            for p in self.fact_points(b) {
                add(&mut pts, p);
            }
        }
        if let Some(p) = self.sample(ctx, &space.constraint)? {
            add(&mut pts, p);
        }
        for e in psi.iter().rev().take(4) {
            if let Some(p) = self.sample(ctx, &e.region())? {
                add(&mut pts, p);
            }
            for (k, x) in self.params.iter().enumerate() {
                let obj = LinExpr::var(x);
                for v in [
                    simplex::minimize(&e.space, &obj, &ctx.deadline).map_err(timeout)?,
                    simplex::maximize(&e.space, &obj, &ctx.deadline).map_err(timeout)?,
                ] {
                    let Optimum::Bounded { value, strict: false } = v else { continue };
                    let at = Term::eq(Term::var(x), Term::num(x.sort, value));
                    if let Some(p) = self.sample(ctx, &Term::and(vec![e.region(), at]))? {
                        debug_assert!(p.len() > k);
                        add(&mut pts, p);
                    }
                }
            }
        }
        Ok(pts)
    }

    /// The specification and learned facts instantiated on `pts`, with
    /// `f(pts[i])` replaced by the variable `fv[i]`.
    fn ground(&self, pts: &[Point], fv: &[Var], beta: &[Term]) -> Term {
        let lookup = |args: &[Term]| -> Option<Term> {
            let p: Point = args.iter().map(|a| eval(a, &Valuation::new()).ok()).collect::<Option<_>>()?;
            pts.iter().position(|q| *q == p).map(|i| Term::var(&fv[i]))
        };
        let mut out = Vec::new();
        for c in &self.cnf {
            let invs = clause_invs(c);
            if invs.is_empty() {
                continue;
            }
            let Some(total) = pts.len().checked_pow(invs.len() as u32).filter(|t| *t <= MAX_GROUND) else {
                log::debug!("skipping a clause with too many ground instances");
                continue;
            };
            let lits = Term::or(c.clone());
            let vars: BTreeSet<Var> = free_vars(&lits).into_iter().filter(|v| v.name.starts_with("u!")).collect();
            let lin_args: Option<Vec<Vec<LinExpr>>> =
                invs.iter().map(|a| a.iter().map(crate::logic::linear::linearize).collect()).collect();
            let Some(lin_args) = lin_args else { continue };
            for code in 0..total {
                let mut k = code;
                let mut eqs = Vec::new();
                for args in &lin_args {
                    let p = &pts[k % pts.len()];
                    k /= pts.len();
                    for (a, x) in args.iter().zip(p) {
                        eqs.push(a.sub(&LinExpr::constant(x.as_num().cloned().unwrap_or_default())));
                    }
                }
                let Some(sol) = solve_unique(eqs, &vars) else { continue };
                let m: BTreeMap<Name, Term> = sol.iter().map(|(v, q)| (v.name.clone(), Term::num(v.sort, q.clone()))).collect();
                let inst = subst(&lits, &m);
                let mut ok = true;
                let g = map_invocations(&inst, &mut |a| {
                    lookup(a).unwrap_or_else(|| {
                        ok = false;
                        Term::int(0)
                    })
                });
                if ok {
                    out.push(g);
                }
            }
        }
        for b in beta {
            let mut ok = true;
            let g = map_invocations(b, &mut |a| {
                lookup(a).unwrap_or_else(|| {
                    ok = false;
                    Term::int(0)
                })
            });
            if ok {
                out.push(g);
            }
        }
        Term::and(out)
    }

    /// Facts about `f` at probe points that every correct program satisfies.
    pub fn learn(&self, ctx: &mut Ctx, space: &Space, psi: &[Entry], beta: &[Term]) -> Result<Vec<Term>, EngineError> {
        let pts = self.probe_points(ctx, space, psi, beta)?;
        let fv: Vec<Var> = (0..pts.len()).map(|i| Var::new(&format!("f!{i}"), self.ret)).collect();
        let ground = self.ground(&pts, &fv, beta);
        let Some(m) = ctx.model(&ground)? else { return Ok(vec![Term::ff()]) };
        let m = complete(&m, &fv);
        let val = |i: usize| Term::Const(m[&fv[i].name].clone());
        let mut facts = Vec::new();
        let mut forced = vec![false; pts.len()];
        for i in 0..pts.len() {
            let other = Term::not(Term::eq(Term::var(&fv[i]), val(i)));
            if !ctx.sat(&Term::and(vec![ground.clone(), other]))? {
                forced[i] = true;
                facts.push(Term::eq(self.invoke(&pts[i]), val(i)));
            }
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if forced[i] || forced[j] || m[&fv[i].name] != m[&fv[j].name] {
                    continue;
                }
                let differ = Term::not(Term::eq(Term::var(&fv[i]), Term::var(&fv[j])));
                if !ctx.sat(&Term::and(vec![ground.clone(), differ]))? {
                    facts.push(Term::eq(self.invoke(&pts[i]), self.invoke(&pts[j])));
                }
            }
        }
        let prog = program(psi);
        for (i, p) in pts.iter().enumerate() {
            if forced[i] || !psi.iter().any(|e| self.in_space(&e.space, p)) {
                continue;
            }
            let Some(v) = prog.eval(&self.env(p)) else { continue };
            let same = Term::eq(Term::var(&fv[i]), Term::Const(v.clone()));
            if !ctx.sat(&Term::and(vec![ground.clone(), same]))? {
                facts.push(Term::not(Term::eq(self.invoke(p), Term::Const(v))));
            }
        }
        Ok(facts)
    }
}

impl Domain for NonSep {
    type Program = Cle;
    type Outer = UnifSeq;
    type Learned = Vec<Term>;
    type Cegis = ();

    fn new_cegis(&mut self, _space: &Space, _psi: &UnifSeq) {}

    fn restrict(&mut self, _ctx: &mut Ctx, space: &Space, psi: &UnifSeq) -> Result<Space, EngineError> {
        if psi.is_empty() {
            return Ok(space.clone());
        }
        Ok(Space {
            vars: space.vars.clone(),
            constraint: Term::and(vec![space.constraint.clone(), Term::not(domain(psi))]),
            guard: space.guard.clone(),
        })
    }

    fn base(&mut self, psi: &UnifSeq) -> Cle {
        program(psi)
    }

    fn generate(&mut self, ctx: &mut Ctx, space: &Space, _phi: &mut (), psi: &UnifSeq, beta: &Vec<Term>) -> Result<Option<Cle>, EngineError> {
        self.gen(ctx, space, psi, beta)
    }

    fn pick_input(&mut self, _ctx: &mut Ctx, _space: &Space, _prog: &Cle, _psi: &UnifSeq) -> Result<(Valuation, bool), EngineError> {
        Ok((Valuation::new(), true))
    }

    fn project(&mut self, _phi: &mut (), _inp: &Valuation) {}

    fn split(&mut self, ctx: &mut Ctx, space: &Space, _prog: &Cle, _inp: &Valuation, psi: &UnifSeq) -> Result<(Space, Space), EngineError> {
        let p = self.pending.take().expect("generate ran");
        for g in p.spaces {
            let mut next = psi.clone();
            next.push(Entry { space: g.clone(), prog: p.leaf.clone() });
            if self.satisfies_on(ctx, &self.body(&next), &domain(&next), &p.clauses)? {
                let t = conj(&g);
                self.chosen = g;
                return Ok((space.refine(t.clone()), space.without(&t)));
            }
        }
        Err(EngineError::SplitUnsound(format!("no consistent space for leaf {}", p.leaf)))
    }

    fn check_good(&mut self, _ctx: &mut Ctx, _prog: &Cle, _good: &Space, _psi: &UnifSeq) -> Result<bool, EngineError> {
        Ok(true)
    }

    fn unif_constr(&mut self, psi: &UnifSeq, _good: &Space, prog: &Cle) -> UnifSeq {
        let Cle::Leaf(leaf) = prog else { unreachable!("generate returns leaves") };
        let mut next = psi.clone();
        next.push(Entry { space: std::mem::take(&mut self.chosen), prog: leaf.clone() });
        next
    }

    fn widen(&mut self, ctx: &mut Ctx, psi: UnifSeq, beta: &Vec<Term>) -> Result<UnifSeq, EngineError> {
        if !self.widening {
            return Ok(psi);
        }
        self.widen_seq(ctx, psi, beta)
    }

    fn learn_from(&mut self, ctx: &mut Ctx, space: &Space, psi: &UnifSeq, beta: &mut Vec<Term>) -> Result<(), EngineError> {
        let facts = self.learn(ctx, space, psi, beta)?;
        let mut new = false;
        for f in facts {
            if !beta.contains(&f) {
                log::debug!("learned {f}");
                beta.push(f);
                new = true;
            }
        }
        if new {
            ctx.epoch += 1;
        } else {
            log::warn!("no learnable fact at a failed level");
        }
        Ok(())
    }

    fn unify(&mut self, _good: &Space, _prog: Cle, _bad: &Space, child: Cle) -> Cle {
        child
    }

    fn verify(&mut self, ctx: &mut Ctx, prog: &Cle, space: &Space) -> Result<Verdict, EngineError> {
        let body = prog.to_term(self.ret);
        if self.satisfies_on(ctx, &body, &space.constraint, &self.cnf)? {
            Ok(Verdict::Verified)
        } else {
            Ok(Verdict::Counterexample(Valuation::new()))
        }
    }
}

/// Synthesize a program over the function parameters.
pub fn synthesize(ctx: &mut Ctx, spec: &Specification, widening: bool) -> Result<Option<Cle>, EngineError> {
    let mut d = NonSep::new(spec, widening)?;
    let space = Space::full(d.params.clone());
    let mut beta = Vec::new();
    crate::engine::synthesize(&mut d, ctx, &space, &Vec::new(), &mut beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::spec::SynthFun;

    fn iv(n: &str) -> Var {
        Var::new(n, Sort::Int)
    }

    fn t(n: &str) -> Term {
        Term::var(&iv(n))
    }

    fn call(args: Vec<Term>) -> Term {
        Term::Invoke { name: "f".into(), args, sort: Sort::Int }
    }

    fn spec(params: &[&str], vars: &[&str], constraints: Vec<Term>) -> Specification {
        Specification {
            fun: SynthFun { name: "f".into(), params: params.iter().map(|p| iv(p)).collect(), ret: Sort::Int, ops: None },
            vars: vars.iter().map(|v| iv(v)).collect(),
            constraints,
        }
    }

    fn sum_ten() -> Specification {
        let c = Term::implies(
            Term::not(Term::eq(t("x"), t("y"))),
            Term::eq(Term::add(call(vec![t("x")]), call(vec![t("y")])), Term::int(10)),
        );
        spec(&["i"], &["x", "y"], vec![c])
    }

    fn count_to_twelve() -> Specification {
        let step = Term::implies(
            Term::and(vec![
                Term::eq(call(vec![t("x")]), Term::int(1)),
                Term::le(Term::int(0), t("x")),
                Term::le(t("x"), Term::int(10)),
            ]),
            Term::eq(call(vec![Term::add(t("x"), Term::int(1))]), Term::int(1)),
        );
        spec(
            &["i"],
            &["x"],
            vec![Term::eq(call(vec![Term::int(0)]), Term::int(1)), step, Term::eq(call(vec![Term::int(12)]), Term::int(0))],
        )
    }

    fn acceleration() -> Specification {
        let inbox = |a: &str, b: &str| {
            Term::and(vec![
                Term::le(Term::int(0), t(a)),
                Term::le(t(a), Term::int(2)),
                Term::le(Term::int(0), t(b)),
                Term::le(t(b), Term::int(2)),
            ])
        };
        let fxy = call(vec![t("x"), t("y")]);
        spec(
            &["i", "j"],
            &["x", "y", "u", "v"],
            vec![
                Term::implies(inbox("x", "y"), Term::eq(fxy.clone(), Term::int(1))),
                Term::implies(
                    Term::and(vec![Term::eq(t("x"), Term::int(4)), Term::eq(t("y"), Term::int(0))]),
                    Term::eq(fxy.clone(), Term::int(0)),
                ),
                Term::implies(
                    Term::and(vec![
                        Term::eq(fxy, Term::int(1)),
                        Term::eq(t("u"), Term::add(t("x"), Term::int(2))),
                        Term::eq(t("v"), Term::add(t("y"), Term::int(2))),
                    ]),
                    Term::eq(call(vec![t("u"), t("v")]), Term::int(1)),
                ),
            ],
        )
    }

    fn at(names: &[&str], vals: &[i64]) -> Valuation {
        names.iter().zip(vals).map(|(n, v)| (Name::from(*n), Value::Int(Q::int(*v)))).collect()
    }

    fn lin(t: &Term) -> Vec<LinAtom> {
        match literal_to_lin(t) {
            Some(LinLit::Atom(a)) => vec![a],
            _ => panic!("not an atom"),
        }
    }

    fn equivalent(ctx: &mut Ctx, a: &Term, b: &Term) -> bool {
        let differ = Term::or(vec![
            Term::and(vec![a.clone(), Term::not(b.clone())]),
            Term::and(vec![b.clone(), Term::not(a.clone())]),
        ]);
        !ctx.sat(&differ).unwrap()
    }

    #[test]
    fn sum_ten_gives_five() {
        let mut ctx = Ctx::internal();
        let p = synthesize(&mut ctx, &sum_ten(), true).unwrap().unwrap();
        for i in -20..=20 {
            assert_eq!(p.eval(&at(&["i"], &[i])), Some(Value::Int(Q::int(5))));
        }
    }

    #[test]
    fn satisfies_on_constant_programs() {
        let s = sum_ten();
        let d = NonSep::new(&s, false).unwrap();
        let mut ctx = Ctx::internal();
        assert!(d.satisfies_on(&mut ctx, &Term::int(5), &Term::tt(), &d.cnf).unwrap());
        assert!(!d.satisfies_on(&mut ctx, &Term::int(0), &Term::tt(), &d.cnf).unwrap());
        // On a single point no clause has all invocations in the domain with x ≠ y.
        let one = Term::eq(t("i"), Term::int(0));
        assert!(d.satisfies_on(&mut ctx, &Term::int(0), &one, &d.cnf).unwrap());
    }

    #[test]
    fn second_leaf_complements_the_first() {
        let s = sum_ten();
        let mut d = NonSep::new(&s, false).unwrap();
        let mut ctx = Ctx::internal();
        let psi = vec![Entry { space: lin(&Term::eq(t("i"), Term::int(0))), prog: Term::int(0) }];
        let space = d.restrict(&mut ctx, &Space::full(d.params.clone()), &psi).unwrap();
        let leaf = d.gen(&mut ctx, &space, &psi, &[]).unwrap().unwrap();
        assert_eq!(leaf, Cle::Leaf(Term::int(10)));
    }

    #[test]
    fn widening_counts_up_then_stops_at_the_fact() {
        let s = count_to_twelve();
        let d = NonSep::new(&s, true).unwrap();
        let mut ctx = Ctx::internal();
        let psi = vec![
            Entry { space: lin(&Term::eq(t("i"), Term::int(0))), prog: Term::int(1) },
            Entry { space: lin(&Term::eq(t("i"), Term::int(1))), prog: Term::int(1) },
        ];
        let w = d.widen_seq(&mut ctx, psi.clone(), &[]).unwrap();
        assert!(equivalent(&mut ctx, &w[1].region(), &Term::ge(t("i"), Term::int(0))));
        let beta = vec![Term::eq(call(vec![Term::int(12)]), Term::int(0))];
        let w = d.widen_seq(&mut ctx, psi, &beta).unwrap();
        let want = Term::and(vec![Term::le(Term::int(0), t("i")), Term::lt(t("i"), Term::int(12))]);
        assert!(equivalent(&mut ctx, &w[1].region(), &want));
    }

    #[test]
    fn widening_leaves_distinct_programs_alone() {
        let s = count_to_twelve();
        let d = NonSep::new(&s, true).unwrap();
        let mut ctx = Ctx::internal();
        let psi = vec![
            Entry { space: lin(&Term::eq(t("i"), Term::int(0))), prog: Term::int(1) },
            Entry { space: lin(&Term::eq(t("i"), Term::int(12))), prog: Term::int(0) },
        ];
        assert_eq!(d.widen_seq(&mut ctx, psi.clone(), &[]).unwrap(), psi);
    }

    #[test]
    fn count_to_twelve_is_solved() {
        let mut ctx = Ctx::internal();
        let p = synthesize(&mut ctx, &count_to_twelve(), true).unwrap().unwrap();
        for i in 0..=11 {
            assert_eq!(p.eval(&at(&["i"], &[i])), Some(Value::Int(Q::one())), "at {i}");
        }
        assert_eq!(p.eval(&at(&["i"], &[12])), Some(Value::Int(Q::zero())));
    }

    #[test]
    fn diagonal_widening() {
        let s = acceleration();
        let d = NonSep::new(&s, true).unwrap();
        let mut ctx = Ctx::internal();
        let boxed = |lo: i64, hi: i64| {
            let mut v = Vec::new();
            for n in ["i", "j"] {
                v.extend(lin(&Term::le(Term::int(lo), t(n))));
                v.extend(lin(&Term::le(t(n), Term::int(hi))));
            }
            v
        };
        let psi = vec![Entry { space: boxed(0, 2), prog: Term::int(1) }, Entry { space: boxed(2, 4), prog: Term::int(1) }];
        let w = d.widen_seq(&mut ctx, psi, &[]).unwrap();
        let diff = Term::sub(t("i"), t("j"));
        let want = Term::and(vec![
            Term::le(Term::int(0), t("i")),
            Term::le(Term::int(0), t("j")),
            Term::le(Term::int(-2), diff.clone()),
            Term::le(diff, Term::int(2)),
        ]);
        assert!(equivalent(&mut ctx, &w[1].region(), &want));
    }

    #[test]
    fn acceleration_needs_widening() {
        let mut ctx = Ctx::internal();
        let p = synthesize(&mut ctx, &acceleration(), true).unwrap().unwrap();
        assert_eq!(p.eval(&at(&["i", "j"], &[4, 0])), Some(Value::Int(Q::zero())));
        for k in 0..10 {
            assert_eq!(p.eval(&at(&["i", "j"], &[2 * k + 1, 2 * k])), Some(Value::Int(Q::one())));
        }
        let mut ctx = Ctx::internal();
        ctx.fuel = 12;
        let r = synthesize(&mut ctx, &acceleration(), false);
        assert!(matches!(r, Err(EngineError::FuelExhausted)), "{r:?}");
    }

    #[test]
    fn learned_facts_follow_from_the_spec() {
        let s = sum_ten();
        let d = NonSep::new(&s, false).unwrap();
        let mut ctx = Ctx::internal();
        let psi = vec![
            Entry { space: lin(&Term::eq(t("i"), Term::int(0))), prog: Term::int(0) },
            Entry { space: lin(&Term::eq(t("i"), Term::int(1))), prog: Term::int(10) },
        ];
        let space = Space::new(d.params.clone(), Term::not(domain(&psi)));
        let facts = d.learn(&mut ctx, &space, &psi, &[]).unwrap();
        assert!(facts.contains(&Term::eq(call(vec![Term::int(0)]), Term::int(5))), "{facts:?}");
        // Each fact holds for the only solution.
        let five = FunBody { params: &d.params, body: &Term::int(5) };
        for f in &facts {
            assert_eq!(eval_with(f, &Valuation::new(), Some(&five)), Ok(Value::Bool(true)), "{f}");
        }
    }
}

//! Enumerative CEGIS baseline: bottom-up enumeration by size with
//! observational-equivalence pruning over a growing example set.

use crate::cle::separable::complete;
use crate::engine::{Ctx, EngineError};
use crate::frontend::{Logic, Problem};
use crate::logic::eval::{apply_op, eval, eval_bool};
use crate::logic::subst::{has_invocation, rewrite, subst_values};
use crate::logic::term::{bv_mask, Op, Sort, Term, Valuation, Value, Var};
use crate::rational::Q;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap, HashSet};

/// Programs larger than this are not enumerated.
pub const MAX_SIZE: usize = 40;

#[derive(Clone, Debug)]
enum Kind {
    Leaf(Term),
    App(Op, Vec<usize>),
    Ite(usize, usize, usize),
}

#[derive(Clone, Debug)]
struct Node {
    kind: Kind,
    sort: Sort,
    vals: Vec<Value>,
}

/// Production rules of the enumerated grammar.
#[derive(Clone, Debug)]
pub struct Grammar {
    pub consts: Vec<Value>,
    pub unary: Vec<Op>,
    pub binary: Vec<Op>,
    pub compare: Vec<Op>,
    pub ite: bool,
    pub connectives: Vec<Op>,
}

impl Grammar {
    pub fn for_problem(problem: &Problem) -> Grammar {
        let spec = &problem.spec;
        let ret = spec.fun.ret;
        let mut consts: Vec<Value> = match ret {
            Sort::BitVec(w) => vec![Value::bv(0, w), Value::bv(1, w)],
            s => vec![Value::num(s, Q::zero()), Value::num(s, Q::one())],
        };
        let mut lits = BTreeSet::new();
        for c in &spec.constraints {
            rewrite(c, &mut |t| {
                if let Term::Const(v) = &t {
                    if v.sort() == ret {
                        lits.insert(v.clone());
                    }
                }
                t
            });
        }
        for v in lits {
            if !consts.contains(&v) {
                consts.push(v);
            }
        }
        let mut g = match problem.logic {
            Logic::Bv(_) => Grammar {
                consts,
                unary: vec![Op::BvNot, Op::BvNeg],
                binary: vec![Op::BvAnd, Op::BvOr, Op::BvXor, Op::BvAdd, Op::BvSub, Op::BvShl, Op::BvLshr],
                compare: vec![],
                ite: false,
                connectives: vec![],
            },
            _ => Grammar {
                consts,
                unary: vec![],
                binary: vec![Op::Add, Op::Sub],
                compare: vec![Op::Le, Op::Eq],
                ite: true,
                connectives: vec![Op::And, Op::Or, Op::Not],
            },
        };
        if let Some(ops) = &spec.fun.ops {
            let keep = |o: &Op| ops.contains(o.symbol());
            let mut h = g.clone();
            h.unary.retain(keep);
            h.binary.retain(keep);
            h.compare.retain(keep);
            h.connectives.retain(keep);
            h.ite &= ops.contains("ite");
            if !h.unary.is_empty() || !h.binary.is_empty() || h.ite {
                g = h;
            }
        }
        g
    }
}

/// The specification at one example, with each invocation replaced by a
/// placeholder for the function's value at a point.
struct Instance {
    formula: Term,
}

fn placeholder(k: usize, sort: Sort) -> Var {
    Var::new(&format!("f!{k}"), sort)
}

struct Examples {
    points: Vec<Vec<Value>>,
    instances: Vec<Instance>,
}

impl Examples {
    fn build(problem: &Problem, examples: &[Valuation]) -> Result<Examples, EngineError> {
        let spec = &problem.spec;
        let phi = spec.formula();
        let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
        let mut points = Vec::new();
        let mut instances = Vec::new();
        for e in examples {
            let mut bad = None;
            let formula = rewrite(&phi, &mut |t| match &t {
                Term::Invoke { args, sort, .. } => {
                    if args.iter().any(has_invocation) {
                        bad = Some("nested invocation");
                        return t;
                    }
                    let vals: Result<Vec<Value>, _> = args.iter().map(|a| eval(a, e)).collect();
                    let Ok(vals) = vals else {
                        bad = Some("argument does not evaluate");
                        return t;
                    };
                    let n = index.len();
                    let k = *index.entry(vals.clone()).or_insert_with(|| {
                        points.push(vals);
                        n
                    });
                    Term::var(&placeholder(k, *sort))
                }
                _ => t,
            });
            if let Some(b) = bad {
                return Err(EngineError::Unsupported(b.into()));
            }
            instances.push(Instance { formula: subst_values(&formula, e) });
        }
        Ok(Examples { points, instances })
    }

    fn accepts(&self, vals: &[Value], sort: Sort) -> bool {
        let env: Valuation = vals.iter().enumerate().map(|(k, v)| (placeholder(k, sort).name, v.clone())).collect();
        self.instances.iter().all(|i| eval_bool(&i.formula, &env) == Ok(true))
    }
}

struct Bank {
    nodes: Vec<Node>,
    by_size: Vec<Vec<usize>>,
    seen: HashSet<(Sort, Vec<Value>)>,
}

impl Bank {
    fn term(&self, i: usize) -> Term {
        let n = &self.nodes[i];
        match &n.kind {
            Kind::Leaf(t) => t.clone(),
            Kind::App(op, args) => Term::App(op.clone(), args.iter().map(|a| self.term(*a)).collect()),
            Kind::Ite(c, a, b) => Term::Ite(Box::new((self.term(*c), self.term(*a), self.term(*b)))),
        }
    }

    fn of(&self, size: usize, sort: Sort) -> Vec<usize> {
        self.by_size[size].iter().copied().filter(|&i| self.nodes[i].sort == sort).collect()
    }
}

/// New nodes of one size, kept only when observationally new.
struct Level<'a> {
    bank: &'a Bank,
    seen: HashSet<(Sort, Vec<Value>)>,
    fresh: Vec<Node>,
    ret: Sort,
    ex: &'a Examples,
    found: Option<usize>,
}

impl Level<'_> {
    /// Returns true once a program consistent with the examples appears.
    fn emit(&mut self, kind: Kind, sort: Sort, vals: Vec<Value>) -> bool {
        let key = (sort, vals);
        if self.bank.seen.contains(&key) || !self.seen.insert(key.clone()) {
            return false;
        }
        let accepted = sort == self.ret && self.ex.accepts(&key.1, sort);
        self.fresh.push(Node { kind, sort, vals: key.1 });
        if accepted {
            self.found = Some(self.fresh.len() - 1);
        }
        accepted
    }
}

fn zip(op: &Op, xs: &[&[Value]]) -> Option<Vec<Value>> {
    (0..xs[0].len()).map(|k| apply_op(op, &xs.iter().map(|x| x[k].clone()).collect::<Vec<_>>())).collect()
}

/// Enumerate by size until a program consistent with all examples appears.
fn enumerate(ctx: &mut Ctx, problem: &Problem, g: &Grammar, ex: &Examples) -> Result<Option<Term>, EngineError> {
    let fun = &problem.spec.fun;
    let ret = fun.ret;
    if ret == Sort::Bool {
        return Err(EngineError::Unsupported("boolean functions".into()));
    }
    let mut bank = Bank { nodes: Vec::new(), by_size: vec![Vec::new(); MAX_SIZE + 1], seen: HashSet::new() };
    let mut leaves: Vec<(Term, Vec<Value>)> = Vec::new();
    for (j, p) in fun.params.iter().enumerate() {
        leaves.push((Term::var(p), ex.points.iter().map(|pt| pt[j].clone()).collect()));
    }
    for c in &g.consts {
        leaves.push((Term::Const(c.clone()), vec![c.clone(); ex.points.len()]));
    }
    let mut sized: Vec<(usize, Vec<Node>, Option<usize>)> = Vec::new();
    {
        let mut lv = Level { bank: &bank, seen: HashSet::new(), fresh: Vec::new(), ret, ex, found: None };
        for (t, vals) in leaves {
            let sort = t.sort();
            if lv.emit(Kind::Leaf(t), sort, vals) {
                break;
            }
        }
        sized.push((1, lv.fresh, lv.found));
    }
    let mut work = 0u64;
    let mut size = 1;
    loop {
        for (sz, fresh, found) in sized.drain(..) {
            let base = bank.nodes.len();
            for n in fresh {
                bank.seen.insert((n.sort, n.vals.clone()));
                bank.by_size[sz].push(bank.nodes.len());
                bank.nodes.push(n);
            }
            if let Some(f) = found {
                return Ok(Some(bank.term(base + f)));
            }
        }
        ctx.tick()?;
        size += 1;
        if size > MAX_SIZE {
            return Ok(None);
        }
        let mut lv = Level { bank: &bank, seen: HashSet::new(), fresh: Vec::new(), ret, ex, found: None };
        let nodes = &bank.nodes;
        'level: {
            for op in &g.unary {
                for a in bank.of(size - 1, ret) {
                    if let Some(v) = zip(op, &[&nodes[a].vals]) {
                        if lv.emit(Kind::App(op.clone(), vec![a]), ret, v) {
                            break 'level;
                        }
                    }
                }
            }
            if g.connectives.contains(&Op::Not) {
                for a in bank.of(size - 1, Sort::Bool) {
                    if let Some(v) = zip(&Op::Not, &[&nodes[a].vals]) {
                        lv.emit(Kind::App(Op::Not, vec![a]), Sort::Bool, v);
                    }
                }
            }
            let binary: Vec<(Op, Sort, Sort)> = g
                .binary
                .iter()
                .map(|o| (o.clone(), ret, ret))
                .chain(g.compare.iter().map(|o| (o.clone(), ret, Sort::Bool)))
                .chain(g.connectives.iter().filter(|o| **o != Op::Not).map(|o| (o.clone(), Sort::Bool, Sort::Bool)))
                .collect();
            for (op, arg, out) in &binary {
                let comm = op.is_commutative() || *op == Op::Eq;
                for l in 1..size - 1 {
                    let r = size - 1 - l;
                    if comm && l > r {
                        continue;
                    }
                    let rs = bank.of(r, *arg);
                    for a in bank.of(l, *arg) {
                        for &b in &rs {
                            if comm && l == r && b < a {
                                continue;
                            }
                            work += 1;
                            if work.is_multiple_of(4096) {
                                ctx.tick()?;
                            }
                            if let Some(v) = zip(op, &[&nodes[a].vals, &nodes[b].vals]) {
                                if lv.emit(Kind::App(op.clone(), vec![a, b]), *out, v) {
                                    break 'level;
                                }
                            }
                        }
                    }
                }
            }
            if g.ite && size >= 4 {
                for cs in 1..size - 2 {
                    for ts in 1..size - 1 - cs {
                        let es = size - 1 - cs - ts;
                        let thens = bank.of(ts, ret);
                        let elses = bank.of(es, ret);
                        for c in bank.of(cs, Sort::Bool) {
                            let cv = &nodes[c].vals;
                            for &t in &thens {
                                for &e in &elses {
                                    work += 1;
                                    if work.is_multiple_of(4096) {
                                        ctx.tick()?;
                                    }
                                    let v: Vec<Value> = (0..cv.len())
                                        .map(|k| nodes[if cv[k] == Value::Bool(true) { t } else { e }].vals[k].clone())
                                        .collect();
                                    if lv.emit(Kind::Ite(c, t, e), ret, v) {
                                        break 'level;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let (fresh, found) = (lv.fresh, lv.found);
        sized.push((size, fresh, found));
    }
}

fn random_value(rng: &mut ChaCha8Rng, sort: Sort) -> Value {
    match sort {
        Sort::Bool => Value::Bool(rng.gen()),
        Sort::Int | Sort::Real => Value::num(sort, Q::int(rng.gen_range(-4..=4))),
        Sort::BitVec(w) => Value::bv(rng.gen::<u64>() & bv_mask(w), w),
    }
}

/// Run the CEGIS loop. The first example is drawn from `seed`.
pub fn synthesize(ctx: &mut Ctx, problem: &Problem, seed: u64) -> Result<Option<Term>, EngineError> {
    let spec = &problem.spec;
    let g = Grammar::for_problem(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first: Valuation = spec.vars.iter().map(|v| (v.name.clone(), random_value(&mut rng, v.sort))).collect();
    let mut examples = vec![first];
    loop {
        ctx.tick()?;
        let ex = Examples::build(problem, &examples)?;
        let Some(prog) = enumerate(ctx, problem, &g, &ex)? else { return Ok(None) };
        ctx.spend()?;
        match ctx.counterexample(&spec.instantiate(&prog))? {
            None => {
                ctx.event("solved", examples.len(), Some(prog.to_string()), None, Some("verified"));
                return Ok(Some(prog));
            }
            Some(m) => {
                ctx.event("candidate", examples.len(), Some(prog.to_string()), None, Some("counterexample"));
                let cex = complete(&m, &spec.vars);
                if examples.contains(&cex) {
                    return Err(EngineError::Inconclusive(format!("repeated counterexample for {prog}")));
                }
                examples.push(cex);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_problem;
    use crate::logic::term::Name;
    use crate::solver::Deadline;

    fn run(text: &str, ms: u64) -> (Ctx, Result<Option<Term>, EngineError>) {
        let p = parse_problem(text).unwrap();
        let mut ctx = Ctx::new(crate::solver::Backend::internal(), Deadline::after_ms(ms), 1_000_000);
        let r = synthesize(&mut ctx, &p, 7);
        (ctx, r)
    }

    #[test]
    fn identity_at_size_one() {
        let (ctx, r) = run("(set-logic LIA)(synth-fun f ((a Int)) Int)(declare-var x Int)(constraint (= (f x) x))", 5000);
        assert_eq!(r.unwrap().unwrap().to_string(), "a");
        assert_eq!(ctx.candidates, 1);
    }

    #[test]
    fn max2() {
        let text = "(set-logic LIA)(synth-fun f ((a Int) (b Int)) Int)(declare-var x Int)(declare-var y Int)
            (constraint (>= (f x y) x))(constraint (>= (f x y) y))(constraint (or (= (f x y) x) (= (f x y) y)))";
        let (_, r) = run(text, 10_000);
        let t = r.unwrap().unwrap();
        assert_eq!(t.size(), 6, "{t}");
    }

    #[test]
    fn non_separable_sum() {
        let text = "(set-logic LIA)(synth-fun f ((a Int)) Int)(declare-var x Int)(declare-var y Int)
            (constraint (=> (not (= x y)) (= (+ (f x) (f y)) 10)))";
        let (_, r) = run(text, 10_000);
        let t = r.unwrap().unwrap();
        for k in -5..=5 {
            let env: Valuation = [(Name::from("a"), Value::Int(Q::int(k)))].into_iter().collect();
            assert_eq!(eval(&t, &env).unwrap(), Value::Int(Q::int(5)));
        }
    }

    #[test]
    fn clears_lowest_bit() {
        let text = "(set-logic BV)(synth-fun f ((a (_ BitVec 8))) (_ BitVec 8))(declare-var x (_ BitVec 8))
            (constraint (= (f x) (bvand x (bvsub x #x01))))";
        let (_, r) = run(text, 20_000);
        let t = r.unwrap().unwrap();
        for v in 0..256u64 {
            let env: Valuation = [(Name::from("a"), Value::bv(v, 8))].into_iter().collect();
            assert_eq!(eval(&t, &env).unwrap(), Value::bv(v & v.wrapping_sub(1), 8));
        }
    }
}

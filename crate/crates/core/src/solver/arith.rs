//! Quantifier-free linear real/integer arithmetic with boolean structure.
//!
//! Lazy DPLL(T): the CDCL solver enumerates assignments to the boolean
//! skeleton, simplex checks the implied conjunction of atoms, and each
//! infeasible conjunction is blocked by a deletion-minimal core. Integers
//! are handled by depth-bounded branch and bound per conjunction.

use super::difference::{self, Diff};
use super::sat::{Hook, Lit, SatOutcome, Solver};
use super::simplex::{self, Feasibility, TimedOut};
use super::{BackendError, Deadline, SatResult};
use crate::logic::linear::{literal_to_lin, IntNorm, LinAtom, LinExpr, LinLit, Rel};
use crate::logic::normal::{lift_ite, nnf};
use crate::logic::term::{Name, Op, Sort, Term, Valuation, Value, Var};
use crate::rational::Q;
use crate::logic::subst::rewrite;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Node {
    Bool(Name, bool),
    Lin(LinAtom),
    And(Vec<Node>),
    Or(Vec<Node>),
    True,
    False,
}

fn lin_node(a: LinAtom) -> Node {
    if a.expr.all_int() && !a.expr.is_constant() {
        return match a.normalize_int() {
            IntNorm::True => Node::True,
            IntNorm::False => Node::False,
            IntNorm::Atom(a) => Node::Lin(a),
        };
    }
    if a.expr.is_constant() {
        return if a.holds_q(&a.expr.constant) { Node::True } else { Node::False };
    }
    Node::Lin(a)
}

fn build(t: &Term) -> Result<Node, BackendError> {
    Ok(match t {
        Term::Const(Value::Bool(b)) => {
            if *b {
                Node::True
            } else {
                Node::False
            }
        }
        Term::Var(v) if v.sort == Sort::Bool => Node::Bool(v.name.clone(), true),
        Term::App(Op::And, a) => Node::And(a.iter().map(build).collect::<Result<_, _>>()?),
        Term::App(Op::Or, a) => Node::Or(a.iter().map(build).collect::<Result<_, _>>()?),
        Term::App(Op::Not, a) if matches!(&a[0], Term::Var(v) if v.sort == Sort::Bool) => {
            let Term::Var(v) = &a[0] else { unreachable!() };
            Node::Bool(v.name.clone(), false)
        }
        _ => match literal_to_lin(t) {
            Some(LinLit::Atom(a)) => lin_node(a),
            Some(LinLit::Ne(e)) => Node::Or(vec![
                lin_node(LinAtom::new(e.clone(), Rel::Lt)),
                lin_node(LinAtom::new(e.neg(), Rel::Lt)),
            ]),
            None => return Err(BackendError::Unsupported(format!("non-linear literal {t}"))),
        },
    })
}

/// Boolean skeleton of a formula in negation normal form. Each linear
/// atom and its negation share one propositional variable.
struct Skeleton {
    sat: Solver,
    atom_of: HashMap<LinAtom, Lit>,
    bools: BTreeMap<Name, u32>,
    /// Variable, atom asserted when true, atom asserted when false.
    theory: Vec<(u32, LinAtom, Option<LinAtom>)>,
    truth: Option<Lit>,
}

impl Skeleton {
    fn new() -> Skeleton {
        Skeleton { sat: Solver::new(), atom_of: HashMap::new(), bools: BTreeMap::new(), theory: Vec::new(), truth: None }
    }

    fn truth(&mut self) -> Lit {
        if let Some(t) = self.truth {
            return t;
        }
        let t = Lit::new(self.sat.new_var(), true);
        self.sat.add_clause(&[t]);
        self.truth = Some(t);
        t
    }

    fn atom(&mut self, a: LinAtom) -> Lit {
        if let Some(&l) = self.atom_of.get(&a) {
            return l;
        }
        let v = self.sat.new_var();
        let pos = Lit::new(v, true);
        let neg = match lin_node(a.negate().remove(0)) {
            Node::Lin(n) => Some(n),
            _ => None,
        };
        if let Some(n) = &neg {
            self.atom_of.insert(n.clone(), !pos);
        } else {
            self.sat.add_clause(&[pos]);
        }
        self.atom_of.insert(a.clone(), pos);
        self.theory.push((v, a, neg));
        pos
    }

    /// A literal implying `n` (one-sided encoding, enough for satisfiability).
    fn encode(&mut self, n: &Node) -> Lit {
        match n {
            Node::True => self.truth(),
            Node::False => !self.truth(),
            Node::Bool(x, b) => {
                let v = match self.bools.get(x) {
                    Some(&v) => v,
                    None => {
                        let v = self.sat.new_var();
                        self.bools.insert(x.clone(), v);
                        v
                    }
                };
                Lit::new(v, *b)
            }
            Node::Lin(a) if a.rel == Rel::Eq => {
                let le = lin_node(LinAtom::new(a.expr.clone(), Rel::Le));
                let ge = lin_node(LinAtom::new(a.expr.neg(), Rel::Le));
                self.encode(&Node::And(vec![le, ge]))
            }
            Node::Lin(a) => self.atom(a.clone()),
            Node::And(k) => {
                let ls: Vec<Lit> = k.iter().map(|x| self.encode(x)).collect();
                let g = Lit::new(self.sat.new_var(), true);
                for l in ls {
                    self.sat.add_clause(&[!g, l]);
                }
                g
            }
            Node::Or(k) => {
                let mut c: Vec<Lit> = k.iter().map(|x| self.encode(x)).collect();
                let g = Lit::new(self.sat.new_var(), true);
                c.push(!g);
                self.sat.add_clause(&c);
                g
            }
        }
    }
}

/// `(direction, upper?, value, strict)`: the atom bounds the direction,
/// a linear form with leading coefficient one.
fn as_bound(a: &LinAtom) -> Option<(Vec<(Var, Q)>, bool, Q, bool)> {
    let lead = a.expr.coeffs.values().next()?.clone();
    let inv = lead.recip();
    let dir = a.expr.coeffs.iter().map(|(v, c)| (v.clone(), c * &inv)).collect();
    Some((dir, lead.is_positive(), -(&a.expr.constant * &inv), a.rel == Rel::Lt))
}

impl Skeleton {
    /// Binary clauses between contradictory bounds on the same direction.
    fn bound_lemmas(&mut self) {
        let mut groups: BTreeMap<Vec<(Var, Q)>, Vec<(Lit, bool, Q, bool)>> = BTreeMap::new();
        for (v, a, n) in &self.theory {
            for (lit, atom) in [(Lit::new(*v, true), Some(a)), (Lit::new(*v, false), n.as_ref())] {
                let Some((dir, up, b, strict)) = atom.and_then(as_bound) else { continue };
                groups.entry(dir).or_default().push((lit, up, b, strict));
            }
        }
        let mut lemmas = Vec::new();
        for bs in groups.values() {
            for (l1, up1, b1, s1) in bs {
                for (l2, up2, b2, s2) in bs {
                    if !*up1 || *up2 || l1.var() == l2.var() {
                        continue;
                    }
                    // upper b1 against lower b2
                    if b2 > b1 || (b2 == b1 && (*s1 || *s2)) {
                        lemmas.push([!*l1, !*l2]);
                    }
                }
            }
        }
        for c in lemmas {
            self.sat.add_clause(&c);
        }
    }
}

enum Theory {
    Sat(BTreeMap<Var, Q>),
    /// Indices of an infeasible subset.
    Conflict(Vec<usize>),
    Cap,
}

struct Arith {
    deadline: Deadline,
    int_vars: BTreeSet<Var>,
    bb_cap: u32,
}

enum Bb {
    Sat(BTreeMap<Var, Q>),
    Infeasible,
    Cap,
}

impl Arith {
    fn rational(&self, lits: &[LinAtom]) -> Result<Theory, TimedOut> {
        Ok(match simplex::explain(lits, &self.deadline)? {
            Ok(m) => Theory::Sat(m),
            Err(core) => Theory::Conflict(core),
        })
    }

    /// Integer feasibility: rational explanation first, then branch and bound.
    fn integral(&self, lits: &[LinAtom]) -> Result<Theory, TimedOut> {
        match self.rational(lits)? {
            Theory::Sat(m) if self.int_vars.iter().all(|v| m.get(v).is_none_or(|q| q.is_integer())) => Ok(Theory::Sat(m)),
            Theory::Sat(_) => match self.bb(lits, 0)? {
                Bb::Sat(m) => Ok(Theory::Sat(m)),
                Bb::Cap => Ok(Theory::Cap),
                Bb::Infeasible => Ok(Theory::Conflict(self.shrink(lits)?)),
            },
            t => Ok(t),
        }
    }

    /// Depth-bounded branch and bound.
    fn bb(&self, lits: &[LinAtom], depth: u32) -> Result<Bb, TimedOut> {
        let model = match simplex::feasible(lits, &self.deadline)? {
            Feasibility::Infeasible => return Ok(Bb::Infeasible),
            Feasibility::Feasible(m) => m,
        };
        let frac = self.int_vars.iter().find_map(|v| model.get(v).filter(|q| !q.is_integer()).map(|q| (v.clone(), q.clone())));
        let Some((v, q)) = frac else { return Ok(Bb::Sat(model)) };
        if depth >= self.bb_cap {
            return Ok(Bb::Cap);
        }
        let x = LinExpr::var(&v);
        let down = LinAtom::cmp(&x, Rel::Le, &LinExpr::constant(q.floor()));
        let up = LinAtom::cmp(&LinExpr::constant(q.ceil()), Rel::Le, &x);
        let mut capped = false;
        for a in [down, up] {
            let mut l = lits.to_vec();
            l.push(a);
            match self.bb(&l, depth + 1)? {
                Bb::Sat(m) => return Ok(Bb::Sat(m)),
                Bb::Cap => capped = true,
                Bb::Infeasible => {}
            }
        }
        Ok(if capped { Bb::Cap } else { Bb::Infeasible })
    }

    /// Deletion-minimal subset of an integer-infeasible conjunction.
    fn shrink(&self, lits: &[LinAtom]) -> Result<Vec<usize>, TimedOut> {
        let mut keep: Vec<usize> = (0..lits.len()).collect();
        let mut i = 0;
        while i < keep.len() {
            let trial: Vec<usize> = keep.iter().copied().filter(|&k| k != keep[i]).collect();
            let sub: Vec<LinAtom> = trial.iter().map(|&k| lits[k].clone()).collect();
            if matches!(self.bb(&sub, 0)?, Bb::Infeasible) {
                keep = trial;
            } else {
                i += 1;
            }
        }
        Ok(keep)
    }
}

/// Replace each `(div t c)` by a fresh integer `q` with `c*q <= t <= c*q + c - 1`.
fn purify_div(phi: &Term) -> Term {
    let mut defs: Vec<Term> = Vec::new();
    let mut seen: HashMap<Term, Term> = HashMap::new();
    let body = rewrite(phi, &mut |t| {
        let Term::App(Op::FloorDiv(c), a) = &t else { return t };
        if let Some(q) = seen.get(&t) {
            return q.clone();
        }
        let q = Term::var(&Var::new(&format!("__div{}", seen.len()), Sort::Int));
        let cq = Term::App(Op::Scale(c.clone()), vec![q.clone()]);
        let slack = Term::num(Sort::Int, c - &Q::one());
        defs.push(Term::le(cq.clone(), a[0].clone()));
        defs.push(Term::le(a[0].clone(), Term::add(cq, slack)));
        seen.insert(t.clone(), q.clone());
        q
    });
    defs.insert(0, body);
    Term::and(defs)
}

/// Decide a quantifier-free linear arithmetic formula.
pub fn check(phi: &Term, deadline: Deadline, bb_cap: u32) -> Result<SatResult, BackendError> {
    let vars = crate::logic::subst::free_vars(phi);
    let phi = &purify_div(phi);
    let root = build(&nnf(&lift_ite(phi)))?;
    let int_vars: BTreeSet<Var> = crate::logic::subst::free_vars(phi).into_iter().filter(|v| v.sort == Sort::Int).collect();
    let mut sk = Skeleton::new();
    let r = sk.encode(&root);
    sk.sat.add_clause(&[r]);
    sk.bound_lemmas();
    let th = Arith { deadline, int_vars, bb_cap };
    let mut slot: Vec<Option<usize>> = vec![None; sk.sat.num_vars() as usize];
    for (i, (v, _, _)) in sk.theory.iter().enumerate() {
        slot[*v as usize] = Some(i);
    }
    let mut found: Option<BTreeMap<Var, Q>> = None;
    let mut capped = false;
    let mut hook = |trail: &[Lit], full: bool| -> Hook {
        let mut lits = Vec::new();
        let mut sel = Vec::new();
        for &l in trail {
            let Some(i) = slot[l.var() as usize] else { continue };
            let (_, a, n) = &sk.theory[i];
            let atom = if l.positive() { Some(a) } else { n.as_ref() };
            if let Some(atom) = atom {
                lits.push(atom.clone());
                sel.push(l);
            }
        }
        match difference::check(&lits) {
            Diff::Conflict(core) => return Hook::Conflict(core.iter().map(|&i| !sel[i]).collect()),
            Diff::Consistent if !full => return Hook::Consistent,
            _ => {}
        }
        let verdict = if full { th.integral(&lits) } else { th.rational(&lits) };
        match verdict {
            Err(TimedOut) => Hook::Abort,
            Ok(Theory::Sat(m)) => {
                if full {
                    found = Some(m);
                }
                Hook::Consistent
            }
            Ok(Theory::Cap) => {
                capped = true;
                Hook::Abort
            }
            Ok(Theory::Conflict(core)) => {
                Hook::Conflict(core.iter().map(|&i| !sel[i]).collect())
            }
        }
    };
    let outcome = sk.sat.solve_with(&th.deadline, &mut hook);
    match outcome {
        SatOutcome::Unsat => Ok(SatResult::Unsat),
        SatOutcome::Timeout if capped => Ok(SatResult::Unknown("integer branching depth exceeded".into())),
        SatOutcome::Timeout => Ok(SatResult::Unknown("timeout".into())),
        SatOutcome::Sat => {
            let m = found.expect("complete assignment was checked");
            let mut val = Valuation::new();
            for v in &vars {
                let x = match v.sort {
                    Sort::Bool => Value::Bool(sk.bools.get(&v.name).is_some_and(|b| sk.sat.model_value(*b))),
                    s => Value::num(s, m.get(v).cloned().unwrap_or_default()),
                };
                val.insert(v.name.clone(), x);
            }
            Ok(SatResult::Sat(val))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::eval::eval_bool;
    use proptest::prelude::*;

    fn iv(n: &str) -> Term {
        Term::var(&Var::new(n, Sort::Int))
    }
    fn rv(n: &str) -> Term {
        Term::var(&Var::new(n, Sort::Real))
    }

    fn sat(phi: &Term) -> SatResult {
        check(phi, Deadline::none(), 48).unwrap()
    }

    #[test]
    fn max_coverage_is_valid() {
        // not (x >= y or y >= x) is unsat
        let (x, y) = (iv("x"), iv("y"));
        let phi = Term::not(Term::or(vec![Term::ge(x.clone(), y.clone()), Term::ge(y, x)]));
        assert_eq!(sat(&phi), SatResult::Unsat);
    }

    #[test]
    fn strict_integers() {
        // 0 < x < 1 has no integer solution but a rational one
        let phi = |x: Term| Term::and(vec![Term::lt(Term::int(0), x.clone()), Term::lt(x, Term::int(1))]);
        assert_eq!(sat(&phi(iv("x"))), SatResult::Unsat);
        let z = Term::num(Sort::Real, Q::zero());
        let one = Term::num(Sort::Real, Q::one());
        let r = Term::and(vec![Term::lt(z, rv("x")), Term::lt(rv("x"), one)]);
        assert!(matches!(sat(&r), SatResult::Sat(_)));
        // 2x = 2y + 1 has no integer solution
        let two = |t: Term| Term::App(Op::Scale(Q::int(2)), vec![t]);
        let p = Term::eq(two(iv("x")), Term::add(two(iv("y")), Term::int(1)));
        assert_eq!(sat(&p), SatResult::Unsat);
    }

    #[test]
    fn ite_and_disequality() {
        let (x, y) = (iv("x"), iv("y"));
        let m = Term::ite(Term::ge(x.clone(), y.clone()), x.clone(), y.clone()).unwrap();
        let phi = Term::and(vec![Term::lt(m.clone(), x.clone()), Term::not(Term::eq(x.clone(), y.clone()))]);
        assert_eq!(sat(&phi), SatResult::Unsat);
        let phi = Term::and(vec![Term::not(Term::eq(x.clone(), y.clone())), Term::eq(m, x)]);
        let SatResult::Sat(model) = sat(&phi) else { panic!() };
        assert!(eval_bool(&phi, &model).unwrap());
    }

    #[test]
    fn floor_division() {
        // x = (div y 3) and y = 7 forces x = 2; ceil via (div (+ y 2) 3) = 3
        let d = |t: Term| Term::app(Op::FloorDiv(Q::int(3)), vec![t]).unwrap();
        let phi = Term::and(vec![Term::eq(iv("y"), Term::int(7)), Term::eq(iv("x"), d(iv("y")))]);
        let SatResult::Sat(m) = sat(&phi) else { panic!() };
        assert_eq!(m["x"], Value::Int(Q::int(2)));
        assert!(!m.contains_key("__div0"));
        let neg = Term::and(vec![Term::eq(iv("y"), Term::int(-7)), Term::not(Term::eq(d(iv("y")), Term::int(-3)))]);
        assert_eq!(sat(&neg), SatResult::Unsat);
        let c = Term::and(vec![Term::eq(iv("y"), Term::int(7)), Term::lt(d(Term::add(iv("y"), Term::int(2))), Term::int(3))]);
        assert_eq!(sat(&c), SatResult::Unsat);
    }

    fn arb_lia() -> impl Strategy<Value = Term> {
        let atom = (-2i64..3, -2i64..3, -4i64..5, 0u8..5).prop_map(|(a, b, k, r)| {
            let s = |c: i64, t: Term| Term::App(Op::Scale(Q::int(c)), vec![t]);
            let l = Term::add(s(a, iv("x")), s(b, iv("y")));
            let k = Term::int(k);
            match r {
                0 => Term::le(l, k),
                1 => Term::lt(l, k),
                2 => Term::eq(l, k),
                3 => Term::ge(l, k),
                _ => Term::not(Term::eq(l, k)),
            }
        });
        atom.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(Term::and),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Term::or),
                inner.prop_map(Term::not),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        // Integer formulas whose solutions (if any) include a small one.
        #[test]
        fn agrees_with_bounded_enumeration(f in arb_lia()) {
            let boxed = Term::and(vec![
                f.clone(),
                Term::le(Term::int(-6), iv("x")), Term::le(iv("x"), Term::int(6)),
                Term::le(Term::int(-6), iv("y")), Term::le(iv("y"), Term::int(6)),
            ]);
            let mut any = false;
            for x in -6i64..=6 {
                for y in -6i64..=6 {
                    let mut e = Valuation::new();
                    e.insert("x".into(), Value::Int(x.into()));
                    e.insert("y".into(), Value::Int(y.into()));
                    if eval_bool(&boxed, &e).unwrap() { any = true; }
                }
            }
            match sat(&boxed) {
                SatResult::Sat(m) => { prop_assert!(any); prop_assert!(eval_bool(&boxed, &m).unwrap()); }
                SatResult::Unsat => prop_assert!(!any),
                SatResult::Unknown(r) => prop_assert!(false, "unknown: {}", r),
            }
        }
    }
}


//! Conditional linear expressions for separable specifications.

use super::{bounds_of, leaf_between, tidy, Cle};
use crate::engine::{Ctx, Domain, EngineError, Space, Verdict};
use crate::logic::eval::eval_bool;
use crate::logic::normal::Clause;
use crate::logic::spec::Separable;
use crate::logic::subst::{free_vars, subst};
use crate::logic::term::{Name, Term, Valuation, Value, Var};
use std::collections::BTreeMap;

/// Separable domain state. The learned constraint is a list of regions
/// known to contain only inputs without any correct output.
pub struct SepCle {
    pub spec: Separable,
    picked: Vec<Term>,
    pex: Option<Valuation>,
}

/// A generated leaf with the disjuncts it was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub pex: Valuation,
    pub picked: Vec<Term>,
    pub leaf: Term,
}

impl SepCle {
    pub fn new(spec: Separable) -> SepCle {
        SepCle { spec, picked: Vec::new(), pex: None }
    }

    fn o(&self) -> &Var {
        &self.spec.output
    }

    fn plug(&self, t: &Term, leaf: &Term) -> Term {
        let mut m = BTreeMap::new();
        m.insert(self.o().name.clone(), leaf.clone());
        subst(t, &m)
    }

    /// One disjunct per clause true at `pex`, preferring those mentioning the output.
    pub fn pick(cnf: &[Clause], o: &Var, pex: &Valuation) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        for clause in cnf {
            let holds = |d: &&Term| eval_bool(d, pex) == Ok(true);
            let on_o = clause.iter().filter(holds).find(|d| free_vars(d).contains(o));
            let d = on_o.or_else(|| clause.iter().find(holds))?;
            out.push(d.clone());
        }
        Some(out)
    }

    /// The bound-driven leaf at a model `pex` of `space ∧ spec`.
    pub fn leaf_at(&self, pex: &Valuation) -> Result<Generated, EngineError> {
        let picked = Self::pick(&self.spec.cnf, self.o(), pex)
            .ok_or_else(|| EngineError::Unsupported("model falsifies a clause".into()))?;
        let mut bounds = Vec::new();
        for d in &picked {
            if let Some(b) = bounds_of(d, self.o(), pex) {
                bounds.extend(b);
            } else if free_vars(d).contains(self.o()) {
                return Err(EngineError::Unsupported(format!("disjunct {d} is not a linear bound on the output")));
            }
        }
        let leaf = leaf_between(&bounds, self.o().sort, pex)
            .ok_or_else(|| EngineError::Unsupported("bounds cross at the example".into()))?;
        Ok(Generated { pex: pex.clone(), picked, leaf })
    }

    /// `⋀ picked[leaf/o]` in normal form.
    pub fn guard(&self, picked: &[Term], leaf: &Term) -> Term {
        tidy(&Term::and(picked.iter().map(|d| self.plug(d, leaf)).collect()))
    }

    /// Check `prog` against the specification on `space`, one path at a time.
    pub fn verify_cle(&self, ctx: &mut Ctx, prog: &Cle, space: &Term) -> Result<Verdict, EngineError> {
        for (cond, leaf) in prog.paths() {
            let mut region = cond.clone();
            region.push(space.clone());
            let region = Term::and(region);
            let bad = match leaf {
                Cle::Leaf(t) => Term::and(vec![region, Term::not(self.spec.with_output(t))]),
                _ => region,
            };
            if let Some(m) = ctx.model(&bad)? {
                let inp = complete(&m, &self.spec.inputs);
                return Ok(Verdict::Counterexample(inp));
            }
        }
        Ok(Verdict::Verified)
    }

    /// Rename the program from input variables to the function parameters.
    pub fn to_params(&self, prog: &Cle, params: &[Var]) -> Cle {
        let m: BTreeMap<Name, Term> =
            self.spec.inputs.iter().zip(params).map(|(i, p)| (i.name.clone(), Term::var(p))).collect();
        prog.rename(&m)
    }
}

impl Domain for SepCle {
    type Program = Cle;
    type Outer = ();
    type Learned = Vec<Term>;
    type Cegis = ();

    fn new_cegis(&mut self, _space: &Space, _psi: &()) {}

    fn base(&mut self, _psi: &()) -> Cle {
        Cle::Top
    }

    fn generate(&mut self, ctx: &mut Ctx, space: &Space, _phi: &mut (), _psi: &(), beta: &Vec<Term>) -> Result<Option<Cle>, EngineError> {
        for r in beta {
            if ctx.sat(&Term::and(vec![space.constraint.clone(), r.clone()]))? {
                return Ok(None);
            }
        }
        let Some(m) = ctx.model(&Term::and(vec![space.constraint.clone(), self.spec.phi.clone()]))? else {
            return Ok(None);
        };
        let mut vars = self.spec.inputs.clone();
        vars.push(self.o().clone());
        let pex = complete(&m, &vars);
        let g = self.leaf_at(&pex)?;
        self.picked = g.picked;
        self.pex = Some(g.pex);
        Ok(Some(Cle::Leaf(g.leaf)))
    }

    fn pick_input(&mut self, _ctx: &mut Ctx, _space: &Space, prog: &Cle, _psi: &()) -> Result<(Valuation, bool), EngineError> {
        let pex = self.pex.clone().expect("generate ran");
        let Cle::Leaf(leaf) = prog else { unreachable!("generate returns leaves") };
        let ok = eval_bool(&self.spec.with_output(leaf), &pex) == Ok(true);
        Ok((pex, ok))
    }

    fn project(&mut self, _phi: &mut (), _inp: &Valuation) {}

    fn split(&mut self, _ctx: &mut Ctx, space: &Space, prog: &Cle, _inp: &Valuation, _psi: &()) -> Result<(Space, Space), EngineError> {
        let Cle::Leaf(leaf) = prog else { unreachable!("generate returns leaves") };
        let g = self.guard(&self.picked, leaf);
        Ok((space.refine(g.clone()), space.without(&g)))
    }

    fn unif_constr(&mut self, _psi: &(), _good: &Space, _prog: &Cle) {}

    fn learn_from(&mut self, ctx: &mut Ctx, space: &Space, _psi: &(), beta: &mut Vec<Term>) -> Result<(), EngineError> {
        // Only a space with no realizable input at all is recorded.
        if ctx.sat(&Term::and(vec![space.constraint.clone(), self.spec.phi.clone()]))? {
            return Ok(());
        }
        if !beta.contains(&space.constraint) {
            beta.push(space.constraint.clone());
            ctx.epoch += 1;
        }
        Ok(())
    }

    fn unify(&mut self, good: &Space, prog: Cle, _bad: &Space, child: Cle) -> Cle {
        Cle::unify(&good.guard, prog, child)
    }

    fn verify(&mut self, ctx: &mut Ctx, prog: &Cle, space: &Space) -> Result<Verdict, EngineError> {
        self.verify_cle(ctx, prog, &space.constraint)
    }
}

/// Restrict `m` to `vars`, filling in defaults for unconstrained ones.
pub fn complete(m: &Valuation, vars: &[Var]) -> Valuation {
    vars.iter().map(|v| (v.name.clone(), m.get(&v.name).cloned().unwrap_or_else(|| Value::default_of(v.sort)))).collect()
}

/// Synthesize a program over the specification's input variables.
pub fn synthesize(ctx: &mut Ctx, spec: &Separable) -> Result<Option<Cle>, EngineError> {
    let mut d = SepCle::new(spec.clone());
    let space = Space::full(spec.inputs.clone());
    let mut beta = Vec::new();
    crate::engine::synthesize(&mut d, ctx, &space, &(), &mut beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::spec::{Shape, Specification, SynthFun};
    use crate::logic::term::Sort;
    use crate::rational::Q;

    fn max_spec(n: usize) -> Separable {
        let xs: Vec<Var> = (0..n).map(|i| Var::new(&format!("x{i}"), Sort::Int)).collect();
        let call = Term::Invoke { name: "f".into(), args: xs.iter().map(Term::var).collect(), sort: Sort::Int };
        let mut c: Vec<Term> = xs.iter().map(|x| Term::ge(call.clone(), Term::var(x))).collect();
        c.push(Term::or(xs.iter().map(|x| Term::eq(call.clone(), Term::var(x))).collect()));
        let spec = Specification {
            fun: SynthFun { name: "f".into(), params: xs.clone(), ret: Sort::Int, ops: None },
            vars: xs,
            constraints: c,
        };
        let Shape::Separable(s) = spec.classify() else { panic!() };
        s
    }

    fn grid_check(p: &Cle, spec: &Separable, k: i64) {
        let n = spec.inputs.len();
        let mut idx = vec![-k; n];
        loop {
            let env: Valuation = spec.inputs.iter().zip(&idx).map(|(v, x)| (v.name.clone(), Value::Int(Q::int(*x)))).collect();
            let out = p.eval(&env).unwrap();
            assert_eq!(out, Value::Int(Q::int(*idx.iter().max().unwrap())));
            let mut i = 0;
            while i < n && idx[i] == k {
                idx[i] = -k;
                i += 1;
            }
            if i == n {
                break;
            }
            idx[i] += 1;
        }
    }

    #[test]
    fn max2_first_leaf_and_split() {
        let spec = max_spec(2);
        let d = SepCle::new(spec.clone());
        let pex: Valuation = [("x0", 2), ("x1", 3), ("o", 3)].iter().map(|(n, v)| (Name::from(*n), Value::Int(Q::int(*v)))).collect();
        let g = d.leaf_at(&pex).unwrap();
        assert_eq!(g.leaf, Term::var(&spec.inputs[1]));
        let guard = d.guard(&g.picked, &g.leaf);
        // The guard is x1 >= x0, checked on a grid.
        for a in -3..=3 {
            for b in -3..=3 {
                let env: Valuation = [("x0", a), ("x1", b)].iter().map(|(n, v)| (Name::from(*n), Value::Int(Q::int(*v)))).collect();
                assert_eq!(eval_bool(&guard, &env).unwrap(), b >= a);
            }
        }
    }

    #[test]
    fn max_programs_are_maxima() {
        for n in 2..=4 {
            let spec = max_spec(n);
            let mut ctx = Ctx::internal();
            let p = synthesize(&mut ctx, &spec).unwrap().unwrap();
            grid_check(&p, &spec, if n == 2 { 3 } else { 2 });
        }
    }

    #[test]
    fn unrealizable_returns_none() {
        let x = Var::new("x", Sort::Real);
        let call = Term::Invoke { name: "f".into(), args: vec![Term::var(&x)], sort: Sort::Real };
        let spec = Specification {
            fun: SynthFun { name: "f".into(), params: vec![x.clone()], ret: Sort::Real, ops: None },
            vars: vec![x.clone()],
            constraints: vec![Term::gt(call.clone(), Term::var(&x)), Term::lt(call, Term::var(&x))],
        };
        let Shape::Separable(s) = spec.classify() else { panic!() };
        let mut ctx = Ctx::internal();
        assert_eq!(synthesize(&mut ctx, &s).unwrap(), None);
    }
}

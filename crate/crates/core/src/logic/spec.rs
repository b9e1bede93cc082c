use super::normal::{to_cnf, Clause};
use super::subst::{free_vars, invocations, map_invocations, subst, subst_values};
use super::term::{Name, Sort, Term, Valuation, Var};
use std::collections::{BTreeMap, BTreeSet};

/// The function to synthesize.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthFun {
    pub name: Name,
    pub params: Vec<Var>,
    pub ret: Sort,
    /// Operator whitelist from a flat grammar, if one was given.
    pub ops: Option<BTreeSet<String>>,
}

/// A universally quantified constraint over invocations of one function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Specification {
    pub fun: SynthFun,
    pub vars: Vec<Var>,
    pub constraints: Vec<Term>,
}

/// Separable view: `phi(o, inputs)` where `o` stands for `f(inputs)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Separable {
    pub inputs: Vec<Var>,
    pub output: Var,
    pub phi: Term,
    pub cnf: Vec<Clause>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    Separable(Separable),
    NonSeparable,
}

impl Specification {
    pub fn formula(&self) -> Term {
        Term::and(self.constraints.clone())
    }

    pub fn classify(&self) -> Shape {
        let phi = self.formula();
        let invs = invocations(&phi);
        if invs.len() != 1 {
            return Shape::NonSeparable;
        }
        let args = &invs[0];
        let mut inputs = Vec::new();
        for a in args {
            match a {
                Term::Var(v) if !inputs.contains(v) => inputs.push(v.clone()),
                _ => return Shape::NonSeparable,
            }
        }
        let fv = free_vars(&phi);
        if !fv.iter().all(|v| inputs.contains(v)) {
            return Shape::NonSeparable;
        }
        let mut oname = String::from("o");
        while fv.iter().any(|v| *v.name == oname) || self.fun.params.iter().any(|p| *p.name == oname) {
            oname.insert(0, '_');
        }
        let output = Var::new(&oname, self.fun.ret);
        let ot = Term::var(&output);
        let phi = map_invocations(&phi, &mut |_| ot.clone());
        let cnf = to_cnf(&phi);
        Shape::Separable(Separable { inputs, output, phi, cnf })
    }

    /// `Spec[f <- lambda params. body]`.
    pub fn instantiate(&self, body: &Term) -> Term {
        let params = &self.fun.params;
        map_invocations(&self.formula(), &mut |args| apply_body(params, body, args))
    }
}

/// Substitute actual arguments for parameters.
pub fn apply_body(params: &[Var], body: &Term, args: &[Term]) -> Term {
    let map: BTreeMap<Name, Term> = params.iter().zip(args).map(|(p, a)| (p.name.clone(), a.clone())).collect();
    subst(body, &map)
}

impl Separable {
    /// The specification restricted to one concrete input: a formula over `o`.
    pub fn project(&self, inp: &Valuation) -> Term {
        subst_values(&self.phi, inp)
    }

    /// `phi[leaf / o]`.
    pub fn with_output(&self, leaf: &Term) -> Term {
        let mut m = BTreeMap::new();
        m.insert(self.output.name.clone(), leaf.clone());
        subst(&self.phi, &m)
    }

    /// Rename a term over `inputs` to one over the function parameters.
    pub fn to_params(&self, t: &Term, params: &[Var]) -> Term {
        let m: BTreeMap<Name, Term> =
            self.inputs.iter().zip(params).map(|(i, p)| (i.name.clone(), Term::var(p))).collect();
        subst(t, &m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn max2() -> Specification {
        let x = Var::new("x", Sort::Int);
        let y = Var::new("y", Sort::Int);
        let f = SynthFun {
            name: "max2".into(),
            params: vec![Var::new("a", Sort::Int), Var::new("b", Sort::Int)],
            ret: Sort::Int,
            ops: None,
        };
        let call = Term::Invoke { name: "max2".into(), args: vec![Term::var(&x), Term::var(&y)], sort: Sort::Int };
        let c = Term::and(vec![
            Term::ge(call.clone(), Term::var(&x)),
            Term::ge(call.clone(), Term::var(&y)),
            Term::or(vec![Term::eq(call.clone(), Term::var(&x)), Term::eq(call, Term::var(&y))]),
        ]);
        Specification { fun: f, vars: vec![x, y], constraints: vec![c] }
    }

    #[test]
    fn max2_is_separable() {
        let s = max2();
        let Shape::Separable(sep) = s.classify() else { panic!() };
        assert_eq!(sep.inputs.len(), 2);
        assert_eq!(sep.cnf.len(), 3);
        let mut inp = Valuation::new();
        inp.insert("x".into(), super::super::term::Value::Int(2.into()));
        inp.insert("y".into(), super::super::term::Value::Int(3.into()));
        let p = sep.project(&inp);
        assert!(super::super::subst::free_vars(&p).iter().all(|v| v.name == sep.output.name));
    }

    #[test]
    fn two_call_sites_are_not_separable() {
        let x = Var::new("x", Sort::Int);
        let y = Var::new("y", Sort::Int);
        let mut s = max2();
        let fx = Term::Invoke { name: "max2".into(), args: vec![Term::var(&x), Term::var(&x)], sort: Sort::Int };
        s.constraints.push(Term::ge(fx, Term::var(&y)));
        assert_eq!(s.classify(), Shape::NonSeparable);
    }
}

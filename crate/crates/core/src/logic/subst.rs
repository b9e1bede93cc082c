use super::eval::apply_op;
use super::term::{Name, Op, Sort, Term, Valuation, Value, Var};
use std::collections::{BTreeMap, BTreeSet};

/// Bottom-up rewrite: children first, then `f` on the rebuilt node.
pub fn rewrite(t: &Term, f: &mut dyn FnMut(Term) -> Term) -> Term {
    let kids: Vec<Term> = t.children().into_iter().map(|c| rewrite(c, f)).collect();
    let node = if kids.is_empty() { t.clone() } else { t.with_children(kids) };
    f(node)
}

pub fn subst(t: &Term, map: &BTreeMap<Name, Term>) -> Term {
    if map.is_empty() {
        return t.clone();
    }
    rewrite(t, &mut |n| match &n {
        Term::Var(v) => map.get(&v.name).cloned().unwrap_or(n),
        _ => n,
    })
}

/// Replace variables bound in `env` by constants, then fold.
pub fn subst_values(t: &Term, env: &Valuation) -> Term {
    let map: BTreeMap<Name, Term> = env.iter().map(|(k, v)| (k.clone(), Term::Const(v.clone()))).collect();
    simplify(&subst(t, &map))
}

/// Replace each invocation (innermost first) by the result of `f(args)`.
pub fn map_invocations(t: &Term, f: &mut dyn FnMut(&[Term]) -> Term) -> Term {
    rewrite(t, &mut |n| match &n {
        Term::Invoke { args, .. } => f(args),
        _ => n,
    })
}

pub fn free_vars(t: &Term) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    collect_vars(t, &mut out);
    out
}

fn collect_vars(t: &Term, out: &mut BTreeSet<Var>) {
    if let Term::Var(v) = t {
        out.insert(v.clone());
    }
    for c in t.children() {
        collect_vars(c, out);
    }
}

/// Distinct invocation argument tuples, in order of first appearance.
pub fn invocations(t: &Term) -> Vec<Vec<Term>> {
    let mut out: Vec<Vec<Term>> = Vec::new();
    fn go(t: &Term, out: &mut Vec<Vec<Term>>) {
        if let Term::Invoke { args, .. } = t {
            if !out.contains(args) {
                out.push(args.clone());
            }
        }
        for c in t.children() {
            go(c, out);
        }
    }
    go(t, &mut out);
    out
}

pub fn has_invocation(t: &Term) -> bool {
    matches!(t, Term::Invoke { .. }) || t.children().into_iter().any(has_invocation)
}

/// Constant folding and boolean simplification.
pub fn simplify(t: &Term) -> Term {
    rewrite(t, &mut |n| match n {
        Term::App(Op::And, a) => Term::and(a),
        Term::App(Op::Or, a) => Term::or(a),
        Term::App(Op::Not, mut a) => Term::not(a.pop().unwrap()),
        Term::App(Op::Implies, mut a) => {
            let b = a.pop().unwrap();
            let h = a.pop().unwrap();
            if h.is_false() || b.is_true() {
                Term::tt()
            } else if h.is_true() {
                b
            } else {
                Term::App(Op::Implies, vec![h, b])
            }
        }
        Term::App(op, a) => {
            if a.iter().all(|x| matches!(x, Term::Const(_))) {
                let vals: Vec<Value> = a
                    .iter()
                    .map(|x| match x {
                        Term::Const(v) => v.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                if let Some(v) = apply_op(&op, &vals) {
                    return Term::Const(v);
                }
            }
            Term::App(op, a)
        }
        Term::Ite(b) => {
            let (c, x, y) = *b;
            if c.is_true() {
                x
            } else if c.is_false() {
                y
            } else if x == y {
                x
            } else {
                Term::Ite(Box::new((c, x, y)))
            }
        }
        other => other,
    })
}

/// Rename variables to fresh names `prefix0, prefix1, ...` in order of first appearance.
pub fn rename_vars(t: &Term, vars: &[Var], prefix: &str) -> (Term, Vec<Var>) {
    let mut map = BTreeMap::new();
    let mut fresh = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        let nv = Var::new(&format!("{prefix}{i}"), v.sort);
        map.insert(v.name.clone(), Term::Var(nv.clone()));
        fresh.push(nv);
    }
    (subst(t, &map), fresh)
}

pub fn var_sorts(t: &Term) -> BTreeMap<Name, Sort> {
    free_vars(t).into_iter().map(|v| (v.name, v.sort)).collect()
}

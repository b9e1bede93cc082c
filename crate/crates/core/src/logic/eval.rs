use super::term::{bv_mask, Name, Op, Term, Valuation, Value};
use crate::rational::Q;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(Name),
    #[error("invocation of {0} without an interpretation")]
    Uninterpreted(Name),
    #[error("ill-sorted evaluation of {0}")]
    IllSorted(String),
    #[error("program undefined on this input")]
    Undefined,
}

/// An interpretation of the synthesized function.
pub trait Interp {
    fn apply(&self, args: &[Value]) -> Result<Value, EvalError>;
}

pub fn eval(t: &Term, env: &Valuation) -> Result<Value, EvalError> {
    eval_with(t, env, None)
}

pub fn eval_bool(t: &Term, env: &Valuation) -> Result<bool, EvalError> {
    eval(t, env)?.as_bool().ok_or_else(|| EvalError::IllSorted(t.to_string()))
}

pub fn eval_with(t: &Term, env: &Valuation, f: Option<&dyn Interp>) -> Result<Value, EvalError> {
    let ill = || EvalError::IllSorted(t.to_string());
    match t {
        Term::Var(v) => env.get(&v.name).cloned().ok_or_else(|| EvalError::Unbound(v.name.clone())),
        Term::Const(c) => Ok(c.clone()),
        Term::Ite(b) => {
            let c = eval_with(&b.0, env, f)?.as_bool().ok_or_else(ill)?;
            eval_with(if c { &b.1 } else { &b.2 }, env, f)
        }
        Term::Invoke { name, args, .. } => {
            let f = f.ok_or_else(|| EvalError::Uninterpreted(name.clone()))?;
            let vals = args.iter().map(|a| eval_with(a, env, Some(f))).collect::<Result<Vec<_>, _>>()?;
            f.apply(&vals)
        }
        Term::App(op, args) => {
            match op {
                Op::And => {
                    for a in args {
                        if !eval_with(a, env, f)?.as_bool().ok_or_else(ill)? {
                            return Ok(Value::Bool(false));
                        }
                    }
                    return Ok(Value::Bool(true));
                }
                Op::Or => {
                    for a in args {
                        if eval_with(a, env, f)?.as_bool().ok_or_else(ill)? {
                            return Ok(Value::Bool(true));
                        }
                    }
                    return Ok(Value::Bool(false));
                }
                Op::Implies => {
                    if !eval_with(&args[0], env, f)?.as_bool().ok_or_else(ill)? {
                        return Ok(Value::Bool(true));
                    }
                    return eval_with(&args[1], env, f);
                }
                _ => {}
            }
            let vals = args.iter().map(|a| eval_with(a, env, f)).collect::<Result<Vec<_>, _>>()?;
            apply_op(op, &vals).ok_or_else(ill)
        }
    }
}

fn num_result(like: &Value, q: Q) -> Value {
    Value::num(like.sort(), q)
}

/// Apply an operator to already evaluated arguments. `None` on sort errors.
pub fn apply_op(op: &Op, v: &[Value]) -> Option<Value> {
    Some(match op {
        Op::Not => Value::Bool(!v[0].as_bool()?),
        Op::And => Value::Bool(v.iter().all(|x| x.as_bool() == Some(true))),
        Op::Or => Value::Bool(v.iter().any(|x| x.as_bool() == Some(true))),
        Op::Implies => Value::Bool(!v[0].as_bool()? || v[1].as_bool()?),
        Op::Eq => Value::Bool(v[0] == v[1]),
        Op::Le => Value::Bool(v[0].as_num()? <= v[1].as_num()?),
        Op::Lt => Value::Bool(v[0].as_num()? < v[1].as_num()?),
        Op::Ge => Value::Bool(v[0].as_num()? >= v[1].as_num()?),
        Op::Gt => Value::Bool(v[0].as_num()? > v[1].as_num()?),
        Op::Add => {
            let mut s = Q::zero();
            for x in v {
                s += x.as_num()?;
            }
            num_result(&v[0], s)
        }
        Op::Sub => num_result(&v[0], v[0].as_num()? - v[1].as_num()?),
        Op::Neg => num_result(&v[0], -(v[0].as_num()?.clone())),
        Op::Scale(c) => num_result(&v[0], c * v[0].as_num()?),
        Op::FloorDiv(c) => Value::Int((v[0].as_num()? / c).floor()),
        _ => {
            let w = match v[0] {
                Value::Bv(_, w) => w,
                _ => return None,
            };
            let m = bv_mask(w);
            let a = v[0].as_bv()?;
            let b = || v[1].as_bv();
            let r = match op {
                Op::BvAnd => a & b()?,
                Op::BvOr => a | b()?,
                Op::BvXor => a ^ b()?,
                Op::BvNot => !a,
                Op::BvAdd => a.wrapping_add(b()?),
                Op::BvSub => a.wrapping_sub(b()?),
                Op::BvNeg => a.wrapping_neg(),
                Op::BvShl => {
                    let s = b()?;
                    if s >= w as u64 {
                        0
                    } else {
                        a << s
                    }
                }
                Op::BvLshr => {
                    let s = b()?;
                    if s >= w as u64 {
                        0
                    } else {
                        a >> s
                    }
                }
                _ => return None,
            };
            Value::Bv(r & m, w)
        }
    })
}

/// A closed-form function body over named parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunBody<'a> {
    pub params: &'a [super::term::Var],
    pub body: &'a Term,
}

impl Interp for FunBody<'_> {
    fn apply(&self, args: &[Value]) -> Result<Value, EvalError> {
        let mut env = Valuation::new();
        for (p, a) in self.params.iter().zip(args) {
            env.insert(p.name.clone(), a.clone());
        }
        eval(self.body, &env)
    }
}

pub fn sort_default_env(vars: &[super::term::Var]) -> Valuation {
    vars.iter().map(|v| (v.name.clone(), Value::default_of(v.sort))).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::term::{Sort, Var};

    #[test]
    fn bv_semantics() {
        let x = Term::var(&Var::new("x", Sort::BitVec(8)));
        let t = Term::bv_op(Op::BvAnd, vec![x.clone(), Term::bv_op(Op::BvSub, vec![x, Term::bv(1, 8)])]);
        let mut env = Valuation::new();
        for v in 0..256u64 {
            env.insert("x".into(), Value::bv(v, 8));
            assert_eq!(eval(&t, &env).unwrap(), Value::bv(v & v.wrapping_sub(1), 8));
        }
        assert_eq!(apply_op(&Op::BvShl, &[Value::bv(1, 8), Value::bv(9, 8)]), Some(Value::bv(0, 8)));
        assert_eq!(apply_op(&Op::BvNeg, &[Value::bv(1, 8)]), Some(Value::bv(255, 8)));
    }

    #[test]
    fn floor_div() {
        let v = apply_op(&Op::FloorDiv(Q::int(3)), &[Value::Int(Q::int(-7))]).unwrap();
        assert_eq!(v, Value::Int(Q::int(-3)));
    }

    #[test]
    fn invoke_needs_interp() {
        let t = Term::Invoke { name: "f".into(), args: vec![Term::int(1)], sort: Sort::Int };
        assert!(matches!(eval(&t, &Valuation::new()), Err(EvalError::Uninterpreted(_))));
        let p = [Var::new("a", Sort::Int)];
        let body = Term::add(Term::var(&p[0]), Term::int(1));
        let fb = FunBody { params: &p, body: &body };
        assert_eq!(eval_with(&t, &Valuation::new(), Some(&fb)).unwrap(), Value::Int(Q::int(2)));
    }
}

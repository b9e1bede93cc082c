//! SMT-LIB2 subprocess client.

use super::sexp::{parse_all, Sexp};
use super::{BackendError, Deadline, SatResult};
use crate::logic::subst::free_vars;
use crate::logic::term::{Sort, Term, Valuation, Value, Var};
use crate::rational::Q;
use num_bigint::BigInt;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

fn logic_for(vars: &[Var]) -> &'static str {
    let int = vars.iter().any(|v| v.sort == Sort::Int);
    let real = vars.iter().any(|v| v.sort == Sort::Real);
    let bv = vars.iter().any(|v| matches!(v.sort, Sort::BitVec(_)));
    match (int, real, bv) {
        (_, _, true) => "QF_BV",
        (true, true, _) => "QF_LIRA",
        (true, false, _) => "QF_LIA",
        (false, true, _) => "QF_LRA",
        _ => "QF_UF",
    }
}

/// The query as an SMT-LIB2 script.
pub fn script(phi: &Term) -> String {
    let vars: Vec<Var> = free_vars(phi).into_iter().collect();
    let mut s = String::new();
    s.push_str("(set-option :produce-models true)\n");
    s.push_str(&format!("(set-logic {})\n", logic_for(&vars)));
    for v in &vars {
        s.push_str(&format!("(declare-fun {} () {})\n", v.name, v.sort));
    }
    s.push_str(&format!("(assert {phi})\n(check-sat)\n"));
    if !vars.is_empty() {
        let names: Vec<&str> = vars.iter().map(|v| &*v.name).collect();
        s.push_str(&format!("(get-value ({}))\n", names.join(" ")));
    }
    s.push_str("(exit)\n");
    s
}

pub(crate) fn parse_num(s: &Sexp) -> Option<Q> {
    match s {
        Sexp::Atom(a, _) => {
            if let Some((i, f)) = a.split_once('.') {
                let digits = format!("{i}{f}");
                let n: BigInt = digits.parse().ok()?;
                let d: BigInt = format!("1{}", "0".repeat(f.len())).parse().ok()?;
                Some(&Q::from_bigint(n) / &Q::from_bigint(d))
            } else {
                Some(Q::from_bigint(a.parse().ok()?))
            }
        }
        Sexp::List(l, _) => match (l.first()?.atom()?, l.len()) {
            ("-", 2) => Some(-parse_num(&l[1])?),
            ("/", 3) => {
                let d = parse_num(&l[2])?;
                if d.is_zero() {
                    return None;
                }
                Some(&parse_num(&l[1])? / &d)
            }
            _ => None,
        },
    }
}

/// Parse a literal value of the given sort in SMT-LIB syntax.
pub fn parse_value(s: &Sexp, sort: Sort) -> Option<Value> {
    match sort {
        Sort::Bool => match s.atom()? {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
        Sort::Int => {
            let q = parse_num(s)?;
            q.is_integer().then_some(Value::Int(q))
        }
        Sort::Real => Some(Value::Real(parse_num(s)?)),
        Sort::BitVec(w) => {
            let (bits, width) = match s {
                Sexp::Atom(a, _) if a.starts_with("#b") => (u64::from_str_radix(&a[2..], 2).ok()?, (a.len() - 2) as u32),
                Sexp::Atom(a, _) if a.starts_with("#x") => (u64::from_str_radix(&a[2..], 16).ok()?, 4 * (a.len() - 2) as u32),
                Sexp::List(l, _) if l.len() == 3 && l[0].atom() == Some("_") => {
                    let n = l[1].atom()?.strip_prefix("bv")?;
                    (n.parse().ok()?, l[2].atom()?.parse().ok()?)
                }
                _ => return None,
            };
            (width == w).then(|| Value::bv(bits, w))
        }
    }
}

pub fn parse_response(out: &str, vars: &[Var]) -> Result<SatResult, BackendError> {
    let items = parse_all(out).map_err(|e| BackendError::Parse(e.to_string()))?;
    let first = items.first().and_then(|s| s.atom()).ok_or_else(|| BackendError::Parse(out.trim().to_string()))?;
    match first {
        "unsat" => Ok(SatResult::Unsat),
        "unknown" | "timeout" => Ok(SatResult::Unknown("external solver returned unknown".into())),
        "sat" => {
            let mut m = Valuation::new();
            if let Some(vals) = items.get(1).and_then(|s| s.list()) {
                for pair in vals {
                    let Some([n, v]) = pair.list().map(|l| l.to_vec()).as_deref().and_then(|l| <&[Sexp; 2]>::try_from(l).ok().cloned()) else {
                        return Err(BackendError::Parse(format!("bad value entry {pair}")));
                    };
                    let name = n.atom().ok_or_else(|| BackendError::Parse(n.to_string()))?;
                    let var = vars.iter().find(|x| &*x.name == name).ok_or_else(|| BackendError::Parse(format!("unknown symbol {name}")))?;
                    let val = parse_value(&v, var.sort).ok_or_else(|| BackendError::Parse(format!("bad value {v}")))?;
                    m.insert(var.name.clone(), val);
                }
            }
            Ok(SatResult::Sat(m))
        }
        other => Err(BackendError::Parse(format!("unexpected response {other}"))),
    }
}

pub fn check(path: &Path, args: &[String], phi: &Term, deadline: Deadline) -> Result<SatResult, BackendError> {
    let vars: Vec<Var> = free_vars(phi).into_iter().collect();
    let mut child = Command::new(path)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| BackendError::Process(format!("{}: {e}", path.display())))?;
    {
        let mut stdin = child.stdin.take().unwrap();
        stdin.write_all(script(phi).as_bytes()).map_err(|e| BackendError::Process(e.to_string()))?;
    }
    let mut nap = Duration::from_micros(200);
    loop {
        match child.try_wait().map_err(|e| BackendError::Process(e.to_string()))? {
            Some(_) => break,
            None => {
                if deadline.expired() {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(SatResult::Unknown("timeout".into()));
                }
                std::thread::sleep(nap);
                nap = (nap * 2).min(Duration::from_millis(5));
            }
        }
    }
    let mut out = String::new();
    child.stdout.take().unwrap().read_to_string(&mut out).map_err(|e| BackendError::Process(e.to_string()))?;
    parse_response(&out, &vars)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_syntax() {
        let p = |s: &str| parse_all(s).unwrap().remove(0);
        assert_eq!(parse_value(&p("(- 5)"), Sort::Int), Some(Value::Int(Q::int(-5))));
        assert_eq!(parse_value(&p("(/ 1.0 4.0)"), Sort::Real), Some(Value::Real(Q::new(1, 4))));
        assert_eq!(parse_value(&p("(- (/ 3 2))"), Sort::Real), Some(Value::Real(Q::new(-3, 2))));
        assert_eq!(parse_value(&p("0.25"), Sort::Real), Some(Value::Real(Q::new(1, 4))));
        assert_eq!(parse_value(&p("#x0f"), Sort::BitVec(8)), Some(Value::bv(15, 8)));
        assert_eq!(parse_value(&p("(_ bv3 4)"), Sort::BitVec(4)), Some(Value::bv(3, 4)));
        assert_eq!(parse_value(&p("#b101"), Sort::BitVec(4)), None);
    }

    #[test]
    fn response_parsing() {
        let x = Var::new("x", Sort::Int);
        let r = parse_response("sat\n((x (- 2)))\n", std::slice::from_ref(&x)).unwrap();
        let SatResult::Sat(m) = r else { panic!() };
        assert_eq!(m["x"], Value::Int(Q::int(-2)));
        assert_eq!(parse_response("unsat\n(error \"model not available\")", &[x]).unwrap(), SatResult::Unsat);
    }

    #[test]
    fn script_declares_everything() {
        let x = Var::new("x", Sort::Int);
        let s = script(&Term::le(Term::var(&x), Term::int(3)));
        assert!(s.contains("(declare-fun x () Int)"));
        assert!(s.contains("(set-logic QF_LIA)"));
        assert!(s.contains("(get-value (x))"));
    }
}

//! SyGuS-lite problem files: parsing, printing and solving.

pub mod solve;

use crate::logic::spec::{Shape, Specification, SynthFun};
use crate::logic::subst::free_vars;
use crate::logic::term::{bv_mask, Name, Op, Sort, Term, Value, Var};
use crate::rational::Q;
use crate::solver::sexp::{parse_all, Pos, Sexp};
use crate::solver::smtlib::parse_num;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use solve::{solve, RunReport, SolveConfig, SolverChoice, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Logic {
    Lia,
    Lra,
    Bv(u32),
}

impl Logic {
    pub fn arith_sort(self) -> Sort {
        match self {
            Logic::Lia => Sort::Int,
            Logic::Lra => Sort::Real,
            Logic::Bv(w) => Sort::BitVec(w),
        }
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Logic::Lia => write!(f, "LIA"),
            Logic::Lra => write!(f, "LRA"),
            Logic::Bv(_) => write!(f, "BV"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub logic: Logic,
    pub spec: Specification,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProblemError {
    #[error("{pos}: {msg}")]
    Parse { pos: Pos, msg: String },
    #[error("{pos}: unsupported logic {logic}")]
    UnsupportedLogic { pos: Pos, logic: String },
}

impl ProblemError {
    pub fn pos(&self) -> Pos {
        match self {
            ProblemError::Parse { pos, .. } | ProblemError::UnsupportedLogic { pos, .. } => *pos,
        }
    }
}

fn err<T>(s: &Sexp, msg: impl Into<String>) -> Result<T, ProblemError> {
    Err(ProblemError::Parse { pos: s.pos(), msg: msg.into() })
}

/// Symbols visible while parsing a term.
struct Scope<'a> {
    logic: Option<Logic>,
    vars: &'a BTreeMap<Name, Var>,
    fun: Option<&'a SynthFun>,
}

fn parse_sort(s: &Sexp) -> Result<Sort, ProblemError> {
    match s {
        Sexp::Atom(a, _) => match a.as_str() {
            "Int" => Ok(Sort::Int),
            "Real" => Ok(Sort::Real),
            "Bool" => Ok(Sort::Bool),
            _ => err(s, format!("unknown sort {a}")),
        },
        Sexp::List(l, _) => {
            if l.len() == 3 && l[0].atom() == Some("_") && l[1].atom() == Some("BitVec") {
                if let Some(w) = l[2].atom().and_then(|w| w.parse::<u32>().ok()).filter(|w| (1..=64).contains(w)) {
                    return Ok(Sort::BitVec(w));
                }
            }
            err(s, "expected a sort")
        }
    }
}

fn bv_literal(s: &Sexp) -> Option<Value> {
    match s {
        Sexp::Atom(a, _) if a.starts_with("#b") && a.len() > 2 => {
            let w = (a.len() - 2) as u32;
            (w <= 64).then(|| u64::from_str_radix(&a[2..], 2).ok().map(|b| Value::bv(b, w)))?
        }
        Sexp::Atom(a, _) if a.starts_with("#x") && a.len() > 2 => {
            let w = 4 * (a.len() - 2) as u32;
            (w <= 64).then(|| u64::from_str_radix(&a[2..], 16).ok().map(|b| Value::bv(b, w)))?
        }
        Sexp::List(l, _) if l.len() == 3 && l[0].atom() == Some("_") => {
            let n: u64 = l[1].atom()?.strip_prefix("bv")?.parse().ok()?;
            let w: u32 = l[2].atom()?.parse().ok()?;
            ((1..=64).contains(&w) && n <= bv_mask(w)).then(|| Value::bv(n, w))
        }
        _ => None,
    }
}

fn is_numeral(a: &str) -> bool {
    let digits = a.replacen('.', "", 1);
    !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit())
}

fn number_sort(scope: &Scope, s: &Sexp) -> Sort {
    let decimal = s.to_string().contains('.');
    match scope.logic {
        Some(Logic::Lra) => Sort::Real,
        _ if decimal => Sort::Real,
        _ => Sort::Int,
    }
}

fn const_num(t: &Term) -> Option<&Q> {
    match t {
        Term::Const(Value::Int(q)) | Term::Const(Value::Real(q)) => Some(q),
        _ => None,
    }
}

fn parse_term(s: &Sexp, scope: &Scope) -> Result<Term, ProblemError> {
    let app = |op: Op, args: Vec<Term>| Term::app(op, args).or_else(|e| err(s, e.to_string()));
    match s {
        Sexp::Atom(a, _) => {
            if let Some(v) = scope.vars.get(a.as_str()) {
                return Ok(Term::var(v));
            }
            match a.as_str() {
                "true" => return Ok(Term::tt()),
                "false" => return Ok(Term::ff()),
                _ => {}
            }
            if let Some(v) = bv_literal(s) {
                return Ok(Term::Const(v));
            }
            if is_numeral(a) {
                let q = parse_num(s).ok_or_else(|| ProblemError::Parse { pos: s.pos(), msg: format!("bad numeral {a}") })?;
                return Ok(Term::num(number_sort(scope, s), q));
            }
            if let Some(f) = scope.fun.filter(|f| &*f.name == a) {
                if f.params.is_empty() {
                    return Ok(Term::Invoke { name: f.name.clone(), args: vec![], sort: f.ret });
                }
            }
            err(s, format!("undeclared symbol {a}"))
        }
        Sexp::List(l, _) => {
            let Some(head) = l.first() else { return err(s, "empty application") };
            if let Some(v) = bv_literal(s) {
                return Ok(Term::Const(v));
            }
            let Some(h) = head.atom() else { return err(head, "expected an operator") };
            if h == "/" {
                let q = parse_num(s).ok_or_else(|| ProblemError::Parse { pos: s.pos(), msg: "division by a non-constant".into() })?;
                return Ok(Term::num(number_sort(scope, s), q));
            }
            let args = l[1..].iter().map(|a| parse_term(a, scope)).collect::<Result<Vec<_>, _>>()?;
            if let Some(f) = scope.fun.filter(|f| &*f.name == h) {
                if args.len() != f.params.len() {
                    return err(s, format!("{h} expects {} arguments", f.params.len()));
                }
                for (a, p) in args.iter().zip(&f.params) {
                    if a.sort() != p.sort {
                        return err(s, format!("argument {a} of {h} should have sort {}", p.sort));
                    }
                }
                return Ok(Term::Invoke { name: f.name.clone(), args, sort: f.ret });
            }
            if let Some(op) = Op::from_bv_symbol(h) {
                return app(op, args);
            }
            match h {
                "not" => app(Op::Not, args),
                "and" => app(Op::And, args),
                "or" => app(Op::Or, args),
                "=>" => app(Op::Implies, args),
                "=" => app(Op::Eq, args),
                "distinct" => Ok(Term::not(app(Op::Eq, args)?)),
                "<=" => app(Op::Le, args),
                "<" => app(Op::Lt, args),
                ">=" => app(Op::Ge, args),
                ">" => app(Op::Gt, args),
                "+" => app(Op::Add, args),
                "-" if args.len() == 1 => match const_num(&args[0]) {
                    Some(q) => Ok(Term::num(args[0].sort(), -q.clone())),
                    None => app(Op::Neg, args),
                },
                "-" if args.len() >= 2 => {
                    let mut it = args.into_iter();
                    let first = it.next().expect("two arguments");
                    it.try_fold(first, |acc, b| app(Op::Sub, vec![acc, b]))
                }
                "*" if args.len() == 2 => match (const_num(&args[0]), const_num(&args[1])) {
                    (Some(a), Some(b)) => Ok(Term::num(args[0].sort(), a * b)),
                    (Some(c), None) => app(Op::Scale(c.clone()), vec![args[1].clone()]),
                    (None, Some(c)) => app(Op::Scale(c.clone()), vec![args[0].clone()]),
                    (None, None) => err(s, "nonlinear multiplication"),
                },
                "div" if args.len() == 2 => match const_num(&args[1]) {
                    Some(c) => app(Op::FloorDiv(c.clone()), vec![args[0].clone()]),
                    None => err(s, "division by a non-constant"),
                },
                "ite" if args.len() == 3 => {
                    let mut it = args.into_iter();
                    let (c, a, b) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                    Term::ite(c, a, b).or_else(|e| err(s, e.to_string()))
                }
                _ => err(s, format!("unknown operator {h} with {} arguments", l.len() - 1)),
            }
        }
    }
}

fn parse_params(s: &Sexp) -> Result<Vec<Var>, ProblemError> {
    let Some(l) = s.list() else { return err(s, "expected a parameter list") };
    let mut out: Vec<Var> = Vec::new();
    for p in l {
        match p.list() {
            Some([n, sort]) if n.atom().is_some() => {
                let name = n.atom().unwrap();
                if out.iter().any(|v| &*v.name == name) {
                    return err(n, format!("duplicate parameter {name}"));
                }
                out.push(Var::new(name, parse_sort(sort)?));
            }
            _ => return err(p, "expected (name sort)"),
        }
    }
    Ok(out)
}

/// Operator names of a flat grammar: either a list of symbols or a single
/// SyGuS nonterminal whose productions are collected by head symbol.
fn parse_grammar(s: &Sexp) -> Result<BTreeSet<String>, ProblemError> {
    let Some(l) = s.list() else { return err(s, "expected a grammar") };
    if l.iter().all(|x| x.atom().is_some()) {
        return Ok(l.iter().map(|x| x.atom().unwrap().to_string()).collect());
    }
    let mut ops = BTreeSet::new();
    for nt in l {
        let rules = match nt.list() {
            Some([_, _, rules]) => rules.list(),
            _ => None,
        };
        let Some(rules) = rules else { return err(nt, "expected (Nonterminal Sort (rules))") };
        for r in rules {
            if let Some(h) = r.head() {
                ops.insert(h.to_string());
            }
        }
    }
    Ok(ops)
}

fn check_ident(s: &Sexp) -> Result<&str, ProblemError> {
    match s.atom() {
        Some(a) if !a.is_empty() && !a.starts_with(|c: char| c.is_ascii_digit() || c == '#') => Ok(a),
        _ => err(s, "expected a symbol"),
    }
}

/// Parse a SyGuS-lite problem.
pub fn parse_problem(text: &str) -> Result<Problem, ProblemError> {
    let cmds = parse_all(text).map_err(|e| ProblemError::Parse { pos: e.pos, msg: e.msg })?;
    let mut logic: Option<Logic> = None;
    let mut fun: Option<SynthFun> = None;
    let mut vars: BTreeMap<Name, Var> = BTreeMap::new();
    let mut order: Vec<Var> = Vec::new();
    let mut constraints = Vec::new();
    let mut done = false;
    for c in &cmds {
        let Some(l) = c.list() else { return err(c, "expected a command") };
        let Some(head) = c.head() else { return err(c, "expected a command") };
        if done {
            return err(c, "command after check-synth");
        }
        match (head, l.len()) {
            ("set-logic", 2) => {
                if logic.is_some() {
                    return err(c, "logic already set");
                }
                let name = l[1].atom().unwrap_or_default();
                logic = Some(match name.strip_prefix("QF_").unwrap_or(name) {
                    "LIA" => Logic::Lia,
                    "LRA" => Logic::Lra,
                    "BV" => Logic::Bv(0),
                    _ => return Err(ProblemError::UnsupportedLogic { pos: l[1].pos(), logic: l[1].to_string() }),
                });
            }
            ("synth-fun", 4 | 5) => {
                if fun.is_some() {
                    return err(c, "only one synth-fun is supported");
                }
                let name = check_ident(&l[1])?;
                if vars.contains_key(name) {
                    return err(&l[1], format!("{name} is already declared"));
                }
                let params = parse_params(&l[2])?;
                let ret = parse_sort(&l[3])?;
                let ops = l.get(4).map(parse_grammar).transpose()?;
                fun = Some(SynthFun { name: name.into(), params, ret, ops });
            }
            ("declare-var", 3) => {
                let name = check_ident(&l[1])?;
                if vars.contains_key(name) || fun.as_ref().is_some_and(|f| &*f.name == name) {
                    return err(&l[1], format!("{name} is already declared"));
                }
                let v = Var::new(name, parse_sort(&l[2])?);
                vars.insert(v.name.clone(), v.clone());
                order.push(v);
            }
            ("constraint", 2) => {
                let Some(f) = fun.as_ref() else { return err(c, "constraint before synth-fun") };
                let scope = Scope { logic, vars: &vars, fun: Some(f) };
                let t = parse_term(&l[1], &scope)?;
                if t.sort() != Sort::Bool {
                    return err(&l[1], "constraint is not a formula");
                }
                constraints.push(t);
            }
            ("check-synth", 1) => done = true,
            _ => return err(c, format!("unexpected command {head} with {} arguments", l.len() - 1)),
        }
    }
    let at = Pos { line: 1, col: 1 };
    let Some(logic) = logic else { return Err(ProblemError::Parse { pos: at, msg: "missing set-logic".into() }) };
    let Some(fun) = fun else { return Err(ProblemError::Parse { pos: at, msg: "missing synth-fun".into() }) };
    let logic = match logic {
        Logic::Bv(_) => match fun.ret {
            Sort::BitVec(w) => Logic::Bv(w),
            _ => return Err(ProblemError::Parse { pos: at, msg: "BV problem with a non bit-vector function".into() }),
        },
        l => l,
    };
    let sorts_ok = fun.params.iter().map(|p| p.sort).chain([fun.ret]).chain(order.iter().map(|v| v.sort)).all(|s| match logic {
        Logic::Lia => s == Sort::Int || s == Sort::Bool,
        Logic::Lra => s == Sort::Real || s == Sort::Bool,
        Logic::Bv(w) => s == Sort::BitVec(w) || s == Sort::Bool,
    });
    if !sorts_ok {
        return Err(ProblemError::Parse { pos: at, msg: format!("declared sorts do not fit logic {logic}") });
    }
    Ok(Problem { logic, spec: Specification { fun, vars: order, constraints } })
}

/// Parse a `define-fun` for the problem's function and return its body.
pub fn parse_define_fun(text: &str, problem: &Problem) -> Result<Term, ProblemError> {
    let cmds = parse_all(text).map_err(|e| ProblemError::Parse { pos: e.pos, msg: e.msg })?;
    let [c] = cmds.as_slice() else {
        return Err(ProblemError::Parse { pos: Pos { line: 1, col: 1 }, msg: "expected one define-fun".into() });
    };
    let f = &problem.spec.fun;
    match c.list() {
        Some([h, n, ps, ret, body]) if h.atom() == Some("define-fun") => {
            if n.atom() != Some(&*f.name) {
                return err(n, format!("expected a definition of {}", f.name));
            }
            let params = parse_params(ps)?;
            if params.iter().map(|p| p.sort).ne(f.params.iter().map(|p| p.sort)) || parse_sort(ret)? != f.ret {
                return err(c, "signature differs from the synth-fun");
            }
            let vars: BTreeMap<Name, Var> = params.iter().map(|p| (p.name.clone(), p.clone())).collect();
            let scope = Scope { logic: Some(problem.logic), vars: &vars, fun: None };
            let t = parse_term(body, &scope)?;
            if t.sort() != f.ret {
                return err(body, "body has the wrong sort");
            }
            // Rename to the synth-fun's own parameter names.
            let m = params.iter().zip(&f.params).map(|(a, b)| (a.name.clone(), Term::var(b))).collect();
            Ok(crate::logic::subst::subst(&t, &m))
        }
        _ => err(c, "expected (define-fun name params sort body)"),
    }
}

fn fmt_params(params: &[Var]) -> String {
    let ps: Vec<String> = params.iter().map(|p| format!("({} {})", p.name, p.sort)).collect();
    format!("({})", ps.join(" "))
}

/// `(define-fun f (params) sort body)`.
pub fn define_fun(fun: &SynthFun, body: &Term) -> String {
    format!("(define-fun {} {} {} {})", fun.name, fmt_params(&fun.params), fun.ret, body)
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.spec;
        writeln!(f, "(set-logic {})", self.logic)?;
        write!(f, "(synth-fun {} {} {}", s.fun.name, fmt_params(&s.fun.params), s.fun.ret)?;
        if let Some(ops) = &s.fun.ops {
            write!(f, " ({})", ops.iter().cloned().collect::<Vec<_>>().join(" "))?;
        }
        writeln!(f, ")")?;
        for v in &s.vars {
            writeln!(f, "(declare-var {} {})", v.name, v.sort)?;
        }
        for c in &s.constraints {
            writeln!(f, "(constraint {c})")?;
        }
        writeln!(f, "(check-synth)")
    }
}

impl Problem {
    pub fn shape(&self) -> Shape {
        self.spec.classify()
    }

    /// The same problem with every bit-vector of the logic's width resized.
    pub fn with_bv_width(&self, width: u32) -> Problem {
        let Logic::Bv(old) = self.logic else { return self.clone() };
        let resort = |s: Sort| if s == Sort::BitVec(old) { Sort::BitVec(width) } else { s };
        let var = |v: &Var| Var::new(&v.name, resort(v.sort));
        fn go(t: &Term, resort: &dyn Fn(Sort) -> Sort) -> Term {
            match t {
                Term::Var(v) => Term::Var(Var::new(&v.name, resort(v.sort))),
                Term::Const(Value::Bv(b, w)) => match resort(Sort::BitVec(*w)) {
                    Sort::BitVec(nw) => Term::Const(Value::bv(*b, nw)),
                    _ => unreachable!(),
                },
                Term::Invoke { name, args, sort } => {
                    Term::Invoke { name: name.clone(), args: args.iter().map(|a| go(a, resort)).collect(), sort: resort(*sort) }
                }
                _ => t.with_children(t.children().into_iter().map(|c| go(c, resort)).collect()),
            }
        }
        let s = &self.spec;
        Problem {
            logic: Logic::Bv(width),
            spec: Specification {
                fun: SynthFun {
                    name: s.fun.name.clone(),
                    params: s.fun.params.iter().map(var).collect(),
                    ret: resort(s.fun.ret),
                    ops: s.fun.ops.clone(),
                },
                vars: s.vars.iter().map(var).collect(),
                constraints: s.constraints.iter().map(|c| go(c, &resort)).collect(),
            },
        }
    }

    /// Universal variables that the constraints actually mention.
    pub fn used_vars(&self) -> BTreeSet<Var> {
        free_vars(&self.spec.formula())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAX2: &str = "
(set-logic LIA)
(synth-fun max2 ((a Int) (b Int)) Int)
(declare-var x Int)
(declare-var y Int)
(constraint (>= (max2 x y) x))
(constraint (>= (max2 x y) y))
(constraint (or (= x (max2 x y)) (= y (max2 x y))))
(check-synth)
";

    const HD01: &str = "
(set-logic BV)
(synth-fun f ((x (_ BitVec 8))) (_ BitVec 8)
  ((Start (_ BitVec 8) (x #x01 (bvand Start Start) (bvsub Start Start) (bvadd Start Start) (bvor Start Start)))))
(declare-var x (_ BitVec 8))
(constraint (= (f x) (bvand x (bvsub x #x01))))
(check-synth)
";

    #[test]
    fn max2_is_separable_lia() {
        let p = parse_problem(MAX2).unwrap();
        assert_eq!(p.logic, Logic::Lia);
        let Shape::Separable(s) = p.shape() else { panic!("not separable") };
        assert_eq!(s.inputs.len(), 2);
    }

    #[test]
    fn grammar_is_echoed() {
        let p = parse_problem(HD01).unwrap();
        assert_eq!(p.logic, Logic::Bv(8));
        let ops: Vec<&str> = p.spec.fun.ops.as_ref().unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(ops, ["bvadd", "bvand", "bvor", "bvsub"]);
        assert!(matches!(p.shape(), Shape::Separable(_)));
    }

    #[test]
    fn round_trip() {
        for text in [MAX2, HD01] {
            let p = parse_problem(text).unwrap();
            let printed = p.to_string();
            assert_eq!(parse_problem(&printed).unwrap(), p);
            assert_eq!(parse_problem(&printed).unwrap().to_string(), printed);
        }
    }

    #[test]
    fn two_synth_funs_are_rejected() {
        let text = "(set-logic LIA)\n(synth-fun f ((x Int)) Int)\n(synth-fun g ((x Int)) Int)\n";
        let e = parse_problem(text).unwrap_err();
        assert_eq!(e.pos(), Pos { line: 3, col: 1 });
    }

    #[test]
    fn errors_carry_positions() {
        let text = "(set-logic LIA)\n(synth-fun f ((x Int)) Int)\n(constraint (= (f y) 1))\n";
        let e = parse_problem(text).unwrap_err();
        assert_eq!(e.pos(), Pos { line: 3, col: 19 });
        let e = parse_problem("(set-logic NRA)").unwrap_err();
        assert!(matches!(e, ProblemError::UnsupportedLogic { pos: Pos { line: 1, col: 12 }, .. }));
        assert!(parse_problem("(set-logic LIA)\n(synth-fun f ((x Int)) Int\n").is_err());
    }

    #[test]
    fn arithmetic_literals() {
        let text = "(set-logic LRA)\n(synth-fun f ((x Real)) Real)\n(declare-var x Real)\n\
                    (constraint (= (f x) (+ (* (/ 1 2) x) (- 3) (* x 2.5))))\n(check-synth)\n";
        let p = parse_problem(text).unwrap();
        let printed = p.to_string();
        assert!(printed.contains("(* (/ 1.0 2.0) x)"), "{printed}");
        assert!(printed.contains("(- 3.0)"), "{printed}");
        assert_eq!(parse_problem(&printed).unwrap(), p);
    }

    #[test]
    fn define_fun_round_trip() {
        let p = parse_problem(MAX2).unwrap();
        let text = "(define-fun max2 ((u Int) (v Int)) Int (ite (<= u v) v u))";
        let body = parse_define_fun(text, &p).unwrap();
        assert_eq!(define_fun(&p.spec.fun, &body), "(define-fun max2 ((a Int) (b Int)) Int (ite (<= a b) b a))");
    }

    #[test]
    fn bv_width_override() {
        let p = parse_problem(HD01).unwrap().with_bv_width(4);
        assert_eq!(p.logic, Logic::Bv(4));
        assert!(p.to_string().contains("#x1") || p.to_string().contains("#b0001"));
        assert_eq!(parse_problem(&p.to_string()).unwrap(), p);
    }
}

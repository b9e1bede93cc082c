use crate::rational::Q;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub type Name = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int,
    Real,
    BitVec(u32),
}

impl Sort {
    pub fn is_arith(self) -> bool {
        matches!(self, Sort::Int | Sort::Real)
    }

    pub fn bv_width(self) -> Option<u32> {
        match self {
            Sort::BitVec(w) => Some(w),
            _ => None,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "Bool"),
            Sort::Int => write!(f, "Int"),
            Sort::Real => write!(f, "Real"),
            Sort::BitVec(w) => write!(f, "(_ BitVec {w})"),
        }
    }
}

pub fn bv_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(Q),
    Real(Q),
    Bv(u64, u32),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Int(_) => Sort::Int,
            Value::Real(_) => Sort::Real,
            Value::Bv(_, w) => Sort::BitVec(*w),
        }
    }

    pub fn bv(bits: u64, width: u32) -> Value {
        Value::Bv(bits & bv_mask(width), width)
    }

    pub fn num(sort: Sort, q: Q) -> Value {
        match sort {
            Sort::Int => Value::Int(q),
            _ => Value::Real(q),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<&Q> {
        match self {
            Value::Int(q) | Value::Real(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_bv(&self) -> Option<u64> {
        match self {
            Value::Bv(b, _) => Some(*b),
            _ => None,
        }
    }

    /// Default value of a sort, used for unconstrained model entries.
    pub fn default_of(sort: Sort) -> Value {
        match sort {
            Sort::Bool => Value::Bool(false),
            Sort::Int => Value::Int(Q::zero()),
            Sort::Real => Value::Real(Q::zero()),
            Sort::BitVec(w) => Value::Bv(0, w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: Name,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: &str, sort: Sort) -> Var {
        Var { name: Arc::from(name), sort }
    }
}

pub type Valuation = BTreeMap<Name, Value>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Not,
    And,
    Or,
    Implies,
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
    Add,
    Sub,
    Neg,
    /// Multiplication by a rational constant.
    Scale(Q),
    /// `floor(t / c)` for a positive integer `c`, integer sort only.
    FloorDiv(Q),
    BvAnd,
    BvOr,
    BvXor,
    BvNot,
    BvAdd,
    BvSub,
    BvNeg,
    BvShl,
    BvLshr,
}

impl Op {
    pub fn is_comparison(&self) -> bool {
        matches!(self, Op::Eq | Op::Le | Op::Lt | Op::Ge | Op::Gt)
    }

    pub fn is_bv(&self) -> bool {
        matches!(
            self,
            Op::BvAnd
                | Op::BvOr
                | Op::BvXor
                | Op::BvNot
                | Op::BvAdd
                | Op::BvSub
                | Op::BvNeg
                | Op::BvShl
                | Op::BvLshr
        )
    }

    /// Bit-vector operators that are commutative.
    pub fn is_commutative(&self) -> bool {
        matches!(self, Op::BvAnd | Op::BvOr | Op::BvXor | Op::BvAdd | Op::Add | Op::And | Op::Or)
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            Op::Not | Op::Neg | Op::Scale(_) | Op::FloorDiv(_) | Op::BvNot | Op::BvNeg => Some(1),
            Op::Implies
            | Op::Eq
            | Op::Le
            | Op::Lt
            | Op::Ge
            | Op::Gt
            | Op::Sub
            | Op::BvAnd
            | Op::BvOr
            | Op::BvXor
            | Op::BvAdd
            | Op::BvSub
            | Op::BvShl
            | Op::BvLshr => Some(2),
            Op::And | Op::Or | Op::Add => None,
        }
    }

    /// SMT-LIB symbol of the operator. `Scale` and `FloorDiv` print specially.
    pub fn symbol(&self) -> &'static str {
        match self {
            Op::Not => "not",
            Op::And => "and",
            Op::Or => "or",
            Op::Implies => "=>",
            Op::Eq => "=",
            Op::Le => "<=",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Add => "+",
            Op::Sub | Op::Neg => "-",
            Op::Scale(_) => "*",
            Op::FloorDiv(_) => "div",
            Op::BvAnd => "bvand",
            Op::BvOr => "bvor",
            Op::BvXor => "bvxor",
            Op::BvNot => "bvnot",
            Op::BvAdd => "bvadd",
            Op::BvSub => "bvsub",
            Op::BvNeg => "bvneg",
            Op::BvShl => "bvshl",
            Op::BvLshr => "bvlshr",
        }
    }

    pub fn from_bv_symbol(s: &str) -> Option<Op> {
        Some(match s {
            "bvand" => Op::BvAnd,
            "bvor" => Op::BvOr,
            "bvxor" => Op::BvXor,
            "bvnot" => Op::BvNot,
            "bvadd" => Op::BvAdd,
            "bvsub" => Op::BvSub,
            "bvneg" => Op::BvNeg,
            "bvshl" => Op::BvShl,
            "bvlshr" => Op::BvLshr,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Const(Value),
    App(Op, Vec<Term>),
    Ite(Box<(Term, Term, Term)>),
    /// Invocation of the function being synthesized.
    Invoke { name: Name, args: Vec<Term>, sort: Sort },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq, Clone)]
pub enum SortError {
    #[error("operator {op} expects {expected} arguments, got {got}")]
    Arity { op: &'static str, expected: usize, got: usize },
    #[error("operator {op} applied to ill-sorted arguments ({sorts})")]
    Mismatch { op: &'static str, sorts: String },
    #[error("ite branches have different sorts {0} and {1}")]
    IteBranches(Sort, Sort),
    #[error("ite condition must be Bool, got {0}")]
    IteCond(Sort),
    #[error("floor division needs a positive integer divisor, got {0}")]
    Divisor(Q),
}

impl Term {
    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(v) => v.sort,
            Term::Const(v) => v.sort(),
            Term::Invoke { sort, .. } => *sort,
            Term::Ite(b) => b.1.sort(),
            Term::App(op, args) => match op {
                Op::Not | Op::And | Op::Or | Op::Implies => Sort::Bool,
                Op::Eq | Op::Le | Op::Lt | Op::Ge | Op::Gt => Sort::Bool,
                Op::FloorDiv(_) => Sort::Int,
                _ => args.first().map(|a| a.sort()).unwrap_or(Sort::Int),
            },
        }
    }

    /// Checked application.
    pub fn app(op: Op, args: Vec<Term>) -> Result<Term, SortError> {
        if let Some(n) = op.arity() {
            if args.len() != n {
                return Err(SortError::Arity { op: op.symbol(), expected: n, got: args.len() });
            }
        }
        let sorts: Vec<Sort> = args.iter().map(|a| a.sort()).collect();
        let mismatch = || SortError::Mismatch {
            op: op.symbol(),
            sorts: sorts.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "),
        };
        let all_same = sorts.windows(2).all(|w| w[0] == w[1]);
        let ok = match &op {
            Op::Not | Op::And | Op::Or | Op::Implies => sorts.iter().all(|s| *s == Sort::Bool),
            Op::Eq => all_same,
            Op::Le | Op::Lt | Op::Ge | Op::Gt => all_same && sorts[0].is_arith(),
            Op::Add => !sorts.is_empty() && all_same && sorts[0].is_arith(),
            Op::Sub | Op::Neg | Op::Scale(_) => all_same && sorts[0].is_arith(),
            Op::FloorDiv(c) => {
                if !c.is_integer() || !c.is_positive() {
                    return Err(SortError::Divisor(c.clone()));
                }
                sorts[0] == Sort::Int
            }
            _ => all_same && sorts[0].bv_width().is_some(),
        };
        if !ok {
            return Err(mismatch());
        }
        if let Op::Scale(c) = &op {
            if sorts[0] == Sort::Int && !c.is_integer() {
                return Err(mismatch());
            }
        }
        Ok(Term::App(op, args))
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Result<Term, SortError> {
        if c.sort() != Sort::Bool {
            return Err(SortError::IteCond(c.sort()));
        }
        if a.sort() != b.sort() {
            return Err(SortError::IteBranches(a.sort(), b.sort()));
        }
        Ok(Term::Ite(Box::new((c, a, b))))
    }

    pub fn var(v: &Var) -> Term {
        Term::Var(v.clone())
    }

    pub fn tt() -> Term {
        Term::Const(Value::Bool(true))
    }

    pub fn ff() -> Term {
        Term::Const(Value::Bool(false))
    }

    pub fn bool(b: bool) -> Term {
        Term::Const(Value::Bool(b))
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Value::Int(Q::int(n)))
    }

    pub fn num(sort: Sort, q: Q) -> Term {
        Term::Const(Value::num(sort, q))
    }

    pub fn bv(bits: u64, width: u32) -> Term {
        Term::Const(Value::bv(bits, width))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::Const(Value::Bool(true)))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Term::Const(Value::Bool(false)))
    }

    pub fn not(t: Term) -> Term {
        match t {
            Term::Const(Value::Bool(b)) => Term::bool(!b),
            Term::App(Op::Not, mut a) => a.pop().unwrap(),
            t => Term::App(Op::Not, vec![t]),
        }
    }

    /// Conjunction with flattening and constant folding.
    pub fn and(items: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for t in items {
            match t {
                Term::Const(Value::Bool(true)) => {}
                Term::Const(Value::Bool(false)) => return Term::ff(),
                Term::App(Op::And, inner) => out.extend(inner),
                t => out.push(t),
            }
        }
        match out.len() {
            0 => Term::tt(),
            1 => out.pop().unwrap(),
            _ => Term::App(Op::And, out),
        }
    }

    /// Disjunction with flattening and constant folding.
    pub fn or(items: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for t in items {
            match t {
                Term::Const(Value::Bool(false)) => {}
                Term::Const(Value::Bool(true)) => return Term::tt(),
                Term::App(Op::Or, inner) => out.extend(inner),
                t => out.push(t),
            }
        }
        match out.len() {
            0 => Term::ff(),
            1 => out.pop().unwrap(),
            _ => Term::App(Op::Or, out),
        }
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::or(vec![Term::not(a), b])
    }

    fn bin(op: Op, a: Term, b: Term) -> Term {
        Term::app(op, vec![a, b]).expect("well-sorted")
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::bin(Op::Eq, a, b)
    }

    pub fn le(a: Term, b: Term) -> Term {
        Term::bin(Op::Le, a, b)
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::bin(Op::Lt, a, b)
    }

    pub fn ge(a: Term, b: Term) -> Term {
        Term::bin(Op::Ge, a, b)
    }

    pub fn gt(a: Term, b: Term) -> Term {
        Term::bin(Op::Gt, a, b)
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::bin(Op::Add, a, b)
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::bin(Op::Sub, a, b)
    }

    pub fn bv_op(op: Op, args: Vec<Term>) -> Term {
        Term::app(op, args).expect("well-sorted")
    }

    pub fn is_atom(&self) -> bool {
        match self {
            Term::Var(v) => v.sort == Sort::Bool,
            Term::Const(Value::Bool(_)) => true,
            Term::App(op, args) => op.is_comparison() && args[0].sort() != Sort::Bool,
            Term::Invoke { sort, .. } => *sort == Sort::Bool,
            _ => false,
        }
    }

    pub fn is_literal(&self) -> bool {
        match self {
            Term::App(Op::Not, a) => a[0].is_atom(),
            t => t.is_atom(),
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 1,
            Term::App(_, a) | Term::Invoke { args: a, .. } => 1 + a.iter().map(|t| t.size()).sum::<usize>(),
            Term::Ite(b) => 1 + b.0.size() + b.1.size() + b.2.size(),
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Const(_) => vec![],
            Term::App(_, a) | Term::Invoke { args: a, .. } => a.iter().collect(),
            Term::Ite(b) => vec![&b.0, &b.1, &b.2],
        }
    }

    /// Rebuild the node with new children, in the order returned by `children`.
    pub fn with_children(&self, mut kids: Vec<Term>) -> Term {
        match self {
            Term::Var(_) | Term::Const(_) => self.clone(),
            Term::App(op, _) => Term::App(op.clone(), kids),
            Term::Invoke { name, sort, .. } => Term::Invoke { name: name.clone(), args: kids, sort: *sort },
            Term::Ite(_) => {
                let c = kids.remove(0);
                let a = kids.remove(0);
                let b = kids.remove(0);
                Term::Ite(Box::new((c, a, b)))
            }
        }
    }
}

fn fmt_num(f: &mut fmt::Formatter<'_>, q: &Q, real: bool) -> fmt::Result {
    let body = |f: &mut fmt::Formatter<'_>, q: &Q| -> fmt::Result {
        if q.is_integer() {
            if real {
                write!(f, "{}.0", q.numer())
            } else {
                write!(f, "{}", q.numer())
            }
        } else if real {
            write!(f, "(/ {}.0 {}.0)", q.numer(), q.denom())
        } else {
            write!(f, "(/ {} {})", q.numer(), q.denom())
        }
    };
    if q.is_negative() {
        write!(f, "(- ")?;
        body(f, &q.abs())?;
        write!(f, ")")
    } else {
        body(f, q)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(q) => fmt_num(f, q, false),
            Value::Real(q) => fmt_num(f, q, true),
            Value::Bv(bits, w) => {
                if w % 4 == 0 {
                    write!(f, "#x{:0width$x}", bits, width = (*w / 4) as usize)
                } else {
                    write!(f, "#b{:0width$b}", bits, width = *w as usize)
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{}", v.name),
            Term::Const(c) => write!(f, "{c}"),
            Term::Ite(b) => write!(f, "(ite {} {} {})", b.0, b.1, b.2),
            Term::Invoke { name, args, .. } => {
                if args.is_empty() {
                    return write!(f, "{name}");
                }
                write!(f, "({name}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Term::App(Op::Scale(c), args) => {
                write!(f, "(* ")?;
                fmt_num(f, c, args[0].sort() == Sort::Real)?;
                write!(f, " {})", args[0])
            }
            Term::App(Op::FloorDiv(c), args) => write!(f, "(div {} {})", args[0], c.numer()),
            Term::App(op, args) => {
                write!(f, "({}", op.symbol())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

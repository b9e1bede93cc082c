//! Terms, formulas, evaluation and normal forms.

pub mod eval;
pub mod linear;
pub mod normal;
pub mod spec;
pub mod subst;
pub mod term;

pub use eval::{eval, eval_bool, eval_with, EvalError, Interp};
pub use linear::{linearize, LinAtom, LinExpr, LinLit, Rel};
pub use spec::{Separable, Shape, Specification, SynthFun};
pub use term::{Name, Op, Sort, SortError, Term, Valuation, Value, Var};

//! Scalar expressions over the jet coordinates `(t, x, v)`: parsing,
//! evaluation, exact differentiation and conservative simplification.

mod ast;
mod diff;
mod eval;
mod parse;
mod simplify;

pub use ast::{BinaryOp, Constant, Expr, Node, UnaryOp, VarKind, VarMask, VariableId, MAX_DIM};
pub use diff::{differentiate, Differentiator};
pub use eval::{evaluate, Bindings, EvalError, Tape};
pub use parse::{parse, ParseError};
pub use simplify::{simplify, substitute, Substitution};

/// Variable shorthands with zero-based indices.
pub fn t(alpha: usize) -> Expr {
    Expr::var(VariableId::t(alpha))
}

pub fn x(i: usize) -> Expr {
    Expr::var(VariableId::x(i))
}

pub fn v(i: usize, alpha: usize) -> Expr {
    Expr::var(VariableId::v(i, alpha))
}

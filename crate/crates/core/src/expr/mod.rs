//! Exact multivariate rational expressions, the expression parser, and a
//! double-precision evaluator for expressions with transcendental functions.

mod compiled;
mod gcd;
mod numeric;
mod parse;
mod poly;
mod rational;
mod var;

pub use compiled::CompiledRational;
pub use gcd::gcd;
pub use numeric::{Func, Node, NumericExpr};
pub use parse::{parse_expression, parse_node, parse_numeric, parse_rational, ParseMode, Parsed};
pub use poly::{Monomial, Poly};
pub use rational::RationalExpr;
pub use var::{vars, Var};

pub(crate) use poly::{fmt_rational, q, rational_to_f64};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("transcendental function not allowed in an exact expression")]
    TranscendentalInExactMode,
    #[error("denominator vanishes at the evaluation point")]
    PoleAtPoint,
    #[error("value outside the domain of a numeric function")]
    DomainError,
    #[error("division by the zero expression")]
    DivisionByZero,
}

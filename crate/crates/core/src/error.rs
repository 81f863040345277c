use thiserror::Error;

use crate::mls_solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid feature model: {0}")]
    InvalidModel(String),

    #[error("point outside domain: coordinate {axis} = {value} not in [{lower}, {upper}]")]
    PointOutsideDomain {
        axis: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("point {0:?} is not one of the tabulated points of the custom feature table")]
    PointNotTabulated(Vec<f64>),

    #[error("multi-kernel order {0} is unsupported: order must be an even integer >= 2")]
    OddOrderUnsupported(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dense tensor with {entries} entries exceeds the budget of {budget}")]
    BudgetExceeded { entries: u128, budget: u128 },

    #[error("solver did not converge: residual {:e} after {} iterations", .0.residual_norm, .0.iterations)]
    NotConverged(Box<SolveReport>),

    #[error(
        "feature Gram lacks full row rank; the multi-linear system may be inconsistent (residual {:e})",
        .0.residual_norm
    )]
    SingularDesign(Box<SolveReport>),

    #[error("Gram matrix is singular or numerically indefinite")]
    SingularGram,

    #[error("exponent p = {0} must lie in the open interval (1, inf)")]
    InvalidExponent(f64),

    #[error("the Gateaux derivative of the norm is undefined at the zero function")]
    ZeroFunction,

    #[error("nodes {first} and {second} coincide (distance {distance:e})")]
    DuplicateNodes {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

use crate::expr::ExprError;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline parameters: {0}")]
    InvalidSpline(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("weight function is not differentiable at ({x}, {y})")]
    NonDifferentiableWeight { x: f64, y: f64 },

    #[error("no interior cell: the domain is too small for grid width h = {h}")]
    NoInteriorCell { h: f64 },

    #[error(
        "domain under-resolved near outer index {index:?}: no fully inner \
         {n}^m index array found within the search window"
    )]
    UnderResolved { index: Vec<i64>, n: u32 },

    #[error("unknown basis index {0:?}")]
    UnknownIndex(Vec<i64>),

    #[error("problem is not elliptic on samples: smallest diffusion eigenvalue {0:.6e}")]
    NotElliptic(f64),

    #[error("well-posedness gate failed: {0}")]
    GateFailed(String),

    #[error("manufactured right-hand side requires an exact solution in the problem")]
    MissingExactSolution,

    #[error(
        "the strong-form residual needs cell-wise second derivatives, which requires \
         spline order n >= 3; got n = {0}. Increase grid.n or skip the residual metric."
    )]
    ResidualOrderTooLow(u32),

    #[error(
        "solver did not converge within {iterations} iterations \
         (best relative residual {best_residual:.3e})"
    )]
    SolverDidNotConverge { iterations: usize, best_residual: f64 },

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("config error: {0}")]
    Config(String),

    #[error("config not found: {0}")]
    ConfigNotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

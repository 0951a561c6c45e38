//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("mesh topology error: {0}")]
    MeshTopology(String),

    #[error("mesh validation failed:\n{0}")]
    MeshInvalid(String),

    #[error("degenerate element {elem}: area = {area:e}")]
    DegenerateElement { elem: usize, area: f64 },

    #[error("deformation produced {count} inverted element(s), first: {first}")]
    DeformedMeshInvalid { count: usize, first: usize },

    #[error("parameterization error: {0}")]
    Param(String),

    #[error("point ({x}, {y}) lies outside the FFD box")]
    PointOutsideBox { x: f64, y: f64 },

    #[error("FFD embedding did not converge for point ({x}, {y}): residual {residual:e}")]
    EmbedNonConvergence { x: f64, y: f64, residual: f64 },

    #[error("RBF system solve failed: {0}")]
    RbfSolve(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-positive density {rho:e} at element {elem}")]
    NegativeDensity { elem: usize, rho: f64 },

    #[error("non-positive pressure {p:e} at element {elem}")]
    NegativePressure { elem: usize, p: f64 },

    #[error("positivity limiter failed at element {elem}: non-positive cell average")]
    LimiterFailure { elem: usize },

    #[error("linear solver did not converge: residual {residual:e} after {iters} iterations")]
    LinearSolve { residual: f64, iters: usize },

    #[error("preconditioner breakdown at block {block}")]
    PrecondBreakdown { block: usize },

    #[error("steady solve diverged at step {step}: residual {residual:e}")]
    SolverDivergence { step: usize, residual: f64 },

    #[error("adjoint error: {0}")]
    Adjoint(String),

    #[error("perturbation step for design variable {var} failed after {halvings} halvings")]
    PerturbationFailure { var: usize, halvings: usize },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("QP subproblem error: {0}")]
    Qp(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("gradient check failed: {failed} of {total} components above tolerance {tol:e}")]
    GradCheckFailure { failed: usize, total: usize, tol: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    /// Process exit code for the CLI, per the documented contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MeshParse { .. } | Error::MeshTopology(_) => 2,
            Error::MeshInvalid(_) => 2,
            Error::SolverDivergence { .. } | Error::LimiterFailure { .. } => 3,
            Error::GradCheckFailure { .. } => 4,
            Error::Optimizer(_) => 5,
            _ => 1,
        }
    }
}

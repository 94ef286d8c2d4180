//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel not elliptic: {0}")]
    NotElliptic(String),

    #[error("singular point: kernel evaluated at z = 0")]
    SingularPoint,

    #[error("invalid kernel table: {0}")]
    BadKernelTable(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("quadrature did not converge: residual {residual:.3e} exceeds {tol:.3e}")]
    QuadratureNonConvergence { residual: f64, tol: f64 },

    #[error("relaxation did not converge within {iterations} iterations (last contraction {last_change:.3e})")]
    RelaxationNonConvergence { iterations: usize, last_change: f64 },

    #[error("missing line-tension table rows: {0}")]
    MissingTableRows(String),

    #[error("empty atom set: {0}")]
    EmptyAtomSet(String),

    #[error("linear program infeasible: {0}")]
    LpInfeasible(String),

    #[error("internal linear-program failure: {0}")]
    LpInternal(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("sample point ({x:.6}, {y:.6}) not covered by any cell")]
    UncoveredPoint { x: f64, y: f64 },

    #[error("unresolved mollifier: scale {scale:.3e} below grid spacing {spacing:.3e}")]
    UnresolvedMollifier { scale: f64, spacing: f64 },

    #[error("unresolved band: 2^-k = {band:.3e} below grid spacing {spacing:.3e}")]
    UnresolvedBand { band: f64, spacing: f64 },

    #[error("shifted evaluation point ({x:.6}, {y:.6}) leaves the field's coverage")]
    ShiftOutOfCoverage { x: f64, y: f64 },

    #[error("margin violation: {0}")]
    MarginViolation(String),

    #[error("convolution energy path requires a torus domain")]
    ConvolutionNeedsTorus,

    #[error("line search failed after {halvings} halvings at iteration {iteration}")]
    LineSearchFailure { halvings: usize, iteration: usize },

    #[error("invalid field file: {0}")]
    BadFieldFile(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

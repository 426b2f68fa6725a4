use thiserror::Error;

/// Errors shared across the solver and diagnostics modules.
#[derive(Error, Debug)]
pub enum NsfError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field/grid mismatch: {0}")]
    FieldMismatch(String),

    #[error("non-finite value in field `{field}` at node {node}")]
    NonFinite { field: String, node: usize },

    #[error("nonpositive value in field `{field}` at node {node}: {value}")]
    NonPositive {
        field: String,
        node: usize,
        value: f64,
    },

    #[error("missing boundary closure on face {0}")]
    MissingClosure(String),

    #[error("elliptic solver did not converge after {iters} iterations; last relative residuals: {tail:?}")]
    NoConvergence { iters: usize, tail: Vec<f64> },

    #[error("pure-Neumann problem is incompatible: |integral(rhs) + surface(flux)| = {imbalance:.3e} exceeds {tol:.1e}")]
    NeumannIncompatible { imbalance: f64, tol: f64 },

    #[error("CFL violation: dt*|u|/h = {ratio:.3} exceeds {limit}")]
    CflViolation { ratio: f64, limit: f64 },

    #[error("characteristic path left the domain by more than one cell at t = {t}")]
    PathLeftDomain { t: f64 },

    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<NsfError>,
    },

    #[error("configuration rejected:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    ConfigRejected(Vec<String>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("manufactured solution incompatible with boundary data: {0}")]
    MmsIncompatible(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NsfError>;

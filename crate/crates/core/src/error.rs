use alloc::string::String;

/// Errors raised by the numerical kernels and state constructors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("argument {0} outside the domain of {1}")]
    Domain(f64, &'static str),

    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),

    #[error("operation requires a finite chain")]
    UnsupportedTopology,

    #[error("bound-chain Bessel forms need gamma < 0.1 (got {0})")]
    WeakCouplingViolated(f64),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("site {site} violates the uncertainty bound (det = {det:e}, need >= {bound:e})")]
    Uncertainty { site: usize, det: f64, bound: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no equilibrium limit for an unbound chain (K = 0)")]
    NoEquilibrium,

    #[error("unsupported state representation for {0}")]
    UnsupportedRepresentation(&'static str),

    #[error("CFL condition violated: courant number {courant} > {limit}")]
    Cfl { courant: f64, limit: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("solver halted at t = {t}: {reason}")]
    SolverHalt { t: f64, reason: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

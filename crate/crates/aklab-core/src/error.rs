use thiserror::Error;

/// Errors raised by grid calculus, structure construction and time stepping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids (m={lhs_m}, n={lhs_n}) vs (m={rhs_m}, n={rhs_n})")]
    GridMismatch {
        lhs_m: usize,
        lhs_n: usize,
        rhs_m: usize,
        rhs_n: usize,
    },

    #[error("rank mismatch: expected ({want_p},{want_q}), got ({got_p},{got_q})")]
    RankMismatch {
        want_p: usize,
        want_q: usize,
        got_p: usize,
        got_q: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("band limit {cutoff} exceeds n/3 = {max} (aliasing headroom)")]
    BandLimit { cutoff: usize, max: usize },

    #[error("matrix norm {norm:.3e} above overflow guard {guard:.3e} for exp")]
    ExpOverflow { norm: f64, guard: f64 },

    #[error("{what} invariant violated: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    InvariantViolation {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("time step unstable at t={t:.6e}: {reason}")]
    StepUnstable { t: f64, reason: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

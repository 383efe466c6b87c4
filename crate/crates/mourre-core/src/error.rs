use alloc::string::String;
use alloc::vec::Vec;

/// Failures raised by the numerical layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("points per axis must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operators live on different grids")]
    GridMismatch,
    #[error("power iteration did not converge after {iters} iterations (last estimate {estimate})")]
    NoConvergence { iters: usize, estimate: f64 },
    #[error("linear solve stalled at relative residual {residual:e} after {iters} iterations")]
    SolveFailed { iters: usize, residual: f64 },
    #[error("potential is singular at node {index} (x = {position})")]
    SingularNode { index: usize, position: f64 },
    #[error("dense size {size} exceeds cap {cap}; use a smaller grid or the matrix-free path")]
    SizeCap { size: usize, cap: usize },
    #[error("flow step underflow at tau = {tau} (state {state:?})")]
    StepUnderflow { tau: f64, state: Vec<f64> },
    #[error("flow leaves the momentum window at node {index} (k = {momentum})")]
    FlowEscapes { index: usize, momentum: f64 },
    #[error("empty momentum shell for interval [{lo}, {hi}]")]
    EmptyShell { lo: f64, hi: f64 },
    #[error("operator is not Hermitian (drift {0:e})")]
    NotHermitian(f64),
    #[error("energy {lambda} lies within {window} of eigenvalues {eigenvalues:?}")]
    NearEigenvalue { lambda: f64, window: f64, eigenvalues: Vec<f64> },
    #[error("imaginary shift {0:e} is below the admissible floor")]
    ShiftTooSmall(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

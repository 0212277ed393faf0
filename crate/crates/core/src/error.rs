use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid correlation model: {0}")]
    InvalidModel(String),

    /// Derivative constants do not describe a twice mean-square
    /// differentiable field (`rho2_0 >= 0` or `rho4_0 <= 0`).
    #[error("degenerate correlation model: rho2_0 = {rho2_0}, rho4_0 = {rho4_0}")]
    DegenerateModel { rho2_0: f64, rho4_0: f64 },

    #[error("negative argument {name} = {value}")]
    NegativeArgument { name: &'static str, value: f64 },

    #[error("unsupported derivative order {0}")]
    UnsupportedOrder(usize),

    #[error("finite-difference step underflow at u = {u} (h = {h})")]
    StepUnderflow { u: f64, h: f64 },

    #[error("matrix is not orthogonal (max |R^T R - I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The level set is undefined where the gradient vanishes.
    #[error("degenerate gradient: |g| = {norm:e} <= {threshold:e}")]
    DegenerateGradient { norm: f64, threshold: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error:e}")]
    QuadratureNonConvergence { estimate: f64, error: f64 },

    #[error("samples are not sorted ascending")]
    Unsorted,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("domain too small: axis {axis} spans {extent}, need at least {needed}")]
    DomainTooSmall { axis: usize, extent: f64, needed: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

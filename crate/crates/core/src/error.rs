use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is numerically singular (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },

    #[error("grid is not symmetric about x = 0 (n = {n})")]
    GridNotSymmetric { n: usize },

    #[error("grid size must be an even power of two, got {n}")]
    BadGridSize { n: usize },

    #[error("field does not decay at the grid boundary: |{name}| = {value:.3e} exceeds {limit:.3e}")]
    InsufficientDecay { name: &'static str, value: f64, limit: f64 },

    #[error("boundary data violates the mirror symmetry: residual {residual:.3e} exceeds {limit:.3e}")]
    BoundarySymmetry { residual: f64, limit: f64 },

    #[error("discrete spectrum suspected: min |{name}| = {value:.3e} below {limit:.3e}")]
    DiscreteSpectrumSuspected { name: &'static str, value: f64, limit: f64 },

    #[error("time evolution became unstable at t = {t:.4}: {reason}")]
    EvolutionUnstable { t: f64, reason: String },

    #[error("ODE integration produced a non-finite value at {place}")]
    NonFinite { place: &'static str },

    #[error("spectral point {k} lies outside the stable domain for {what}")]
    OutsideDomain { k: num_complex::Complex64, what: &'static str },

    #[error("Riemann-Hilbert solve did not converge: {detail}")]
    RhNonConvergence { detail: String },

    #[error("deformed solution mismatches across the imaginary axis: residual {residual:.3e} exceeds {limit:.3e}")]
    DeformationMismatch { residual: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {what} has {got} samples, expected {expected}")]
    LengthMismatch { what: &'static str, got: usize, expected: usize },
}

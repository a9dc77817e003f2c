use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error(
        "matrix is singular or not positive definite (eigenvalues in [{min:.3e}, {max:.3e}]); \
         apply diagonal loading or regularize"
    )]
    Singular { min: f64, max: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("direction out of range: {0}")]
    DirectionOutOfRange(String),

    #[error(
        "target steering vectors are nearly collinear (condition number {condition:.3e}); \
         closest pair: {first} and {second}"
    )]
    RankDeficient {
        condition: f64,
        first: String,
        second: String,
    },

    #[error("too many linear constraints: {constraints} for {elements} elements")]
    TooManyConstraints { constraints: usize, elements: usize },

    #[error("ADMM diverged at iteration {iteration}; recent residuals (primal, dual): {trace}")]
    Diverged { iteration: usize, trace: String },
}

//! Robust adaptive beamforming with per-angle inequality constraints and a
//! penalized interference level, solved by a closed-form ADMM.

pub mod array;
pub mod baselines;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod validate;

pub use error::{Error, Result};

//! The joint `(w, y)` block
//!
//! ```text
//! min_{w, y}  wᴴAw + Re{bᴴw} + αy² + βy   s.t.  ‖w‖ ≤ y
//! ```
//!
//! for positive definite `A = U·diag(λ)·Uᴴ`. In the eigenbasis (`b̄ = Uᴴb`)
//! the solution is zero when `β ≥ ‖b‖`, interior (`w = −A⁻¹b/2`,
//! `y = −β/2α`) when `‖A⁻¹b‖ ≤ −β/α`, and otherwise lies on the cone with `y`
//! the unique root of
//!
//! ```text
//! Σᵢ |b̄ᵢ|² / ((2λᵢ + 2α)y + β)² = 1
//! ```
//!
//! and `w̄ᵢ = −b̄ᵢy / ((2λᵢ + 2α)y + β)`.

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{CVector, Eigen};

pub const DEFAULT_BISECTION_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 300;

/// Which branch produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeCase {
    Origin,
    Interior,
    Boundary,
}

/// Solves the block with `b` given in the original coordinates.
pub fn solve_wy(eig: &Eigen, b: &CVector, alpha: f64, beta: f64, tol: f64) -> Result<(CVector, f64)> {
    eig.require_positive_definite()?;
    let b_bar = eig.to_eigenbasis(b);
    let (w_bar, y, _) = solve_wy_eigenbasis(eig.values.as_slice(), &b_bar, alpha, beta, tol);
    Ok((&eig.vectors * w_bar, y))
}

/// Solves the block entirely in the eigenbasis of `A`. `values` must be
/// positive; the returned `w̄` satisfies `w = U·w̄`.
pub fn solve_wy_eigenbasis(
    values: &[f64],
    b_bar: &CVector,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> (CVector, f64, ConeCase) {
    let b_norm = b_bar.norm();
    if beta >= b_norm {
        return (CVector::zeros(b_bar.len()), 0.0, ConeCase::Origin);
    }
    let free_norm = b_bar
        .iter()
        .zip(values)
        .map(|(b, l)| b.norm_sqr() / (l * l))
        .sum::<f64>()
        .sqrt();
    if free_norm <= -beta / alpha {
        let w = CVector::from_iterator(
            b_bar.len(),
            b_bar.iter().zip(values).map(|(b, l)| b * (-0.5 / l)),
        );
        return (w, -beta / (2.0 * alpha), ConeCase::Interior);
    }

    let excess = |y: f64| -> f64 {
        b_bar
            .iter()
            .zip(values)
            .map(|(b, l)| {
                let den = (2.0 * l + 2.0 * alpha) * y + beta;
                b.norm_sqr() / (den * den)
            })
            .sum::<f64>()
            - 1.0
    };
    let mut lo = (-beta / (2.0 * alpha)).max(0.0);
    let mut hi = free_norm / 2.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    let w = CVector::from_iterator(
        b_bar.len(),
        b_bar.iter().zip(values).map(|(b, l)| {
            let den = (2.0 * l + 2.0 * alpha) * y + beta;
            b * Complex64::from(-y / den)
        }),
    );
    (w, y, ConeCase::Boundary)
}

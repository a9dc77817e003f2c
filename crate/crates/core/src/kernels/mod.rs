//! Closed-form subproblem solvers used by each ADMM sweep.

mod breakpoints;
mod prox;
mod wy;

pub use breakpoints::{build_breakpoints, solve_t, BreakpointTable, LevelTerm, Piece};
pub use prox::{prox_socp, ProxProblem};
pub use wy::{solve_wy, solve_wy_eigenbasis, ConeCase, DEFAULT_BISECTION_TOL};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Prox for a target consensus pair: center 1, radius `c_θ`, with
/// `a = α = ρ/2`, `b = −λ − ρ·wᴴa_θ` and `β = −η − ρy`.
pub fn target_prox(
    response: Complex64,
    multiplier: Complex64,
    y_multiplier: f64,
    y: f64,
    rho: f64,
    delta: f64,
    bound: f64,
) -> ProxProblem {
    ProxProblem {
        x_quadratic: rho / 2.0,
        x_linear: -multiplier - response * rho,
        y_quadratic: rho / 2.0,
        y_linear: -y_multiplier - rho * y,
        center: Complex64::new(1.0, 0.0),
        radius: bound,
        slope: delta,
    }
}

/// Updates one target pair, returning `(y_θ, z_θ)`.
pub fn update_theta(
    response: Complex64,
    multiplier: Complex64,
    y_multiplier: f64,
    y: f64,
    rho: f64,
    delta: f64,
    bound: f64,
) -> (f64, Complex64) {
    let (z, y_theta) = prox_socp(&target_prox(response, multiplier, y_multiplier, y, rho, delta, bound));
    (y_theta, z)
}

/// Updates one interference pair at level `t̄`, returning `(y_φ, z_φ)`.
///
/// `x_linear` and `y_linear` are `b_φ = −λ_φ − ρ·wᴴa_φ` and
/// `β_φ = −η_φ − ρy`. A negative level is admissible when `δ > 0` (the cone
/// then forces `y_φ < 0`), which happens in early iterations.
pub fn update_phi(
    level: f64,
    x_linear: Complex64,
    y_linear: f64,
    rho: f64,
    delta: f64,
    bound: f64,
    weight: f64,
) -> Result<(f64, Complex64)> {
    if delta == 0.0 && level < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative interference level {level} with zero slope"
        )));
    }
    let p = ProxProblem {
        x_quadratic: rho / 2.0,
        x_linear,
        y_quadratic: rho / 2.0,
        y_linear,
        center: Complex64::new(0.0, 0.0),
        radius: level * bound / weight,
        slope: delta,
    };
    let (z, y) = prox_socp(&p);
    Ok((y, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn consensus_fixed_point() {
        let (y, z) = update_theta(c(1.0), c(0.0), 0.0, 0.0, 1.0, 0.0, 0.3);
        assert_eq!(y, 0.0);
        assert!((z - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn target_projection() {
        let (y, z) = update_theta(c(2.0), c(0.0), 0.0, 0.0, 1.0, 0.0, 0.5);
        assert!((z - c(1.5)).norm() < 1e-15);
        assert_eq!(y, 0.0);
    }

    #[test]
    fn interference_zero_input() {
        let (y, z) = update_phi(1.0, c(0.0), 0.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(y, 0.0);
        assert_eq!(z, c(0.0));
    }

    #[test]
    fn interference_at_solved_level() {
        let b = Complex64::from_polar(1.0, 0.7);
        let (y, z) = update_phi(1.8, b, -1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((y - 0.9).abs() < 1e-14);
        assert!((z + Complex64::from_polar(0.9, 0.7)).norm() < 1e-14);
        assert!((z.norm() + y - 1.8).abs() < 1e-14);
    }

    #[test]
    fn negative_level() {
        assert!(update_phi(-0.1, c(1.0), 0.0, 1.0, 0.0, 1.0, 1.0).is_err());
        let (y, z) = update_phi(-0.1, c(1.0), 0.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        assert!(z.norm() + 0.2 * y <= -0.1 + 1e-14);
    }

    #[test]
    fn updates_are_prox_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut cplx = || Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let (u, lambda, b) = (cplx(), cplx(), cplx());
            let eta = rng.random_range(-3.0..3.0);
            let y = rng.random_range(-1.0..2.0);
            let rho = rng.random_range(0.1..10.0);
            let delta = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) };
            let bound = rng.random_range(0.0..1.0);
            let level = rng.random_range(0.0..2.0);
            let weight = rng.random_range(0.1..1.0);

            let (yt, zt) = update_theta(u, lambda, eta, y, rho, delta, bound);
            let (x, yy) = prox_socp(&ProxProblem {
                x_quadratic: rho / 2.0,
                x_linear: -lambda - u * rho,
                y_quadratic: rho / 2.0,
                y_linear: -eta - rho * y,
                center: c(1.0),
                radius: bound,
                slope: delta,
            });
            assert!((zt - x).norm() <= 1e-12 && (yt - yy).abs() <= 1e-12);
            assert!((zt - c(1.0)).norm() + delta * yt <= bound + 1e-12);

            let beta = -eta - rho * y;
            let (yp, zp) = update_phi(level, b, beta, rho, delta, bound, weight).unwrap();
            let (x, yy) = prox_socp(&ProxProblem {
                x_quadratic: rho / 2.0,
                x_linear: b,
                y_quadratic: rho / 2.0,
                y_linear: beta,
                center: c(0.0),
                radius: level * bound / weight,
                slope: delta,
            });
            assert!((zp - x).norm() <= 1e-12 && (yp - yy).abs() <= 1e-12);
            assert!(zp.norm() + delta * yp <= level * bound / weight + 1e-12);
        }
    }
}

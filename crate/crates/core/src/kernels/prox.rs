//! Closed-form minimizer of the scalar complex second-order cone program
//!
//! ```text
//! min_{x ∈ ℂ, y ∈ ℝ}  a|x|² + Re{b̄x} + αy² + βy   s.t.  |x − d| + δy ≤ c
//! ```
//!
//! With `r = |2ad + b| / 2a` and `ψ = ∠(2ad + b)` the solution is
//!
//! ```text
//! y* = min{ −β/2α, (2aδ(c − r) − β)/(2aδ² + 2α), c/δ }
//! x* = d − e^{jψ}·min{ r, c − δy* }
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxProblem {
    /// Coefficient of `|x|²` (`a`), strictly positive.
    pub x_quadratic: f64,
    /// Linear term `b` on `x`, entering as `Re{b̄x}`.
    pub x_linear: Complex64,
    /// Coefficient of `y²` (`α`), strictly positive.
    pub y_quadratic: f64,
    /// Linear coefficient on `y` (`β`).
    pub y_linear: f64,
    /// Cone center `d`.
    pub center: Complex64,
    /// Cone radius `c`. May be negative only when `slope > 0`.
    pub radius: f64,
    /// Cone slope `δ ≥ 0`.
    pub slope: f64,
}

impl ProxProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_quadratic > 0.0 && self.y_quadratic > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic coefficients must be positive, got {} and {}",
                self.x_quadratic, self.y_quadratic
            )));
        }
        if !(self.slope >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative cone slope {}", self.slope)));
        }
        if self.slope == 0.0 && !(self.radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cone radius {} is infeasible without a slope",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn objective(&self, x: Complex64, y: f64) -> f64 {
        self.x_quadratic * x.norm_sqr()
            + (self.x_linear.conj() * x).re
            + self.y_quadratic * y * y
            + self.y_linear * y
    }

    /// Signed excess `|x − d| + δy − c`.
    pub fn violation(&self, x: Complex64, y: f64) -> f64 {
        (x - self.center).norm() + self.slope * y - self.radius
    }

    /// Minimizer of the problem, `(x*, y*)`.
    pub fn solve(&self) -> (Complex64, f64) {
        prox_socp(self)
    }
}

/// Minimizes the scalar cone program; see [`ProxProblem`].
///
/// Inputs are not validated here since this runs once per constraint per
/// iteration; call [`ProxProblem::validate`] on untrusted data.
pub fn prox_socp(p: &ProxProblem) -> (Complex64, f64) {
    let a = p.x_quadratic;
    let alpha = p.y_quadratic;
    let shifted = p.center * (2.0 * a) + p.x_linear;
    let r = shifted.norm() / (2.0 * a);
    let direction = if r > 0.0 {
        shifted / shifted.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };

    let mut y = -p.y_linear / (2.0 * alpha);
    if p.slope > 0.0 {
        let delta = p.slope;
        let boundary =
            (2.0 * a * delta * (p.radius - r) - p.y_linear) / (2.0 * a * delta * delta + 2.0 * alpha);
        y = y.min(boundary).min(p.radius / delta);
    }
    let step = r.min(p.radius - p.slope * y).max(0.0);
    (p.center - direction * step, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn problem(a: f64, b: Complex64, d: Complex64, c: f64, delta: f64, alpha: f64, beta: f64) -> ProxProblem {
        ProxProblem {
            x_quadratic: a,
            x_linear: b,
            y_quadratic: alpha,
            y_linear: beta,
            center: d,
            radius: c,
            slope: delta,
        }
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Brute force: for each `y` on a grid, a polar grid over the disk
    /// `|x − d| ≤ c − δy`; then two local refinements around the incumbent.
    fn grid_minimum(p: &ProxProblem) -> (Complex64, f64, f64) {
        let y_free = -p.y_linear / (2.0 * p.y_quadratic);
        let (mut y_lo, mut y_hi) = if p.slope > 0.0 {
            let top = p.radius / p.slope;
            (top.min(y_free) - 20.0, top)
        } else {
            (y_free, y_free)
        };
        let mut best = (p.center, 0.0, f64::INFINITY);
        let mut local: Option<(Complex64, f64)> = None;
        for _ in 0..3 {
            let ny = if y_hi > y_lo { 80 } else { 0 };
            for iy in 0..=ny {
                let y = if ny == 0 { y_lo } else { y_lo + (y_hi - y_lo) * iy as f64 / ny as f64 };
                let room = p.radius - p.slope * y;
                if room < 0.0 {
                    continue;
                }
                let (center, span) = local.unwrap_or((p.center, room));
                for ir in 0..=60 {
                    for ia in 0..120 {
                        let x = center
                            + Complex64::from_polar(
                                span * ir as f64 / 60.0,
                                ia as f64 * std::f64::consts::TAU / 120.0,
                            );
                        if (x - p.center).norm() > room {
                            continue;
                        }
                        let f = p.objective(x, y);
                        if f < best.2 {
                            best = (x, y, f);
                        }
                    }
                }
            }
            let span = local.map_or(p.radius.max(0.0) + p.slope * (y_hi - y_lo), |l| l.1) / 10.0;
            local = Some((best.0, span));
            let width = (y_hi - y_lo) / 10.0;
            y_lo = (best.1 - width).max(y_lo);
            y_hi = (best.1 + width).min(y_hi);
        }
        best
    }

    #[test]
    fn interior_optimum() {
        let (x, y) = prox_socp(&problem(1.0, c(0.0), c(0.0), 1.0, 0.0, 1.0, 0.0));
        assert_eq!((x, y), (c(0.0), 0.0));
    }

    #[test]
    fn disk_projection() {
        let p = problem(1.0, c(-2.0), c(0.0), 0.5, 0.0, 1.0, 0.0);
        let (x, y) = prox_socp(&p);
        assert!((x - c(0.5)).norm() < 1e-15 && y == 0.0);
        let (gx, gy, gf) = grid_minimum(&p);
        assert!((gx - x).norm() < 1e-2 && gy == 0.0);
        assert!(p.objective(x, y) <= gf + 1e-12);
    }

    #[test]
    fn tight_cone_with_slope() {
        let p = problem(1.0, c(0.0), c(2.0), 1.0, 0.5, 1.0, -2.0);
        let (x, y) = prox_socp(&p);
        assert!((x - c(1.2)).norm() < 1e-14);
        assert!((y - 0.4).abs() < 1e-14);
        assert!(p.violation(x, y).abs() < 1e-14);
        let (gx, gy, gf) = grid_minimum(&p);
        assert!((gx - x).norm() < 1e-2 && (gy - y).abs() < 1e-2);
        assert!(p.objective(x, y) <= gf + 1e-12);
    }

    #[test]
    fn degenerate_direction() {
        // 2ad + b = 0: the unconstrained optimum sits on the center
        let p = problem(1.0, c(-4.0), c(2.0), 0.5, 0.0, 1.0, 0.0);
        let (x, _) = prox_socp(&p);
        assert_eq!(x, c(2.0));
    }

    #[test]
    fn negative_radius_with_slope() {
        let p = problem(0.5, Complex64::new(0.3, -0.2), c(0.0), -0.4, 0.2, 0.5, 0.1);
        let (x, y) = prox_socp(&p);
        assert!(p.violation(x, y) < 1e-12);
        assert!(y <= -2.0);
        let (_, _, gf) = grid_minimum(&p);
        assert!(p.objective(x, y) <= gf + 1e-9);
    }

    #[test]
    fn validation() {
        assert!(problem(0.0, c(0.0), c(0.0), 1.0, 0.0, 1.0, 0.0).validate().is_err());
        assert!(problem(1.0, c(0.0), c(0.0), -1.0, 0.0, 1.0, 0.0).validate().is_err());
        assert!(problem(1.0, c(0.0), c(0.0), -1.0, 0.1, 1.0, 0.0).validate().is_ok());
    }

    fn arb_problem() -> impl Strategy<Value = ProxProblem> {
        (
            0.1..5.0f64,
            (-5.0..5.0f64, -5.0..5.0f64),
            (-3.0..3.0f64, -3.0..3.0f64),
            0.0..3.0f64,
            prop_oneof![Just(0.0), 0.0..2.0f64],
            0.1..5.0f64,
            -5.0..5.0f64,
        )
            .prop_map(|(a, b, d, c, delta, alpha, beta)| {
                problem(a, Complex64::new(b.0, b.1), Complex64::new(d.0, d.1), c, delta, alpha, beta)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn never_leaves_cone(p in arb_problem()) {
            let (x, y) = prox_socp(&p);
            prop_assert!(p.violation(x, y) <= 1e-12 * (1.0 + p.radius.abs()));
            // the center with y = 0 is always feasible
            prop_assert!(p.objective(x, y) <= p.objective(p.center, 0.0) + 1e-12);
        }

        #[test]
        fn beats_grid(p in arb_problem()) {
            let (x, y) = prox_socp(&p);
            let (_, _, gf) = grid_minimum(&p);
            prop_assert!(p.objective(x, y) <= gf + 1e-8, "{} vs {}", p.objective(x, y), gf);
        }
    }
}

//! The scalar level update
//!
//! ```text
//! min_t  μt + Σ_φ f_φ(t)
//! ```
//!
//! where `f_φ(t)` is the optimal value of the interference prox at radius
//! `t·c_φ/γ_φ`. For `δ > 0` each `f_φ` is convex, C¹ and piecewise quadratic:
//!
//! ```text
//! f_φ(t) = a₁t² + b₁t             t ≤ t̄₁
//!          a₂t² + b₂t + c₂        t̄₁ ≤ t ≤ t̄₂
//!          c₃                     t ≥ t̄₂
//! ```
//!
//! For `δ = 0` the first piece disappears and `t` is restricted to `t ≥ 0`.
//! The minimizer is found by sorting the breakpoints and sweeping the
//! piecewise-linear derivative once.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Data of one interference angle for the level update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelTerm {
    /// `|b_φ|`.
    pub linear_norm: f64,
    /// `β_φ`.
    pub y_linear: f64,
    /// `a_φ`.
    pub x_quadratic: f64,
    /// `α_φ`.
    pub y_quadratic: f64,
    /// `c_φ`.
    pub bound: f64,
    /// `γₖ` of the owning group.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    /// Coefficients of the first piece (zero when `δ = 0`).
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub c3: f64,
    /// End of the first piece (`−∞` when `δ = 0`).
    pub first_break: f64,
    /// Start of the constant piece.
    pub second_break: f64,
}

impl Piece {
    /// Evaluates `f_φ(t)`; for `δ = 0` the caller must keep `t ≥ 0`.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.first_break {
            self.a1 * t * t + self.b1 * t
        } else if t <= self.second_break {
            self.a2 * t * t + self.b2 * t + self.c2
        } else {
            self.c3
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.first_break {
            2.0 * self.a1 * t + self.b1
        } else if t <= self.second_break {
            2.0 * self.a2 * t + self.b2
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointTable {
    pieces: Vec<Piece>,
    /// Whether `t` is restricted to be non-negative (the `δ = 0` case).
    floor_at_zero: bool,
    /// Merged breakpoints, ascending: `(t, angle, is_first)`.
    events: Vec<(f64, usize, bool)>,
}

/// Builds the piecewise description of every `f_φ` for slope `δ`.
pub fn build_breakpoints(terms: &[LevelTerm], slope: f64) -> Result<BreakpointTable> {
    if terms.is_empty() {
        return Err(Error::Empty("breakpoint table"));
    }
    if !(slope >= 0.0 && slope.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid slope {slope}")));
    }
    let mut pieces = Vec::with_capacity(terms.len());
    for term in terms {
        if !(term.bound > 0.0 && term.weight > 0.0 && term.x_quadratic > 0.0 && term.y_quadratic > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid level term {term:?}")));
        }
        pieces.push(if slope > 0.0 {
            sloped_piece(term, slope)
        } else {
            flat_piece(term)
        });
    }
    let floor_at_zero = slope == 0.0;
    let mut events = Vec::with_capacity(2 * pieces.len());
    for (i, p) in pieces.iter().enumerate() {
        if !floor_at_zero {
            events.push((p.first_break, i, true));
        }
        events.push((p.second_break, i, false));
    }
    // first breaks sort ahead of second breaks at equal t so an angle never
    // leaves the table before entering its middle piece
    events.sort_by(|x, y| {
        x.0.total_cmp(&y.0).then(match (x.2, y.2) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => Ordering::Equal,
        })
    });
    Ok(BreakpointTable {
        pieces,
        floor_at_zero,
        events,
    })
}

fn sloped_piece(term: &LevelTerm, delta: f64) -> Piece {
    let LevelTerm {
        linear_norm: b,
        y_linear: beta,
        x_quadratic: a,
        y_quadratic: alpha,
        bound: c,
        weight: gamma,
    } = *term;
    let mix = alpha + a * delta * delta;
    Piece {
        a1: alpha * c * c / (gamma * gamma * delta * delta),
        b1: beta * c / (gamma * delta),
        a2: alpha * a * c * c / (gamma * gamma * mix),
        b2: (delta * a * c * beta - alpha * c * b) / (gamma * mix),
        c2: -(delta * b + beta).powi(2) / (4.0 * mix),
        c3: -b * b / (4.0 * a) - beta * beta / (4.0 * alpha),
        first_break: -gamma * (b * delta * delta + beta * delta) / (2.0 * alpha * c),
        second_break: -gamma * (beta * delta - b * alpha / a) / (2.0 * alpha * c),
    }
}

fn flat_piece(term: &LevelTerm) -> Piece {
    let LevelTerm {
        linear_norm: b,
        y_linear: beta,
        x_quadratic: a,
        y_quadratic: alpha,
        bound: c,
        weight: gamma,
    } = *term;
    let offset = -beta * beta / (4.0 * alpha);
    Piece {
        a1: 0.0,
        b1: 0.0,
        a2: a * c * c / (gamma * gamma),
        b2: -b * c / gamma,
        c2: offset,
        c3: -b * b / (4.0 * a) + offset,
        first_break: f64::NEG_INFINITY,
        second_break: gamma * b / (2.0 * a * c),
    }
}

impl BreakpointTable {
    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn floor_at_zero(&self) -> bool {
        self.floor_at_zero
    }

    /// `Σ_φ f_φ(t)`.
    pub fn value(&self, t: f64) -> f64 {
        self.pieces.iter().map(|p| p.value(t)).sum()
    }

    /// `Σ_φ f_φ'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.pieces.iter().map(|p| p.derivative(t)).sum()
    }

    /// Largest breakpoint; beyond it the sum is constant.
    pub fn flat_from(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.0)
    }
}

/// Minimizes `μt + Σ_φ f_φ(t)`. For `μ = 0` the start of the flat region is
/// returned.
pub fn solve_t(table: &BreakpointTable, mu: f64) -> Result<f64> {
    if table.pieces.is_empty() {
        return Err(Error::Empty("breakpoint table"));
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative penalty {mu}")));
    }
    let target = -mu;
    // the derivative is 2·quad·t + lin on the current interval
    let (mut quad, mut lin) = if table.floor_at_zero {
        table
            .pieces
            .iter()
            .fold((0.0, 0.0), |(q, l), p| (q + p.a2, l + p.b2))
    } else {
        table
            .pieces
            .iter()
            .fold((0.0, 0.0), |(q, l), p| (q + p.a1, l + p.b1))
    };
    let mut left = if table.floor_at_zero { 0.0 } else { f64::NEG_INFINITY };
    if table.floor_at_zero && lin >= target {
        return Ok(0.0);
    }
    for &(bp, i, is_first) in &table.events {
        if bp > left {
            if quad > 0.0 && 2.0 * quad * bp + lin >= target {
                return Ok(((target - lin) / (2.0 * quad)).max(left));
            }
            left = bp;
        }
        let p = &table.pieces[i];
        if is_first {
            quad += p.a2 - p.a1;
            lin += p.b2 - p.b1;
        } else {
            quad -= p.a2;
            lin -= p.b2;
        }
    }
    // derivative is zero past the last breakpoint
    Ok(left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::prox::ProxProblem;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn term(b: f64, beta: f64, c: f64, gamma: f64) -> LevelTerm {
        LevelTerm {
            linear_norm: b,
            y_linear: beta,
            x_quadratic: 0.5,
            y_quadratic: 0.5,
            bound: c,
            weight: gamma,
        }
    }

    /// `f_φ(t)` evaluated by solving the prox at radius `t·c/γ`.
    fn prox_value(t: &LevelTerm, delta: f64, level: f64) -> f64 {
        let p = ProxProblem {
            x_quadratic: t.x_quadratic,
            x_linear: Complex64::new(t.linear_norm, 0.0),
            y_quadratic: t.y_quadratic,
            y_linear: t.y_linear,
            center: Complex64::new(0.0, 0.0),
            radius: level * t.bound / t.weight,
            slope: delta,
        };
        let (x, y) = p.solve();
        p.objective(x, y)
    }

    fn grid_argmin(table: &BreakpointTable, mu: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (lo, f64::INFINITY);
        for i in 0..=n {
            let t = lo + step * i as f64;
            let v = mu * t + table.value(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        best.0
    }

    #[test]
    fn coefficients() {
        let table = build_breakpoints(&[term(1.0, -1.0, 1.0, 1.0)], 1.0).unwrap();
        let p = table.pieces()[0];
        for (got, want) in [
            (p.a1, 0.5),
            (p.b1, -1.0),
            (p.a2, 0.25),
            (p.b2, -1.0),
            (p.first_break, 0.0),
            (p.second_break, 2.0),
            (p.c2, 0.0),
            (p.c3, -1.0),
        ] {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn cancelling_first_break() {
        let delta = 0.3;
        let b = 1.7;
        let table = build_breakpoints(&[term(b, -delta * b, 0.8, 0.5)], delta).unwrap();
        assert!(table.pieces()[0].first_break.abs() < 1e-15);
    }

    #[test]
    fn single_angle_level() {
        let table = build_breakpoints(&[term(1.0, -1.0, 1.0, 1.0)], 1.0).unwrap();
        let t = solve_t(&table, 0.1).unwrap();
        assert!((t - 1.8).abs() < 1e-12);
        let g = grid_argmin(&table, 0.1, -10.0, 10.0, 1e-4);
        assert!((t - g).abs() < 1e-4);
    }

    #[test]
    fn no_penalty_returns_flat_start() {
        let table = build_breakpoints(&[term(1.0, -1.0, 1.0, 1.0), term(2.0, 0.5, 0.7, 0.3)], 0.4).unwrap();
        let t = solve_t(&table, 0.0).unwrap();
        assert!((t - table.flat_from()).abs() < 1e-12);
        assert!(table.derivative(t).abs() < 1e-12);
    }

    #[test]
    fn flat_case_wall() {
        // δ = 0 with a large penalty drives the level to zero
        let table = build_breakpoints(&[term(1.0, 0.0, 1.0, 1.0)], 0.0).unwrap();
        assert_eq!(solve_t(&table, 5.0).unwrap(), 0.0);
        // small penalty: 2·0.5·t − 1 = −0.1
        assert!((solve_t(&table, 0.1).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_table() {
        assert!(build_breakpoints(&[], 1.0).is_err());
    }

    fn arb_terms() -> impl Strategy<Value = Vec<LevelTerm>> {
        prop::collection::vec(
            (0.0..3.0f64, -3.0..3.0f64, 0.1..2.0f64, 0.1..2.0f64, 0.2..1.5f64, 0.2..1.0f64).prop_map(
                |(b, beta, a, alpha, c, gamma)| LevelTerm {
                    linear_norm: b,
                    y_linear: beta,
                    x_quadratic: a,
                    y_quadratic: alpha,
                    bound: c,
                    weight: gamma,
                },
            ),
            1..6,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn pieces_match_prox(terms in arb_terms(), delta in prop_oneof![Just(0.0), 0.05..2.0f64], s in -1.0..1.0f64) {
            let table = build_breakpoints(&terms, delta).unwrap();
            for (term, piece) in terms.iter().zip(table.pieces()) {
                prop_assert!(piece.first_break <= piece.second_break + 1e-12);
                if delta > 0.0 {
                    prop_assert!(piece.a1 > 0.0 && piece.a2 > 0.0);
                }
                let lo = if delta > 0.0 { piece.first_break - 2.0 } else { 0.0 };
                let t = lo + (s + 1.0) * (piece.second_break + 2.0 - lo) / 2.0;
                let want = prox_value(term, delta, t);
                prop_assert!((piece.value(t) - want).abs() < 1e-9 * (1.0 + want.abs()), "{} vs {}", piece.value(t), want);
            }
        }

        #[test]
        fn continuous_at_breaks(terms in arb_terms(), delta in 0.05..2.0f64) {
            let table = build_breakpoints(&terms, delta).unwrap();
            for p in table.pieces() {
                for bp in [p.first_break, p.second_break] {
                    let h = 1e-9 * (1.0 + bp.abs());
                    let jump = (p.value(bp - h) - p.value(bp + h)).abs();
                    prop_assert!(jump < 1e-9 * (1.0 + p.c3.abs()) + 3.0 * h * p.derivative(bp).abs());
                    prop_assert!((p.derivative(bp - h) - p.derivative(bp + h)).abs() < 1e-9 + 4.0 * h * (p.a1 + p.a2));
                }
            }
        }

        #[test]
        fn derivative_monotone(terms in arb_terms(), delta in 0.05..2.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64) {
            let table = build_breakpoints(&terms, delta).unwrap();
            let lo = table.pieces().iter().map(|p| p.first_break).fold(f64::INFINITY, f64::min) - 1.0;
            let hi = table.flat_from();
            let (t1, t2) = (lo + u.min(v) * (hi - lo), lo + u.max(v) * (hi - lo));
            prop_assume!(t2 - t1 > 1e-6);
            prop_assert!(table.derivative(t2) > table.derivative(t1));
        }

        #[test]
        fn sorted_sweep_matches_grid(terms in arb_terms(), delta in prop_oneof![Just(0.0), 0.05..2.0f64], mu in 0.0..3.0f64) {
            let table = build_breakpoints(&terms, delta).unwrap();
            let t = solve_t(&table, mu).unwrap();
            let objective = |t: f64| mu * t + table.value(t);
            if mu > 0.0 && !(table.floor_at_zero() && t == 0.0) {
                prop_assert!((table.derivative(t) + mu).abs() < 1e-9 * (1.0 + mu));
            }
            // coarse grid over a window holding every breakpoint, then a fine
            // grid around the coarse winner
            let first = table.pieces().iter().map(|p| p.first_break).fold(f64::INFINITY, f64::min);
            let lo = if delta > 0.0 { first.min(t) - 1.0 } else { 0.0 };
            let hi = table.flat_from().max(t) + 1.0;
            let step = (hi - lo) / 20_000.0;
            let coarse = grid_argmin(&table, mu, lo, hi, step);
            let fine = grid_argmin(&table, mu, (coarse - 2.0 * step).max(lo), coarse + 2.0 * step, 1e-7 * (hi - lo));
            prop_assert!(objective(t) <= objective(fine) + 1e-12 * (1.0 + objective(t).abs()));
            if mu > 0.0 {
                // the grid argmin is only resolvable where the objective curves
                let curvature = (table.derivative(t + 1e-6) - table.derivative(t - 1e-6)) / 2e-6;
                let tol = 1e-6 + 2e-7 * (hi - lo)
                    + 2.0 * (1e-13 * (1.0 + objective(t).abs()) / curvature.max(1e-12)).sqrt();
                prop_assert!((t - fine).abs() <= tol, "{} vs {}", t, fine);
            }
        }
    }
}

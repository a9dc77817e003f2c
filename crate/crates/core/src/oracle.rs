//! Slow brute-force references for the closed-form kernels and the full
//! solver. Nothing here touches the ADMM code path: the kernels are checked
//! against grid searches and whole problems against subgradient-driven
//! methods on the objective with the levels eliminated.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{BreakpointTable, ProxProblem};
use crate::linalg::CVector;
use crate::problem::{feasibility_witness, PicmvProblem};

/// Largest problem `reference_solve` accepts.
pub const MAX_ORACLE_ELEMENTS: usize = 8;
pub const MAX_ORACLE_CONSTRAINTS: usize = 12;

/// Violation below which an iterate counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-4;

const GRID_ANGLES: usize = 48;
const GRID_RADII: usize = 12;
const GRID_LEVELS: usize = 24;

/// Best point of a grid `x = d + s·(c − δy)·e^{jφ}`, `s ∈ [0, 1]`, crossed
/// with a grid in `y`, refined around the incumbent until the spacing in every
/// coordinate drops below `resolution`. Every grid point is feasible and the
/// cone boundary `s = 1` is always sampled.
pub fn prox_grid_oracle(p: &ProxProblem, resolution: f64) -> Result<(Complex64, f64)> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!("grid resolution must be positive, got {resolution}")));
    }
    let y_free = -p.y_linear / (2.0 * p.y_quadratic);
    let y_span = 10.0 + 2.0 * y_free.abs();
    let (mut y_lo, mut y_hi) = if p.slope > 0.0 {
        let top = p.radius / p.slope;
        (top.min(y_free) - y_span, top)
    } else {
        (-y_span, y_span)
    };
    let (mut s_lo, mut s_hi) = (0.0, 1.0);
    let (mut a_lo, mut a_hi) = (0.0, std::f64::consts::TAU);
    // (x, y, objective, s, angle)
    let mut best = (p.center, y_hi, f64::INFINITY, 0.0, 0.0);
    loop {
        let y_step = (y_hi - y_lo) / GRID_LEVELS as f64;
        let s_step = (s_hi - s_lo) / GRID_RADII as f64;
        let a_step = (a_hi - a_lo) / GRID_ANGLES as f64;
        for iy in 0..=GRID_LEVELS {
            let y = y_lo + y_step * iy as f64;
            let room = p.radius - p.slope * y;
            if room < 0.0 {
                continue;
            }
            for is in 0..=GRID_RADII {
                let s = s_lo + s_step * is as f64;
                for ia in 0..=GRID_ANGLES {
                    let angle = a_lo + a_step * ia as f64;
                    let x = p.center + Complex64::from_polar(s * room, angle);
                    let f = p.objective(x, y);
                    if f < best.2 {
                        best = (x, y, f, s, angle);
                    }
                }
            }
        }
        if !best.2.is_finite() {
            // no level in range leaves room; only reachable for radius < 0
            return Ok((p.center, p.radius / p.slope));
        }
        let room = (p.radius - p.slope * best.1).max(0.0);
        if y_step.max(s_step * room).max(a_step * room) <= resolution {
            return Ok((best.0, best.1));
        }
        s_lo = (best.3 - 2.0 * s_step).max(0.0);
        s_hi = (best.3 + 2.0 * s_step).min(1.0);
        a_lo = best.4 - 2.0 * a_step;
        a_hi = best.4 + 2.0 * a_step;
        y_lo = (best.1 - 2.0 * y_step).max(y_lo);
        y_hi = (best.1 + 2.0 * y_step).min(y_hi);
    }
}

/// Argmin of `μt + Σ_φ f_φ(t)` over a grid on `range`, refined around the
/// incumbent until the spacing drops below `resolution`. The range is widened
/// when the minimizer lies outside it.
pub fn t_grid_oracle(table: &BreakpointTable, mu: f64, range: (f64, f64), resolution: f64) -> Result<f64> {
    let (mut lo, mut hi) = range;
    if !(hi > lo && resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad grid: range [{lo}, {hi}], resolution {resolution}"
        )));
    }
    if table.floor_at_zero() {
        lo = lo.max(0.0);
    }
    const POINTS: usize = 2000;
    // widen until the coarse argmin is interior (or on the δ = 0 floor); the
    // first piece can put the minimizer far below every breakpoint
    for _ in 0..60 {
        let step = (hi - lo) / POINTS as f64;
        let argmin = (0..=POINTS)
            .map(|i| (i, mu * (lo + step * i as f64) + table.value(lo + step * i as f64)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
            .0;
        let width = hi - lo;
        if argmin == 0 && !(table.floor_at_zero() && lo == 0.0) {
            lo -= width;
        } else if argmin == POINTS {
            hi += width;
        } else {
            break;
        }
        if table.floor_at_zero() {
            lo = lo.max(0.0);
        }
    }
    loop {
        let step = (hi - lo) / POINTS as f64;
        let mut best = (lo, f64::INFINITY);
        for i in 0..=POINTS {
            let t = lo + step * i as f64;
            let v = mu * t + table.value(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        if step <= resolution {
            return Ok(best.0);
        }
        let (new_lo, new_hi) = ((best.0 - 2.0 * step).max(lo), (best.0 + 2.0 * step).min(hi));
        lo = new_lo;
        hi = new_hi;
    }
}

/// Step length schedule for objective steps. The `k`-th such step within an
/// epoch moves `initial·shrinkᵉ/√(k+1)` along the normalized subgradient;
/// every epoch restarts from the best feasible point found so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub initial: f64,
    pub shrink: f64,
    pub epochs: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial: 0.5,
            shrink: 0.3,
            epochs: 12,
        }
    }
}

/// How [`reference_solve`] searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMethod {
    /// Switching subgradient steps with the given objective step schedule.
    Subgradient(StepRule),
    /// Central-cut ellipsoid method with deep feasibility cuts. Unlike the
    /// subgradient steps its progress does not slow down at the kinks where
    /// the optimum nulls an interference angle.
    Ellipsoid,
}

impl Default for ReferenceMethod {
    fn default() -> Self {
        Self::Ellipsoid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// Objective of the best feasible iterate, if any was found.
    pub objective: Option<f64>,
    pub solution: Option<CVector>,
    /// Minimal levels `ε` for `solution`.
    pub epsilon: Vec<f64>,
    /// Candidate objective minus oracle objective.
    pub gap: Option<f64>,
    /// Largest target-constraint excess of `solution` (0 if none found).
    pub max_violation: f64,
    pub steps: usize,
}

impl OracleReport {
    pub fn found_feasible(&self) -> bool {
        self.objective.is_some()
    }

    /// `gap / max(|oracle objective|, floor)`.
    pub fn relative_gap(&self, floor: f64) -> Option<f64> {
        Some(self.gap? / self.objective?.abs().max(floor))
    }
}

/// Iterates closer than this to the target cones take objective steps.
const SWITCH_TOL: f64 = 1e-9;

struct Evaluation {
    objective: f64,
    objective_gradient: CVector,
    /// Largest target excess, clamped at zero, and a subgradient of it.
    violation: f64,
    violation_gradient: CVector,
}

/// The objective with the levels eliminated: for fixed `w` the best `εₖ` is
/// the largest scaled interference response in group `k`, which leaves only
/// the target constraints.
fn evaluate(p: &PicmvProblem, w: &CVector) -> Evaluation {
    let delta = p.delta();
    let norm = w.norm();
    let norm_grad = if norm > 0.0 {
        w / Complex64::from(norm)
    } else {
        CVector::zeros(w.len())
    };
    let rw = p.covariance().matrix() * w;
    let variance = w.dotc(&rw).re;
    let mut objective_gradient = rw * Complex64::from(2.0);

    // μ·maxₖ γₖ max_{φ∈Φₖ} (|aᴴw| + δ‖w‖)/c_φ
    let set = p.interference();
    let mut level = 0.0_f64;
    let mut active: Option<(usize, f64)> = None;
    for i in 0..set.len() {
        let a = set.steering().column(i);
        let scale = set.column_weight(i) / set.bounds()[i];
        let v = scale * (a.dotc(w).norm() + delta * norm);
        if active.is_none() || v > level {
            level = v;
            active = Some((i, scale));
        }
    }
    if let (Some((i, scale)), true) = (active, p.mu() > 0.0) {
        let a = set.steering().column(i).into_owned();
        let response = a.dotc(w);
        let mut g = &norm_grad * Complex64::from(delta);
        if response.norm() > 0.0 {
            g += a * (response / response.norm());
        }
        objective_gradient += g * Complex64::from(p.mu() * scale);
    }

    let targets = p.targets();
    let mut violation = 0.0_f64;
    let mut violation_gradient = CVector::zeros(w.len());
    for i in 0..targets.len() {
        let a = targets.steering().column(i).into_owned();
        let miss = a.dotc(w) - Complex64::from(1.0);
        let excess = miss.norm() + delta * norm - targets.bounds()[i];
        if excess > violation {
            violation = excess;
            let mut g = &norm_grad * Complex64::from(delta);
            if miss.norm() > 0.0 {
                g += a * (miss / miss.norm());
            }
            violation_gradient = g;
        }
    }
    Evaluation {
        objective: variance + p.mu() * level,
        objective_gradient,
        violation,
        violation_gradient,
    }
}

/// Minimizes the objective with the levels eliminated, starting from
/// `w = 0`, and reports the best iterate whose target constraints hold to
/// [`FEASIBILITY_TOL`]. `candidate`, when given, is scored against it.
pub fn reference_solve(
    problem: &PicmvProblem,
    steps: usize,
    method: ReferenceMethod,
    candidate: Option<&CVector>,
) -> Result<OracleReport> {
    if problem.elements() > MAX_ORACLE_ELEMENTS || problem.constraint_count() > MAX_ORACLE_CONSTRAINTS {
        return Err(Error::InvalidParameter(format!(
            "reference solver handles at most {MAX_ORACLE_ELEMENTS} elements and {MAX_ORACLE_CONSTRAINTS} constraints, got {} and {}",
            problem.elements(),
            problem.constraint_count()
        )));
    }
    let (best, taken) = match method {
        ReferenceMethod::Subgradient(rule) => {
            if !(rule.initial > 0.0 && rule.shrink > 0.0 && rule.shrink <= 1.0 && rule.epochs > 0) {
                return Err(Error::InvalidParameter(format!("bad step rule {rule:?}")));
            }
            switching_subgradient(problem, steps, rule)
        }
        ReferenceMethod::Ellipsoid => ellipsoid(problem, steps),
    };

    let Some((objective, solution)) = best else {
        return Ok(OracleReport {
            objective: None,
            solution: None,
            epsilon: Vec::new(),
            gap: None,
            max_violation: 0.0,
            steps: taken,
        });
    };
    let gap = candidate.map(|c| evaluate(problem, c).objective - objective);
    Ok(OracleReport {
        objective: Some(objective),
        epsilon: problem.minimal_epsilon(&solution),
        max_violation: evaluate(problem, &solution).violation,
        solution: Some(solution),
        gap,
        steps: taken,
    })
}

type Incumbent = Option<(f64, CVector)>;

fn consider(best: &mut Incumbent, e: &Evaluation, w: &CVector) {
    if e.violation <= FEASIBILITY_TOL && best.as_ref().is_none_or(|b| e.objective < b.0) {
        *best = Some((e.objective, w.clone()));
    }
}

/// An iterate outside the target cones takes a Polyak step on its worst
/// target constraint, any other iterate a diminishing step on the objective.
fn switching_subgradient(problem: &PicmvProblem, steps: usize, rule: StepRule) -> (Incumbent, usize) {
    let per_epoch = (steps / rule.epochs).max(1);
    let mut start = CVector::zeros(problem.elements());
    let mut best: Incumbent = None;
    let mut taken = 0;
    let mut scale = rule.initial;
    for _ in 0..rule.epochs {
        let mut w = start.clone();
        let mut objective_steps = 0;
        for _ in 0..per_epoch {
            let e = evaluate(problem, &w);
            taken += 1;
            consider(&mut best, &e, &w);
            if e.violation > SWITCH_TOL {
                let g2 = e.violation_gradient.norm_squared();
                if g2 == 0.0 {
                    // w = 0 with a negative radius: no direction helps
                    break;
                }
                w -= &e.violation_gradient * Complex64::from(e.violation / g2);
            } else {
                let g = e.objective_gradient.norm();
                if g == 0.0 {
                    break;
                }
                objective_steps += 1;
                w -= &e.objective_gradient * Complex64::from(scale / (objective_steps as f64).sqrt() / g);
            }
        }
        if let Some((_, w)) = &best {
            start = w.clone();
        }
        scale *= rule.shrink;
    }
    (best, taken)
}

/// Radius of a ball around the origin holding every point at least as good
/// as the feasibility witness, or a generous default.
fn initial_radius(problem: &PicmvProblem) -> f64 {
    let floor = problem.covariance().eig().min_value();
    feasibility_witness(problem.targets())
        .ok()
        .map(|w| evaluate(problem, &w))
        .filter(|e| e.violation <= 0.0 && floor > 0.0)
        .map_or(1e3, |e| 2.0 * (e.objective / floor).sqrt() + 1.0)
}

fn ellipsoid(problem: &PicmvProblem, steps: usize) -> (Incumbent, usize) {
    let m = problem.elements();
    let n = 2 * m;
    let nf = n as f64;
    let to_complex = |x: &DVector<f64>| CVector::from_fn(m, |i, _| Complex64::new(x[i], x[m + i]));
    let to_real = |g: &CVector| DVector::from_fn(n, |i, _| if i < m { g[i].re } else { g[i - m].im });

    let radius = initial_radius(problem);
    let mut center = DVector::<f64>::zeros(n);
    let mut shape = DMatrix::<f64>::identity(n, n) * (radius * radius);
    let mut best: Incumbent = None;
    // best value among strictly feasible centers, used for deep objective cuts
    let mut strict_best = f64::INFINITY;
    let mut taken = 0;
    for _ in 0..steps {
        let w = to_complex(&center);
        let e = evaluate(problem, &w);
        taken += 1;
        consider(&mut best, &e, &w);
        let (g, excess) = if e.violation > 0.0 {
            (to_real(&e.violation_gradient), e.violation)
        } else {
            strict_best = strict_best.min(e.objective);
            (to_real(&e.objective_gradient), e.objective - strict_best)
        };
        let pg = &shape * &g;
        let width = g.dot(&pg);
        if !(width > 0.0) || width.sqrt() <= 1e-15 * (1.0 + e.objective.abs()) {
            break;
        }
        let root = width.sqrt();
        let depth = excess / root;
        if depth >= 1.0 {
            // the cut removes the whole ellipsoid: nothing feasible is left
            break;
        }
        let step = (1.0 + nf * depth) / (nf + 1.0);
        let shrink = 2.0 * (1.0 + nf * depth) / ((nf + 1.0) * (1.0 + depth));
        let scale = nf * nf * (1.0 - depth * depth) / (nf * nf - 1.0);
        let direction = &pg / root;
        center -= &direction * step;
        shape = (&shape - &direction * direction.transpose() * shrink) * scale;
        shape = (&shape + shape.transpose()) * 0.5;
    }
    (best, taken)
}

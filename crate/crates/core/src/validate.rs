//! Randomized equivalence suites pitting the closed-form kernels and the ADMM
//! against the brute-force references in [`crate::oracle`]. Every suite is
//! deterministic for a given seed.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array::{seeded_rng, ArrayGeometry, Direction, SimRng};
use crate::error::Result;
use crate::kernels::{
    build_breakpoints, prox_socp, solve_t, solve_wy, ConeCase, LevelTerm, ProxProblem, DEFAULT_BISECTION_TOL,
};
use crate::linalg::{CMatrix, CVector, HermitianMatrix};
use crate::oracle::{prox_grid_oracle, reference_solve, t_grid_oracle, ReferenceMethod};
use crate::problem::{
    check_solution_feasibility, feasibility_bound, InterferenceGroup, InterferenceSet, PicmvProblem, TargetSet,
};
use crate::solver::{solve, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Cases the reference could not decide.
    pub inconclusive: usize,
    /// Largest value of the suite's error measure.
    pub worst: f64,
    /// Free-form counters, e.g. branch coverage.
    pub notes: Vec<(String, usize)>,
    pub elapsed: Duration,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            inconclusive: 0,
            worst: 0.0,
            notes: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn record(&mut self, error: f64, ok: bool) {
        self.cases += 1;
        if !ok || error.is_nan() {
            self.failures += 1;
        }
        if error.is_nan() || error > self.worst {
            self.worst = error;
        }
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {}/{} passed, worst {:.3e}, {:.2?}",
            self.name,
            self.cases - self.failures,
            self.cases,
            self.worst,
            self.elapsed
        )?;
        if self.inconclusive > 0 {
            write!(f, ", {} inconclusive", self.inconclusive)?;
        }
        for (k, v) in &self.notes {
            write!(f, ", {k} {v}")?;
        }
        Ok(())
    }
}

fn cplx(rng: &mut SimRng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

pub fn random_prox(rng: &mut SimRng) -> ProxProblem {
    let slope = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..2.0) };
    let radius = if slope > 0.0 && rng.random_bool(0.1) {
        -rng.random_range(0.0..1.0)
    } else {
        rng.random_range(0.0..3.0)
    };
    ProxProblem {
        x_quadratic: rng.random_range(0.1..5.0),
        x_linear: cplx(rng, 5.0),
        y_quadratic: rng.random_range(0.1..5.0),
        y_linear: rng.random_range(-5.0..5.0),
        center: cplx(rng, 3.0),
        radius,
        slope,
    }
}

/// Closed-form prox against the grid oracle.
pub fn prox_suite(cases: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("prox vs grid oracle");
    let mut rng = seeded_rng(seed, 1);
    for _ in 0..cases {
        let p = random_prox(&mut rng);
        let (x, y) = prox_socp(&p);
        let (gx, gy) = match prox_grid_oracle(&p, 1e-6) {
            Ok(v) => v,
            Err(_) => {
                report.record(f64::NAN, false);
                continue;
            }
        };
        // grid points are feasible, so the grid value bounds the optimum from
        // above and needs no resolution allowance
        let excess = p.objective(x, y) - p.objective(gx, gy);
        let violation = p.violation(x, y);
        report.record(excess.max(violation), excess <= 1e-8 && violation <= 1e-12);
    }
    report.elapsed = start.elapsed();
    report
}

fn random_pd(rng: &mut SimRng, m: usize) -> HermitianMatrix {
    let shift = rng.random_range(0.01..2.0);
    let g = CMatrix::from_fn(m, m, |_, _| cplx(rng, 1.0));
    HermitianMatrix::new(&g * g.adjoint() + CMatrix::identity(m, m) * Complex64::from(shift))
        .expect("Gram matrix plus shift is Hermitian")
}

/// Stationarity, sign and complementary-slackness residuals of a `(w, y)`
/// block solution; the largest is returned.
pub fn wy_kkt_residual(a: &HermitianMatrix, b: &CVector, alpha: f64, beta: f64, w: &CVector, y: f64) -> f64 {
    let norm = w.norm();
    if norm == 0.0 && y == 0.0 {
        // at the apex (b, β) must lie in the dual cone ‖b‖ ≤ β
        return (b.norm() - beta).max(0.0);
    }
    let nu = 2.0 * alpha * y + beta;
    let grad = a.matrix() * w * Complex64::from(2.0) + b;
    let stationarity = if norm > 0.0 {
        (grad + w * Complex64::from(nu / norm)).norm()
    } else {
        grad.norm()
    };
    let primal = (norm - y).max(0.0);
    let dual = (-nu).max(0.0);
    let slackness = (nu * (norm - y)).abs();
    stationarity.max(primal).max(dual).max(slackness)
}

/// `(w, y)` block against its KKT conditions, counting the branches taken.
pub fn wy_suite(cases: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("(w, y) block KKT");
    let mut rng = seeded_rng(seed, 2);
    let mut counts = [0usize; 3];
    for case in 0..cases {
        let m = rng.random_range(1..=16);
        let a = random_pd(&mut rng, m);
        let b = CVector::from_fn(m, |_, _| cplx(&mut rng, 3.0));
        let alpha = rng.random_range(0.05..4.0);
        let free = a.eig().solve(&b).norm();
        // steer a share of the cases into the apex and interior branches
        let beta = match case % 3 {
            0 => b.norm() * rng.random_range(1.0..2.0),
            1 => -alpha * free * rng.random_range(1.0..2.0),
            _ => rng.random_range(-6.0..6.0),
        };
        let eig = a.eig();
        let b_bar = eig.to_eigenbasis(&b);
        let (_, _, branch) =
            crate::kernels::solve_wy_eigenbasis(eig.values.as_slice(), &b_bar, alpha, beta, DEFAULT_BISECTION_TOL);
        counts[match branch {
            ConeCase::Origin => 0,
            ConeCase::Interior => 1,
            ConeCase::Boundary => 2,
        }] += 1;
        match solve_wy(eig, &b, alpha, beta, DEFAULT_BISECTION_TOL) {
            Ok((w, y)) => {
                let res = wy_kkt_residual(&a, &b, alpha, beta, &w, y);
                report.record(res, res <= 1e-8);
            }
            Err(_) => report.record(f64::NAN, false),
        }
    }
    report.notes = vec![
        ("origin".into(), counts[0]),
        ("interior".into(), counts[1]),
        ("boundary".into(), counts[2]),
    ];
    if counts.contains(&0) {
        report.failures += 1;
    }
    report.elapsed = start.elapsed();
    report
}

pub fn random_level_terms(rng: &mut SimRng) -> Vec<LevelTerm> {
    let n = rng.random_range(1..=8);
    let rho = rng.random_range(0.5..5.0);
    (0..n)
        .map(|_| LevelTerm {
            linear_norm: rng.random_range(0.0..3.0),
            y_linear: rng.random_range(-3.0..3.0),
            x_quadratic: rho / 2.0,
            y_quadratic: rho / 2.0,
            bound: rng.random_range(0.1..1.0),
            weight: rng.random_range(0.1..1.0),
        })
        .collect()
}

/// Largest jump of any `f_φ` across its own breakpoints, evaluating the two
/// adjacent polynomial branches at the breakpoint itself.
pub fn breakpoint_jump(table: &crate::kernels::BreakpointTable) -> f64 {
    table
        .pieces()
        .iter()
        .map(|p| {
            let first = |t: f64| p.a1 * t * t + p.b1 * t;
            let middle = |t: f64| p.a2 * t * t + p.b2 * t + p.c2;
            let mut jump = 0.0_f64;
            if p.first_break.is_finite() && p.first_break <= p.second_break {
                jump = jump.max((first(p.first_break) - middle(p.first_break)).abs());
                jump = jump.max((middle(p.second_break) - p.c3).abs());
            } else if p.first_break.is_finite() {
                // empty middle piece: the first branch meets the constant
                jump = jump.max((first(p.first_break) - p.c3).abs());
            } else {
                jump = jump.max((middle(p.second_break) - p.c3).abs());
            }
            jump
        })
        .fold(0.0, f64::max)
}

/// Sorted breakpoint sweep against the grid oracle, plus first-order
/// optimality and continuity of the pieces.
pub fn level_suite(cases: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("level update vs grid oracle");
    let mut rng = seeded_rng(seed, 3);
    for _ in 0..cases {
        let terms = random_level_terms(&mut rng);
        let delta = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.05..1.0) };
        let mu = rng.random_range(0.05..3.0);
        let Ok(table) = build_breakpoints(&terms, delta) else {
            report.record(f64::NAN, false);
            continue;
        };
        let Ok(t) = solve_t(&table, mu) else {
            report.record(f64::NAN, false);
            continue;
        };
        let breaks = table
            .pieces()
            .iter()
            .flat_map(|p| [p.first_break, p.second_break])
            .filter(|b| b.is_finite());
        let (lo, hi) = breaks.fold((0.0_f64, 0.0_f64), |(l, h), b| (l.min(b), h.max(b)));
        let grid = t_grid_oracle(&table, mu, (lo - 10.0, hi + 10.0), 1e-9).unwrap_or(f64::NAN);
        let distance = (t - grid).abs();
        let slope = table.derivative(t) + mu;
        // at the δ = 0 floor the optimality condition is an inequality
        let stationarity = if table.floor_at_zero() && t == 0.0 {
            (-slope).max(0.0)
        } else {
            slope.abs()
        };
        let jump = breakpoint_jump(&table);
        report.record(
            distance.max(stationarity).max(jump),
            distance <= 1e-6 && stationarity <= 1e-9 && jump <= 1e-9,
        );
    }
    report.elapsed = start.elapsed();
    report
}

/// A small random instance: up to 8 elements and 12 constraints, with `δ`
/// below the feasibility bound.
pub fn random_tiny_problem(rng: &mut SimRng) -> Result<PicmvProblem> {
    let m = rng.random_range(3..=8);
    let geometry = ArrayGeometry::linear(m);
    let look: f64 = rng.random_range(-40.0..40.0);
    let n_targets = rng.random_range(1..=3);
    let target_dirs: Vec<Direction> = (0..n_targets)
        .map(|i| Direction::Linear(look + 4.0 * (i as f64 - (n_targets - 1) as f64 / 2.0)))
        .collect();
    let target_bounds: Vec<f64> = (0..n_targets).map(|_| rng.random_range(0.1..0.5)).collect();
    let targets = TargetSet::from_geometry(&geometry, target_dirs, target_bounds)?;

    let mut room = 12 - n_targets;
    let mut groups = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        if room == 0 {
            break;
        }
        let size = rng.random_range(1..=3).min(room);
        room -= size;
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let center = (look + side * rng.random_range(20.0..50.0)).clamp(-89.0, 89.0);
        let dirs = (0..size).map(|i| Direction::Linear((center + 2.0 * i as f64).min(89.5))).collect();
        let bounds = (0..size).map(|_| rng.random_range(0.3..1.0)).collect();
        groups.push(InterferenceGroup::from_geometry(&geometry, dirs, bounds, rng.random_range(0.3..1.0))?);
    }
    let interference = InterferenceSet::from_groups(m, groups)?;

    let g = CMatrix::from_fn(m, 2 * m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let r = HermitianMatrix::new(&g * g.adjoint() / Complex64::from(2.0 * m as f64) + CMatrix::identity(m, m) * Complex64::from(0.1))?;
    let mu = r.eig().max_value() * [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let delta = if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.0..0.5) * feasibility_bound(&targets)?
    };
    PicmvProblem::new(r, targets, interference, mu, delta)
}

/// Full ADMM solves against the reference solver on tiny instances.
pub fn end_to_end_suite(cases: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("ADMM vs reference solver");
    let mut rng = seeded_rng(seed, 4);
    let options = SolverOptions {
        tol: 1e-8,
        max_iter: 200_000,
        ..SolverOptions::default()
    };
    for _ in 0..cases {
        let Ok(p) = random_tiny_problem(&mut rng) else {
            report.record(f64::NAN, false);
            continue;
        };
        let Ok(bf) = solve(&p, &options) else {
            report.record(f64::NAN, false);
            continue;
        };
        let violation = check_solution_feasibility(&p, &bf.weights, &bf.epsilon, 1e-4)
            .map(|f| f.max_violation())
            .unwrap_or(f64::NAN);
        let oracle = match reference_solve(&p, 50_000, ReferenceMethod::Ellipsoid, Some(&bf.weights)) {
            Ok(o) => o,
            Err(_) => {
                report.record(f64::NAN, false);
                continue;
            }
        };
        let Some(reference) = oracle.objective else {
            report.inconclusive += 1;
            continue;
        };
        let relative = (bf.objective - reference).abs() / reference.abs().max(1e-12);
        report.record(relative.max(violation), relative <= 1e-3 && violation <= 1e-4);
    }
    report.elapsed = start.elapsed();
    report
}

/// Sizes of the four suites.
#[derive(Debug, Clone, Copy)]
pub struct SuiteSizes {
    pub prox: usize,
    pub wy: usize,
    pub level: usize,
    pub end_to_end: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            prox: 1000,
            wy: 1000,
            level: 1000,
            end_to_end: 50,
        }
    }
}

pub fn run_all(sizes: SuiteSizes, seed: u64) -> Vec<SuiteReport> {
    vec![
        prox_suite(sizes.prox, seed),
        wy_suite(sizes.wy, seed),
        level_suite(sizes.level, seed),
        end_to_end_suite(sizes.end_to_end, seed),
    ]
}

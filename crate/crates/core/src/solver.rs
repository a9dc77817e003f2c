//! ADMM driver.
//!
//! Every constraint gets a consensus copy of its response `zᵢ = wᴴaᵢ` and of
//! the norm bound `yᵢ = y`. A sweep solves the `(w, y)` block in the
//! eigenbasis of `A = R + (ρ/2)·Σᵢ aᵢaᵢᴴ`, then every target pair, then the
//! level `t` together with every interference pair, and finally the
//! multipliers. The steering vectors are rotated into that eigenbasis once per
//! solve so a sweep costs `O(M·N)` for `N` constraints.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{
    build_breakpoints, solve_t, solve_wy_eigenbasis, update_phi, update_theta, LevelTerm,
    DEFAULT_BISECTION_TOL,
};
use crate::linalg::{adjoint_product, outer_sum, CMatrix, CVector, Eigen, HermitianMatrix, SplitMatrix};
use crate::problem::PicmvProblem;

pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// `10μ` for a positive penalty, otherwise 100.
pub fn default_rho(mu: f64) -> f64 {
    if mu > 0.0 {
        10.0 * mu
    } else {
        100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Augmented Lagrangian penalty; `None` selects [`default_rho`].
    pub rho: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub bisection_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            bisection_tol: DEFAULT_BISECTION_TOL,
        }
    }
}

impl SolverOptions {
    pub fn rho_for(&self, problem: &PicmvProblem) -> f64 {
        self.rho.unwrap_or_else(|| default_rho(problem.mu()))
    }

    fn validate(&self) -> Result<()> {
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tolerance and iteration budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How the interference level is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelMode {
    /// The level `t` is optimized against the penalty `μt`.
    Penalized,
    /// The level is pinned to one and group weights are ignored, which turns
    /// the interference constraints into hard bounds `|wᴴa_φ| + δ‖w‖ ≤ c_φ`.
    Fixed,
}

/// Primal and dual variables of the splitting. Target entries come first in
/// every per-constraint vector, followed by the interference entries in the
/// column order of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub w: CVector,
    pub y: f64,
    pub t: f64,
    pub z: Vec<Complex64>,
    pub y_copies: Vec<f64>,
    pub multipliers: Vec<Complex64>,
    pub y_multipliers: Vec<f64>,
    pub iteration: usize,
}

impl AdmmState {
    pub fn zeros(elements: usize, constraints: usize) -> Self {
        Self {
            w: CVector::zeros(elements),
            y: 0.0,
            t: 0.0,
            z: vec![Complex64::new(0.0, 0.0); constraints],
            y_copies: vec![0.0; constraints],
            multipliers: vec![Complex64::new(0.0, 0.0); constraints],
            y_multipliers: vec![0.0; constraints],
            iteration: 0,
        }
    }

    fn check_shape(&self, elements: usize, constraints: usize) -> Result<()> {
        let ok = self.w.len() == elements
            && [
                self.z.len(),
                self.y_copies.len(),
                self.multipliers.len(),
                self.y_multipliers.len(),
            ]
            .iter()
            .all(|&n| n == constraints);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "state does not fit a problem with {elements} elements and {constraints} constraints"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual)
    }
}

/// Result of a solve.
#[derive(Debug, Clone)]
pub struct Beamformer {
    pub weights: CVector,
    /// Reported levels `εₖ = t/γₖ`.
    pub epsilon: Vec<f64>,
    /// Lower end of the optimal level bracket,
    /// `max_{φ∈Φₖ} (|wᴴa_φ| + δy)/c_φ`.
    pub epsilon_lower: Vec<f64>,
    pub level: f64,
    pub norm_bound: f64,
    /// `wᴴRw + μ·maxₖ γₖεₖ`.
    pub objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    pub converged: bool,
    /// Set by the fixed-level mode when the run looks infeasible.
    pub infeasible_suspected: bool,
    /// Residuals after every iteration.
    pub history: Vec<Residuals>,
}

/// A solve in progress: the problem, the factorized `A`, the rotated steering
/// vectors and the current state.
pub struct Admm<'p> {
    problem: &'p PicmvProblem,
    rho: f64,
    mode: LevelMode,
    bisection_tol: f64,
    eig: Eigen,
    rotated: SplitMatrix,
    bounds: Vec<f64>,
    weights: Vec<f64>,
    state: AdmmState,
    responses: CVector,
}

impl<'p> Admm<'p> {
    /// Cold start at zero.
    pub fn new(problem: &'p PicmvProblem, rho: f64, mode: LevelMode) -> Result<Self> {
        let state = AdmmState::zeros(problem.elements(), problem.constraint_count());
        Self::with_state(problem, rho, mode, state)
    }

    /// Warm start from a prior state of a problem with the same shape.
    pub fn with_state(problem: &'p PicmvProblem, rho: f64, mode: LevelMode, state: AdmmState) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        state.check_shape(problem.elements(), problem.constraint_count())?;
        let steering = stacked_steering(problem);
        let spread = outer_sum(&steering) * Complex64::from(rho / 2.0);
        let a = HermitianMatrix::new(problem.covariance().matrix() + spread)?;
        let eig = a.eig().clone();
        eig.require_positive_definite()?;
        let rotated = SplitMatrix::new(&adjoint_product(&eig.vectors, &steering));
        let set = problem.interference();
        let mut bounds = problem.targets().bounds().to_vec();
        bounds.extend_from_slice(set.bounds());
        let weights = (0..set.len()).map(|i| set.column_weight(i)).collect();
        let responses = CVector::zeros(problem.constraint_count());
        Ok(Self {
            problem,
            rho,
            mode,
            bisection_tol: DEFAULT_BISECTION_TOL,
            eig,
            rotated,
            bounds,
            weights,
            state,
            responses,
        })
    }

    pub fn set_bisection_tol(&mut self, tol: f64) {
        self.bisection_tol = tol;
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    pub fn into_state(self) -> AdmmState {
        self.state
    }

    /// Eigendecomposition of `A`.
    pub fn system(&self) -> &Eigen {
        &self.eig
    }

    /// One full sweep; returns the residuals against the previous state.
    pub fn iterate(&mut self) -> Result<Residuals> {
        let rho = self.rho;
        let delta = self.problem.delta();
        let n = self.state.z.len();
        let n_targets = self.problem.targets().len();
        let previous_z = self.state.z.clone();
        let previous_y = self.state.y_copies.clone();

        // (w, y) block
        let coeffs = CVector::from_iterator(
            n,
            self.state
                .multipliers
                .iter()
                .zip(&self.state.z)
                .map(|(l, z)| (l - z * rho).conj()),
        );
        let b_bar = self.rotated.mul(&coeffs);
        let beta: f64 = self
            .state
            .y_multipliers
            .iter()
            .zip(&self.state.y_copies)
            .map(|(eta, yc)| eta - rho * yc)
            .sum();
        let alpha = n as f64 * rho / 2.0;
        let (w_bar, y, _) =
            solve_wy_eigenbasis(self.eig.values.as_slice(), &b_bar, alpha, beta, self.bisection_tol);
        self.responses = self.rotated.column_responses(&w_bar);
        let u = &self.responses;
        let st = &mut self.state;
        st.w = &self.eig.vectors * &w_bar;
        st.y = y;

        for i in 0..n_targets {
            let (yc, z) = update_theta(u[i], st.multipliers[i], st.y_multipliers[i], y, rho, delta, self.bounds[i]);
            st.y_copies[i] = yc;
            st.z[i] = z;
        }

        if n > n_targets {
            let x_linear: Vec<Complex64> = (n_targets..n).map(|i| -st.multipliers[i] - u[i] * rho).collect();
            let y_linear: Vec<f64> = (n_targets..n).map(|i| -st.y_multipliers[i] - rho * y).collect();
            let unit_weights = self.mode == LevelMode::Fixed;
            st.t = match self.mode {
                LevelMode::Fixed => 1.0,
                LevelMode::Penalized => {
                    let terms: Vec<LevelTerm> = x_linear
                        .iter()
                        .zip(&y_linear)
                        .zip(n_targets..n)
                        .map(|((b, beta), i)| LevelTerm {
                            linear_norm: b.norm(),
                            y_linear: *beta,
                            x_quadratic: rho / 2.0,
                            y_quadratic: rho / 2.0,
                            bound: self.bounds[i],
                            weight: self.weights[i - n_targets],
                        })
                        .collect();
                    let table = build_breakpoints(&terms, delta)?;
                    solve_t(&table, self.problem.mu())?
                }
            };
            for (k, i) in (n_targets..n).enumerate() {
                let weight = if unit_weights { 1.0 } else { self.weights[k] };
                let (yc, z) = update_phi(st.t, x_linear[k], y_linear[k], rho, delta, self.bounds[i], weight)?;
                st.y_copies[i] = yc;
                st.z[i] = z;
            }
        }

        let mut primal = 0.0_f64;
        let mut dual = 0.0_f64;
        for i in 0..n {
            let gap = u[i] - st.z[i];
            let y_gap = y - st.y_copies[i];
            st.multipliers[i] += gap * rho;
            st.y_multipliers[i] += rho * y_gap;
            primal = primal.max(gap.norm()).max(y_gap.abs());
            dual = dual
                .max((st.z[i] - previous_z[i]).norm())
                .max((st.y_copies[i] - previous_y[i]).abs());
        }
        st.iteration += 1;
        Ok(Residuals {
            primal,
            dual: rho * dual,
        })
    }

    /// Residuals of the current state against `previous`.
    pub fn residuals(&self, previous: &AdmmState) -> Residuals {
        let st = &self.state;
        let mut primal = 0.0_f64;
        let mut dual = 0.0_f64;
        for i in 0..st.z.len() {
            primal = primal
                .max((self.responses[i] - st.z[i]).norm())
                .max((st.y - st.y_copies[i]).abs());
            dual = dual
                .max((st.z[i] - previous.z[i]).norm())
                .max((st.y_copies[i] - previous.y_copies[i]).abs());
        }
        Residuals {
            primal,
            dual: self.rho * dual,
        }
    }

    /// Iterates until both residuals are at most `tol` or the budget is spent.
    pub fn run(&mut self, tol: f64, max_iter: usize) -> Result<Beamformer> {
        let mut history = Vec::with_capacity(max_iter.min(100_000));
        let mut converged = false;
        for _ in 0..max_iter {
            let res = self.iterate()?;
            history.push(res);
            if !(res.primal.is_finite() && res.dual.is_finite()) {
                let trace = history
                    .iter()
                    .rev()
                    .take(5)
                    .rev()
                    .map(|r| format!("({:.3e}, {:.3e})", r.primal, r.dual))
                    .collect::<Vec<_>>()
                    .join(" ");
                return Err(Error::Diverged {
                    iteration: self.state.iteration,
                    trace,
                });
            }
            if res.primal <= tol && res.dual <= tol {
                converged = true;
                break;
            }
        }
        let infeasible_suspected = self.mode == LevelMode::Fixed && !converged && stalled(&history);
        Ok(self.report(history, converged, infeasible_suspected))
    }

    fn report(&self, history: Vec<Residuals>, converged: bool, infeasible_suspected: bool) -> Beamformer {
        let p = self.problem;
        let set = p.interference();
        let st = &self.state;
        let (epsilon, objective_penalty) = match self.mode {
            LevelMode::Penalized => (
                set.weights().iter().map(|g| st.t / g).collect::<Vec<_>>(),
                if set.groups() > 0 { p.mu() * st.t } else { 0.0 },
            ),
            LevelMode::Fixed => (vec![1.0; set.groups()], 0.0),
        };
        let epsilon_lower = (0..set.groups())
            .map(|k| {
                set.group_range(k)
                    .map(|i| {
                        let a = set.steering().column(i);
                        (st.w.dotc(&a).norm() + p.delta() * st.y) / set.bounds()[i]
                    })
                    .fold(0.0_f64, f64::max)
            })
            .collect();
        Beamformer {
            weights: st.w.clone(),
            epsilon,
            epsilon_lower,
            level: st.t,
            norm_bound: st.y,
            objective: p.covariance().quadratic_form(&st.w) + objective_penalty,
            iterations: st.iteration,
            residuals: history.last().copied().unwrap_or_default(),
            converged,
            infeasible_suspected,
            history,
        }
    }
}

/// Window over which a fixed-level run must show progress.
pub const STALL_WINDOW: usize = 200;

/// Infeasible splittings settle at a positive primal residual while the
/// multipliers grow without bound; a run whose best primal residual in the
/// last window is no better than half the best of the window before is
/// treated as stalled.
fn stalled(history: &[Residuals]) -> bool {
    if history.len() < 2 * STALL_WINDOW {
        return false;
    }
    let best = |w: &[Residuals]| w.iter().map(|r| r.primal).fold(f64::INFINITY, f64::min);
    let n = history.len();
    let recent = best(&history[n - STALL_WINDOW..]);
    let before = best(&history[n - 2 * STALL_WINDOW..n - STALL_WINDOW]);
    recent > 0.5 * before
}

fn stacked_steering(problem: &PicmvProblem) -> CMatrix {
    let targets = problem.targets().steering();
    let interference = problem.interference().steering();
    let m = problem.elements();
    let mut s = CMatrix::zeros(m, targets.ncols() + interference.ncols());
    s.columns_mut(0, targets.ncols()).copy_from(targets);
    s.columns_mut(targets.ncols(), interference.ncols())
        .copy_from(interference);
    s
}

/// Solves from a cold start.
pub fn solve(problem: &PicmvProblem, options: &SolverOptions) -> Result<Beamformer> {
    Ok(solve_with_state(problem, options, None)?.0)
}

/// Solves from `warm` when given, returning the final state for later reuse.
pub fn solve_with_state(
    problem: &PicmvProblem,
    options: &SolverOptions,
    warm: Option<AdmmState>,
) -> Result<(Beamformer, AdmmState)> {
    run_mode(problem, options, warm, LevelMode::Penalized)
}

pub(crate) fn run_mode(
    problem: &PicmvProblem,
    options: &SolverOptions,
    warm: Option<AdmmState>,
    mode: LevelMode,
) -> Result<(Beamformer, AdmmState)> {
    options.validate()?;
    let rho = options.rho_for(problem);
    let mut admm = match warm {
        Some(mut state) => {
            state.iteration = 0;
            Admm::with_state(problem, rho, mode, state)?
        }
        None => Admm::new(problem, rho, mode)?,
    };
    admm.set_bisection_tol(options.bisection_tol);
    let bf = admm.run(options.tol, options.max_iter)?;
    Ok((bf, admm.into_state()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{ArrayGeometry, Direction};
    use crate::problem::{check_solution_feasibility, AngleSetConfig, InterferenceSet, TargetSet};

    fn single_target(m: usize, r: HermitianMatrix, bound: f64) -> PicmvProblem {
        let g = ArrayGeometry::linear(m);
        let t = TargetSet::from_geometry(&g, vec![Direction::Linear(10.0)], vec![bound]).unwrap();
        PicmvProblem::new(r, t, InterferenceSet::empty(m), 0.0, 0.0).unwrap()
    }

    #[test]
    fn rank_one_system_rejected() {
        let p = single_target(4, HermitianMatrix::zeros(4), 0.0);
        let err = Admm::new(&p, 2.0, LevelMode::Penalized).err().unwrap();
        assert!(matches!(err, Error::Singular { .. }), "{err}");
    }

    #[test]
    fn first_sweep_projects_into_cones() {
        let g = ArrayGeometry::linear(6);
        let cfg = AngleSetConfig::default();
        let t = cfg.target_set(&g, Direction::Linear(0.0)).unwrap();
        let set = cfg
            .interference_set(&g, &[Direction::Linear(40.0), Direction::Linear(-50.0)])
            .unwrap();
        let p = PicmvProblem::new(HermitianMatrix::identity(6), t, set, 2.0, 0.05).unwrap();
        let mut admm = Admm::new(&p, 20.0, LevelMode::Penalized).unwrap();
        admm.iterate().unwrap();
        let st = admm.state();
        let nt = p.targets().len();
        for i in 0..nt {
            let v = (st.z[i] - Complex64::new(1.0, 0.0)).norm() + 0.05 * st.y_copies[i];
            assert!(v <= p.targets().bounds()[i] + 1e-12);
        }
        for i in nt..st.z.len() {
            let j = i - nt;
            let cap = st.t * p.interference().bounds()[j] / p.interference().column_weight(j);
            assert!(st.z[i].norm() + 0.05 * st.y_copies[i] <= cap + 1e-12);
        }
    }

    #[test]
    fn residuals_vanish_at_consensus() {
        let p = single_target(3, HermitianMatrix::identity(3), 0.5);
        let mut admm = Admm::new(&p, 1.0, LevelMode::Penalized).unwrap();
        for _ in 0..5 {
            admm.iterate().unwrap();
        }
        let same = admm.state().clone();
        let res = admm.residuals(&same);
        assert_eq!(res.dual, 0.0);
    }

    #[test]
    fn converged_solution_is_feasible() {
        let g = ArrayGeometry::linear(8);
        let cfg = AngleSetConfig::default();
        let t = cfg.target_set(&g, Direction::Linear(5.0)).unwrap();
        let set = cfg.interference_set(&g, &[Direction::Linear(-35.0)]).unwrap();
        let p = PicmvProblem::new(HermitianMatrix::identity(8), t, set, 1.0, 0.01).unwrap();
        let bf = solve(&p, &SolverOptions {
            max_iter: 20_000,
            ..SolverOptions::default()
        })
        .unwrap();
        assert!(bf.converged, "{:?}", bf.residuals);
        let rep = check_solution_feasibility(&p, &bf.weights, &bf.epsilon, 1e-4).unwrap();
        assert!(rep.feasible, "{rep:?}");
        for (lo, hi) in bf.epsilon_lower.iter().zip(&bf.epsilon) {
            assert!(*lo <= hi + 1e-4);
        }
    }

    #[test]
    fn warm_start_shape_checked() {
        let p = single_target(3, HermitianMatrix::identity(3), 0.5);
        let bad = AdmmState::zeros(4, 1);
        assert!(Admm::with_state(&p, 1.0, LevelMode::Penalized, bad).is_err());
    }
}

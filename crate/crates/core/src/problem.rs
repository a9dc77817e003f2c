//! Problem instances for the penalized inequality-constrained minimum variance
//! (P-ICMV) beamformer
//!
//! ```text
//! min_{w, ε}  wᴴRw + μ·max_k γₖεₖ
//! s.t.        |wᴴa_θ − 1| + δ‖w‖ ≤ c_θ          θ ∈ Θ
//!             |wᴴa_φ| + δ‖w‖ ≤ εₖ·c_φ           φ ∈ Φₖ, k = 1..K
//! ```

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{steering_matrix, ArrayGeometry, Direction};
use crate::error::{Error, Result};
use crate::linalg::{capon_spectrum, inner, CMatrix, CVector, HermitianMatrix};

/// Condition number of `AᴴA` above which the target steering vectors are
/// treated as linearly dependent.
pub const MAX_TARGET_CONDITION: f64 = 1e12;

fn check_bounds(bounds: &[f64], strict: bool, what: &str) -> Result<()> {
    for &c in bounds {
        let ok = if strict { c > 0.0 } else { c >= 0.0 };
        if !(ok && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{what} bound {c} must be {}",
                if strict { "positive" } else { "non-negative" }
            )));
        }
    }
    Ok(())
}

fn check_columns(steering: &CMatrix, directions: &[Direction], bounds: &[f64]) -> Result<()> {
    if steering.ncols() != directions.len() || bounds.len() != directions.len() {
        return Err(Error::Dimension(format!(
            "{} directions, {} steering vectors, {} bounds",
            directions.len(),
            steering.ncols(),
            bounds.len()
        )));
    }
    Ok(())
}

/// Distortion constraints protecting the target, one per angle in Θ.
#[derive(Debug, Clone)]
pub struct TargetSet {
    directions: Vec<Direction>,
    steering: CMatrix,
    bounds: Vec<f64>,
}

impl TargetSet {
    pub fn new(directions: Vec<Direction>, steering: CMatrix, bounds: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Empty("target angle set"));
        }
        check_columns(&steering, &directions, &bounds)?;
        check_bounds(&bounds, false, "target")?;
        Ok(Self {
            directions,
            steering,
            bounds,
        })
    }

    pub fn from_geometry(
        geometry: &ArrayGeometry,
        directions: Vec<Direction>,
        bounds: Vec<f64>,
    ) -> Result<Self> {
        let steering = steering_matrix(geometry, &directions)?;
        Self::new(directions, steering, bounds)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn elements(&self) -> usize {
        self.steering.nrows()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn steering(&self) -> &CMatrix {
        &self.steering
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }
}

/// Input description of one interference group Φₖ.
#[derive(Debug, Clone)]
pub struct InterferenceGroup {
    pub directions: Vec<Direction>,
    pub steering: CMatrix,
    pub bounds: Vec<f64>,
    pub weight: f64,
}

impl InterferenceGroup {
    pub fn from_geometry(
        geometry: &ArrayGeometry,
        directions: Vec<Direction>,
        bounds: Vec<f64>,
        weight: f64,
    ) -> Result<Self> {
        let steering = steering_matrix(geometry, &directions)?;
        Ok(Self {
            directions,
            steering,
            bounds,
            weight,
        })
    }
}

/// All interference constraints, stored as one steering matrix whose columns
/// are grouped into contiguous ranges.
#[derive(Debug, Clone)]
pub struct InterferenceSet {
    directions: Vec<Direction>,
    steering: CMatrix,
    bounds: Vec<f64>,
    ranges: Vec<Range<usize>>,
    group_of: Vec<usize>,
    weights: Vec<f64>,
}

impl InterferenceSet {
    pub fn empty(elements: usize) -> Self {
        Self {
            directions: vec![],
            steering: CMatrix::zeros(elements, 0),
            bounds: vec![],
            ranges: vec![],
            group_of: vec![],
            weights: vec![],
        }
    }

    pub fn from_groups(elements: usize, groups: Vec<InterferenceGroup>) -> Result<Self> {
        let mut directions = Vec::new();
        let mut bounds = Vec::new();
        let mut ranges = Vec::new();
        let mut weights = Vec::new();
        let mut columns = Vec::new();
        for g in &groups {
            if g.directions.is_empty() {
                return Err(Error::Empty("interference group"));
            }
            check_columns(&g.steering, &g.directions, &g.bounds)?;
            if g.steering.nrows() != elements {
                return Err(Error::Dimension(format!(
                    "interference steering vectors have length {}, expected {elements}",
                    g.steering.nrows()
                )));
            }
            check_bounds(&g.bounds, true, "interference")?;
            if !(g.weight > 0.0 && g.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "group weight {} must be positive",
                    g.weight
                )));
            }
            let start = directions.len();
            directions.extend_from_slice(&g.directions);
            bounds.extend_from_slice(&g.bounds);
            columns.extend(g.steering.column_iter().map(|c| c.into_owned()));
            ranges.push(start..directions.len());
            weights.push(g.weight);
        }
        let steering = if columns.is_empty() {
            CMatrix::zeros(elements, 0)
        } else {
            CMatrix::from_columns(&columns)
        };
        let group_of = ranges
            .iter()
            .enumerate()
            .flat_map(|(k, r)| r.clone().map(move |_| k))
            .collect();
        Ok(Self {
            directions,
            steering,
            bounds,
            ranges,
            group_of,
            weights,
        })
    }

    /// Every direction forms its own group with unit weight, so the penalty
    /// acts on the largest per-direction level.
    pub fn singletons(directions: Vec<Direction>, steering: CMatrix, bounds: Vec<f64>) -> Result<Self> {
        check_columns(&steering, &directions, &bounds)?;
        check_bounds(&bounds, true, "interference")?;
        let n = directions.len();
        Ok(Self {
            directions,
            steering,
            bounds,
            ranges: (0..n).map(|i| i..i + 1).collect(),
            group_of: (0..n).collect(),
            weights: vec![1.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn groups(&self) -> usize {
        self.ranges.len()
    }

    pub fn group_range(&self, k: usize) -> Range<usize> {
        self.ranges[k].clone()
    }

    pub fn group_of(&self, column: usize) -> usize {
        self.group_of[column]
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn steering(&self) -> &CMatrix {
        &self.steering
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight γₖ of the group owning `column`.
    pub fn column_weight(&self, column: usize) -> f64 {
        self.weights[self.group_of[column]]
    }
}

#[derive(Debug, Clone)]
pub struct PicmvProblem {
    r: HermitianMatrix,
    targets: TargetSet,
    interference: InterferenceSet,
    mu: f64,
    delta: f64,
}

impl PicmvProblem {
    pub fn new(
        r: HermitianMatrix,
        targets: TargetSet,
        interference: InterferenceSet,
        mu: f64,
        delta: f64,
    ) -> Result<Self> {
        let m = r.dim();
        if targets.elements() != m || interference.steering.nrows() != m {
            return Err(Error::Dimension(format!(
                "covariance is {m}x{m} but steering vectors have length {} / {}",
                targets.elements(),
                interference.steering.nrows()
            )));
        }
        for (what, v) in [("mu", mu), ("delta", delta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{what} must be non-negative, got {v}")));
            }
        }
        let is_zero = r.matrix().iter().all(|c| *c == Complex64::from(0.0));
        if !is_zero {
            let eig = r.eig();
            if eig.min_value() < -1e-10 * eig.max_value().abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "covariance is not positive semidefinite (min eigenvalue {:.3e})",
                    eig.min_value()
                )));
            }
        }
        Ok(Self {
            r,
            targets,
            interference,
            mu,
            delta,
        })
    }

    pub fn elements(&self) -> usize {
        self.r.dim()
    }

    pub fn covariance(&self) -> &HermitianMatrix {
        &self.r
    }

    pub fn targets(&self) -> &TargetSet {
        &self.targets
    }

    pub fn interference(&self) -> &InterferenceSet {
        &self.interference
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn constraint_count(&self) -> usize {
        self.targets.len() + self.interference.len()
    }

    /// `wᴴRw + μ·max_k γₖεₖ`.
    pub fn objective(&self, w: &CVector, epsilon: &[f64]) -> f64 {
        let penalty = epsilon
            .iter()
            .zip(self.interference.weights())
            .map(|(e, g)| g * e)
            .fold(0.0_f64, f64::max);
        self.r.quadratic_form(w) + self.mu * penalty
    }

    /// Smallest feasible level per group: `max_{φ∈Φₖ} (|wᴴa_φ| + δ‖w‖)/c_φ`.
    pub fn minimal_epsilon(&self, w: &CVector) -> Vec<f64> {
        let norm = w.norm();
        (0..self.interference.groups())
            .map(|k| {
                self.interference
                    .group_range(k)
                    .map(|i| {
                        let a = self.interference.steering.column(i);
                        (w.dotc(&a).norm() + self.delta * norm) / self.interference.bounds[i]
                    })
                    .fold(0.0_f64, f64::max)
            })
            .collect()
    }
}

/// Largest `δ` for which the problem is guaranteed feasible:
/// `min_θ c_θ / sqrt(1ᴴ(AᴴA)⁻¹1)`.
pub fn feasibility_bound(targets: &TargetSet) -> Result<f64> {
    let gram = target_gram(targets)?;
    let ones = CVector::from_element(targets.len(), Complex64::from(1.0));
    let q = gram.eig().inverse_quadratic(&ones);
    let c_min = targets.bounds().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(c_min / q.sqrt())
}

/// The minimum-norm beamformer with unit response on every target angle,
/// `A(AᴴA)⁻¹1`; it satisfies all target constraints whenever
/// `δ ≤ feasibility_bound`.
pub fn feasibility_witness(targets: &TargetSet) -> Result<CVector> {
    let gram = target_gram(targets)?;
    let ones = CVector::from_element(targets.len(), Complex64::from(1.0));
    let coeffs = gram.eig().solve(&ones);
    Ok(targets.steering() * coeffs)
}

fn target_gram(targets: &TargetSet) -> Result<HermitianMatrix> {
    let a = targets.steering();
    let gram = HermitianMatrix::new(a.ad_mul(a))?;
    let eig = gram.eig();
    let condition = eig.max_value() / eig.min_value().max(0.0);
    if !(condition <= MAX_TARGET_CONDITION) {
        let (i, j) = most_collinear_pair(a);
        return Err(Error::RankDeficient {
            condition,
            first: targets.directions()[i].to_string(),
            second: targets.directions()[j].to_string(),
        });
    }
    Ok(gram)
}

fn most_collinear_pair(a: &CMatrix) -> (usize, usize) {
    let n = a.ncols();
    let mut best = (0, n.saturating_sub(1).min(1), -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let (ai, aj) = (a.column(i), a.column(j));
            let cos = ai.dotc(&aj).norm() / (ai.norm() * aj.norm());
            if cos > best.2 {
                best = (i, j, cos);
            }
        }
    }
    (best.0, best.1)
}

/// Sets `c_φ` and `γₖ` from the Capon spectrum `σ̂_φ² = 1/(a_φᴴR⁻¹a_φ)`:
/// `c_φ = σ̂_φ⁻¹ / max_{Φₖ} σ̂⁻¹` and `γₖ = βₖ / max βₖ'` with
/// `βₖ = Σ_{Φₖ} σ̂_φ²`.
pub fn auto_tune_weights(r: &HermitianMatrix, set: &InterferenceSet) -> Result<InterferenceSet> {
    let powers = set
        .steering
        .column_iter()
        .map(|a| capon_spectrum(r, &a.into_owned()))
        .collect::<Result<Vec<_>>>()?;
    let mut tuned = set.clone();
    let mut betas = Vec::with_capacity(set.groups());
    for k in 0..set.groups() {
        let range = set.group_range(k);
        let inv_amp: Vec<f64> = range.clone().map(|i| powers[i].sqrt().recip()).collect();
        let peak = inv_amp.iter().copied().fold(0.0_f64, f64::max);
        for (i, v) in range.clone().zip(&inv_amp) {
            tuned.bounds[i] = v / peak;
        }
        betas.push(range.map(|i| powers[i]).sum::<f64>());
    }
    let beta_max = betas.iter().copied().fold(0.0_f64, f64::max);
    tuned.weights = betas.iter().map(|b| b / beta_max).collect();
    Ok(tuned)
}

/// Largest signed constraint excesses of a candidate `(w, ε)`; negative values
/// are slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub target_violation: f64,
    pub interference_violation: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.target_violation.max(self.interference_violation)
    }
}

pub fn check_solution_feasibility(
    p: &PicmvProblem,
    w: &CVector,
    epsilon: &[f64],
    tol: f64,
) -> Result<FeasibilityReport> {
    if w.len() != p.elements() {
        return Err(Error::Dimension(format!(
            "beamformer has {} weights, problem has {} elements",
            w.len(),
            p.elements()
        )));
    }
    if epsilon.len() != p.interference.groups() {
        return Err(Error::Dimension(format!(
            "{} levels for {} interference groups",
            epsilon.len(),
            p.interference.groups()
        )));
    }
    let robust = p.delta * w.norm();
    let one = Complex64::from(1.0);
    let target_violation = p
        .targets
        .steering
        .column_iter()
        .zip(&p.targets.bounds)
        .map(|(a, c)| (w.dotc(&a) - one).norm() + robust - c)
        .fold(f64::NEG_INFINITY, f64::max);
    let interference_violation = p
        .interference
        .steering
        .column_iter()
        .enumerate()
        .map(|(i, a)| {
            let eps = epsilon[p.interference.group_of(i)];
            w.dotc(&a).norm() + robust - eps * p.interference.bounds[i]
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let feasible = target_violation <= tol && interference_violation <= tol;
    Ok(FeasibilityReport {
        target_violation,
        interference_violation,
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind {
    /// `|wᴴa − 1| + δ‖w‖ ≤ bound`
    Target { bound: f64 },
    /// `|wᴴa| + δ‖w‖ ≤ bound`, with `bound = εₖc_φ`
    Interference { bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustCheck {
    /// The presumed constraint holds and so does the implied bound on the true
    /// response.
    Holds { true_response: f64, bound: f64 },
    /// The presumed constraint holds but the true response exceeds its bound.
    Violated { true_response: f64, bound: f64 },
    /// The presumed constraint itself is not satisfied (beyond `tol`).
    PremiseFailed,
    /// `‖ā − a‖ > δ`; nothing is implied.
    Skipped { perturbation: f64 },
}

/// Checks that a constraint written on the presumed steering vector bounds the
/// response on the true one whenever `‖ā − a‖ ≤ δ`.
pub fn robust_bound_check(
    w: &CVector,
    true_sv: &CVector,
    presumed_sv: &CVector,
    delta: f64,
    kind: ConstraintKind,
    tol: f64,
) -> RobustCheck {
    let perturbation = (true_sv - presumed_sv).norm();
    if perturbation > delta * (1.0 + 1e-12) {
        return RobustCheck::Skipped { perturbation };
    }
    let one = Complex64::from(1.0);
    let robust = delta * w.norm();
    let (presumed, truth, bound) = match kind {
        ConstraintKind::Target { bound } => (
            (inner(w, presumed_sv) - one).norm(),
            (inner(w, true_sv) - one).norm(),
            bound,
        ),
        ConstraintKind::Interference { bound } => {
            (inner(w, presumed_sv).norm(), inner(w, true_sv).norm(), bound)
        }
    };
    if presumed + robust > bound + tol {
        return RobustCheck::PremiseFailed;
    }
    if truth <= bound + tol {
        RobustCheck::Holds {
            true_response: truth,
            bound,
        }
    } else {
        RobustCheck::Violated {
            true_response: truth,
            bound,
        }
    }
}

/// Angle sets built around estimated directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSetConfig {
    /// Offsets in degrees defining Θ around the estimated target direction.
    pub target_offsets: Vec<f64>,
    /// `c_θ` for each target offset.
    pub target_bounds: Vec<f64>,
    /// Offsets in degrees defining each Φₖ around an estimated interferer.
    pub interference_offsets: Vec<f64>,
    /// Initial `c_φ`, used as-is when auto-tuning is off.
    #[serde(default = "unit")]
    pub interference_bound: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for AngleSetConfig {
    /// Θ = θ̂₀ + {−2°, …, 2°} with c_Θ = {0.6, 0.4, 0.2, 0.4, 0.6} and nine
    /// interference angles θ̂ₖ + {−4°, …, 4°}.
    fn default() -> Self {
        Self {
            target_offsets: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            target_bounds: vec![0.6, 0.4, 0.2, 0.4, 0.6],
            interference_offsets: (-4..=4).map(f64::from).collect(),
            interference_bound: 1.0,
        }
    }
}

fn clip_linear(d: Direction) -> Direction {
    match d {
        Direction::Linear(a) => Direction::Linear(a.clamp(-90.0, 90.0)),
        other => other,
    }
}

impl AngleSetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_offsets.is_empty() {
            return Err(Error::Empty("target offsets"));
        }
        if self.target_offsets.len() != self.target_bounds.len() {
            return Err(Error::Dimension(format!(
                "{} target offsets but {} target bounds",
                self.target_offsets.len(),
                self.target_bounds.len()
            )));
        }
        check_bounds(&self.target_bounds, false, "target")?;
        check_bounds(&[self.interference_bound], true, "interference")?;
        Ok(())
    }

    pub fn target_set(&self, geometry: &ArrayGeometry, estimate: Direction) -> Result<TargetSet> {
        self.validate()?;
        let dirs = self
            .target_offsets
            .iter()
            .map(|&o| clip_linear(estimate.offset(o)))
            .collect();
        TargetSet::from_geometry(geometry, dirs, self.target_bounds.clone())
    }

    pub fn interference_set(
        &self,
        geometry: &ArrayGeometry,
        estimates: &[Direction],
    ) -> Result<InterferenceSet> {
        self.validate()?;
        let groups = estimates
            .iter()
            .map(|e| {
                let dirs: Vec<_> = self
                    .interference_offsets
                    .iter()
                    .map(|&o| clip_linear(e.offset(o)))
                    .collect();
                let bounds = vec![self.interference_bound; dirs.len()];
                InterferenceGroup::from_geometry(geometry, dirs, bounds, 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        InterferenceSet::from_groups(geometry.elements(), groups)
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{seeded_rng, steering_matrix, ArrayGeometry, Calibration, Direction};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianMatrix};
use crate::problem::{check_solution_feasibility, feasibility_bound, InterferenceSet, PicmvProblem, TargetSet};
use crate::solver::{solve, Beamformer};

use super::adaptive::SolverSettings;
use super::output::format_sig;

/// A rectangular azimuth/elevation grid in degrees, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleGrid {
    pub azimuth: [f64; 2],
    pub elevation: [f64; 2],
    pub step: f64,
}

impl AngleGrid {
    /// The whole visible hemisphere.
    pub fn full(step: f64) -> Self {
        Self {
            azimuth: [0.0, 180.0],
            elevation: [-90.0, 90.0],
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a0, a1] = self.azimuth;
        let [e0, e1] = self.elevation;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {}", self.step)));
        }
        if !(a0 <= a1 && e0 <= e1) {
            return Err(Error::Empty("angle grid"));
        }
        Direction::planar(a0, e0).validate()?;
        Direction::planar(a1, e1).validate()
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        // Integer indexing keeps the grid free of accumulated rounding.
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    /// Grid points, elevation-major.
    pub fn directions(&self) -> Vec<Direction> {
        let az = Self::axis(self.azimuth[0], self.azimuth[1], self.step);
        Self::axis(self.elevation[0], self.elevation[1], self.step)
            .into_iter()
            .flat_map(|el| az.iter().map(move |&a| Direction::planar(a, el)))
            .collect()
    }
}

/// Every field defaults to the desk-scale setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub rows: usize,
    pub cols: usize,
    /// Main-lobe direction; must be planar.
    pub target: Direction,
    /// Θ spans `±half_width` steps of `target_step` degrees in each angle.
    pub target_half_width: usize,
    pub target_step: f64,
    /// `c_θ = target_bound_step·(steps off in azimuth + steps off in elevation + 1)`.
    pub target_bound_step: f64,
    /// Sidelobe region Φ.
    pub sidelobe: AngleGrid,
    pub sidelobe_bound: f64,
    pub mu: f64,
    pub delta: f64,
    pub solver: SolverSettings,
    /// Step of the full-hemisphere pattern grid.
    pub pattern_step: f64,
}

impl Default for SynthesisConfig {
    /// Desk scale: 10×10 array, 5° sidelobe grid, `δ = 1e-3`, `μ = 10`.
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            target: Direction::planar(90.0, 15.0),
            target_half_width: 1,
            target_step: 1.0,
            target_bound_step: 0.3,
            sidelobe: AngleGrid {
                azimuth: [0.0, 180.0],
                elevation: [-90.0, -10.0],
                step: 5.0,
            },
            sidelobe_bound: 0.1,
            mu: 10.0,
            delta: 1e-3,
            solver: SolverSettings {
                rho: Some(100.0),
                tol: 1e-7,
                max_iter: 20_000,
            },
            pattern_step: 5.0,
        }
    }
}

impl SynthesisConfig {
    /// The 30×30 array with 1° grids (14670 constraints). The iteration
    /// budget keeps one solve to about four minutes on a single core.
    pub fn full_scale(delta: f64) -> Self {
        let desk = Self::default();
        Self {
            rows: 30,
            cols: 30,
            sidelobe: AngleGrid {
                step: 1.0,
                ..desk.sidelobe
            },
            delta,
            solver: SolverSettings {
                max_iter: 1500,
                ..desk.solver
            },
            pattern_step: 1.0,
            ..desk
        }
    }

    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry::planar(self.rows, self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().validate()?;
        if !matches!(self.target, Direction::Planar { .. }) {
            return Err(Error::InvalidParameter("synthesis target must be a planar direction".into()));
        }
        self.target.validate()?;
        self.sidelobe.validate()?;
        AngleGrid::full(self.pattern_step).validate()?;
        if !(self.target_step > 0.0 && self.target_bound_step > 0.0 && self.sidelobe_bound > 0.0) {
            return Err(Error::InvalidParameter(
                "target step and constraint bounds must be positive".into(),
            ));
        }
        if !(self.mu >= 0.0 && self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu {} and delta {} must be non-negative",
                self.mu, self.delta
            )));
        }
        Ok(())
    }

    /// Θ with its per-angle bounds.
    pub fn target_set(&self) -> Result<TargetSet> {
        let Direction::Planar { azimuth, elevation } = self.target else {
            return Err(Error::InvalidParameter("synthesis target must be a planar direction".into()));
        };
        let h = self.target_half_width as i64;
        let mut dirs = Vec::new();
        let mut bounds = Vec::new();
        for de in -h..=h {
            for da in -h..=h {
                dirs.push(Direction::planar(
                    azimuth + da as f64 * self.target_step,
                    elevation + de as f64 * self.target_step,
                ));
                bounds.push(self.target_bound_step * (da.abs() + de.abs() + 1) as f64);
            }
        }
        TargetSet::from_geometry(&self.geometry(), dirs, bounds)
    }

    /// Φ, one singleton group per grid point.
    pub fn sidelobe_set(&self) -> Result<InterferenceSet> {
        let dirs = self.sidelobe.directions();
        let steering = steering_matrix(&self.geometry(), &dirs)?;
        let bounds = vec![self.sidelobe_bound; dirs.len()];
        InterferenceSet::singletons(dirs, steering, bounds)
    }

    pub fn problem(&self) -> Result<PicmvProblem> {
        self.validate()?;
        let m = self.rows * self.cols;
        PicmvProblem::new(HermitianMatrix::identity(m), self.target_set()?, self.sidelobe_set()?, self.mu, self.delta)
    }
}

/// Gain of a beamformer over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub directions: Vec<Direction>,
    /// `20·log10|wᴴa|` per direction.
    pub gain_db: Vec<f64>,
    /// Maximum gain over Φ.
    pub msl_db: f64,
    /// Mean power gain over Φ, in dB.
    pub asl_db: f64,
    pub norm: f64,
}

impl PatternResult {
    pub fn csv_header() -> [&'static str; 3] {
        ["azimuth", "elevation", "gain_db"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.directions
            .iter()
            .zip(&self.gain_db)
            .map(|(d, g)| {
                let (az, el) = match *d {
                    Direction::Planar { azimuth, elevation } => (azimuth, elevation),
                    Direction::Linear(a) => (a, 0.0),
                };
                vec![format_sig(az), format_sig(el), format_sig(*g)]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub pattern: PatternResult,
    pub beamformer: Beamformer,
    /// Set when `δ` exceeds the sufficient feasibility bound.
    pub warning: Option<String>,
    /// Largest constraint violation of the returned weights.
    pub max_violation: f64,
}

/// `20·log10|wᴴa_d|` for each direction.
pub fn beampattern(w: &CVector, geometry: &ArrayGeometry, directions: &[Direction]) -> Result<Vec<f64>> {
    if directions.is_empty() {
        return Err(Error::Empty("pattern grid"));
    }
    let a = steering_matrix(geometry, directions)?;
    responses_db(w, &a)
}

fn responses_db(w: &CVector, steering: &CMatrix) -> Result<Vec<f64>> {
    if w.len() != steering.nrows() {
        return Err(Error::Dimension(format!(
            "{} weights for {} elements",
            w.len(),
            steering.nrows()
        )));
    }
    Ok(steering.ad_mul(w).iter().map(|r| 20.0 * r.norm().log10()).collect())
}

/// MSL and ASL from gains in dB.
fn sidelobe_levels(gains_db: &[f64]) -> (f64, f64) {
    let msl = gains_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let power = gains_db.iter().map(|g| 10f64.powf(g / 10.0)).sum::<f64>() / gains_db.len() as f64;
    (msl, 10.0 * power.log10())
}

pub fn run_synthesis(cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    let problem = cfg.problem()?;
    let bound = feasibility_bound(problem.targets())?;
    let warning = (cfg.delta > bound).then(|| {
        format!(
            "delta {} exceeds the sufficient feasibility bound {bound:.4}; the problem may be infeasible",
            cfg.delta
        )
    });
    let bf = solve(&problem, &cfg.solver.options())?;
    let w = &bf.weights;
    let report = check_solution_feasibility(&problem, w, &bf.epsilon, 1e-4)?;

    let geometry = cfg.geometry();
    let sidelobe_gains = responses_db(w, problem.interference().steering())?;
    let (msl_db, asl_db) = sidelobe_levels(&sidelobe_gains);
    let directions = AngleGrid::full(cfg.pattern_step).directions();
    let gain_db = beampattern(w, &geometry, &directions)?;
    Ok(SynthesisResult {
        pattern: PatternResult {
            directions,
            gain_db,
            msl_db,
            asl_db,
            norm: w.norm(),
        },
        max_violation: report.max_violation(),
        beamformer: bf,
        warning,
    })
}

/// Sidelobe levels of a fixed design under random calibration errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedRow {
    pub kappa: f64,
    /// Means over runs of the per-run levels in dB.
    pub msl_db: f64,
    pub asl_db: f64,
}

impl PerturbedRow {
    pub fn csv_header() -> [&'static str; 3] {
        ["kappa", "msl_db", "asl_db"]
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![format_sig(self.kappa), format_sig(self.msl_db), format_sig(self.asl_db)]
    }
}

/// For each `κ`, draws `runs` element calibrations with gains `N(1, κ²)` and
/// phases `N(0, (κπ/2)²)` and averages the true-response MSL and ASL over Φ.
/// One calibration perturbs every steering vector of the array. Run `i`
/// uses random stream `i` for every `κ`.
pub fn run_perturbed_sidelobes(
    w: &CVector,
    geometry: &ArrayGeometry,
    sidelobe: &[Direction],
    kappas: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Vec<PerturbedRow>> {
    if sidelobe.is_empty() {
        return Err(Error::Empty("sidelobe region"));
    }
    if runs == 0 {
        return Err(Error::InvalidParameter("at least one run is required".into()));
    }
    let steering = steering_matrix(geometry, sidelobe)?;
    let m = geometry.elements();
    kappas
        .iter()
        .map(|&kappa| {
            let levels: Vec<(f64, f64)> = (0..runs as u64)
                .into_par_iter()
                .map(|run| {
                    let cal = Calibration::draw_kappa(m, kappa, &mut seeded_rng(seed, run))?;
                    Ok(sidelobe_levels(&responses_db(&cal.fold_into_weights(w), &steering)?))
                })
                .collect::<Result<_>>()?;
            let n = levels.len() as f64;
            Ok(PerturbedRow {
                kappa,
                msl_db: levels.iter().map(|l| l.0).sum::<f64>() / n,
                asl_db: levels.iter().map(|l| l.1).sum::<f64>() / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::steering_vector;
    use crate::baselines::{lcmv, LinearConstraints};
    use nalgebra::Complex;

    #[test]
    fn grid_counts() {
        let g = AngleGrid {
            azimuth: [0.0, 180.0],
            elevation: [-90.0, -10.0],
            step: 1.0,
        };
        assert_eq!(g.directions().len(), 181 * 81);
        assert_eq!(SynthesisConfig::default().sidelobe.directions().len(), 37 * 17);
        assert!(AngleGrid { step: 0.0, ..g }.validate().is_err());
    }

    #[test]
    fn full_scale_constraint_count() {
        let cfg = SynthesisConfig::full_scale(1e-3);
        let targets = cfg.target_set().unwrap();
        assert_eq!(targets.len() + cfg.sidelobe.directions().len(), 14670);
        let mut bounds = targets.bounds().to_vec();
        bounds.sort_by(f64::total_cmp);
        let expected = [0.3, 0.6, 0.6, 0.6, 0.6, 0.9, 0.9, 0.9, 0.9];
        for (b, e) in bounds.iter().zip(expected) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn matched_filter_pattern() {
        let g = ArrayGeometry::planar(4, 5);
        let d0 = Direction::planar(90.0, 15.0);
        let w = steering_vector(&g, &d0).unwrap() / Complex::from(20.0);
        let gains = beampattern(&w, &g, &[d0]).unwrap();
        assert!(gains[0].abs() < 1e-12);
        assert!(beampattern(&w, &g, &[]).is_err());
    }

    #[test]
    fn constrained_null_is_deep() {
        let g = ArrayGeometry::planar(4, 4);
        let target = Direction::planar(90.0, 15.0);
        let jammer = Direction::planar(40.0, -30.0);
        let c = steering_matrix(&g, &[target, jammer]).unwrap();
        let response = CVector::from_vec(vec![Complex::from(1.0), Complex::from(0.0)]);
        let w = lcmv(&HermitianMatrix::identity(16), &LinearConstraints::new(c, response).unwrap()).unwrap();
        assert!(beampattern(&w, &g, &[jammer]).unwrap()[0] <= -200.0);
        assert!(beampattern(&w, &g, &[target]).unwrap()[0].abs() < 1e-9);
    }

    #[test]
    fn symmetric_pattern() {
        // A real symmetric taper on a planar array gives a pattern symmetric
        // about azimuth 90°.
        let g = ArrayGeometry::planar(5, 4);
        let w = CVector::from_fn(20, |i, _| Complex::from(1.0 + ((i / 4) as f64 - 2.0).abs()));
        for (az, el) in [(30.0, 10.0), (70.0, -40.0), (5.0, 60.0)] {
            let left = beampattern(&w, &g, &[Direction::planar(az, el)]).unwrap()[0];
            let right = beampattern(&w, &g, &[Direction::planar(180.0 - az, el)]).unwrap()[0];
            assert!((left - right).abs() < 1e-9);
        }
    }

    #[test]
    fn levels() {
        let (msl, asl) = sidelobe_levels(&[-10.0, -20.0]);
        assert_eq!(msl, -10.0);
        assert!((asl - 10.0 * (0.055f64).log10()).abs() < 1e-12);
        assert!(msl >= asl);
    }

    #[test]
    fn zero_kappa_is_unperturbed() {
        let g = ArrayGeometry::planar(3, 3);
        let dirs = AngleGrid {
            azimuth: [0.0, 180.0],
            elevation: [-90.0, -10.0],
            step: 20.0,
        }
        .directions();
        let w = steering_vector(&g, &Direction::planar(90.0, 15.0)).unwrap();
        let (msl, asl) = sidelobe_levels(&beampattern(&w, &g, &dirs).unwrap());
        let rows = run_perturbed_sidelobes(&w, &g, &dirs, &[0.0, 0.1], 5, 1).unwrap();
        assert!((rows[0].msl_db - msl).abs() < 1e-9);
        assert!((rows[0].asl_db - asl).abs() < 1e-9);
        assert_ne!(rows[1].msl_db, msl);
        assert_eq!(rows, run_perturbed_sidelobes(&w, &g, &dirs, &[0.0, 0.1], 5, 1).unwrap());
    }

    #[test]
    fn tiny_synthesis_meets_constraints() {
        let cfg = SynthesisConfig {
            rows: 4,
            cols: 4,
            target_step: 5.0,
            sidelobe: AngleGrid {
                step: 20.0,
                ..SynthesisConfig::default().sidelobe
            },
            pattern_step: 30.0,
            ..SynthesisConfig::default()
        };
        let res = run_synthesis(&cfg).unwrap();
        assert!(res.warning.is_none());
        assert!(res.beamformer.converged);
        assert!(res.max_violation <= 1e-5, "{}", res.max_violation);
        assert!(res.pattern.msl_db >= res.pattern.asl_db);
        let too_big = SynthesisConfig { delta: 10.0, ..cfg };
        assert!(run_synthesis(&too_big).map(|r| r.warning.is_some()).unwrap_or(true));
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{db_to_power, seeded_rng, steering_vector, Scenario};
use crate::baselines::{default_loading, lsmi, mvdr};
use crate::error::{Error, Result};
use crate::linalg::sample_covariance;
use crate::problem::{auto_tune_weights, check_solution_feasibility, AngleSetConfig, PicmvProblem};
use crate::solver::{solve, SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};

use super::output::format_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    /// Target SNR in dB.
    Snr,
    Snapshots,
    /// Penalty as a multiple of `λ_max(R̂)`.
    Mu,
    Delta,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::Snapshots => "snapshots",
            Self::Mu => "mu",
            Self::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamformerKind {
    Picmv,
    /// Diagonal loading with `10·λ_min(R̂)`.
    Lsmi,
    /// Sample-matrix MVDR on the presumed target response.
    Mvdr,
}

impl BeamformerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Picmv => "picmv",
            Self::Lsmi => "lsmi",
            Self::Mvdr => "mvdr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// `None` selects `10μ`.
    pub rho: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            rho: self.rho,
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        }
    }
}

/// Everything a single Monte Carlo run needs apart from the swept value.
/// Missing fields take the antenna-array defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSettings {
    pub scenario: Scenario,
    pub snapshots: usize,
    /// `μ = mu_factor·λ_max(R̂)`.
    pub mu_factor: f64,
    pub delta: f64,
    /// Whether the training snapshots contain the target.
    pub target_present: bool,
    pub angles: AngleSetConfig,
    pub solver: SolverSettings,
}

impl Default for AdaptiveSettings {
    /// The antenna-array setting at 15 dB SNR with 40 snapshots.
    fn default() -> Self {
        Self {
            scenario: Scenario::antenna_benchmark(15.0),
            snapshots: 40,
            mu_factor: 10.0,
            delta: 1e-2,
            target_present: true,
            angles: AngleSetConfig::default(),
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub settings: AdaptiveSettings,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_beamformers")]
    pub beamformers: Vec<BeamformerKind>,
}

fn all_beamformers() -> Vec<BeamformerKind> {
    vec![BeamformerKind::Picmv, BeamformerKind::Lsmi, BeamformerKind::Mvdr]
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Empty("sweep values"));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter("at least one Monte Carlo run is required".into()));
        }
        if self.beamformers.is_empty() {
            return Err(Error::Empty("beamformer list"));
        }
        for &v in &self.values {
            let ok = match self.parameter {
                SweepParameter::Snr => v.is_finite(),
                SweepParameter::Snapshots => v >= 1.0 && v.fract() == 0.0,
                SweepParameter::Mu | SweepParameter::Delta => v >= 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "invalid {} value {v}",
                    self.parameter.name()
                )));
            }
        }
        let s = &self.settings;
        s.scenario.validate()?;
        s.angles.validate()?;
        if s.snapshots == 0 {
            return Err(Error::InvalidParameter("snapshot count must be positive".into()));
        }
        if !(s.mu_factor >= 0.0 && s.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu_factor {} and delta {} must be non-negative",
                s.mu_factor, s.delta
            )));
        }
        if !(s.solver.tol > 0.0 && s.solver.max_iter > 0) {
            return Err(Error::InvalidParameter("solver tolerance and iteration budget must be positive".into()));
        }
        Ok(())
    }

    fn settings_at(&self, value: f64) -> AdaptiveSettings {
        let mut s = self.settings.clone();
        match self.parameter {
            SweepParameter::Snr => s.scenario.target.power = s.scenario.noise_power * db_to_power(value),
            SweepParameter::Snapshots => s.snapshots = value as usize,
            SweepParameter::Mu => s.mu_factor = value,
            SweepParameter::Delta => s.delta = value,
        }
        s
    }
}

/// Mean and spread of one beamformer's output SINR at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Beamformer name, or `optimal` for the clairvoyant reference.
    pub beamformer: &'static str,
    pub value: f64,
    /// Mean of the per-run SINR in dB.
    pub mean_sinr_db: f64,
    pub std_sinr_db: f64,
    /// Runs entering the mean.
    pub runs: usize,
    /// Runs whose beamformer could not be computed.
    pub failures: usize,
    /// P-ICMV runs that hit the iteration budget.
    pub unconverged: usize,
    /// P-ICMV runs whose solution violates a constraint by more than 1e-4.
    pub infeasible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, beamformer: &str, value: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.beamformer == beamformer && r.value == value)
    }

    pub fn csv_header() -> [&'static str; 9] {
        [
            "beamformer",
            "parameter",
            "value",
            "mean_sinr_db",
            "std_sinr_db",
            "runs",
            "failures",
            "unconverged",
            "infeasible",
        ]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.beamformer.to_string(),
                    self.parameter.name().to_string(),
                    format_sig(r.value),
                    format_sig(r.mean_sinr_db),
                    format_sig(r.std_sinr_db),
                    r.runs.to_string(),
                    r.failures.to_string(),
                    r.unconverged.to_string(),
                    r.infeasible.to_string(),
                ]
            })
            .collect()
    }
}

/// What one Monte Carlo run produced.
struct RunOutcome {
    optimal: f64,
    /// Per configured beamformer; `None` on failure.
    sinr: Vec<Option<f64>>,
    unconverged: bool,
    infeasible: bool,
}

fn run_once(settings: &AdaptiveSettings, beamformers: &[BeamformerKind], seed: u64, run: u64) -> Result<RunOutcome> {
    let sc = &settings.scenario;
    let mut rng = seeded_rng(seed, run);
    let real = sc.realize(&mut rng)?;
    let snaps = sc.generate_snapshots(&real, settings.snapshots, settings.target_present, &mut rng)?;
    let r = sample_covariance(&snaps)?;
    let presumed = steering_vector(&sc.geometry, &real.estimated_target)?;
    let mut unconverged = false;
    let mut infeasible = false;
    let mut sinr = Vec::with_capacity(beamformers.len());
    for kind in beamformers {
        let weights = match kind {
            BeamformerKind::Picmv => {
                let targets = settings.angles.target_set(&sc.geometry, real.estimated_target);
                let set = settings
                    .angles
                    .interference_set(&sc.geometry, &real.estimated_interferers)
                    .and_then(|s| auto_tune_weights(&r, &s));
                let mu = settings.mu_factor * r.eig().max_value();
                let problem = targets.and_then(|t| set.and_then(|s| PicmvProblem::new(r.clone(), t, s, mu, settings.delta)));
                problem.and_then(|p| {
                    let bf = solve(&p, &settings.solver.options())?;
                    unconverged = !bf.converged;
                    infeasible = !check_solution_feasibility(&p, &bf.weights, &bf.epsilon, 1e-4)?.feasible;
                    Ok(bf.weights)
                })
            }
            BeamformerKind::Lsmi => lsmi(&r, &presumed, default_loading(&r)),
            BeamformerKind::Mvdr => mvdr(&r, &presumed),
        };
        sinr.push(weights.and_then(|w| sc.output_sinr(&real, &w)).ok());
    }
    Ok(RunOutcome {
        optimal: sc.optimal_sinr(&real)?,
        sinr,
        unconverged,
        infeasible,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the Monte Carlo sweep. Run `i` uses random stream `i` at every sweep
/// value, so the values are compared on common draws. Runs execute in
/// parallel; results are gathered in run order, which keeps the table
/// independent of scheduling.
pub fn run_adaptive_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &value in &cfg.values {
        let settings = cfg.settings_at(value);
        let outcomes: Vec<RunOutcome> = (0..cfg.runs as u64)
            .into_par_iter()
            .map(|run| run_once(&settings, &cfg.beamformers, cfg.seed, run))
            .collect::<Result<_>>()?;
        let optimal: Vec<f64> = outcomes.iter().map(|o| o.optimal).collect();
        let (mean, std) = mean_std(&optimal);
        rows.push(SweepRow {
            beamformer: "optimal",
            value,
            mean_sinr_db: mean,
            std_sinr_db: std,
            runs: optimal.len(),
            failures: 0,
            unconverged: 0,
            infeasible: 0,
        });
        for (k, kind) in cfg.beamformers.iter().enumerate() {
            let got: Vec<f64> = outcomes.iter().filter_map(|o| o.sinr[k]).collect();
            let (mean, std) = mean_std(&got);
            let picmv = *kind == BeamformerKind::Picmv;
            rows.push(SweepRow {
                beamformer: kind.name(),
                value,
                mean_sinr_db: mean,
                std_sinr_db: std,
                runs: got.len(),
                failures: outcomes.len() - got.len(),
                unconverged: if picmv { outcomes.iter().filter(|o| o.unconverged).count() } else { 0 },
                infeasible: if picmv { outcomes.iter().filter(|o| o.infeasible).count() } else { 0 },
            });
        }
    }
    Ok(SweepTable {
        parameter: cfg.parameter,
        rows,
    })
}

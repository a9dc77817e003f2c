//! JSON configuration files. Unknown keys are rejected everywhere.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use picmv::array::{seeded_rng, Realization, Scenario};
use picmv::experiments::{SolverSettings, SynthesisConfig};
use picmv::linalg::{sample_covariance, HermitianMatrix};
use picmv::problem::{auto_tune_weights, AngleSetConfig, InterferenceSet, PicmvProblem};

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Where the covariance of a single solve comes from.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    /// Interference-plus-noise covariance of the realized scene.
    #[default]
    True,
    /// Sample covariance of simulated snapshots.
    Sample {
        snapshots: usize,
        #[serde(default = "yes")]
        target_present: bool,
    },
    /// `R = I`.
    Identity,
}

fn yes() -> bool {
    true
}

fn ten() -> f64 {
    10.0
}

fn one_percent() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "benchmark")]
    pub scenario: Scenario,
    #[serde(default)]
    pub covariance: CovarianceSpec,
    /// Draw DoA and calibration errors; otherwise the scene is error-free.
    #[serde(default = "yes")]
    pub random_errors: bool,
    #[serde(default)]
    pub angles: AngleSetConfig,
    /// Set `c_φ` and `γₖ` from the Capon spectrum of the covariance.
    #[serde(default = "yes")]
    pub auto_tune: bool,
    /// `μ = mu_factor·λ_max(R)`.
    #[serde(default = "ten")]
    pub mu_factor: f64,
    #[serde(default = "one_percent")]
    pub delta: f64,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub seed: u64,
}

fn benchmark() -> Scenario {
    Scenario::antenna_benchmark(15.0)
}

impl Default for SolveConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

pub struct Built {
    pub problem: PicmvProblem,
    pub realization: Realization,
}

impl SolveConfig {
    pub fn build(&self) -> Result<Built, CliError> {
        if !(self.mu_factor >= 0.0 && self.delta >= 0.0) {
            return Err(CliError::Config(format!(
                "mu_factor {} and delta {} must be non-negative",
                self.mu_factor, self.delta
            )));
        }
        let sc = &self.scenario;
        let mut rng = seeded_rng(self.seed, 0);
        let real = if self.random_errors {
            sc.realize(&mut rng)?
        } else {
            sc.nominal()?
        };
        let r = match self.covariance {
            CovarianceSpec::True => sc.interference_plus_noise(&real),
            CovarianceSpec::Sample {
                snapshots,
                target_present,
            } => sample_covariance(&sc.generate_snapshots(&real, snapshots, target_present, &mut rng)?)?,
            CovarianceSpec::Identity => HermitianMatrix::identity(sc.geometry.elements()),
        };
        let targets = self.angles.target_set(&sc.geometry, real.estimated_target)?;
        let mut set = if self.angles.interference_offsets.is_empty() {
            InterferenceSet::empty(sc.geometry.elements())
        } else {
            self.angles.interference_set(&sc.geometry, &real.estimated_interferers)?
        };
        if self.auto_tune && !set.is_empty() {
            set = auto_tune_weights(&r, &set)?;
        }
        let mu = self.mu_factor * r.eig().max_value();
        let problem = PicmvProblem::new(r, targets, set, mu, self.delta)?;
        Ok(Built {
            problem,
            realization: real,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub kappas: Vec<f64>,
    #[serde(default = "hundred")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn hundred() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRun {
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    /// Optional sidelobe study under random calibration errors.
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

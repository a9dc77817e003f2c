//! Scenario runners: Monte Carlo output-SINR sweeps for adaptive
//! beamforming and planar beampattern synthesis.

mod adaptive;
mod output;
mod synthesis;

pub use adaptive::{
    run_adaptive_sweep, AdaptiveSettings, BeamformerKind, SolverSettings, SweepConfig, SweepParameter, SweepRow,
    SweepTable,
};
pub use output::{format_sig, write_csv};
pub use synthesis::{
    beampattern, run_perturbed_sidelobes, run_synthesis, AngleGrid, PatternResult, PerturbedRow, SynthesisConfig,
    SynthesisResult,
};

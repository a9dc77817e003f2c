mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use picmv::experiments::{
    run_adaptive_sweep, run_perturbed_sidelobes, run_synthesis, write_csv, PatternResult, PerturbedRow, SweepConfig, SweepTable,
    SynthesisConfig,
};
use picmv::problem::feasibility_bound;
use picmv::solver::solve;
use picmv::validate::{run_all, SuiteSizes};

use config::{load, SolveConfig, SynthRun};

#[derive(Parser)]
#[command(name = "picmv", version, about = "Robust adaptive beamforming with the P-ICMV design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one beamforming problem and write solution.json.
    Solve(Common),
    /// Run a Monte Carlo output-SINR sweep and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Use 20 Monte Carlo runs.
        #[arg(long)]
        fast: bool,
    },
    /// Synthesize a planar beam pattern and write pattern.csv.
    Synth(Common),
    /// Run the kernel and solver equivalence suites.
    Validate {
        /// Use 100-case suites instead of 1000.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] picmv::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("solver did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("{0} validation suite(s) failed")]
    Validation(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Model(picmv::Error::Diverged { .. }) | Self::NotConverged(_) => 2,
            Self::Config(_) | Self::Model(_) | Self::Io { .. } => 1,
            Self::Validation(_) => 3,
        }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let io_err = |source| CliError::Io {
        path: dir.join(name),
        source,
    };
    fs::create_dir_all(dir).map_err(io_err)?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err)?;
    Ok(path)
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(&mut out, header, rows).expect("writing to memory cannot fail");
    out
}

#[derive(Serialize)]
struct ComplexArrays {
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize)]
struct SolutionRecord {
    weights: ComplexArrays,
    epsilon: Vec<f64>,
    level: f64,
    objective: f64,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    converged: bool,
    max_violation: f64,
    output_sinr_db: Option<f64>,
    optimal_sinr_db: Option<f64>,
}

fn cmd_solve(args: &Common) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => load::<SolveConfig>(path)?,
        None => SolveConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let built = cfg.build()?;
    let bound = feasibility_bound(built.problem.targets())?;
    if built.problem.delta() > bound {
        eprintln!(
            "warning: delta {} exceeds the sufficient feasibility bound {bound:.6}; the problem may be infeasible",
            built.problem.delta()
        );
    }
    let bf = solve(&built.problem, &cfg.solver.options())?;
    let report = picmv::problem::check_solution_feasibility(&built.problem, &bf.weights, &bf.epsilon, 1e-4)?;
    let real = &built.realization;
    let output = cfg.scenario.output_sinr(real, &bf.weights).ok();
    let optimal = cfg.scenario.optimal_sinr(real).ok();
    let record = SolutionRecord {
        weights: ComplexArrays {
            re: bf.weights.iter().map(|c| c.re).collect(),
            im: bf.weights.iter().map(|c| c.im).collect(),
        },
        epsilon: bf.epsilon.clone(),
        level: bf.level,
        objective: bf.objective,
        iterations: bf.iterations,
        primal_residual: bf.residuals.primal,
        dual_residual: bf.residuals.dual,
        converged: bf.converged,
        max_violation: report.max_violation(),
        output_sinr_db: output,
        optimal_sinr_db: optimal,
    };
    let json = serde_json::to_string_pretty(&record).expect("solution record serializes");
    let path = write_file(&args.out, "solution.json", json.as_bytes())?;
    println!(
        "objective {:.6e}, {} iterations, converged {}, wrote {}",
        bf.objective,
        bf.iterations,
        bf.converged,
        path.display()
    );
    if bf.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(bf.iterations))
    }
}

fn cmd_sweep(args: &Common, fast: bool) -> Result<(), CliError> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("sweep needs --config".into()))?;
    let mut cfg: SweepConfig = load(path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if fast {
        cfg.runs = 20;
    }
    let table = run_adaptive_sweep(&cfg)?;
    let path = write_file(
        &args.out,
        "sweep.csv",
        &csv_bytes(&SweepTable::csv_header(), &table.csv_rows()),
    )?;
    for row in &table.rows {
        println!(
            "{:>8} {}={:<8} mean SINR {:8.3} dB (std {:.3}, {} runs, {} failed, {} unconverged)",
            row.beamformer,
            table.parameter.name(),
            row.value,
            row.mean_sinr_db,
            row.std_sinr_db,
            row.runs,
            row.failures,
            row.unconverged
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synth(args: &Common) -> Result<(), CliError> {
    let mut run: SynthRun = match &args.config {
        Some(path) => load(path)?,
        None => SynthRun {
            synthesis: SynthesisConfig::default(),
            perturbation: None,
        },
    };
    if let (Some(seed), Some(p)) = (args.seed, run.perturbation.as_mut()) {
        p.seed = seed;
    }
    let res = run_synthesis(&run.synthesis)?;
    if let Some(w) = &res.warning {
        eprintln!("warning: {w}");
    }
    if !res.beamformer.converged {
        eprintln!(
            "warning: solver stopped after {} iterations without meeting the tolerance (max violation {:.3e})",
            res.beamformer.iterations, res.max_violation
        );
    }
    let path = write_file(
        &args.out,
        "pattern.csv",
        &csv_bytes(&PatternResult::csv_header(), &res.pattern.csv_rows()),
    )?;
    println!(
        "MSL {:.3} dB, ASL {:.3} dB, |w| {:.6}, {} iterations, wrote {}",
        res.pattern.msl_db,
        res.pattern.asl_db,
        res.pattern.norm,
        res.beamformer.iterations,
        path.display()
    );
    if let Some(p) = &run.perturbation {
        let cfg = &run.synthesis;
        let rows = run_perturbed_sidelobes(
            &res.beamformer.weights,
            &cfg.geometry(),
            &cfg.sidelobe.directions(),
            &p.kappas,
            p.runs,
            p.seed,
        )?;
        let csv: Vec<Vec<String>> = rows.iter().map(PerturbedRow::csv_row).collect();
        let path = write_file(&args.out, "sidelobes.csv", &csv_bytes(&PerturbedRow::csv_header(), &csv))?;
        for r in &rows {
            println!("kappa {:.1e}: MSL {:.3} dB, ASL {:.3} dB", r.kappa, r.msl_db, r.asl_db);
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_validate(fast: bool, seed: u64) -> Result<(), CliError> {
    let sizes = if fast {
        SuiteSizes {
            prox: 100,
            wy: 100,
            level: 100,
            end_to_end: 10,
        }
    } else {
        SuiteSizes::default()
    };
    let reports = run_all(sizes, seed);
    let mut failed = 0;
    for r in &reports {
        println!("{} {r}", if r.passed() { "PASS" } else { "FAIL" });
        if !r.passed() {
            failed += 1;
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Validation(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep { common, fast } => cmd_sweep(common, *fast),
        Command::Synth(args) => cmd_synth(args),
        Command::Validate { fast, seed } => cmd_validate(*fast, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

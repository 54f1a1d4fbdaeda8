//! `dimerlab` experiment runner.
//!
//! Exit status: 0 success, 1 I/O error, 2 configuration error, 3 numeric
//! failure, 4 validation failure.

mod config;
mod experiments;
mod output;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Config, ConfigError, Experiment};
use output::Manifest;

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{experiment}: {source}")]
    Numeric { experiment: &'static str, source: dimerlab::Error },
    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    fn code(&self) -> u8 {
        match self {
            RunError::Io { .. } => 1,
            RunError::Config(_) => 2,
            RunError::Numeric { .. } => 3,
            RunError::Validation(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

#[derive(Parser)]
#[command(name = "dimerlab", version, about = "Disordered dimer model experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration; without it every field takes its default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "output")]
    output: PathBuf,
    /// Worker threads (default: RAYON_NUM_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct ReplayArgs {
    /// `manifest.json` of an earlier run.
    manifest: PathBuf,
    #[arg(long, default_value = "output")]
    output: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spectral curve nodes per H2.
    LyapCurve(RunArgs),
    /// Free energy along an H1 grid, per H2.
    FreeEnergy(RunArgs),
    /// Free energy and phase labels on an (H1, H2) grid.
    PhaseDiagram(RunArgs),
    /// Edge-edge covariance decay in the vertical direction.
    Correlations(RunArgs),
    /// Exact finite-torus partition function, edge probabilities, covariances.
    ExactTorus(RunArgs),
    /// Exponent of F − H1/2 near H_c.
    PtFit(RunArgs),
    /// Exponent of F_γ(H1) − F_γ(0) at the flat edge.
    GasFit(RunArgs),
    /// Lyapunov exponent of perturbed random diagonal products.
    DhBench(RunArgs),
    /// −H1 log(F(H1) − F(0)) at small H1.
    EssentialSingularity(RunArgs),
    /// Δ_γ(H2) near H2 = 0 (needs `experimental = true`).
    DeltaProbe(RunArgs),
    /// Built-in oracle suite.
    Validate(RunArgs),
    /// Re-run the configuration recorded in a manifest.
    Replay(ReplayArgs),
}

struct Job {
    experiment: Experiment,
    config: Config,
    output: PathBuf,
    threads: Option<usize>,
}

fn job_from_args(experiment: Experiment, a: RunArgs) -> Result<Job, RunError> {
    let text = match &a.config {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?,
        None => String::new(),
    };
    let mut config = Config::parse(&text)?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    Ok(Job { experiment, config, output: a.output, threads: a.threads })
}

fn job_from_manifest(a: ReplayArgs) -> Result<Job, RunError> {
    let path = a.manifest.display().to_string();
    let text = std::fs::read_to_string(&a.manifest).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
    let bad = |m: &str| ConfigError::Parse(format!("{path}: {m}"));
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
    let toml = v.get("config_toml").and_then(|t| t.as_str()).ok_or_else(|| bad("no config_toml"))?;
    let config = Config::parse(toml)?;
    let experiment = config.experiment.ok_or_else(|| bad("recorded config has no experiment"))?;
    Ok(Job { experiment, config, output: a.output, threads: a.threads })
}

fn execute(mut job: Job) -> Result<(), RunError> {
    let experiment = job.experiment;
    job.config.experiment = Some(experiment);
    job.config.validate(experiment)?;
    if let Some(n) = job.threads {
        if n == 0 {
            return Err(ConfigError::Parse("--threads must be positive".into()).into());
        }
        // fails only if the pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let numeric = |source| RunError::Numeric { experiment: experiment.name(), source };
    let signs = dimerlab::kasteleyn::calibrated_signs().map_err(numeric)?;
    let start = Instant::now();
    let report = experiments::run(experiment, &job.config).map_err(numeric)?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&job.output).map_err(io_err(&job.output))?;
    for t in &report.tables {
        t.write(&job.output).map_err(io_err(&job.output.join(&t.name)))?;
    }
    let manifest = Manifest {
        experiment: experiment.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_toml: job.config.to_toml(),
        threads: rayon::current_num_threads(),
        wall_time_seconds: wall,
        seeds: report.seeds.clone(),
        sign_vector: signs.values().to_vec(),
        warnings: report.warnings.clone(),
        files: report.tables.iter().map(|t| t.name.clone()).collect(),
    };
    manifest.write(&job.output).map_err(io_err(&job.output.join("manifest.json")))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.failures.is_empty() {
        return Err(RunError::Validation(report.failures));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let job = match cli.cmd {
        Cmd::LyapCurve(a) => job_from_args(Experiment::LyapCurve, a),
        Cmd::FreeEnergy(a) => job_from_args(Experiment::FreeEnergy, a),
        Cmd::PhaseDiagram(a) => job_from_args(Experiment::PhaseDiagram, a),
        Cmd::Correlations(a) => job_from_args(Experiment::Correlations, a),
        Cmd::ExactTorus(a) => job_from_args(Experiment::ExactTorus, a),
        Cmd::PtFit(a) => job_from_args(Experiment::PtFit, a),
        Cmd::GasFit(a) => job_from_args(Experiment::GasFit, a),
        Cmd::DhBench(a) => job_from_args(Experiment::DhBench, a),
        Cmd::EssentialSingularity(a) => job_from_args(Experiment::EssentialSingularity, a),
        Cmd::DeltaProbe(a) => job_from_args(Experiment::DeltaProbe, a),
        Cmd::Validate(a) => job_from_args(Experiment::Validate, a),
        Cmd::Replay(a) => job_from_manifest(a),
    };
    match job.and_then(execute) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

//! Command line front end: `hypdim <pipeline> --config run.json --out dir`.

pub mod config;
pub mod report;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hypdim::Error;

use config::{Pipeline, RunConfig};
use report::{Report, Status, REPORT_SCHEMA_VERSION};

/// Exit code for unreadable or invalid configurations.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hypdim", version, about = "Pressure, conformal measures and hyperbolic dimension of meromorphic maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for report.json and the CSV files.
    #[arg(long, global = true, default_value = "hypdim-out")]
    pub out: PathBuf,
    /// Overrides the seed of the Julia sampler.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Check the regularity gates only.
    Verify,
    /// Pressure on a grid of exponents.
    Pressure,
    /// Bowen zero and Lyapunov exponent.
    Dimension,
    /// Dimension over a parameter grid of a precomposed family.
    Sweep,
    /// Borel series, counting functions and the characteristic.
    Nevanlinna,
    /// Approximate conformal measures and their residuals.
    Measure,
}

impl From<Command> for Pipeline {
    fn from(c: Command) -> Self {
        match c {
            Command::Verify => Pipeline::Verify,
            Command::Pressure => Pipeline::Pressure,
            Command::Dimension => Pipeline::Dimension,
            Command::Sweep => Pipeline::Sweep,
            Command::Nevanlinna => Pipeline::Nevanlinna,
            Command::Measure => Pipeline::Measure,
        }
    }
}

/// Loads and validates the configuration and applies the command line overrides.
pub fn prepare(cli: &Cli) -> Result<RunConfig, String> {
    let pipeline = Pipeline::from(cli.command);
    let path = cli.config.as_ref().ok_or("--config <path> is required")?;
    let mut cfg = RunConfig::load(path).map_err(|e| e.0)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(n) = cli.threads {
        cfg.threads = Some(n);
    }
    cfg.gates.sampler.rng_seed = cfg.seed.unwrap_or(cfg.gates.sampler.rng_seed);
    cfg.validate(pipeline).map_err(|e| e.0)?;
    Ok(cfg)
}

/// Runs one pipeline and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match prepare(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let pipeline = Pipeline::from(cli.command);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = pool.install(|| run::execute(pipeline, &cfg));
    let (outcome, error) = match outcome {
        Ok(o) => (o, None),
        Err(Error::Config(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            let mut o = run::Outcome::empty();
            o.status = Status::NumericFailure;
            (o, Some(e.to_string()))
        }
    };
    let code = outcome.status.exit_code();
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: "hypdim",
        version: env!("CARGO_PKG_VERSION"),
        pipeline: pipeline.name(),
        seed: cfg.gates.sampler.rng_seed,
        status: outcome.status,
        exit_code: code,
        map: cfg.map.as_ref().map(|m| serde_json::to_value(m).unwrap_or_default()),
        family: cfg.family.as_ref().map(|f| serde_json::to_value(f).unwrap_or_default()),
        h: outcome.h,
        gates: outcome.gates,
        failures: outcome.failures,
        results: outcome.results,
        error: error.clone(),
        artifacts: outcome.artifacts.names(),
    };
    if let Err(e) = outcome.artifacts.write_all(&cli.out, &report) {
        eprintln!("error: writing {}: {e}", cli.out.display());
        return 1;
    }
    for f in &report.failures {
        eprintln!("gate failed: {:?}: {} ({})", f.gate, f.condition, f.detail);
    }
    if let Some(e) = error {
        eprintln!("error: {e}");
    }
    code
}

//! The `cdiff` command line.
//!
//! Exit status: 0 success, 1 schema, validation or I/O error, 2 divergence
//! when the config sets `require_stable`, 3 theory size cap exceeded.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adapt::{centralized_descent, AdaptConfig, DESCENT_MAX_ITERS};
use crate::config::{ConfigError, RunConfig};
use crate::harness::{self, Algorithm, Divergence, GridPoint, HarnessError, RunEntry, Workload};
use crate::theory::{db, TheoryError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_SIZE_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cdiff", version, about = "Clustered multitask diffusion LMS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Skip theory overlays.
    #[arg(long, global = true)]
    no_theory: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every (algorithm, μ, η) and write curves and a summary.
    Run { config: PathBuf },
    /// Check the config and its network without running anything.
    Validate { config: PathBuf },
    /// Evaluate only the closed-form models.
    Theory { config: PathBuf },
    /// Solve for the regularized equilibrium by steepest descent.
    Oracle { config: PathBuf },
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    strategy: String,
    mu: f64,
    eta: f64,
    steady_state_msd_db: Option<f64>,
    stderr_db: Option<f64>,
    theory_msd_db: Option<f64>,
    diverged_trials: usize,
    divergences: Vec<Divergence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theory_note: Option<String>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    config_hash: String,
    seed: u64,
    artifacts: Vec<String>,
    generated_at: u64,
}

#[derive(Debug, Serialize)]
struct OracleRow {
    mu: f64,
    eta: f64,
    clusters: Vec<Vec<f64>>,
    iterations: usize,
    gradient_norm: f64,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(h) => h.into(),
            other => Failure { code: EXIT_INVALID, message: other.to_string() },
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::Theory(TheoryError::SizeCap { .. }) => EXIT_SIZE_CAP,
            _ => EXIT_INVALID,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_INVALID, message: format!("cannot write {}: {e}", path.display()) }
}

fn stem(strategy: Algorithm, point: GridPoint) -> String {
    format!("{strategy}_mu{}_eta{}", point.mu, point.eta)
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, Failure> {
        std::fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        Ok(Self { dir, artifacts: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).expect("summary types serialize");
        self.write(name, &(text + "\n"))
    }

    fn finish(mut self, raw_config: &[u8], seed: u64) -> Result<(), Failure> {
        self.artifacts.sort();
        let manifest = Manifest {
            config_hash: Sha256::digest(raw_config).iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            artifacts: std::mem::take(&mut self.artifacts),
            generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| io_failure(&path, e))
    }
}

fn summary_row(entry: &RunEntry, n_endmembers: Option<usize>) -> SummaryRow {
    let ss = entry.ensemble.steady_state();
    SummaryRow {
        strategy: entry.strategy.to_string(),
        mu: entry.point.mu,
        eta: entry.point.eta,
        steady_state_msd_db: ss.map(|s| s.msd_db()),
        stderr_db: ss.map(|s| s.stderr_db()),
        theory_msd_db: entry.theory.as_ref().map(|t| db(t.steady_state_msd)),
        diverged_trials: entry.ensemble.diverged.len(),
        divergences: entry.ensemble.diverged.clone(),
        rmse: n_endmembers.zip(ss).map(|(r, s)| (s.msd / r as f64).sqrt()),
        theory_note: entry.theory_note.clone(),
    }
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3} dB"))
}

fn cmd_run(config: &RunConfig, raw: &[u8]) -> Result<i32, Failure> {
    let spec = config.spec();
    spec.check()?;
    let workload = spec.scenario.build()?;
    let n_endmembers = match &workload {
        Workload::Unmix(env) => Some(env.params.n_endmembers),
        Workload::Linear(_) => None,
    };
    let report = harness::run_on(&workload, &spec)?;
    let mut out = Output::new(config.output_dir.clone())?;
    let mut rows = Vec::new();
    let mut diverged = 0;
    for entry in &report.entries {
        let name = stem(entry.strategy, entry.point);
        out.write(&format!("{name}.csv"), &entry.ensemble.curve.to_csv())?;
        if let Some(t) = &entry.theory {
            out.write(&format!("{name}_theory.csv"), &t.curve.to_csv())?;
        }
        let row = summary_row(entry, n_endmembers);
        println!(
            "{:<12} mu={:<8} eta={:<8} steady={} theory={} diverged={}",
            row.strategy,
            row.mu,
            row.eta,
            fmt_db(row.steady_state_msd_db),
            fmt_db(row.theory_msd_db),
            row.diverged_trials
        );
        for d in &entry.ensemble.diverged {
            eprintln!("{name}: trial {} diverged at iteration {}", d.trial, d.iteration);
        }
        diverged += row.diverged_trials;
        rows.push(row);
    }
    out.write_json("summary.json", &rows)?;
    out.finish(raw, config.seed)?;
    if config.require_stable && diverged > 0 {
        eprintln!("{diverged} trial(s) diverged and require_stable is set");
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn linear(workload: &Workload) -> Result<&harness::LinearWorkload, Failure> {
    match workload {
        Workload::Linear(lin) => Ok(lin),
        Workload::Unmix(_) => Err(HarnessError::TheoryUnsupported("unmixing is nonlinear".into()).into()),
    }
}

fn cmd_theory(config: &RunConfig, raw: &[u8]) -> Result<i32, Failure> {
    let spec = config.spec();
    spec.check()?;
    let workload = spec.scenario.build()?;
    let lin = linear(&workload)?;
    let mut out = Output::new(config.output_dir.clone())?;
    let mut rows = Vec::new();
    for &point in &spec.grid {
        for &strategy in &spec.algorithms {
            let overlay = harness::theory_overlay(lin, strategy, point, spec.n_iters, spec.size_cap)?;
            out.write(&format!("{}_theory.csv", stem(strategy, point)), &overlay.curve.to_csv())?;
            println!("{strategy:<12} mu={:<8} eta={:<8} theory={:.3} dB", point.mu, point.eta, db(overlay.steady_state_msd));
            rows.push(SummaryRow {
                strategy: strategy.to_string(),
                mu: point.mu,
                eta: point.eta,
                steady_state_msd_db: None,
                stderr_db: None,
                theory_msd_db: Some(db(overlay.steady_state_msd)),
                diverged_trials: 0,
                divergences: Vec::new(),
                rmse: None,
                theory_note: None,
            });
        }
    }
    out.write_json("summary.json", &rows)?;
    out.finish(raw, config.seed)?;
    Ok(EXIT_OK)
}

fn cmd_oracle(config: &RunConfig, raw: &[u8]) -> Result<i32, Failure> {
    let spec = config.spec();
    spec.check()?;
    let workload = spec.scenario.build()?;
    let lin = linear(&workload)?;
    let env = lin
        .moments
        .as_ref()
        .ok_or_else(|| Failure::from(HarnessError::TheoryUnsupported("scenario has no Gaussian moment model".into())))?;
    let mut rows = Vec::new();
    for &point in &spec.grid {
        let cfg = AdaptConfig::new(point.mu, point.eta).map_err(HarnessError::from)?;
        let res = centralized_descent(env, &lin.network, &lin.combiners, &cfg, DESCENT_MAX_ITERS)
            .map_err(HarnessError::from)?;
        println!("mu={} eta={} converged in {} iterations", point.mu, point.eta, res.iterations);
        rows.push(OracleRow {
            mu: point.mu,
            eta: point.eta,
            clusters: res.clusters.iter().map(|w| w.iter().copied().collect()).collect(),
            iterations: res.iterations,
            gradient_norm: res.gradient_norm,
        });
    }
    let mut out = Output::new(config.output_dir.clone())?;
    out.write_json("oracle.json", &rows)?;
    out.finish(raw, config.seed)?;
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = match &cli.command {
        Command::Run { config } | Command::Validate { config } | Command::Theory { config } | Command::Oracle { config } => {
            config
        }
    };
    let (mut config, raw) = RunConfig::load(path)?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.no_theory {
        config.theory = false;
    }
    match cli.command {
        Command::Validate { .. } => {
            config.validate()?;
            println!("{}: ok", path.display());
            Ok(EXIT_OK)
        }
        Command::Run { .. } => cmd_run(&config, &raw),
        Command::Theory { .. } => cmd_theory(&config, &raw),
        Command::Oracle { .. } => cmd_oracle(&config, &raw),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

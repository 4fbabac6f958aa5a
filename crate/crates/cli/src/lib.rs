//! Batch driver: reads a TOML run configuration, executes one command and
//! writes `{run_id}.csv` plus a `{run_id}.json` metadata sidecar.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ergodic_core::{Execution, Geometry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub use config::{Command, LoadedConfig};
pub use error::{CliError, Result};

use commands::Context;

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "ERGODIC_HJB_LOG";

#[derive(Debug, Parser)]
#[command(name = "ergodic-hjb", version, about = "Generalized principal eigenvalues of ergodic HJB problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs every loop sequentially.
    #[arg(long, global = true, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    /// Seed for the random forcing perturbation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Sub {
    /// Eigenvalue of one problem.
    Solve,
    /// Vanishing-discount estimate with every discount tabulated.
    Discount,
    /// Convergence of lambda_m towards the constrained problem.
    MSweep,
    /// lambda on a grid of couplings, with the zero plateau.
    BetaSweep,
    /// Bisection for the plateau endpoints.
    BetaBisect,
    /// lambda at the certified coupling for critical decay.
    Be0Floor,
    /// Closed-form oracle suite.
    VerifyAnalytic,
    /// Whatever `command` the config names.
    Run,
}

impl Sub {
    fn command(self) -> Option<Command> {
        Some(match self {
            Sub::Solve => Command::Solve,
            Sub::Discount => Command::Discount,
            Sub::MSweep => Command::MSweep,
            Sub::BetaSweep => Command::BetaSweep,
            Sub::BetaBisect => Command::BetaBisect,
            Sub::Be0Floor => Command::Be0Floor,
            Sub::VerifyAnalytic => Command::VerifyAnalytic,
            Sub::Run => return None,
        })
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub command: Command,
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    /// A sweep point, floor row or oracle check failed.
    pub failed: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed)
    }
}

fn resolve_command(sub: Sub, cfg: &LoadedConfig) -> Result<Command> {
    match (sub.command(), cfg.run.command) {
        (Some(a), Some(b)) if a != b => Err(cfg.error_at(
            None,
            "command",
            format!("config is for '{b}' but the '{a}' subcommand was given"),
        )),
        (Some(a), _) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(CliError::config(
            "`run` needs a config with a `command` key",
        )),
    }
}

/// Random bounded perturbation `epsilon * phi` of the forcing.
fn perturbation(cfg: &LoadedConfig, seed: u64) -> Result<Option<(f64, ergodic_core::Potential)>> {
    let eps = cfg.run.perturbation.epsilon;
    if !eps.is_finite() || eps < 0.0 {
        return Err(cfg.error_at(Some("perturbation"), "epsilon", "must be finite and nonnegative"));
    }
    if eps == 0.0 {
        return Ok(None);
    }
    let radial = cfg.geometry()? == Geometry::Radial;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = ergodic_core::Potential::new(catalog::random_profile(&mut rng, radial));
    Ok(Some((eps, phi)))
}

fn execute_in(command: Command, cfg: &LoadedConfig, opts: &Options, execution: Execution) -> Result<Outcome> {
    let run_id = cfg.run_id(command);
    if run_id.is_empty() || run_id.contains(['/', '\\']) {
        return Err(cfg.error_at(None, "run_id", "run_id must be a nonempty file name"));
    }
    let seed = opts.seed.unwrap_or(0);
    let ctx = Context {
        cfg,
        run_id: run_id.clone(),
        settings: cfg.sweep_settings(execution)?,
        perturb: perturbation(cfg, seed)?,
        timing: cfg.run.output.timing,
    };
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    let report = commands::run(command, &ctx)?;

    output::ensure_dir(&dir)?;
    let (csv, sidecar) = output::artifact_paths(&dir, &run_id);
    report.table.write_csv(&csv)?;
    let meta = json!({
        "run_id": run_id,
        "command": command,
        "versions": {
            "ergodic-cli": env!("CARGO_PKG_VERSION"),
            "ergodic-core": ergodic_core::VERSION,
        },
        "parallel_feature": cfg!(feature = "parallel"),
        "execution": execution,
        "jobs": opts.jobs,
        "seed": opts.seed,
        "perturbation": ctx.perturb.as_ref().map(|(eps, phi)| json!({
            "epsilon": eps,
            "phi": format!("{:?}", phi.profile()),
        })),
        "config": cfg.run,
        "settings": ctx.settings,
        "detection": {
            "floor": ctx.settings.detection.floor,
            "disagreement_factor": ctx.settings.detection.disagreement_factor,
            "rule": "lambda counts as negative when lambda < -max(floor, disagreement_factor * |direct - discount|)",
        },
        "float_format": "17 significant digits",
        "wall_ms": if ctx.timing { "wall time of the whole command" } else { "omitted (output.timing = false)" },
        "columns": report.table.columns,
        "summary": report.summary,
        "warnings": report.warnings,
        "failed": report.failed,
    });
    output::write_json(&sidecar, &meta)?;
    Ok(Outcome {
        command,
        csv,
        sidecar,
        failed: report.failed,
        warnings: report.warnings,
    })
}

/// Loads the config (defaults when none is given), runs the command and
/// writes its artifacts.
pub fn execute(sub: Sub, opts: &Options) -> Result<Outcome> {
    let cfg = match &opts.config {
        Some(p) => LoadedConfig::from_path(p)?,
        None => LoadedConfig::empty(),
    };
    execute_config(sub, &cfg, opts)
}

pub fn execute_config(sub: Sub, cfg: &LoadedConfig, opts: &Options) -> Result<Outcome> {
    let command = resolve_command(sub, cfg)?;
    match opts.jobs {
        Some(1) => execute_in(command, cfg, opts, Execution::Sequential),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k as usize)
                .build()
                .map_err(|e| CliError::config(format!("cannot start {k} workers: {e}")))?;
            pool.install(|| execute_in(command, cfg, opts, Execution::Parallel))
        }
        None => execute_in(command, cfg, opts, Execution::Parallel),
    }
}

/// Reads a CSV written by this crate into header and rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

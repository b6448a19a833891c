//! Command-line front end for `homsim`.
//!
//! Exit codes: 0 on success, 1 when a fit or an acceptance check fails, 2 for
//! configuration and I/O errors.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use homsim::{DipModel, DurationRule};

pub mod commands;
pub mod config;
pub mod reproduce;
pub mod table;

use config::RunConfig;
use table::{to_json, write_atomic};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Config(_) | CliError::Io(_) | CliError::Parse(_) => 2,
        }
    }
}

impl From<homsim::Error> for CliError {
    fn from(e: homsim::Error) -> Self {
        match e {
            homsim::Error::InvalidInput(_) | homsim::Error::Coverage(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn parse_rule(s: &str) -> Result<DurationRule, String> {
    s.parse().map_err(|e: homsim::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<DipModel, String> {
    s.parse().map_err(|e: homsim::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "homsim",
    version,
    about = "Two-photon interference between heralded photons from independent sources"
)]
pub struct Cli {
    /// Run configuration (JSON); the built-in reference setup when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the counting emulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// How pulse duration and walk-off combine: quadrature or linear.
    #[arg(long, global = true, value_parser = parse_rule)]
    pub rule: Option<DurationRule>,
    /// Idler filter bandwidth in pm, e.g. 200 or 200pm. Overrides both idler
    /// filters for scan and montecarlo; sets the extrapolation bandwidth for
    /// predict and reproduce.
    #[arg(long, global = true, value_parser = config::parse_bandwidth_pm)]
    pub idler_bandwidth: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form visibility under both duration rules.
    Predict,
    /// Noise-free dip at the configured delays.
    Scan,
    /// Emulated four-fold counts with background subtraction and a dip fit.
    Montecarlo,
    /// Fits a dip to a delay scan CSV.
    Fit {
        input: PathBuf,
        /// sinc_squared or gaussian.
        #[arg(long, value_parser = parse_model, default_value = "sinc_squared")]
        model: DipModel,
    },
    /// Runs the reference setup and checks every acceptance criterion.
    Reproduce,
}

/// Settings after merging the configuration file with command-line flags.
struct Resolved {
    run: RunConfig,
    format: Format,
    out: Option<PathBuf>,
}

fn resolve(cli: &Cli, override_idler: bool) -> Result<Resolved, CliError> {
    let mut run = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        run.experiment.rng_seed = seed;
    }
    if let Some(rule) = cli.rule {
        run.rule = rule;
    }
    if let (true, Some(pm)) = (override_idler, cli.idler_bandwidth) {
        for src in [&mut run.experiment.source_a, &mut run.experiment.source_b] {
            src.idler_filter = src.idler_filter.with_bandwidth_pm(pm)?;
        }
    }
    run.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let out = cli.out.clone().or_else(|| run.out.clone());
    Ok(Resolved {
        format: cli.format.or(run.format).unwrap_or(Format::Csv),
        out,
        run,
    })
}

/// Writes to `out` atomically, or to `stdout`.
fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => stdout
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

/// `<stem>.summary.json` next to `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "montecarlo".into());
    out.with_file_name(format!("{stem}.summary.json"))
}

/// Runs one invocation, writing results to `stdout` and diagnostics to
/// `stderr`.
pub fn run(
    cli: &Cli,
    stdout: &mut dyn std::io::Write,
    stderr: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let write_err = |e: std::io::Error| CliError::Io(format!("stderr: {e}"));
    match &cli.command {
        Command::Predict => {
            let r = resolve(cli, false)?;
            let target = cli
                .idler_bandwidth
                .unwrap_or(commands::DEFAULT_EXTRAPOLATION_PM);
            let report = commands::predict(&r.run, r.run.rule, target)?;
            let bytes = match (r.format, cli.format, &r.out) {
                (Format::Json, _, _) => to_json(&report)?,
                // plain text when writing to a terminal without an explicit format
                (Format::Csv, None, None) => commands::render_predict(&report).into_bytes(),
                (Format::Csv, _, _) => commands::predict_csv(&report)?,
            };
            emit(r.out.as_deref(), &bytes, stdout)
        }
        Command::Scan => {
            let r = resolve(cli, true)?;
            let scan = commands::scan(&r.run)?;
            let bytes = match r.format {
                Format::Csv => commands::scan_csv(&scan)?,
                Format::Json => to_json(&commands::scan_points(&scan))?,
            };
            emit(r.out.as_deref(), &bytes, stdout)
        }
        Command::Montecarlo => {
            let r = resolve(cli, true)?;
            let (tally, summary) = commands::montecarlo(&r.run)?;
            let summary_bytes = to_json(&summary)?;
            match r.format {
                Format::Csv => {
                    let bytes = commands::montecarlo_csv(&tally)?;
                    match &r.out {
                        Some(path) => {
                            write_atomic(path, &bytes)?;
                            write_atomic(&summary_path(path), &summary_bytes)
                        }
                        None => {
                            emit(None, &bytes, stdout)?;
                            stderr.write_all(&summary_bytes).map_err(write_err)
                        }
                    }
                }
                Format::Json => {
                    let value = serde_json::json!({
                        "points": tally.points,
                        "summary": summary,
                    });
                    emit(r.out.as_deref(), &to_json(&value)?, stdout)
                }
            }
        }
        Command::Fit { input, model } => {
            let scan = table::read_scan_file(input)?;
            let fit = commands::fit(&scan, *model)?;
            emit(cli.out.as_deref(), &to_json(&fit)?, stdout)
        }
        Command::Reproduce => {
            let mut run = RunConfig::reference();
            if let Some(seed) = cli.seed {
                run.experiment.rng_seed = seed;
            }
            let rule = cli.rule.unwrap_or(run.rule);
            let target = cli
                .idler_bandwidth
                .unwrap_or(commands::DEFAULT_EXTRAPOLATION_PM);
            let checks = reproduce::run_checks(&run, rule, target)?;
            let bytes = match cli.format {
                Some(Format::Json) => to_json(&checks)?,
                _ => reproduce::render(&checks).into_bytes(),
            };
            emit(cli.out.as_deref(), &bytes, stdout)?;
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.id.to_string())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Failure(format!(
                    "criteria failed: {}",
                    failed.join(", ")
                )))
            }
        }
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}

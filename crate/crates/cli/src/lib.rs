//! Batch front end: parse a run configuration, evaluate one command over a
//! θ-grid, and emit a JSON report with an optional CSV table.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error,
//! 4 a failed assumption verdict.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crpred_core::catalog::lookup;

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;
pub use report::{Report, Verdict};

use commands::Context;
use report::Record;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] crpred_core::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Fisher,
    Score,
    L2diag,
    Lemma106,
    Continuity,
    Bound,
    Qep,
    Efficiency,
    BiasedBound,
    Msep,
    Lemma1,
    Reconstruct,
    CheckAssumptions,
}

impl Command {
    pub const ALL: [Command; 13] = [
        Command::Fisher,
        Command::Score,
        Command::L2diag,
        Command::Lemma106,
        Command::Continuity,
        Command::Bound,
        Command::Qep,
        Command::Efficiency,
        Command::BiasedBound,
        Command::Msep,
        Command::Lemma1,
        Command::Reconstruct,
        Command::CheckAssumptions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Fisher => "fisher",
            Command::Score => "score",
            Command::L2diag => "l2diag",
            Command::Lemma106 => "lemma106",
            Command::Continuity => "continuity",
            Command::Bound => "bound",
            Command::Qep => "qep",
            Command::Efficiency => "efficiency",
            Command::BiasedBound => "biased-bound",
            Command::Msep => "msep",
            Command::Lemma1 => "lemma1",
            Command::Reconstruct => "reconstruct",
            Command::CheckAssumptions => "check-assumptions",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "crpred", version, about = "Cramér-Rao bounds for prediction")]
pub struct Cli {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed; falls back to CRPRED_SEED.
    #[arg(long, env = "CRPRED_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Add wall-clock times per stage (breaks byte-for-byte reproducibility).
    #[arg(long)]
    pub timings: bool,
}

/// Run `command` on a validated config. Records come back in grid order.
pub fn run(command: Command, config: RunConfig) -> Result<Report, CliError> {
    if command == Command::Lemma1 {
        let records = commands::lemma1(&config)?;
        return Ok(Report::new(command.name(), config, records.into_iter().map(|r| (None, r)).collect()));
    }
    let id = config
        .model
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("{} needs a model", command.name())))?;
    let entry = lookup(id)?;
    let grid = match &config.theta_grid {
        Some(g) => g.points()?,
        None => entry.theta_grid.clone(),
    };
    let spec = match &config.integration {
        Some(i) => i.to_spec(config.seed)?,
        None => entry.default_integration.clone().with_seed(config.seed),
    };
    let fisher_spec = match &config.options.fisher_integration {
        Some(i) => i.to_spec(config.seed)?,
        None => spec.clone(),
    };
    let dim = entry.model.param_dim();
    if let Some(bad) = grid.iter().find(|t| t.len() != dim) {
        return Err(CliError::Config(format!("theta {bad:?} does not have dimension {dim}")));
    }
    let cx = Context {
        entry: &entry,
        spec: &spec,
        fisher_spec: &fisher_spec,
        config: &config,
    };
    let f: fn(&Context, &[f64]) -> crpred_core::Result<Record> = match command {
        Command::Fisher => commands::fisher,
        Command::Score => commands::score,
        Command::L2diag => commands::l2diag,
        Command::Lemma106 => commands::lemma106,
        Command::Continuity => commands::continuity,
        Command::Bound => commands::bound,
        Command::Qep => commands::qep_cmd,
        Command::Efficiency => commands::efficiency,
        Command::BiasedBound => commands::biased_bound,
        Command::Msep => commands::msep,
        Command::Reconstruct => commands::reconstruct_cmd,
        Command::CheckAssumptions => commands::assumptions,
        Command::Lemma1 => unreachable!("handled above"),
    };
    let records = grid
        .par_iter()
        .map(|t| f(&cx, t).map(|r| (Some(t.clone()), r)).map_err(|e| e.at(t, command.name())))
        .collect::<crpred_core::Result<Vec<_>>>()?;
    Ok(Report::new(command.name(), config, records))
}

pub fn exit_code(report: &Report) -> i32 {
    if report.summary.assumption_violations > 0 {
        4
    } else {
        0
    }
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn ms(since: Instant) -> Value {
    Value::from(since.elapsed().as_secs_f64() * 1e3)
}

/// Full pipeline behind the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("crpred {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let t0 = Instant::now();
    let mut config = RunConfig::from_file(&cli.config.to_string_lossy())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let parsed = ms(t0);
    let json_path = cli.out.clone().or_else(|| config.output.json.clone().map(PathBuf::from));
    let csv_path = cli.csv.clone().or_else(|| config.output.csv.clone().map(PathBuf::from));
    let t1 = Instant::now();
    let mut report = run(cli.command, config)?;
    if cli.timings {
        let mut t = Map::new();
        t.insert("parse".into(), parsed);
        t.insert("run".into(), ms(t1));
        report.timings_ms = Some(t);
    }
    let json = report.to_json();
    match &json_path {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(p) = &csv_path {
        write(p, &report.to_csv()?)?;
    }
    let code = exit_code(&report);
    if code == 4 {
        eprintln!(
            "crpred {}: assumption verdicts failed: {}",
            cli.command.name(),
            report.summary.failed_verdicts.join(", ")
        );
    }
    Ok(code)
}

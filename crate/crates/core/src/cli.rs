//! Command-line front end. Every command is a thin wrapper over the library.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input (scenario, log or
//! reports), 3 backend failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::analytics::{self, read_log, read_summary, substitution_report, write_reports, write_substitution};
use crate::decision::{DecisionBackend, RemoteBackend, RemoteConfig, ScriptedOracle};
use crate::engine::{self, RunError, RunOutcome};
use crate::world::{load_scenario, BackendSelection, RemoteSettings, RunMode, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "townsim",
    version,
    about = "Multi-agent town simulator for discount promotion studies"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write logs plus reports.
    Run(RunArgs),
    /// Compare two report directories (baseline vs treated).
    Compare(CompareArgs),
    /// Load and validate a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Rebuild reports from an existing event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Deterministic,
    Parallel,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub days: Option<u32>,
}

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    pub baseline: PathBuf,
    pub treated: PathBuf,
    #[arg(long, default_value = "compare")]
    pub out: PathBuf,
    /// Relative total-market band.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// Fully resolved run settings: flag > scenario > default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub backend: BackendSelection,
    pub mode: RunMode,
    pub seed: u64,
    pub out: PathBuf,
    pub days: u32,
    pub verbosity: u8,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, scenario: &Scenario, verbosity: u8) -> RunConfig {
        let backend = match (args.backend, &scenario.sim.backend) {
            (Some(BackendArg::Oracle), _) => BackendSelection::Oracle,
            (Some(BackendArg::Remote), BackendSelection::Remote(s)) => BackendSelection::Remote(s.clone()),
            (Some(BackendArg::Remote), BackendSelection::Oracle) => BackendSelection::Remote(RemoteSettings::default()),
            (None, b) => b.clone(),
        };
        RunConfig {
            scenario_path: args.scenario.clone(),
            backend,
            mode: match args.mode {
                Some(ModeArg::Deterministic) => RunMode::Deterministic,
                Some(ModeArg::Parallel) => RunMode::Parallel,
                None => scenario.sim.mode,
            },
            seed: args.seed.unwrap_or(scenario.sim.seed),
            out: args.out.clone(),
            days: args.days.unwrap_or(scenario.sim.days),
            verbosity,
        }
    }

    /// The scenario with this config's overrides written into `sim`.
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut s = scenario.clone();
        s.sim.seed = self.seed;
        s.sim.days = self.days;
        s.sim.mode = self.mode;
        s.sim.backend = self.backend.clone();
        s
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match &cli.command {
        Command::Run(a) => cmd_run(a, cli.verbose),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Replay { log, out } => cmd_replay(log, out),
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("townsim: {msg}");
    code
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Write `events.jsonl`, `memory.jsonl`, `transcripts.jsonl` (recording
/// backends only) and the analytics reports into `dir`.
pub fn write_outputs(dir: &Path, outcome: &RunOutcome, with_transcripts: bool) -> io::Result<analytics::Summary> {
    fs::create_dir_all(dir)?;
    outcome
        .log
        .write_jsonl(BufWriter::new(File::create(dir.join("events.jsonl"))?))?;
    write_jsonl(&dir.join("memory.jsonl"), &outcome.memory_records())?;
    if with_transcripts {
        write_jsonl(&dir.join("transcripts.jsonl"), &outcome.transcripts)?;
    }
    write_reports(dir, &outcome.log)
}

pub fn cmd_run(args: &RunArgs, verbosity: u8) -> i32 {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INPUT, format!("scenario invalid: {e}")),
    };
    let cfg = RunConfig::resolve(args, &scenario, verbosity);
    let scenario = cfg.apply(&scenario);
    let backend: Box<dyn DecisionBackend> = match &cfg.backend {
        BackendSelection::Oracle => Box::new(ScriptedOracle::new(scenario.sim.oracle.clone(), cfg.seed)),
        BackendSelection::Remote(settings) => match RemoteConfig::from_env(settings) {
            Ok(rc) => Box::new(RemoteBackend::new(rc)),
            Err(e) => return fail(EXIT_BACKEND, e),
        },
    };
    info!(
        "running {} for {} days with {} backend, seed {}",
        cfg.scenario_path.display(),
        cfg.days,
        backend.name(),
        cfg.seed
    );
    let transcripts = backend.records_transcripts();
    let (outcome, err) = match engine::run(&scenario, backend.as_ref(), cfg.mode) {
        Ok(o) => (o, None),
        Err(RunError::BackendUnavailable { message, partial }) => (*partial, Some(message)),
    };
    let summary = match write_outputs(&cfg.out, &outcome, transcripts) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, format!("cannot write {}: {e}", cfg.out.display())),
    };
    if let Some(message) = err {
        return fail(
            EXIT_BACKEND,
            format!(
                "backend unavailable: {message} (partial output in {})",
                cfg.out.display()
            ),
        );
    }
    println!(
        "{} events over {} days; dining revenue {}; outputs in {}",
        summary.events,
        summary.days,
        summary.dining_revenue,
        cfg.out.display()
    );
    EXIT_OK
}

pub fn cmd_compare(args: &CompareArgs) -> i32 {
    let base = match read_summary(&args.baseline) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", args.baseline.display())),
    };
    let treated = match read_summary(&args.treated) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", args.treated.display())),
    };
    let tolerance = args.tolerance.unwrap_or(0.10);
    let report = match substitution_report(&base.daily_sales, &treated.daily_sales, tolerance) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    if let Err(e) = write_substitution(&args.out, &report) {
        return fail(EXIT_USAGE, format!("cannot write {}: {e}", args.out.display()));
    }
    println!(
        "total market change {:+.2}% over {} day(s); substitution-dominant: {}",
        report.total_change * 100.0,
        if report.discount_days.is_empty() {
            report.days.len()
        } else {
            report.discount_days.len()
        },
        report.substitution_dominant
    );
    EXIT_OK
}

pub fn cmd_validate(path: &Path) -> i32 {
    match load_scenario(path) {
        Ok(s) => {
            println!(
                "ok: {} locations, {} shops, {} agents, {} days",
                s.map.len(),
                s.map.shops().len(),
                s.personas.len(),
                s.sim.days
            );
            EXIT_OK
        }
        Err(e) => fail(EXIT_INPUT, format!("scenario invalid: {e}")),
    }
}

pub fn cmd_replay(log: &Path, out: &Path) -> i32 {
    let events = match read_log(log) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", log.display())),
    };
    match write_reports(out, &events) {
        Ok(s) => {
            println!("{} events folded into {}", s.events, out.display());
            EXIT_OK
        }
        Err(e) => fail(EXIT_USAGE, format!("cannot write {}: {e}", out.display())),
    }
}

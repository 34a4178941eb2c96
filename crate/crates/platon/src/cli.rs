//! `platon run | sweep | oracle | inspect`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use platon_core::experiment::{run_experiment, RunStatus};
use platon_core::oracle::{self, OracleReport, SuiteHooks};

use crate::config::{self, LoadedConfig};
use crate::error::{exit, Error, Result};
use crate::report::{self, Summary};
use crate::sweep::{self, Axis};

#[derive(Debug, Parser)]
#[command(name = "platon", version, about = "Uncertainty-aware iterative pruning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with pruning and write metrics, snapshots and a summary.
    Run(RunArgs),
    /// Repeat a run over values of one axis and several seeds.
    Sweep(SweepArgs),
    /// Check the implementation against brute-force references.
    Oracle(OracleArgs),
    /// Print the headline numbers of a run summary.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// `section.key=value`, applied after the file in the order given.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Replaces the config seed; recorded as a `seed=` override.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<LoadedConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        config::load(&self.config, &overrides)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// ratio, beta1, beta2 or variant.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated axis values.
    #[arg(long)]
    pub values: String,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: String,
    /// Concurrent runs; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    pub parallel: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Subject prefix to keep (repeatable); all subjects when absent.
    #[arg(long)]
    pub only: Vec<String>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// A summary JSON file or a run directory holding one.
    pub target: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, hooks: &SuiteHooks, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return exit::USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return exit::OK;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Oracle(a) => cmd_oracle(a, hooks, out),
        Command::Inspect(a) => cmd_inspect(a, out),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "platon: {}: {e}", e.class());
            e.exit_code()
        }
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(Error::io("<stdout>"))
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = args.config.load()?;
    let started = Instant::now();
    let report = run_experiment(&loaded.config)?;
    let checks = oracle::check_report(&report)?.to_vec();
    let summary = Summary::new(&report, &loaded.overrides, checks, started.elapsed().as_secs_f64());
    report::write_run(&args.out, &report, &summary)?;
    if let RunStatus::Diverged { step, reason } = report.status {
        return Err(Error::Diverged { step, reason });
    }
    failed_subjects(&summary.oracle)?;
    say(
        out,
        format_args!(
            "final_metric={} retained={}/{} mask_flips={} -> {}",
            report.final_metric,
            report.final_retained,
            report.units,
            report.mask_flips,
            args.out.display()
        ),
    )
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let axis: Axis = args.axis.parse()?;
    let values = split_list(&args.values);
    let seeds = split_list(&args.seeds)
        .iter()
        .map(|s| s.parse::<u64>().map_err(|_| Error::Usage(format!("seed `{s}` is not an integer"))))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::Usage("--seeds must list at least one seed".into()));
    }
    let loaded = args.config.load()?;
    let table = sweep::sweep(&loaded.config, axis, &values, &seeds, args.parallel)?;
    sweep::write_table(&table, &args.out)?;
    for row in &table.rows {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        say(
            out,
            format_args!(
                "{}={}  mean={}  std={}  completed={}/{}",
                args.axis,
                row.value,
                fmt(row.mean),
                fmt(row.std),
                row.completed,
                row.runs
            ),
        )?;
    }
    Ok(())
}

pub const ORACLE_FILE: &str = "oracle.json";

pub fn cmd_oracle(args: &OracleArgs, hooks: &SuiteHooks, out: &mut dyn Write) -> Result<()> {
    let reports = oracle::run_suite(&args.only, hooks)?;
    if reports.is_empty() {
        return Err(Error::Usage(format!(
            "--only {:?} matches no subject (known: {})",
            args.only,
            oracle::SUBJECTS.join(", ")
        )));
    }
    std::fs::create_dir_all(&args.out).map_err(Error::io(&args.out))?;
    let path = args.out.join(ORACLE_FILE);
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Error::format(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(Error::io(&path))?;
    for r in &reports {
        say(
            out,
            format_args!(
                "{} {:<28} max_abs_error={:e} tolerance={:e} cases={}",
                if r.pass { "PASS" } else { "FAIL" },
                r.subject,
                r.max_abs_error,
                r.tolerance,
                r.cases_checked
            ),
        )?;
    }
    failed_subjects(&reports)
}

fn failed_subjects(reports: &[OracleReport]) -> Result<()> {
    let subjects: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.subject.clone()).collect();
    if subjects.is_empty() {
        Ok(())
    } else {
        Err(Error::OracleFailed { subjects })
    }
}

fn summary_path(target: &Path) -> PathBuf {
    if target.is_dir() {
        target.join(report::SUMMARY_FILE)
    } else {
        target.to_path_buf()
    }
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let s = report::read_summary(&summary_path(&args.target))?;
    let status = match &s.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::Diverged { step, .. } => format!("diverged at step {step}"),
    };
    let metric = s.final_metric.map_or("-".to_string(), |m| m.to_string());
    say(out, format_args!("status={status}"))?;
    say(out, format_args!("variant={}", s.config.score.variant.name()))?;
    say(out, format_args!("final_metric={metric}"))?;
    say(out, format_args!("sparsity={}", s.sparsity))?;
    say(out, format_args!("retained={}", s.final_retained))?;
    say(out, format_args!("units={}", s.units))?;
    say(out, format_args!("mask_flips={}", s.mask_flips))
}

//! On-disk artifacts of a run: metrics CSV, snapshot CSVs and a JSON summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back gives the in-memory values bit for bit.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use platon_core::experiment::{ExperimentConfig, RunReport, RunStatus};
use platon_core::oracle::OracleReport;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const METRICS_HEADER: [&str; 5] = ["step", "train_loss", "ratio", "retained", "eval_metric"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
    #[serde(flatten)]
    pub status: RunStatus,
    /// `None` when the run diverged.
    pub final_metric: Option<f64>,
    pub mask_flips: usize,
    /// Prunable units: entries, or groups in structured mode.
    pub units: usize,
    pub prunable_entries: usize,
    pub final_retained: usize,
    pub sparsity: f64,
    pub oracle: Vec<OracleReport>,
    pub wall_clock_seconds: f64,
}

impl Summary {
    pub fn new(
        report: &RunReport,
        overrides: &[String],
        oracle: Vec<OracleReport>,
        wall_clock_seconds: f64,
    ) -> Self {
        Self {
            version: crate::VERSION.to_string(),
            config: report.config.clone(),
            overrides: overrides.to_vec(),
            status: report.status.clone(),
            final_metric: report.final_metric.is_finite().then_some(report.final_metric),
            mask_flips: report.mask_flips,
            units: report.units,
            prunable_entries: report.prunable_entries,
            final_retained: report.final_retained,
            sparsity: 1.0 - report.final_retained as f64 / report.units as f64,
            oracle,
            wall_clock_seconds,
        }
    }
}

/// One parsed line of the metrics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub train_loss: f64,
    pub ratio: f64,
    pub retained: usize,
    pub eval_metric: Option<f64>,
}

pub fn metrics_rows(report: &RunReport) -> Vec<MetricsRow> {
    let evals: HashMap<usize, f64> = report.eval_curve.iter().copied().collect();
    report
        .per_step
        .iter()
        .map(|r| MetricsRow {
            step: r.step,
            train_loss: r.train_loss,
            ratio: r.ratio,
            retained: r.retained,
            eval_metric: evals.get(&r.step).copied(),
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::format(path, format!("{other:?}")),
    }
}

pub fn write_metrics(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER).map_err(csv_err(path))?;
    for row in metrics_rows(report) {
        w.write_record([
            row.step.to_string(),
            row.train_loss.to_string(),
            row.ratio.to_string(),
            row.retained.to_string(),
            row.eval_metric.map(|m| m.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    let bad = |field: &str| Error::format(path, format!("unparsable {field}"));
    let mut rows = Vec::new();
    for record in r.records() {
        let rec = record.map_err(csv_err(path))?;
        let eval = &rec[4];
        rows.push(MetricsRow {
            step: rec[0].parse().map_err(|_| bad("step"))?,
            train_loss: rec[1].parse().map_err(|_| bad("train_loss"))?,
            ratio: rec[2].parse().map_err(|_| bad("ratio"))?,
            retained: rec[3].parse().map_err(|_| bad("retained"))?,
            eval_metric: if eval.is_empty() {
                None
            } else {
                Some(eval.parse().map_err(|_| bad("eval_metric"))?)
            },
        });
    }
    Ok(rows)
}

/// Row per snapshot step, column per unit index.
pub fn write_snapshots(steps: &[usize], units: &[usize], rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header = std::iter::once("step".to_string()).chain(units.iter().map(|u| u.to_string()));
    w.write_record(header).map_err(csv_err(path))?;
    for (step, row) in steps.iter().zip(rows) {
        let record = std::iter::once(step.to_string()).chain(row.iter().map(|v| v.to_string()));
        w.write_record(record).map_err(csv_err(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Snapshot CSV contents: `(steps, units, rows)`.
pub type Snapshots = (Vec<usize>, Vec<usize>, Vec<Vec<f64>>);

/// Inverse of [`write_snapshots`].
pub fn read_snapshots(path: &Path) -> Result<Snapshots> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let bad = || Error::format(path, "non-numeric snapshot cell");
    let units = header
        .iter()
        .skip(1)
        .map(|u| u.parse().map_err(|_| bad()))
        .collect::<Result<Vec<usize>>>()?;
    let (mut steps, mut rows) = (Vec::new(), Vec::new());
    for record in r.records() {
        let rec = record.map_err(csv_err(path))?;
        steps.push(rec[0].parse().map_err(|_| bad())?);
        rows.push(rec.iter().skip(1).map(|v| v.parse().map_err(|_| bad())).collect::<Result<_>>()?);
    }
    Ok((steps, units, rows))
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Writes every artifact of a run into `dir` and returns their paths.
pub fn write_run(dir: &Path, report: &RunReport, summary: &Summary) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let paths: Vec<PathBuf> = [METRICS_FILE, SCORES_FILE, SENSITIVITY_FILE, SUMMARY_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_metrics(report, &paths[0])?;
    write_snapshots(&report.snapshot_steps, &report.snapshot_units, &report.score_snapshots, &paths[1])?;
    write_snapshots(
        &report.snapshot_steps,
        &report.snapshot_units,
        &report.sensitivity_snapshots,
        &paths[2],
    )?;
    write_summary(summary, &paths[3])?;
    Ok(paths)
}

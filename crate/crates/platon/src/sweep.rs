//! Grid sweeps over one configuration axis, replicated across seeds.

use std::path::Path;
use std::str::FromStr;

use platon_core::experiment::{mean_and_std, run_experiment, ExperimentConfig, RunStatus};
use platon_core::ScoreVariant;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Final remaining ratio `schedule.r_final`.
    Ratio,
    Beta1,
    Beta2,
    Variant,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio" => Ok(Axis::Ratio),
            "beta1" => Ok(Axis::Beta1),
            "beta2" => Ok(Axis::Beta2),
            "variant" => Ok(Axis::Variant),
            _ => Err(Error::Usage(format!(
                "unknown sweep axis `{s}` (expected ratio, beta1, beta2 or variant)"
            ))),
        }
    }
}

impl Axis {
    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let number = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("sweep value `{value}` is not a number")))
        };
        match self {
            Axis::Ratio => cfg.schedule.r_final = number()?,
            Axis::Beta1 => cfg.score.beta1 = number()?,
            Axis::Beta2 => cfg.score.beta2 = number()?,
            Axis::Variant => {
                cfg.score.variant = ScoreVariant::from_name(value)
                    .ok_or_else(|| Error::Usage(format!("unknown score variant `{value}`")))?
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub value: String,
    pub seed: u64,
    /// `completed`, `diverged` or `invalid`.
    pub status: String,
    pub final_metric: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub runs: usize,
    pub completed: usize,
    /// Over completed runs; `None` when none completed.
    pub mean: Option<f64>,
    /// Sample standard deviation over completed runs.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub rows: Vec<SweepRow>,
}

/// Runs every `(value, seed)` pair, `parallel` at a time (0 means one per
/// available core). Output order follows `values × seeds` whatever the
/// execution order. A failing run becomes a row; the sweep goes on.
pub fn sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[String],
    seeds: &[u64],
    parallel: usize,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Usage("sweep needs at least one seed".into()));
    }
    let configs = values
        .iter()
        .map(|v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {parallel} workers: {e}")))?;
    let runs: Vec<SweepRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let cfg = ExperimentConfig {
                    seed,
                    ..configs[i].clone()
                };
                run_one(values[i].clone(), &cfg)
            })
            .collect()
    });
    let rows = values
        .iter()
        .map(|v| aggregate(v, runs.iter().filter(|r| &r.value == v)))
        .collect();
    Ok(SweepTable { runs, rows })
}

fn run_one(value: String, cfg: &ExperimentConfig) -> SweepRun {
    let seed = cfg.seed;
    match run_experiment(cfg) {
        Ok(report) => match report.status {
            RunStatus::Completed => SweepRun {
                value,
                seed,
                status: "completed".into(),
                final_metric: Some(report.final_metric),
                detail: String::new(),
            },
            RunStatus::Diverged { step, reason } => SweepRun {
                value,
                seed,
                status: "diverged".into(),
                final_metric: None,
                detail: format!("step {step}: {reason}"),
            },
        },
        Err(e) => SweepRun {
            value,
            seed,
            status: "invalid".into(),
            final_metric: None,
            detail: e.to_string(),
        },
    }
}

fn aggregate<'a>(value: &str, runs: impl Iterator<Item = &'a SweepRun>) -> SweepRow {
    let runs: Vec<&SweepRun> = runs.collect();
    let metrics: Vec<f64> = runs.iter().filter_map(|r| r.final_metric).collect();
    let (mean, std) = if metrics.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_and_std(&metrics);
        (Some(m), Some(s))
    };
    SweepRow {
        value: value.to_string(),
        runs: runs.len(),
        completed: metrics.len(),
        mean,
        std,
    }
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::format(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

pub const RUNS_FILE: &str = "sweep_runs.csv";
pub const AGGREGATE_FILE: &str = "sweep.csv";

pub fn write_table(table: &SweepTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_csv(&table.runs, &dir.join(RUNS_FILE))?;
    write_csv(&table.rows, &dir.join(AGGREGATE_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use platon_core::models::{DatasetSpec, ModelSpec};
    use platon_core::{ScheduleConfig, ScoreConfig};

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::linear(),
            dataset: DatasetSpec::default(),
            schedule: ScheduleConfig::new(0.5, 5, 5, 60),
            score: ScoreConfig::default(),
            lr: 0.05,
            batch_size: 16,
            seed: 0,
            snapshot_every: 10,
            eval_every: 20,
            structured: None,
        }
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_row_per_value_in_input_order() {
        let values = strings(&["platon", "sensitivity_only", "uncertainty_only", "ratio"]);
        let t = sweep(&base(), Axis::Variant, &values, &[0, 1], 3).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.value.clone()).collect::<Vec<_>>(), values);
        assert_eq!(t.runs.len(), 8);
        assert_eq!((t.runs[2].value.as_str(), t.runs[2].seed), ("sensitivity_only", 0));
        assert!(t.rows.iter().all(|r| r.completed == 2));
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let values = strings(&["0.5", "0.25"]);
        let a = sweep(&base(), Axis::Ratio, &values, &[0, 1, 2], 1).unwrap();
        let b = sweep(&base(), Axis::Ratio, &values, &[0, 1, 2], 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_values_become_failed_rows() {
        let t = sweep(&base(), Axis::Beta1, &strings(&["0.85", "1.5"]), &[0], 1).unwrap();
        assert_eq!(t.runs[1].status, "invalid");
        assert!(t.runs[1].detail.contains("beta1"));
        assert_eq!(t.rows[1].mean, None);
        assert_eq!(t.rows[0].completed, 1);
    }

    #[test]
    fn empty_inputs_and_bad_axes_are_usage_errors() {
        assert_eq!(sweep(&base(), Axis::Ratio, &strings(&["0.5"]), &[], 1).unwrap_err().class(), "usage");
        assert_eq!("depth".parse::<Axis>().unwrap_err().class(), "usage");
        assert_eq!(Axis::Variant.apply(&base(), "best").unwrap_err().class(), "usage");
    }
}

//! End-to-end pruning runs and score-variability statistics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::importance::{PruneState, ScoreConfig, ScoreMode};
use crate::models::{DatasetSpec, Minibatches, ModelSpec};
use crate::param::{GroupPartition, Mask, ParamState};
use crate::pruner::{prune_step, prune_step_structured, PruneStepOutput};
use crate::schedule::ScheduleConfig;

/// How prunable matrices are split into groups in structured mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GroupBy {
    Columns,
    Rows,
}

impl GroupBy {
    pub fn partition(self, params: &ParamState) -> Result<GroupPartition> {
        match self {
            GroupBy::Columns => GroupPartition::columns(params),
            GroupBy::Rows => GroupPartition::rows(params),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ExperimentConfig {
    #[cfg_attr(feature = "serde", serde(default))]
    pub model: ModelSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub dataset: DatasetSpec,
    pub schedule: ScheduleConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub score: ScoreConfig,
    pub lr: f64,
    pub batch_size: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_snapshot_every"))]
    pub snapshot_every: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_eval_every"))]
    pub eval_every: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub structured: Option<GroupBy>,
}

#[cfg(feature = "serde")]
fn default_snapshot_every() -> usize {
    10
}

#[cfg(feature = "serde")]
fn default_eval_every() -> usize {
    100
}

impl ExperimentConfig {
    pub fn total_steps(&self) -> usize {
        self.schedule.total_steps
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.dataset.validate()?;
        self.schedule.validate()?;
        self.score.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr = {} must be finite and > 0", self.lr)));
        }
        if self.batch_size == 0 || self.batch_size > self.dataset.n_train {
            return Err(Error::config(format!(
                "batch_size = {} must be in [1, dataset.n_train = {}]",
                self.batch_size, self.dataset.n_train
            )));
        }
        if self.snapshot_every == 0 || self.eval_every == 0 {
            return Err(Error::config("snapshot_every and eval_every must be >= 1"));
        }
        if self.schedule.t_final_warmup == 0 {
            return Err(Error::config(
                "schedule.t_final_warmup must be >= 1 so the last step prunes to r_final",
            ));
        }
        self.model.build(self.dataset.input_dim)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: usize,
    pub train_loss: f64,
    pub ratio: f64,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "snake_case"))]
pub enum RunStatus {
    Completed,
    Diverged { step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub status: RunStatus,
    pub per_step: Vec<StepRecord>,
    /// `(step, metric)` measured after the step's update.
    pub eval_curve: Vec<(usize, f64)>,
    /// Accuracy or MSE on the eval split; NaN when the run diverged.
    pub final_metric: f64,
    /// Flat parameter index of every snapshot column, or group index in
    /// structured mode.
    pub snapshot_units: Vec<usize>,
    pub snapshot_steps: Vec<usize>,
    pub score_snapshots: Vec<Vec<f64>>,
    /// Raw per-step sensitivity recorded at the same steps.
    pub sensitivity_snapshots: Vec<Vec<f64>>,
    /// Unit mask at the same steps.
    pub mask_snapshots: Vec<Vec<bool>>,
    /// Entry mask changes summed over consecutive steps, starting from the
    /// dense model.
    pub mask_flips: usize,
    pub final_params: Vec<f64>,
    pub final_mask: Vec<bool>,
    /// Prunable units: entries, or groups in structured mode.
    pub units: usize,
    pub prunable_entries: usize,
    pub final_retained: usize,
}

impl RunReport {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Prunable entries that are kept at the end.
    pub fn final_retained_entries(&self, prunable: &[bool]) -> usize {
        self.final_mask
            .iter()
            .zip(prunable)
            .filter(|(&keep, &p)| keep && p)
            .count()
    }
}

/// Loss above this multiple of the first step's loss counts towards
/// divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;
/// Consecutive blown-up steps that abort a run.
pub const DIVERGENCE_PATIENCE: usize = 50;

/// Trains with pruning for `schedule.total_steps` steps. Configuration
/// problems are errors; numeric blow-ups end the run early with a
/// [`RunStatus::Diverged`] report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let split = config.dataset.generate(config.seed)?;
    let model = config.model.build(config.dataset.input_dim)?;
    let mut params = model.init(config.seed);
    let d = params.len();
    let partition = config.structured.map(|g| g.partition(&params)).transpose()?;
    let (units, snapshot_units, mode) = match &partition {
        Some(p) => (p.len(), (0..p.len()).collect::<Vec<_>>(), ScoreMode::Structured),
        None => (params.prunable_count(), params.prunable_indices(), ScoreMode::Entrywise),
    };
    let state_len = if partition.is_some() { units } else { d };
    let mut state = PruneState::new(state_len, mode);
    let mut batches = Minibatches::new(split.train.len(), config.batch_size, config.seed)?;

    let mut report = RunReport {
        config: config.clone(),
        status: RunStatus::Completed,
        per_step: Vec::with_capacity(config.total_steps()),
        eval_curve: Vec::new(),
        final_metric: f64::NAN,
        snapshot_units,
        snapshot_steps: Vec::new(),
        score_snapshots: Vec::new(),
        sensitivity_snapshots: Vec::new(),
        mask_snapshots: Vec::new(),
        mask_flips: 0,
        final_params: Vec::new(),
        final_mask: vec![true; d],
        units,
        prunable_entries: params.prunable_count(),
        final_retained: units,
    };
    let mut previous = Mask::ones(d);
    let mut initial_loss = None;
    let mut blown_up = 0usize;

    for t in 0..config.total_steps() {
        let rows = batches.next().expect("minibatch stream is endless");
        let (loss, grad) = match model.loss_and_grad(&params, &split.train.batch(&rows)) {
            Ok(v) => v,
            Err(e) => return Ok(diverged(report, t, format!("{e}"), &params)),
        };
        let reference = *initial_loss.get_or_insert(loss);
        if loss > DIVERGENCE_FACTOR * reference {
            blown_up += 1;
            if blown_up >= DIVERGENCE_PATIENCE {
                let reason = format!(
                    "loss above {DIVERGENCE_FACTOR}x the initial loss for {DIVERGENCE_PATIENCE} consecutive steps"
                );
                return Ok(diverged(report, t, reason, &params));
            }
        } else {
            blown_up = 0;
        }

        let step = match &partition {
            Some(p) => prune_step_structured(&params, &state, &grad, config.lr, &config.schedule, &config.score, p),
            None => prune_step(&params, &state, &grad, config.lr, &config.schedule, &config.score),
        };
        let out: PruneStepOutput = match step {
            Ok(out) => out,
            Err(e @ (Error::NonFinite { .. } | Error::NonFiniteAtStep { .. })) => {
                return Ok(diverged(report, t, format!("{e}"), &params));
            }
            Err(e) => return Err(e),
        };

        report.mask_flips += out.mask.hamming(&previous);
        report.per_step.push(StepRecord {
            step: t,
            train_loss: loss,
            ratio: out.ratio,
            retained: out.retained,
        });
        if t % config.snapshot_every == 0 {
            let pick = |v: &[f64]| -> Vec<f64> {
                match &partition {
                    Some(_) => v.to_vec(),
                    None => report.snapshot_units.iter().map(|&j| v[j]).collect(),
                }
            };
            let unit_mask = match &partition {
                Some(p) => p.groups().iter().map(|g| out.mask.get(g[0])).collect(),
                None => report.snapshot_units.iter().map(|&j| out.mask.get(j)).collect(),
            };
            report.snapshot_steps.push(t);
            report.score_snapshots.push(pick(&out.scores));
            report.sensitivity_snapshots.push(pick(&out.sensitivity));
            report.mask_snapshots.push(unit_mask);
        }
        params = out.params;
        state = out.state;
        previous = out.mask;
        report.final_retained = out.retained;

        if (t + 1) % config.eval_every == 0 || t + 1 == config.total_steps() {
            match model.evaluate(&params, &split.eval) {
                Ok(m) => report.eval_curve.push((t, m)),
                Err(e) => return Ok(diverged(report, t, format!("{e}"), &params)),
            }
        }
    }

    report.final_metric = report.eval_curve.last().map_or(f64::NAN, |&(_, m)| m);
    report.final_mask = previous.into_bits();
    report.final_params = params.into_values();
    Ok(report)
}

fn diverged(mut report: RunReport, step: usize, reason: String, params: &ParamState) -> RunReport {
    report.status = RunStatus::Diverged { step, reason };
    report.final_metric = f64::NAN;
    report.final_params = params.values().to_vec();
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Transform {
    None,
    Log,
}

/// Dispersion of each weight's score trajectory, summarised across weights.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariabilityStats {
    /// Population standard deviation over snapshots; `None` for weights left
    /// with fewer than two usable values.
    pub per_weight_std: Vec<Option<f64>>,
    pub excluded_weights: usize,
    /// Non-positive values dropped by the log transform.
    pub dropped_values: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl VariabilityStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Per-weight standard deviation across snapshot rows. Under
/// [`Transform::Log`] non-positive values are skipped and counted.
pub fn variability_stats(snapshots: &[Vec<f64>], transform: Transform) -> Result<VariabilityStats> {
    if snapshots.len() < 2 {
        return Err(Error::config("variability needs at least two snapshots"));
    }
    let width = snapshots[0].len();
    for row in snapshots {
        Error::check_len("snapshot row", width, row.len())?;
    }
    let mut per_weight = Vec::with_capacity(width);
    let mut dropped = 0;
    for j in 0..width {
        let column: Vec<f64> = snapshots
            .iter()
            .filter_map(|row| match transform {
                Transform::None => Some(row[j]),
                Transform::Log if row[j] > 0.0 => Some(libm::log(row[j])),
                Transform::Log => {
                    dropped += 1;
                    None
                }
            })
            .collect();
        per_weight.push(if column.len() >= 2 { Some(population_std(&column)) } else { None });
    }
    let mut kept: Vec<f64> = per_weight.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::Empty);
    }
    if kept.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { context: "score trajectory" });
    }
    kept.sort_by(f64::total_cmp);
    Ok(VariabilityStats {
        excluded_weights: per_weight.iter().filter(|s| s.is_none()).count(),
        per_weight_std: per_weight,
        dropped_values: dropped,
        median: quantile(&kept, 0.5),
        q1: quantile(&kept, 0.25),
        q3: quantile(&kept, 0.75),
    })
}

/// Zeroes every snapshot value whose unit was pruned at that step, so a log
/// transform only sees live weights.
pub fn live_only(snapshots: &[Vec<f64>], masks: &[Vec<bool>]) -> Result<Vec<Vec<f64>>> {
    Error::check_len("mask snapshots", snapshots.len(), masks.len())?;
    snapshots
        .iter()
        .zip(masks)
        .map(|(row, mask)| {
            Error::check_len("mask snapshot row", row.len(), mask.len())?;
            Ok(row.iter().zip(mask).map(|(&v, &keep)| if keep { v } else { 0.0 }).collect())
        })
        .collect()
}

pub fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

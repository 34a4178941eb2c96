//! Sensitivity, its smoothed estimate and uncertainty, and the final
//! importance score.
//!
//! For every prunable unit `j` (an entry, or a group in structured mode) one
//! step of the estimator is
//!
//! ```text
//! I_j  = |θ_j · g_j|
//! Ī_j ← β₁ Ī_j + (1 − β₁) I_j
//! U_j  = |I_j − Ī_j|
//! Ū_j ← β₂ Ū_j + (1 − β₂) U_j
//! S_j  = Ī_j · Ū_j
//! ```
//!
//! with `Ī = Ū = 0` before the first step and no bias correction. `Ū` plays
//! the role of an upper-confidence bonus: a unit whose sensitivity keeps
//! jumping around stays in the model longer.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::param::GroupPartition;

/// Which statistic ranks the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScoreVariant {
    /// `Ī ⊙ Ū`
    #[default]
    Platon,
    /// `Ī`
    SensitivityOnly,
    /// `Ū`
    UncertaintyOnly,
    /// `Ī / (Ū + ε)`: prunes the most uncertain weights first.
    Ratio,
    /// `|θ|`, or the L1 norm of each group in structured mode.
    Magnitude,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 5] = [
        ScoreVariant::Platon,
        ScoreVariant::SensitivityOnly,
        ScoreVariant::UncertaintyOnly,
        ScoreVariant::Ratio,
        ScoreVariant::Magnitude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::Platon => "platon",
            ScoreVariant::SensitivityOnly => "sensitivity_only",
            ScoreVariant::UncertaintyOnly => "uncertainty_only",
            ScoreVariant::Ratio => "ratio",
            ScoreVariant::Magnitude => "magnitude",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScoreConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub variant: ScoreVariant,
    /// Floor added to `Ū` by the ratio variant.
    pub ratio_epsilon: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            beta1: 0.85,
            beta2: 0.85,
            variant: ScoreVariant::Platon,
            ratio_epsilon: 1e-12,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(alloc::format!(
                    "score.{name} = {b} violates 0 < {name} < 1"
                )));
            }
        }
        if !(self.ratio_epsilon > 0.0 && self.ratio_epsilon.is_finite()) {
            return Err(Error::config(alloc::format!(
                "score.ratio_epsilon = {} must be a positive finite number",
                self.ratio_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Entrywise,
    Structured,
}

/// Smoothed statistics carried across pruning steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneState {
    pub smoothed_importance: Vec<f64>,
    pub smoothed_uncertainty: Vec<f64>,
    pub step: usize,
    pub mode: ScoreMode,
}

impl PruneState {
    /// Zero-initialised state over `len` units (entries or groups).
    pub fn new(len: usize, mode: ScoreMode) -> Self {
        Self {
            smoothed_importance: alloc::vec![0.0; len],
            smoothed_uncertainty: alloc::vec![0.0; len],
            step: 0,
            mode,
        }
    }

    pub fn len(&self) -> usize {
        self.smoothed_importance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smoothed_importance.is_empty()
    }

    /// Folds one sensitivity observation into both moving averages and
    /// advances the step counter.
    pub fn observe(&self, sensitivity: &[f64], config: &ScoreConfig) -> Result<PruneState> {
        let importance =
            update_smoothed_importance(&self.smoothed_importance, sensitivity, config.beta1)?;
        let variation = uncertainty(sensitivity, &importance)?;
        let smoothed_uncertainty =
            update_smoothed_uncertainty(&self.smoothed_uncertainty, &variation, config.beta2)?;
        Ok(PruneState {
            smoothed_importance: importance,
            smoothed_uncertainty,
            step: self.step + 1,
            mode: self.mode,
        })
    }
}

fn check_finite(context: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

/// `|θ_j · g_j|` for every entry.
pub fn sensitivity(theta: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    Error::check_len("sensitivity", theta.len(), grad.len())?;
    check_finite("parameters", theta)?;
    check_finite("gradient", grad)?;
    let out: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| (t * g).abs()).collect();
    check_finite("sensitivity", &out)?;
    Ok(out)
}

/// `|θ_G · g_G|` per group. Opposite-signed entries inside a group cancel.
pub fn group_sensitivity(theta: &[f64], grad: &[f64], partition: &GroupPartition) -> Result<Vec<f64>> {
    Error::check_len("group sensitivity", theta.len(), grad.len())?;
    check_finite("parameters", theta)?;
    check_finite("gradient", grad)?;
    let mut out = Vec::with_capacity(partition.len());
    for (g, members) in partition.groups().iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Partition(alloc::format!("group {g} is empty")));
        }
        let mut dot = 0.0;
        for &j in members {
            if j >= theta.len() {
                return Err(Error::Partition(alloc::format!(
                    "index {j} is out of range for {} parameters",
                    theta.len()
                )));
            }
            dot += theta[j] * grad[j];
        }
        out.push(dot.abs());
    }
    check_finite("group sensitivity", &out)?;
    Ok(out)
}

/// L1 norm of every group.
pub fn group_magnitude(theta: &[f64], partition: &GroupPartition) -> Vec<f64> {
    partition
        .groups()
        .iter()
        .map(|members| members.iter().map(|&j| theta[j].abs()).sum())
        .collect()
}

fn ema(prev: &[f64], current: &[f64], beta: f64) -> Result<Vec<f64>> {
    Error::check_len("moving average", prev.len(), current.len())?;
    check_finite("moving average input", current)?;
    Ok(prev
        .iter()
        .zip(current)
        .map(|(p, c)| beta * p + (1.0 - beta) * c)
        .collect())
}

pub fn update_smoothed_importance(prev: &[f64], current: &[f64], beta1: f64) -> Result<Vec<f64>> {
    ema(prev, current, beta1)
}

pub fn update_smoothed_uncertainty(prev: &[f64], current: &[f64], beta2: f64) -> Result<Vec<f64>> {
    ema(prev, current, beta2)
}

/// Local temporal variation `|I − Ī|`.
pub fn uncertainty(current: &[f64], smoothed: &[f64]) -> Result<Vec<f64>> {
    Error::check_len("uncertainty", current.len(), smoothed.len())?;
    Ok(current
        .iter()
        .zip(smoothed)
        .map(|(i, s)| (i - s).abs())
        .collect())
}

/// Ranking statistic for the configured variant.
///
/// `magnitude` is read only by [`ScoreVariant::Magnitude`]: per-entry `|θ|` in
/// entrywise mode, [`group_magnitude`] in structured mode.
pub fn score(state: &PruneState, magnitude: &[f64], config: &ScoreConfig) -> Result<Vec<f64>> {
    let ibar = &state.smoothed_importance;
    let ubar = &state.smoothed_uncertainty;
    Error::check_len("score state", ibar.len(), ubar.len())?;
    let out: Vec<f64> = match config.variant {
        ScoreVariant::Platon => ibar.iter().zip(ubar).map(|(i, u)| i * u).collect(),
        ScoreVariant::SensitivityOnly => ibar.clone(),
        ScoreVariant::UncertaintyOnly => ubar.clone(),
        ScoreVariant::Ratio => ibar
            .iter()
            .zip(ubar)
            .map(|(i, u)| i / (u + config.ratio_epsilon))
            .collect(),
        ScoreVariant::Magnitude => {
            Error::check_len("magnitude score", ibar.len(), magnitude.len())?;
            magnitude.iter().map(|t| t.abs()).collect()
        }
    };
    check_finite("importance score", &out)?;
    Ok(out)
}

//! One iteration of uncertainty-aware pruning: score update, gradient step,
//! top-k projection.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::importance::{self, PruneState, ScoreConfig, ScoreMode};
use crate::param::{apply_mask, expand_group_mask, GroupPartition, Mask, ParamState};
use crate::schedule::{ratio_at, retained_count, ScheduleConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PruneStepOutput {
    /// Parameters after the gradient step and projection.
    pub params: ParamState,
    pub state: PruneState,
    /// Entry-level mask that was applied.
    pub mask: Mask,
    /// Per-unit scores the mask was selected from (entries or groups).
    pub scores: Vec<f64>,
    /// Raw per-unit sensitivity of this step's gradient.
    pub sensitivity: Vec<f64>,
    pub ratio: f64,
    /// Retained units: prunable entries, or groups in structured mode.
    pub retained: usize,
}

fn by_score_then_index(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Keeps the `k` highest scores; equal scores go to the lower index.
pub fn select_topk(scores: &[f64], k: usize) -> Result<Mask> {
    let n = scores.len();
    if k > n {
        return Err(Error::KOutOfRange { k, len: n });
    }
    if k == n {
        return Ok(Mask::ones(n));
    }
    let mut mask = Mask::zeros(n).into_bits();
    if k > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.select_nth_unstable_by(k - 1, by_score_then_index(scores));
        for &j in &order[..k] {
            mask[j] = true;
        }
    }
    Ok(Mask::from_bits(mask))
}

fn check_step(state: &PruneState, schedule: &ScheduleConfig, lr: f64) -> Result<()> {
    schedule.validate()?;
    if state.step >= schedule.total_steps {
        return Err(Error::config(alloc::format!(
            "step {} is past the schedule's {} total steps",
            state.step, schedule.total_steps
        )));
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::config(alloc::format!("learning rate {lr} must be finite and >= 0")));
    }
    Ok(())
}

fn check_gradient(grad: &[f64], update: &[f64], d: usize, step: usize) -> Result<()> {
    Error::check_len("gradient", d, grad.len())?;
    Error::check_len("update direction", d, update.len())?;
    if !grad.iter().chain(update).all(|g| g.is_finite()) {
        return Err(Error::NonFiniteAtStep {
            context: "gradient",
            step,
        });
    }
    Ok(())
}

fn descend(params: &ParamState, update: &[f64], lr: f64) -> Result<ParamState> {
    params.with_values(
        params
            .values()
            .iter()
            .zip(update)
            .map(|(t, u)| t - lr * u)
            .collect(),
    )
}

/// Entrywise step where the gradient drives both the scores and the update.
pub fn prune_step(
    params: &ParamState,
    state: &PruneState,
    grad: &[f64],
    lr: f64,
    schedule: &ScheduleConfig,
    config: &ScoreConfig,
) -> Result<PruneStepOutput> {
    prune_step_with_update(params, state, grad, grad, lr, schedule, config)
}

/// Entrywise step with a separate update direction.
///
/// Scores always consume the raw gradient `grad`; the parameters move along
/// `-lr · update`, which lets a caller plug in momentum or an adaptive
/// optimizer. A pruned entry that is selected again restarts from
/// `0 − lr · update_j`.
pub fn prune_step_with_update(
    params: &ParamState,
    state: &PruneState,
    grad: &[f64],
    update: &[f64],
    lr: f64,
    schedule: &ScheduleConfig,
    config: &ScoreConfig,
) -> Result<PruneStepOutput> {
    let d = params.len();
    if state.mode != ScoreMode::Entrywise {
        return Err(Error::config("entrywise step called with a structured state"));
    }
    Error::check_len("prune state", d, state.len())?;
    check_step(state, schedule, lr)?;
    check_gradient(grad, update, d, state.step)?;

    let sensitivity = importance::sensitivity(params.values(), grad)?;
    let next = state.observe(&sensitivity, config)?;
    let scores = importance::score(&next, params.values(), config)?;

    let ratio = ratio_at(state.step, schedule)?;
    let prunable = params.prunable_indices();
    let retained = retained_count(ratio, prunable.len());
    let sub_scores: Vec<f64> = prunable.iter().map(|&j| scores[j]).collect();
    let keep = select_topk(&sub_scores, retained)?;
    let mut bits = Mask::ones(d).into_bits();
    for (slot, &j) in prunable.iter().enumerate() {
        bits[j] = keep.get(slot);
    }
    let mask = Mask::from_bits(bits);

    let params = apply_mask(&descend(params, update, lr)?, &mask)?;
    Ok(PruneStepOutput {
        params,
        state: next,
        mask,
        scores,
        sensitivity,
        ratio,
        retained,
    })
}

/// Group-level step: scores, moving averages and top-k run over groups, and
/// whole groups are zeroed or kept together.
pub fn prune_step_structured(
    params: &ParamState,
    state: &PruneState,
    grad: &[f64],
    lr: f64,
    schedule: &ScheduleConfig,
    config: &ScoreConfig,
    partition: &GroupPartition,
) -> Result<PruneStepOutput> {
    prune_step_structured_with_update(params, state, grad, grad, lr, schedule, config, partition)
}

#[allow(clippy::too_many_arguments)]
pub fn prune_step_structured_with_update(
    params: &ParamState,
    state: &PruneState,
    grad: &[f64],
    update: &[f64],
    lr: f64,
    schedule: &ScheduleConfig,
    config: &ScoreConfig,
    partition: &GroupPartition,
) -> Result<PruneStepOutput> {
    let d = params.len();
    if state.mode != ScoreMode::Structured {
        return Err(Error::config("structured step called with an entrywise state"));
    }
    Error::check_len("structured prune state", partition.len(), state.len())?;
    check_step(state, schedule, lr)?;
    check_gradient(grad, update, d, state.step)?;

    let sensitivity = importance::group_sensitivity(params.values(), grad, partition)?;
    let next = state.observe(&sensitivity, config)?;
    let magnitude = importance::group_magnitude(params.values(), partition);
    let scores = importance::score(&next, &magnitude, config)?;

    let ratio = ratio_at(state.step, schedule)?;
    let retained = retained_count(ratio, partition.len());
    let keep = select_topk(&scores, retained)?;
    let mask = expand_group_mask(keep.bits(), partition, d)?;

    let params = apply_mask(&descend(params, update, lr)?, &mask)?;
    Ok(PruneStepOutput {
        params,
        state: next,
        mask,
        scores,
        sensitivity,
        ratio,
        retained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::ScoreVariant;
    use crate::param::TensorShape;
    use alloc::vec;

    fn schedule_keeping(k: usize, d: usize) -> ScheduleConfig {
        // ti = 0, tf = T - 1: the final plateau starts at step 1, so step 0
        // is on the cubic branch with c = 1 and yields r_initial.
        let mut s = ScheduleConfig::new(k as f64 / d as f64, 0, 1, 2);
        s.r_initial = k as f64 / d as f64;
        s
    }

    #[test]
    fn topk_examples() {
        assert_eq!(select_topk(&[3.0, 1.0, 2.0], 2).unwrap().bits(), &[true, false, true]);
        assert_eq!(select_topk(&[2.0, 2.0, 1.0], 1).unwrap().bits(), &[true, false, false]);
        assert_eq!(select_topk(&[2.0, 2.0, 1.0], 0).unwrap().bits(), &[false; 3]);
        assert_eq!(select_topk(&[0.0, -0.0, 0.0], 2).unwrap().bits(), &[true, true, false]);
        assert!(matches!(select_topk(&[1.0], 2), Err(Error::KOutOfRange { k: 2, len: 1 })));
    }

    #[test]
    fn one_step_hand_trace() {
        let params = ParamState::dense(vec![1.0, 0.1]);
        let state = PruneState::new(2, ScoreMode::Entrywise);
        let cfg = ScoreConfig {
            beta1: 0.5,
            beta2: 0.5,
            ..ScoreConfig::default()
        };
        let out = prune_step(&params, &state, &[0.1, 1.0], 0.1, &schedule_keeping(1, 2), &cfg).unwrap();
        let near = |got: &[f64], want: f64| got.iter().all(|g| (g - want).abs() < 1e-15);
        assert!(near(&out.sensitivity, 0.1));
        assert!(near(&out.state.smoothed_importance, 0.05));
        assert!(near(&out.state.smoothed_uncertainty, 0.025));
        assert!(near(&out.scores, 0.00125));
        assert_eq!(out.scores[0], out.scores[1]);
        assert_eq!(out.mask.bits(), &[true, false]);
        assert_eq!(out.params.values(), &[0.99, 0.0]);
        assert_eq!(out.state.step, 1);
        assert_eq!(out.retained, 1);
    }

    #[test]
    fn full_retention_is_plain_sgd() {
        let params = ParamState::dense(vec![0.5, -1.0, 2.0]);
        let state = PruneState::new(3, ScoreMode::Entrywise);
        let g = [0.3, 0.2, -0.1];
        let out = prune_step(&params, &state, &g, 0.5, &schedule_keeping(3, 3), &ScoreConfig::default()).unwrap();
        assert_eq!(out.mask, Mask::ones(3));
        let expected: Vec<f64> = params.values().iter().zip(g).map(|(t, g)| t - 0.5 * g).collect();
        assert_eq!(out.params.values(), expected.as_slice());
    }

    #[test]
    fn reactivated_weight_restarts_from_zero() {
        // Step 0 prunes index 1 (the lowest magnitude). Step 1 keeps both;
        // the revived entry equals -lr * g, not its old 0.2.
        let params = ParamState::dense(vec![1.0, 0.2]);
        let state = PruneState::new(2, ScoreMode::Entrywise);
        let cfg = ScoreConfig {
            variant: ScoreVariant::Magnitude,
            ..ScoreConfig::default()
        };
        let mut sched = ScheduleConfig::new(0.5, 0, 0, 2);
        sched.r_initial = 0.5;
        let first = prune_step(&params, &state, &[0.0, 0.0], 0.1, &sched, &cfg).unwrap();
        assert_eq!(first.params.values(), &[1.0, 0.0]);

        let mut keep_all = ScheduleConfig::new(1.0, 0, 0, 2);
        keep_all.r_initial = 1.0;
        let second = prune_step(&first.params, &first.state, &[0.0, 0.3], 0.1, &keep_all, &cfg).unwrap();
        assert!(second.mask.get(1));
        assert_eq!(second.params.values()[1], -0.1 * 0.3);
        assert_ne!(second.params.values()[1], 0.2);
    }

    #[test]
    fn biases_survive_pruning() {
        let shapes = vec![TensorShape::new("w", vec![1, 3]), TensorShape::new("b", vec![1])];
        let params = ParamState::new(vec![1.0, 2.0, 3.0, 4.0], shapes).unwrap();
        let state = PruneState::new(4, ScoreMode::Entrywise);
        let cfg = ScoreConfig {
            variant: ScoreVariant::Magnitude,
            ..ScoreConfig::default()
        };
        let out = prune_step(&params, &state, &[0.0; 4], 0.1, &schedule_keeping(1, 3), &cfg).unwrap();
        assert_eq!(out.params.values(), &[0.0, 0.0, 3.0, 4.0]);
        assert_eq!(out.retained, 1);
    }

    #[test]
    fn non_finite_gradient_reports_the_step() {
        let params = ParamState::dense(vec![1.0]);
        let mut state = PruneState::new(1, ScoreMode::Entrywise);
        state.step = 3;
        let err = prune_step(&params, &state, &[f64::NAN], 0.1, &ScheduleConfig::new(1.0, 0, 0, 10), &ScoreConfig::default())
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteAtStep { context: "gradient", step: 3 });
    }

    #[test]
    fn step_past_horizon_is_rejected() {
        let params = ParamState::dense(vec![1.0]);
        let mut state = PruneState::new(1, ScoreMode::Entrywise);
        state.step = 10;
        assert!(prune_step(&params, &state, &[0.0], 0.1, &ScheduleConfig::new(1.0, 0, 0, 10), &ScoreConfig::default()).is_err());
    }

    #[test]
    fn tied_groups_keep_the_lower_index() {
        let params = ParamState::dense(vec![1.0, 1.0, 1.0, 1.0]);
        let part = GroupPartition::new(vec![vec![0, 1], vec![2, 3]], params.prunable()).unwrap();
        let state = PruneState::new(2, ScoreMode::Structured);
        let out = prune_step_structured(&params, &state, &[0.5; 4], 0.0, &schedule_keeping(1, 2), &ScoreConfig::default(), &part)
            .unwrap();
        assert_eq!(out.mask.bits(), &[true, true, false, false]);
        assert_eq!(out.params.values(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn cancelling_group_is_pruned_first() {
        // Group 0: θ·g = 1·0.5 + 2·(−0.25) = 0. Group 1: 1·0.5 + 1·0.5 = 1.
        // Group 2: 2·0.5 + 1·0.5 = 1.5. Keep 2 of 3.
        let params = ParamState::dense(vec![1.0, 2.0, 1.0, 1.0, 2.0, 1.0]);
        let part = GroupPartition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5]], params.prunable()).unwrap();
        let state = PruneState::new(3, ScoreMode::Structured);
        let g = [0.5, -0.25, 0.5, 0.5, 0.5, 0.5];
        let mut sched = ScheduleConfig::new(2.0 / 3.0, 0, 1, 2);
        sched.r_initial = 2.0 / 3.0;
        let out = prune_step_structured(&params, &state, &g, 0.0, &sched, &ScoreConfig::default(), &part).unwrap();
        assert_eq!(out.sensitivity, vec![0.0, 1.0, 1.5]);
        assert_eq!(out.scores[0], 0.0);
        assert!(out.scores[1] > 0.0 && out.scores[2] > 0.0);
        assert_eq!(out.mask.bits(), &[false, false, true, true, true, true]);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let params = ParamState::dense(vec![1.0, 2.0]);
        let part = GroupPartition::singletons(&params);
        let sched = ScheduleConfig::new(1.0, 0, 0, 4);
        let cfg = ScoreConfig::default();
        assert!(prune_step(&params, &PruneState::new(2, ScoreMode::Structured), &[0.0; 2], 0.1, &sched, &cfg).is_err());
        assert!(prune_step_structured(&params, &PruneState::new(2, ScoreMode::Entrywise), &[0.0; 2], 0.1, &sched, &cfg, &part)
            .is_err());
    }
}

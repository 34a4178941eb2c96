//! Brute-force references used to check the fast paths.
//!
//! Everything here is deliberately naive: full sorts instead of selection,
//! direct power sums instead of recursions, central differences instead of
//! backpropagation, enumeration instead of search.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiment::RunReport;
use crate::importance::{PruneState, ScoreConfig, ScoreMode};
use crate::models::{Activation, Batch, DataSplit, Dataset, Model, ModelSpec};
use crate::param::{Mask, ParamState};
use crate::schedule::{ratio_at, retained_count};

/// Result of one oracle subject. `max_abs_error` is the largest deviation of
/// the checked quantity: a count of mismatched entries for exact subjects, a
/// relative error for moving averages and gradients, and `|slope − 2|` for
/// the Taylor scaling fits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleReport {
    pub subject: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub cases_checked: usize,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(subject: impl Into<String>, max_abs_error: f64, tolerance: f64, cases_checked: usize) -> Self {
        Self {
            subject: subject.into(),
            max_abs_error,
            tolerance,
            cases_checked,
            pass: max_abs_error <= tolerance,
        }
    }
}

/// Top-`k` by a full stable descending sort; equal scores keep index order.
pub fn topk_by_sort(scores: &[f64], k: usize) -> Result<Mask> {
    if k > scores.len() {
        return Err(Error::KOutOfRange { k, len: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(core::cmp::Ordering::Equal));
    let mut bits = vec![false; scores.len()];
    for &j in order.iter().take(k) {
        bits[j] = true;
    }
    Ok(Mask::from_bits(bits))
}

/// `(1 − β) Σ_k β^(t−k) h_k`: the zero-initialised moving average after the
/// whole history.
pub fn ema_direct_sum(history: &[f64], beta: f64) -> f64 {
    let t = history.len();
    (1.0 - beta)
        * history
            .iter()
            .enumerate()
            .map(|(k, &h)| libm::pow(beta, (t - 1 - k) as f64) * h)
            .sum::<f64>()
}

/// Central-difference gradient of the model loss.
pub fn finite_difference_gradient(model: &Model, theta: &[f64], batch: &Batch<'_>, h: f64) -> Result<Vec<f64>> {
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let up = model.loss(&probe, batch)?;
        probe[j] = orig - h;
        let down = model.loss(&probe, batch)?;
        probe[j] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute norm when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| libm::sqrt(v.map(|x| x * x).sum::<f64>());
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// First-order estimate `|θ_j g_j|` next to the true loss change from
/// zeroing entry `j`, on the same batch.
pub fn taylor_residual(model: &Model, params: &ParamState, batch: &Batch<'_>, j: usize) -> Result<(f64, f64)> {
    if j >= params.len() || !params.prunable()[j] {
        return Err(Error::config(alloc::format!("entry {j} is not a prunable index")));
    }
    let (loss, grad) = model.loss_and_grad(params, batch)?;
    let approx = (params.values()[j] * grad[j]).abs();
    let mut removed = params.values().to_vec();
    removed[j] = 0.0;
    let exact = (loss - model.loss(&removed, batch)?).abs();
    Ok((approx, exact))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|&x| libm::log(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| libm::log(y)).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Scales entry `j` by each factor and fits how `|approx − exact|` shrinks.
pub fn taylor_scaling_exponent(model: &Model, params: &ParamState, batch: &Batch<'_>, j: usize, scales: &[f64]) -> Result<f64> {
    let mut residuals = Vec::with_capacity(scales.len());
    for &s in scales {
        let mut values = params.values().to_vec();
        values[j] *= s;
        let (approx, exact) = taylor_residual(model, &params.with_values(values)?, batch, j)?;
        residuals.push((approx - exact).abs());
    }
    Ok(loglog_slope(scales, &residuals))
}

/// Fixed masked-training recipe used by [`exhaustive_mask_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainerSettings {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSearchResult {
    /// Entry-level mask; non-prunable entries are always kept.
    pub best_mask: Mask,
    pub best_loss: f64,
    pub candidates: usize,
}

pub const MASK_SEARCH_LIMIT: usize = 16;

/// Trains every `k`-subset of the prunable entries with full-batch masked
/// gradient descent and keeps the subset with the lowest eval loss. Ties go to
/// the lexicographically smallest retained index list.
pub fn exhaustive_mask_search(model: &Model, split: &DataSplit, k: usize, trainer: &TrainerSettings) -> Result<MaskSearchResult> {
    search_masks(model, split, k, trainer, false)
}

fn search_masks(model: &Model, split: &DataSplit, k: usize, trainer: &TrainerSettings, reverse: bool) -> Result<MaskSearchResult> {
    let init = model.init(trainer.seed);
    let prunable = init.prunable_indices();
    let d = prunable.len();
    if d > MASK_SEARCH_LIMIT {
        return Err(Error::SearchTooLarge { d, limit: MASK_SEARCH_LIMIT });
    }
    if k > d {
        return Err(Error::KOutOfRange { k, len: d });
    }
    let mut subsets: Vec<u32> = (0u32..(1 << d)).filter(|m| m.count_ones() as usize == k).collect();
    if reverse {
        subsets.reverse();
    }
    let mut best: Option<(f64, Vec<usize>, Mask)> = None;
    for subset in &subsets {
        let mut bits = vec![true; init.len()];
        for (slot, &j) in prunable.iter().enumerate() {
            bits[j] = subset & (1 << slot) != 0;
        }
        let mask = Mask::from_bits(bits);
        let loss = train_masked(model, &init, &mask, &split.train, &split.eval, trainer)?;
        let kept: Vec<usize> = (0..d).filter(|slot| subset & (1 << slot) != 0).collect();
        let better = match &best {
            None => true,
            Some((l, idx, _)) => loss < *l || (loss == *l && kept < *idx),
        };
        if better {
            best = Some((loss, kept, mask));
        }
    }
    let (best_loss, _, best_mask) = best.expect("at least one subset");
    Ok(MaskSearchResult {
        best_mask,
        best_loss,
        candidates: subsets.len(),
    })
}

fn train_masked(model: &Model, init: &ParamState, mask: &Mask, train: &Dataset, eval: &Dataset, trainer: &TrainerSettings) -> Result<f64> {
    let mut theta = crate::param::apply_mask(init, mask)?;
    for _ in 0..trainer.steps {
        let (_, grad) = model.loss_and_grad(&theta, &train.full())?;
        let values = theta
            .values()
            .iter()
            .zip(&grad)
            .zip(mask.bits())
            .map(|((t, g), &keep)| if keep { t - trainer.lr * g } else { 0.0 })
            .collect();
        theta = theta.with_values(values)?;
    }
    model.loss(theta.values(), &eval.full())
}

/// Substitutable pieces of the suite, so a deliberately broken implementation
/// can be fed through it.
#[derive(Clone, Copy)]
pub struct SuiteHooks {
    pub topk: fn(&[f64], usize) -> Result<Mask>,
}

impl Default for SuiteHooks {
    fn default() -> Self {
        Self {
            topk: crate::pruner::select_topk,
        }
    }
}

pub const SUBJECTS: [&str; 9] = [
    "topk",
    "ema_importance",
    "ema_uncertainty",
    "gradient_linear_regression",
    "gradient_logistic_regression",
    "gradient_mlp_relu",
    "gradient_mlp_tanh",
    "taylor_quadratic",
    "taylor_mlp",
];

/// Runs every subject whose name starts with one of `only` (all subjects
/// when `only` is empty).
pub fn run_suite(only: &[String], hooks: &SuiteHooks) -> Result<Vec<OracleReport>> {
    let wanted = |s: &str| only.is_empty() || only.iter().any(|p| s.starts_with(p.as_str()));
    let mut out = Vec::new();
    if wanted("topk") {
        out.push(check_topk(hooks.topk, 10_000, 0x70c)?);
    }
    if wanted("ema_importance") || wanted("ema_uncertainty") {
        let (i, u) = check_ema(100, 1000, 0xe3a)?;
        if wanted("ema_importance") {
            out.push(i);
        }
        if wanted("ema_uncertainty") {
            out.push(u);
        }
    }
    for (name, spec) in gradient_subjects() {
        if wanted(name) {
            out.push(check_gradients(name, &spec, 50, 0x96a)?);
        }
    }
    if wanted("taylor_quadratic") {
        out.push(check_taylor_quadratic()?);
    }
    if wanted("taylor_mlp") {
        out.push(check_taylor_mlp()?);
    }
    Ok(out)
}

fn gradient_subjects() -> [(&'static str, ModelSpec); 4] {
    [
        ("gradient_linear_regression", ModelSpec { l2: 0.01, ..ModelSpec::linear() }),
        ("gradient_logistic_regression", ModelSpec { l2: 0.01, ..ModelSpec::logistic() }),
        ("gradient_mlp_relu", ModelSpec { l2: 0.01, ..ModelSpec::mlp(vec![4, 5, 3], Activation::Relu) }),
        ("gradient_mlp_tanh", ModelSpec::mlp(vec![4, 6, 4, 1], Activation::Tanh)),
    ]
}

fn random_scores(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(1..=512usize);
    // Drawing from a small value pool produces heavy ties.
    let pool = match rng.random_range(0..3u8) {
        0 => 2,
        1 => 1 + n / 8,
        _ => usize::MAX,
    };
    (0..n)
        .map(|_| {
            if pool == usize::MAX {
                rng.random::<f64>()
            } else {
                rng.random_range(0..pool) as f64 * 0.25
            }
        })
        .collect()
}

/// Cross-checks a top-k implementation against [`topk_by_sort`].
pub fn check_topk(topk: fn(&[f64], usize) -> Result<Mask>, cases: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0usize;
    for _ in 0..cases {
        let scores = random_scores(&mut rng);
        let k = rng.random_range(0..=scores.len());
        let fast = topk(&scores, k)?;
        let slow = topk_by_sort(&scores, k)?;
        let card = if fast.count_ones() == k { 0 } else { 1 };
        worst = worst.max(fast.hamming(&slow) + card);
    }
    Ok(OracleReport::new("topk", worst as f64, 0.0, cases))
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale > 0.0 {
        (a - b).abs() / scale
    } else {
        0.0
    }
}

/// Recursive smoothed importance and uncertainty against direct sums.
pub fn check_ema(sequences: usize, max_len: usize, seed: u64) -> Result<(OracleReport, OracleReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let betas = [0.5, 0.85, 0.975];
    let (mut worst_i, mut worst_u) = (0.0f64, 0.0f64);
    for s in 0..sequences {
        let beta = betas[s % betas.len()];
        let len = rng.random_range(1..=max_len);
        let history: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 10.0).collect();
        let cfg = ScoreConfig {
            beta1: beta,
            beta2: beta,
            ..ScoreConfig::default()
        };
        let mut state = PruneState::new(1, ScoreMode::Entrywise);
        let mut variation = Vec::with_capacity(len);
        for t in 0..len {
            state = state.observe(&history[t..=t], &cfg)?;
            let direct_i = ema_direct_sum(&history[..=t], beta);
            variation.push((history[t] - direct_i).abs());
            worst_i = worst_i.max(relative(state.smoothed_importance[0], direct_i));
        }
        worst_u = worst_u.max(relative(state.smoothed_uncertainty[0], ema_direct_sum(&variation, beta)));
    }
    Ok((
        OracleReport::new("ema_importance", worst_i, 1e-12, sequences),
        OracleReport::new("ema_uncertainty", worst_u, 1e-12, sequences),
    ))
}

fn random_batch(rng: &mut ChaCha8Rng, spec: &ModelSpec, dim: usize, n: usize) -> Result<Dataset> {
    let classes = match spec.kind {
        crate::models::ModelKind::LinearRegression => 0,
        crate::models::ModelKind::LogisticRegression => 2,
        crate::models::ModelKind::Mlp => match spec.layer_sizes.last() {
            Some(&1) | None => 0,
            Some(&c) => c,
        },
    };
    let features: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let targets: Vec<f64> = (0..n)
        .map(|_| if classes == 0 { rng.random_range(-1.0..1.0) } else { rng.random_range(0..classes) as f64 })
        .collect();
    Dataset::new(features, targets, dim, classes > 0)
}

/// Analytic gradients against central differences (step `1e-5`) at random
/// points.
pub fn check_gradients(name: &str, spec: &ModelSpec, points: usize, seed: u64) -> Result<OracleReport> {
    let dim = spec.layer_sizes.first().copied().unwrap_or(5);
    let model = spec.build(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let data = random_batch(&mut rng, spec, dim, 6)?;
        let theta: Vec<f64> = (0..model.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = model.params_from(theta)?;
        let (_, analytic) = model.loss_and_grad(&params, &data.full())?;
        let numeric = finite_difference_gradient(&model, params.values(), &data.full(), 1e-5)?;
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Ok(OracleReport::new(name.to_string(), worst, 1e-6, points))
}

pub const TAYLOR_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// `L(θ) = ½ θ²`: the residual is exactly `½ θ²`, so the exponent is 2.
pub fn check_taylor_quadratic() -> Result<OracleReport> {
    let model = ModelSpec::linear().build(1)?;
    let data = Dataset::new(vec![1.0], vec![0.0], 1, false)?;
    let params = model.params_from(vec![0.1])?;
    let slope = taylor_scaling_exponent(&model, &params, &data.full(), 0, &TAYLOR_SCALES)?;
    Ok(OracleReport::new("taylor_quadratic", (slope - 2.0).abs(), 0.1, TAYLOR_SCALES.len()))
}

/// Magnitude each MLP weight is moved to before the scaling fit. Near the
/// initial scale the cubic term still competes with the quadratic one for
/// first-layer weights.
pub const TAYLOR_MLP_BASE: f64 = 0.01;

/// A seeded tanh MLP; every prunable weight in turn is set to
/// [`TAYLOR_MLP_BASE`] (sign kept), scaled and fitted, and the worst
/// exponent is reported.
pub fn check_taylor_mlp() -> Result<OracleReport> {
    let spec = ModelSpec::mlp(vec![3, 4, 1], Activation::Tanh);
    let model = spec.build(3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a1);
    let data = random_batch(&mut rng, &spec, 3, 8)?;
    let params = model.init(5);
    let mut worst = 0.0f64;
    let prunable = params.prunable_indices();
    for &j in &prunable {
        let mut values = params.values().to_vec();
        values[j] = TAYLOR_MLP_BASE.copysign(values[j]);
        let point = params.with_values(values)?;
        let slope = taylor_scaling_exponent(&model, &point, &data.full(), j, &TAYLOR_SCALES)?;
        worst = worst.max((slope - 2.0).abs());
    }
    Ok(OracleReport::new("taylor_mlp", worst, 0.1, prunable.len()))
}

/// Checks a finished run against the schedule: the ratio column must equal
/// the schedule at every step, and every recorded mask must hold exactly
/// the retained count.
pub fn check_report(report: &RunReport) -> Result<[OracleReport; 2]> {
    let mut ratio_err = 0.0f64;
    for rec in &report.per_step {
        let expected = ratio_at(rec.step, &report.config.schedule)?;
        ratio_err = ratio_err.max((rec.ratio - expected).abs());
        if rec.retained != retained_count(expected, report.units) {
            ratio_err = f64::INFINITY;
        }
    }
    let mut card_err = 0usize;
    let mut cases = 0;
    for (&step, mask) in report.snapshot_steps.iter().zip(&report.mask_snapshots) {
        let kept = mask.iter().filter(|&&b| b).count();
        card_err = card_err.max(kept.abs_diff(report.per_step[step].retained));
        cases += 1;
    }
    Ok([
        OracleReport::new("ratio_column", ratio_err, 0.0, report.per_step.len()),
        OracleReport::new("mask_cardinality", card_err as f64, 0.0, cases),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DatasetKind, DatasetSpec};
    use crate::experiment::{run_experiment, ExperimentConfig};
    use crate::schedule::ScheduleConfig;

    #[test]
    fn report_checks_pass_on_a_real_run_and_catch_tampering() {
        let cfg = ExperimentConfig {
            model: ModelSpec::linear(),
            dataset: DatasetSpec::default(),
            schedule: ScheduleConfig::new(0.25, 5, 5, 40),
            score: ScoreConfig::default(),
            lr: 0.05,
            batch_size: 16,
            seed: 1,
            snapshot_every: 3,
            eval_every: 10,
            structured: None,
        };
        let mut report = run_experiment(&cfg).unwrap();
        assert!(check_report(&report).unwrap().iter().all(|r| r.pass));
        report.per_step[20].ratio += 1e-12;
        report.mask_snapshots[1][0] = !report.mask_snapshots[1][0];
        assert!(check_report(&report).unwrap().iter().all(|r| !r.pass));
    }

    #[test]
    fn topk_by_sort_examples() {
        assert_eq!(topk_by_sort(&[3.0, 1.0, 2.0], 2).unwrap().bits(), &[true, false, true]);
        assert_eq!(topk_by_sort(&[1.0; 4], 2).unwrap().bits(), &[true, true, false, false]);
        assert!(topk_by_sort(&[1.0], 2).is_err());
    }

    #[test]
    fn ema_direct_sum_examples() {
        assert!((ema_direct_sum(&[1.0], 0.85) - 0.15).abs() < 1e-16);
        assert_eq!(ema_direct_sum(&[0.0; 10], 0.9), 0.0);
    }

    #[test]
    fn taylor_quadratic_values() {
        let model = ModelSpec::linear().build(1).unwrap();
        let data = Dataset::new(vec![1.0], vec![0.0], 1, false).unwrap();
        let (approx, exact) = taylor_residual(&model, &model.params_from(vec![0.1]).unwrap(), &data.full(), 0).unwrap();
        assert!((approx - 0.01).abs() < 1e-17);
        assert!((exact - 0.005).abs() < 1e-17);
        assert!(((approx - exact) - 0.5 * 0.1 * 0.1).abs() < 1e-17);

        let (a0, e0) = taylor_residual(&model, &model.params_from(vec![0.0]).unwrap(), &data.full(), 0).unwrap();
        assert_eq!((a0, e0), (0.0, 0.0));
    }

    #[test]
    fn taylor_is_exact_for_a_linear_loss() {
        // Feature 1 is zero on every sample, so the loss is constant (hence
        // linear) in θ_1.
        let model = ModelSpec::linear().build(2).unwrap();
        let data = Dataset::new(vec![1.0, 0.0, 2.0, 0.0], vec![0.5, -1.0], 2, false).unwrap();
        let params = model.params_from(vec![0.3, 0.7]).unwrap();
        let (approx, exact) = taylor_residual(&model, &params, &data.full(), 1).unwrap();
        assert_eq!(approx - exact, 0.0);
    }

    #[test]
    fn mask_search_recovers_planted_support() {
        let model = ModelSpec::linear().build(3).unwrap();
        // y = 1.2 · x_0 on a fixed design.
        let xs = [1.0, 0.2, -0.5, -0.3, 1.1, 0.4, 0.7, -0.8, 0.9, -1.2, 0.1, 0.6];
        let ys: Vec<f64> = xs.chunks(3).map(|r| 1.2 * r[0]).collect();
        let train = Dataset::new(xs.to_vec(), ys.clone(), 3, false).unwrap();
        let split = DataSplit { eval: train.clone(), train, teacher: Some(vec![1.2, 0.0, 0.0]) };
        let trainer = TrainerSettings { steps: 400, lr: 0.2, seed: 1 };
        let res = exhaustive_mask_search(&model, &split, 1, &trainer).unwrap();
        assert_eq!(res.best_mask.bits(), &[true, false, false]);
        assert_eq!(res.candidates, 3);
        assert!(res.best_loss < 1e-10);

        let all = exhaustive_mask_search(&model, &split, 3, &trainer).unwrap();
        assert_eq!(all.best_mask, Mask::ones(3));

        let none = exhaustive_mask_search(&model, &split, 0, &trainer).unwrap();
        assert_eq!(none.best_mask, Mask::zeros(3));
        let zero_loss = ys.iter().map(|y| 0.5 * y * y).sum::<f64>() / ys.len() as f64;
        assert!((none.best_loss - zero_loss).abs() < 1e-15);
    }

    #[test]
    fn mask_search_ignores_enumeration_order() {
        let spec = DatasetSpec { kind: DatasetKind::SparseTeacher, input_dim: 6, teacher_sparsity: 0.5, noise_std: 0.3, n_train: 40, n_eval: 40, seed: Some(2) };
        let split = spec.generate(0).unwrap();
        let model = ModelSpec::linear().build(6).unwrap();
        let trainer = TrainerSettings { steps: 100, lr: 0.1, seed: 3 };
        for k in 0..=6 {
            let fwd = search_masks(&model, &split, k, &trainer, false).unwrap();
            let rev = search_masks(&model, &split, k, &trainer, true).unwrap();
            assert_eq!(fwd, rev);
        }
    }

    #[test]
    fn mask_search_guard() {
        let model = ModelSpec::linear().build(17).unwrap();
        let spec = DatasetSpec { input_dim: 17, ..DatasetSpec::default() };
        let split = spec.generate(0).unwrap();
        assert_eq!(
            exhaustive_mask_search(&model, &split, 2, &TrainerSettings::default()).unwrap_err(),
            Error::SearchTooLarge { d: 17, limit: 16 }
        );
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1.0, 0.5, 0.25, 0.125];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x * x).collect();
        assert!((loglog_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_tiebreak_is_caught() {
        fn reversed(scores: &[f64], k: usize) -> Result<Mask> {
            let rev: Vec<f64> = scores.iter().rev().copied().collect();
            let m = crate::pruner::select_topk(&rev, k)?;
            Ok(Mask::from_bits(m.bits().iter().rev().copied().collect()))
        }
        let report = check_topk(reversed, 200, 1).unwrap();
        assert!(!report.pass);
        assert!(check_topk(crate::pruner::select_topk, 200, 1).unwrap().pass);
    }
}

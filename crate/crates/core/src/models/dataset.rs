//! Seeded synthetic datasets and minibatch streams.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::schedule::retained_count;

pub(crate) const STREAM_DATA: u64 = 1;
pub(crate) const STREAM_INIT: u64 = 2;
pub(crate) const STREAM_BATCHES: u64 = 3;

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DatasetKind {
    /// Regression targets from a planted sparse linear teacher.
    #[default]
    SparseTeacher,
    /// Two Gaussian blobs separated along the first two coordinates.
    GaussianClassification,
    /// Two interleaved half circles in the first two coordinates; every other
    /// coordinate is standard normal noise.
    TwoMoonsLike,
}

impl DatasetKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, DatasetKind::SparseTeacher)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_train: usize,
    pub n_eval: usize,
    pub input_dim: usize,
    pub noise_std: f64,
    /// Fraction of teacher weights that are nonzero (sparse teacher only).
    pub teacher_sparsity: f64,
    /// Data seed. When absent the experiment seed is used.
    pub seed: Option<u64>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::SparseTeacher,
            n_train: 256,
            n_eval: 256,
            input_dim: 12,
            noise_std: 0.0,
            teacher_sparsity: 2.0 / 12.0,
            seed: None,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_eval == 0 || self.input_dim == 0 {
            return Err(Error::config("dataset counts and input_dim must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config(alloc::format!(
                "dataset.noise_std = {} must be finite and >= 0",
                self.noise_std
            )));
        }
        if self.kind == DatasetKind::SparseTeacher
            && !(self.teacher_sparsity > 0.0 && self.teacher_sparsity <= 1.0)
        {
            return Err(Error::config(alloc::format!(
                "dataset.teacher_sparsity = {} violates 0 < teacher_sparsity <= 1",
                self.teacher_sparsity
            )));
        }
        if self.kind == DatasetKind::TwoMoonsLike && self.input_dim < 2 {
            return Err(Error::config("two_moons_like needs input_dim >= 2"));
        }
        Ok(())
    }

    /// Draws the train and eval splits. Pure in `(self, seed)`.
    pub fn generate(&self, seed: u64) -> Result<DataSplit> {
        self.validate()?;
        let mut rng = seeded_rng(self.seed.unwrap_or(seed), STREAM_DATA);
        let teacher = match self.kind {
            DatasetKind::SparseTeacher => Some(draw_teacher(&mut rng, self)),
            _ => None,
        };
        let train = self.draw(&mut rng, self.n_train, teacher.as_deref());
        let eval = self.draw(&mut rng, self.n_eval, teacher.as_deref());
        Ok(DataSplit {
            train,
            eval,
            teacher,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize, teacher: Option<&[f64]>) -> Dataset {
        let dim = self.input_dim;
        let mut features = Vec::with_capacity(n * dim);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let start = features.len();
            match self.kind {
                DatasetKind::SparseTeacher => {
                    features.extend((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let w = teacher.unwrap_or(&[]);
                    let clean: f64 = features[start..].iter().zip(w).map(|(x, w)| x * w).sum();
                    let noise: f64 = rng.sample(StandardNormal);
                    targets.push(clean + self.noise_std * noise);
                }
                DatasetKind::GaussianClassification => {
                    let label = rng.random_bool(0.5);
                    let sign = if label { 1.0 } else { -1.0 };
                    for j in 0..dim {
                        let mean = if j < 2 { sign } else { 0.0 };
                        let z: f64 = rng.sample(StandardNormal);
                        features.push(mean + self.noise_std * z);
                    }
                    targets.push(if label { 1.0 } else { 0.0 });
                }
                DatasetKind::TwoMoonsLike => {
                    let label = rng.random_bool(0.5);
                    let t = rng.random::<f64>() * core::f64::consts::PI;
                    let (x0, x1) = if label {
                        (1.0 - libm::cos(t), 0.5 - libm::sin(t))
                    } else {
                        (libm::cos(t), libm::sin(t))
                    };
                    let n0: f64 = rng.sample(StandardNormal);
                    let n1: f64 = rng.sample(StandardNormal);
                    features.push(x0 - 0.5 + self.noise_std * n0);
                    features.push(x1 - 0.25 + self.noise_std * n1);
                    features.extend((2..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    targets.push(if label { 1.0 } else { 0.0 });
                }
            }
        }
        Dataset {
            features,
            targets,
            dim,
            classification: self.kind.is_classification(),
        }
    }
}

fn draw_teacher(rng: &mut ChaCha8Rng, spec: &DatasetSpec) -> Vec<f64> {
    let support = retained_count(spec.teacher_sparsity, spec.input_dim);
    let mut w = vec![0.0; spec.input_dim];
    for j in rand::seq::index::sample(rng, spec.input_dim, support) {
        let magnitude = rng.random_range(0.5..1.5);
        w[j] = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Dataset,
    pub eval: Dataset,
    /// Planted weights (sparse teacher only).
    pub teacher: Option<Vec<f64>>,
}

impl DataSplit {
    pub fn teacher_support(&self) -> Option<Vec<bool>> {
        self.teacher
            .as_ref()
            .map(|w| w.iter().map(|&x| x != 0.0).collect())
    }
}

/// Row-major feature matrix with one target per row. Classification targets
/// are class indices stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
    classification: bool,
}

impl Dataset {
    pub fn new(features: Vec<f64>, targets: Vec<f64>, dim: usize, classification: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        Error::check_len("dataset features", targets.len() * dim, features.len())?;
        Ok(Self {
            features,
            targets,
            dim,
            classification,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_classification(&self) -> bool {
        self.classification
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn full(&self) -> Batch<'_> {
        Batch {
            data: self,
            rows: None,
        }
    }

    pub fn batch<'a>(&'a self, rows: &'a [usize]) -> Batch<'a> {
        Batch {
            data: self,
            rows: Some(rows),
        }
    }
}

/// A view of some rows of a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    data: &'a Dataset,
    rows: Option<&'a [usize]>,
}

impl<'a> Batch<'a> {
    pub fn len(&self) -> usize {
        self.rows.map_or(self.data.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn is_classification(&self) -> bool {
        self.data.classification
    }

    /// `(features, target)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (&'a [f64], f64)> + 'a {
        let data = self.data;
        let n = self.len();
        let rows = self.rows;
        (0..n).map(move |k| {
            let i = rows.map_or(k, |r| r[k]);
            (data.row(i), data.target(i))
        })
    }
}

/// Endless stream of row-index batches drawn from reshuffled epochs. The last
/// batch of an epoch is short when `batch_size` does not divide `n`.
#[derive(Debug, Clone)]
pub struct Minibatches {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Minibatches {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if batch_size == 0 || batch_size > n {
            return Err(Error::config(alloc::format!(
                "batch_size = {batch_size} must be in [1, {n}]"
            )));
        }
        Ok(Self {
            order: (0..n).collect(),
            batch_size,
            cursor: n,
            rng: seeded_rng(seed, STREAM_BATCHES),
        })
    }
}

impl Iterator for Minibatches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let rows = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(rows)
    }
}

/// Convenience wrapper over [`Minibatches::new`] for a dataset.
pub fn minibatches(data: &Dataset, batch_size: usize, seed: u64) -> Result<Minibatches> {
    Minibatches::new(data.len(), batch_size, seed)
}

//! Uncertainty-aware iterative pruning.
//!
//! The importance of each prunable weight is the product of an exponential
//! moving average of its sensitivity `|θ_j · ∂L/∂θ_j|` and an exponential
//! moving average of that sensitivity's local temporal variation. After every
//! gradient step the weights outside the top-`k` scores are zeroed, with `k`
//! following a cubic remaining-ratio schedule.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `platon` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod experiment;
pub mod importance;
pub mod models;
pub mod oracle;
pub mod param;
pub mod pruner;
pub mod schedule;

pub use error::{Error, Result};
pub use importance::{PruneState, ScoreConfig, ScoreMode, ScoreVariant};
pub use param::{apply_mask, expand_group_mask, GroupPartition, Mask, ParamState, TensorShape};
pub use pruner::{prune_step, prune_step_structured, select_topk, PruneStepOutput};
pub use schedule::{ratio_at, retained_count, CubicForm, ScheduleConfig};

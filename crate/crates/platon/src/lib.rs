//! Configuration files, artifact formats, sweeps and the command line for
//! the pruning engine in `platon_core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};

/// Written into every summary so artifacts can be traced to a build.
pub const VERSION: &str = concat!("platon ", env!("CARGO_PKG_VERSION"));

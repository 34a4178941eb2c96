use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("non-finite {context} at step {step}")]
    NonFiniteAtStep { context: &'static str, step: usize },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid mask: {0}")]
    Mask(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("k = {k} is out of range for {len} scores")]
    KOutOfRange { k: usize, len: usize },

    #[error("exhaustive search over {d} prunable entries exceeds the limit of {limit}")]
    SearchTooLarge { d: usize, limit: usize },

    #[error("empty dataset or batch")]
    Empty,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected,
                actual,
            })
        }
    }
}

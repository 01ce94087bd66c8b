use thiserror::Error;

/// Errors raised by the numeric pipeline (PAD construction, scoring, inference).
///
/// Serialization failures live in [`crate::io::FormatError`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("class {0} has no correctly classified training records")]
    EmptyClass(usize),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("class index {index} out of range for {n_classes} classes")]
    InvalidClass { index: usize, n_classes: usize },

    #[error("record {0} has no ground-truth label")]
    MissingGroundTruth(u64),

    #[error("record {0} has neither a prediction nor a softmax vector")]
    MissingPrediction(u64),

    #[error("record {0} has no softmax vector")]
    MissingSoftmax(u64),

    #[error("softmax of record {sample_id} sums to {sum}, expected 1")]
    InvalidSoftmax { sample_id: u64, sum: f64 },

    #[error("unknown layer {0:?}")]
    UnknownLayer(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

use thiserror::Error;

/// Errors produced across the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mean {mu} outside the domain ({lo}, {hi})")]
    Domain { mu: f64, lo: f64, hi: f64 },
    #[error("bin {index}: value {value} outside the domain of the transform")]
    BinDomain { index: usize, value: f64 },
    #[error("variant is not defined for this family")]
    UnsupportedVariant,
    #[error("no sampler is available for this family")]
    UnsupportedSampling,
    #[error("exact moments are not available for this family")]
    UnsupportedFamily,
    #[error("need at least {required} observations, got {n}")]
    TooFewObservations { n: usize, required: usize },
    #[error("invalid shape: {0}")]
    BadShape(String),
    #[error("input length {0} is not a power of two or is too short")]
    BadLength(usize),
    #[error("filter of length {filter_len} does not fit at primary level {j0}")]
    FilterTooLongForLevel { filter_len: usize, j0: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("observation {index} = {value} is outside the support of the family")]
    Support { index: usize, value: f64 },
    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a pipeline step label to an error.
    pub fn at_step(self, step: &'static str) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A line of an input file did not parse under the declared schema.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// The row parsed but violated a declared bound (rating scale, label domain).
    #[error("{path}:{line}: {msg}")]
    Validation {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: no review records")]
    EmptyDataset { path: String },

    /// A lookup for a (user, product) group, user, category, or file entry failed.
    #[error("not found: {0}")]
    NotFound(String),

    /// Two users share no co-reviewed products; no pair features exist for them.
    #[error("users {0} and {1} have no co-reviewed products")]
    NoOverlap(String, String),

    /// Pair confidence is undefined when a user has no reviews at all.
    #[error("confidence undefined: user {0} has no reviews")]
    UndefinedConfidence(String),

    /// An invalid configuration value (non-convex alpha, delta <= 0, infeasible
    /// generator spec, bad key-value file entry).
    #[error("invalid config: {0}")]
    Config(String),

    #[error("degenerate network: dataset has {0} users (need at least 2)")]
    DegenerateNetwork(usize),

    #[error("negative-sampling table is empty: network has no positive edges")]
    EmptySamplingTable,

    /// Training produced a non-finite or oversized embedding entry.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("pair score of a user against itself is undefined (user index {0})")]
    SelfPair(usize),

    #[error("spamicity undefined: need at least 2 users")]
    UndefinedScore,

    /// A ranking metric has no defined value for the given labels.
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph construction, training, evaluation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("interaction ({user}, {item}) out of range ({n_users} users, {n_items} items)")]
    InteractionOutOfRange {
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("negative value {value} at ({row}, {col}); input must be non-negative")]
    NegativeValue { row: usize, col: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("unknown user id {0}")]
    UnknownUser(u64),

    #[error("no evaluable users: every user has an empty test set")]
    NoEvaluableUsers,

    #[error("cannot sample a negative item: every active user interacts with every item")]
    NoNegativeItems,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

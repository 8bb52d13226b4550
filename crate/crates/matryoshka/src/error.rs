use thiserror::Error;

use crate::nn::ParamKind;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("unknown architecture id `{0}`")]
    UnknownArch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("pool group {0:?} is empty but the model requires it")]
    EmptyPoolGroup(ParamKind),

    #[error("key pool sizes {key:?} do not match pool sizes {pool:?}")]
    PoolSizeMismatch { key: [usize; 3], pool: [usize; 3] },

    #[error("duplicate contribution for task {task} at {kind:?} pool index {index}")]
    DuplicateContribution {
        task: u32,
        kind: ParamKind,
        index: usize,
    },

    #[error(
        "pool {kind:?} group is declared larger than the carrier holds \
         ({declared} > {available}) and fusion `{strategy}` needs at least one full copy"
    )]
    InsufficientCopies {
        kind: ParamKind,
        declared: usize,
        available: usize,
        strategy: &'static str,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("task `{task_id}` diverged: {reason}")]
    TrainDiverged { task_id: String, reason: String },

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

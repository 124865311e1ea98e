use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the learners and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{ues} UEs cannot share {subchannels} subchannels without collisions")]
    TooManyUes { ues: usize, subchannels: usize },

    #[error("distance {0} m is below the 1 m validity floor of the pathloss model")]
    DistanceTooShort(f64),

    #[error("energy efficiency is undefined for zero transmit power on an assigned channel")]
    ZeroPower,

    #[error("expected {expected} actions, got {actual}")]
    ActionCount { expected: usize, actual: usize },

    #[error("parameter topologies differ")]
    TopologyMismatch,

    #[error("expected {expected} weights, got {actual}")]
    WeightCount { expected: usize, actual: usize },

    #[error("aggregation weights must be non-negative with a positive sum")]
    InvalidWeights,

    #[error("nothing to aggregate")]
    NoModels,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("oracle instance too large: {ues} UEs x {subchannels} subchannels x {grid} power levels")]
    OracleTooLarge { ues: usize, subchannels: usize, grid: usize },

    #[error("variant {0} needs a pre-trained meta model")]
    MissingMetaModel(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

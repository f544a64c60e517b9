//! Error type shared across the crate.

use thiserror::Error;

use crate::types::{BagId, InstanceId};

/// Errors from scoring, baseline construction, training, and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("k = {k} neighbors requested but only {available} reference points available")]
    InsufficientNeighbors { k: usize, available: usize },

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered: {context}")]
    NonFinite { context: String },

    #[error("cannot build a baseline from zero bags")]
    EmptyBaseline,

    #[error("cannot aggregate an empty score vector")]
    EmptyScores,

    #[error(
        "baseline descriptor does not match query scorer: baseline = {baseline}, query = {query}"
    )]
    DescriptorMismatch { baseline: String, query: String },

    #[error("scoring instance {instance} of bag {bag} failed: {source}")]
    InstanceScore {
        bag: BagId,
        instance: InstanceId,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("autoencoder training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    #[error("insufficient instances: need {needed} {kind} instances, have {have}")]
    InsufficientInstances {
        kind: &'static str,
        needed: usize,
        have: usize,
    },

    #[error("signal too short: {len} samples, window size {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("signal has zero power; SNR corruption is undefined")]
    ZeroPowerSignal,

    #[error("experiment stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

//! Biaffine graph parser: BiLSTM encoder, leaky-ReLU head/dependent
//! projections and biaffine edge and label scorers, trained with Adam.

mod checkpoint;
mod embeddings;
mod hyper;
mod lstm;
mod network;
mod params;
mod train;
mod vocab;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingFile, EmbeddingProvider};
pub use hyper::{Hyperparams, EXTERNAL_LEARNING_RATE, LEARNING_RATE_GRID, SCRATCH_LEARNING_RATE};
pub use network::{backward, forward, loss, softmax, LogitGrads, Logits, SentenceInput};
pub use params::{expected_shapes, Float, LstmWeights, Params, Projection};
pub use train::{
    label_probabilities, predict, predict_treebank, repair_label, train, train_with_grid, EpochLog, Model,
    SelectionMetric, TrainOptions, TrainOutcome,
};
pub use vocab::{Vocabulary, PAD, ROOT, UNK};

use crate::codec::CodecError;

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("empty treebank: {0}")]
    EmptyTreebank(String),
    #[error("training did not converge (best dev F1 {best_f1:.4})")]
    NonConverged { best_f1: f64, log: Vec<EpochLog> },
    #[error("not a checkpoint: bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionUnsupported(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("no embedding for sentence {sent_id} token {token}")]
    EmbeddingMissing { sent_id: String, token: usize },
    #[error("malformed embedding file: {0}")]
    BadEmbeddings(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl ParserError {
    pub fn code(&self) -> &'static str {
        match self {
            ParserError::DimMismatch(_) => "DIM_MISMATCH",
            ParserError::EmptySentence => "EMPTY_SENTENCE",
            ParserError::NonFiniteLoss => "NONFINITE_LOSS",
            ParserError::EmptyTreebank(_) => "EMPTY_TREEBANK",
            ParserError::NonConverged { .. } => "NON_CONVERGED",
            ParserError::BadMagic => "BAD_MAGIC",
            ParserError::VersionUnsupported(_) => "VERSION_UNSUPPORTED",
            ParserError::ShapeMismatch(_) => "SHAPE_MISMATCH",
            ParserError::BadHeader(_) => "BAD_HEADER",
            ParserError::InvalidHyperparams(_) => "INVALID_HYPERPARAMS",
            ParserError::EmbeddingMissing { .. } => "EMBEDDING_MISSING",
            ParserError::BadEmbeddings(_) => "BAD_EMBEDDINGS",
            ParserError::Codec(e) => e.code(),
        }
    }
}

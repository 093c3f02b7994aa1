//! Sequence-to-sequence semantic parser written against a small dense
//! kernel: two-channel source embeddings, a bidirectional LSTM encoder, an
//! LSTM decoder with input feeding and bilinear attention, Adam training
//! with early stopping, and beam-search decoding. All math is `f64` and
//! every gradient is derived by hand.

pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod gradcheck;
pub mod kernel;
pub mod model;
pub mod params;
pub mod train;
pub mod vectors;

use thiserror::Error;

pub use config::ModelConfig;
pub use decode::{decode_beam, decode_greedy, predict, Hypothesis};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{attend, Seq2SeqModel};
pub use train::{build_model, exact_match_rate, token_accuracy, train, EpochStats, StopReason, TrainReport};
pub use vectors::{load_pretrained_vectors, parse_pretrained_vectors};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("loss diverged at epoch {epoch}, batch {batch}")]
    NaNLoss { epoch: usize, batch: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("gradient check failed for {parameter}: max relative error {max_error:e}")]
    GradientMismatch { parameter: String, max_error: f64 },
    #[error("vector file line {0}: malformed")]
    MalformedLine(usize),
    #[error("vector file line {0}: wrong number of values")]
    InconsistentDimension(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

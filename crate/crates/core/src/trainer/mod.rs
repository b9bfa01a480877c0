//! Adam training of the captioner with a clip-level train/validation split,
//! per-epoch greedy-decoding validation CIDEr and best-epoch checkpointing.

mod adam;
mod checkpoint;
mod infer;
mod split;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use infer::Captioner;
pub use split::split_dev;
pub use train::{
    train, Architecture, EpochRecord, LossMode, TrainConfig, TrainInputs, TrainOutcome, TrainingClip, Validation,
};

use crate::captioner::ModelError;
use crate::corpus::CorpusError;
use crate::dsp::DspError;
use crate::metrics::MetricsError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("need at least 2 manifest entries to split, found {0}")]
    TooFewEntries(usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("caption {0:?} has no usable embedding row")]
    MissingEmbedding(String),
    #[error("parameter {name} has shape {expected:?} but update has {found:?}")]
    ShapeMismatch {
        name: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (ce {ce}, sentence {sentence:?}, grad norm {grad_norm}); audio ids {audio_ids:?}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        ce: f64,
        sentence: Option<f64>,
        grad_norm: f64,
        audio_ids: Vec<String>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

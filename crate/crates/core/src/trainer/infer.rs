use super::Checkpoint;
use crate::captioner::{ModelError, ModelParams};
use crate::dsp::{standardize, FeatureMatrix};

/// Inference wrapper: stored `f32` weights widened once to `f64`.
#[derive(Debug, Clone)]
pub struct Captioner {
    checkpoint: Checkpoint,
    params: ModelParams<f64>,
}

impl Captioner {
    pub fn new(checkpoint: Checkpoint) -> Self {
        let params = checkpoint.params.cast();
        Self { checkpoint, params }
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    /// Caption for raw (unstandardized) log-mel features.
    pub fn caption(&self, raw: &FeatureMatrix) -> Result<Vec<String>, ModelError> {
        let f = standardize(raw, &self.checkpoint.stats).map_err(|_| ModelError::DimensionMismatch {
            expected: self.checkpoint.stats.dims(),
            found: raw.dims(),
        })?;
        self.caption_standardized(&f)
    }

    pub fn caption_standardized(&self, f: &FeatureMatrix) -> Result<Vec<String>, ModelError> {
        self.params
            .greedy_decode(f, &self.checkpoint.vocab, self.checkpoint.config.max_decode_len)
    }
}

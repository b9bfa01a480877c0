//! GRU encoder-decoder captioner trained with word-level cross entropy plus
//! a sentence-level cosine loss against a reference sentence embedding.
//!
//! The encoder runs a GRU over the standardized feature frames, mean-pools
//! its hidden states and projects them to the audio embedding `v`. The
//! decoder GRU consumes `[word_emb(prev token); v]` at every step. Its
//! hidden states feed the output projection (next-token logits) and, after
//! mean pooling and `sent_proj`, the predicted sentence embedding.

mod decode;
mod model;
mod params;

pub use model::{EncoderCache, ForwardCache, TeacherForcing};
pub use params::{ModelParams, TENSOR_NAMES};

use crate::numcore::NumError;

/// Stability constant of the cosine sentence loss.
pub const COSINE_EPS: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("feature dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature matrix has no frames")]
    EmptySequence,
    #[error("caption must contain at least one token and end with EOS")]
    EmptyCaption,
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("sentence embedding must be finite and non-zero with {expected} entries")]
    BadSentenceEmbedding { expected: usize },
    #[error("parameter {name} has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

/// Architecture hyper-parameters. [`ModelConfig::reference`] gives the
/// full-size configuration (512-unit GRUs, 256-dim `v`, 768-dim sentence
/// embeddings, α = 10).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub feat_dim: usize,
    pub enc_hidden: usize,
    pub v_dim: usize,
    pub dec_hidden: usize,
    pub word_emb_dim: usize,
    pub vocab_size: usize,
    pub sent_emb_dim: usize,
    pub alpha: f64,
    pub max_decode_len: usize,
}

impl ModelConfig {
    pub fn reference(vocab_size: usize) -> Self {
        Self {
            feat_dim: 64,
            enc_hidden: 512,
            v_dim: 256,
            dec_hidden: 512,
            word_emb_dim: 256,
            vocab_size,
            sent_emb_dim: 768,
            alpha: 10.0,
            max_decode_len: 50,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let dims = [
            ("feat_dim", self.feat_dim),
            ("enc_hidden", self.enc_hidden),
            ("v_dim", self.v_dim),
            ("dec_hidden", self.dec_hidden),
            ("word_emb_dim", self.word_emb_dim),
            ("sent_emb_dim", self.sent_emb_dim),
            ("max_decode_len", self.max_decode_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be positive"));
        }
        if self.vocab_size < 5 {
            return Err(format!("vocab_size {} below minimum of 5", self.vocab_size));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(format!("alpha {} must be finite and non-negative", self.alpha));
        }
        Ok(())
    }
}

/// Loss values of one (audio, caption) pair or a batch mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Summed token cross entropy.
    pub ce: f64,
    /// Cosine sentence loss; `None` when no reference embedding was given.
    pub sentence: Option<f64>,
    /// `ce + alpha * sentence`.
    pub combined: f64,
    pub token_count: usize,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        self.ce.is_finite() && self.combined.is_finite() && self.sentence.is_none_or(f64::is_finite)
    }
}

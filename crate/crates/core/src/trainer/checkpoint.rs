use std::fs;
use std::path::{Path, PathBuf};

use crate::binio::{put_f32s, put_f64, put_str, put_u32, Cursor};
use crate::captioner::{ModelConfig, ModelError, ModelParams, TENSOR_NAMES};
use crate::corpus::{Vocabulary, SPECIALS};
use crate::dsp::FeatureStats;
use crate::numcore::Tensor;

const MAGIC: &[u8; 4] = b"ACKP";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: not a checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported checkpoint version {found}")]
    VersionMismatch { path: PathBuf, found: u32 },
    #[error("{path}: corrupt tensor section: {detail}")]
    CorruptTensor { path: PathBuf, detail: String },
    #[error("{path}: {source}")]
    Shape {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Everything needed to caption new audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    pub vocab: Vocabulary,
    pub stats: FeatureStats,
    pub best_val_cider: f64,
    /// 1-based epoch the parameters come from.
    pub epoch: usize,
}

/// Layout after the magic and version: u32 tensor count, named tensor
/// blocks, the vocabulary (u32 count, length-prefixed tokens including the
/// reserved ones), the stats (u32 D, means, stds), then alpha (f64),
/// max decode length (u32), best validation CIDEr (f64) and epoch (u32).
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    let w = &mut b;
    // writes into a Vec never fail
    let _ = (|| -> std::io::Result<()> {
        put_u32(w, VERSION)?;
        let tensors = ckpt.params.tensors();
        put_u32(w, tensors.len() as u32)?;
        for (name, t) in tensors {
            put_str(w, name)?;
            put_u32(w, t.rank() as u32)?;
            for &d in t.shape() {
                put_u32(w, d as u32)?;
            }
            put_f32s(w, t.as_slice())?;
        }
        put_u32(w, ckpt.vocab.len() as u32)?;
        for id in 0..ckpt.vocab.len() {
            put_str(w, ckpt.vocab.token(id).unwrap_or_default())?;
        }
        put_u32(w, ckpt.stats.dims() as u32)?;
        put_f32s(w, &ckpt.stats.mean)?;
        put_f32s(w, &ckpt.stats.std)?;
        put_f64(w, ckpt.config.alpha)?;
        put_u32(w, ckpt.config.max_decode_len as u32)?;
        put_f64(w, ckpt.best_val_cider)?;
        put_u32(w, ckpt.epoch as u32)
    })();
    b
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(ckpt)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes, path)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint, CheckpointError> {
    let corrupt = |detail: &str| CheckpointError::CorruptTensor {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic { path: path.to_path_buf() });
    }
    let mut c = Cursor::new(&bytes[4..]);
    let version = c.u32().ok_or_else(|| corrupt("truncated header"))?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
        });
    }

    let count = c.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(corrupt(&format!("{count} tensors, expected {}", TENSOR_NAMES.len())));
    }
    let mut slots: Vec<Option<Tensor<f32>>> = vec![None; count];
    for _ in 0..count {
        let name = c.string().ok_or_else(|| corrupt("truncated tensor name"))?;
        let idx = TENSOR_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| corrupt(&format!("unknown tensor {name:?}")))?;
        if slots[idx].is_some() {
            return Err(corrupt(&format!("duplicate tensor {name:?}")));
        }
        let rank = c.u32().ok_or_else(|| corrupt("truncated tensor rank"))? as usize;
        if !(1..=2).contains(&rank) {
            return Err(corrupt(&format!("tensor {name:?} has rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| c.u32().map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| corrupt("truncated tensor dims"))?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| corrupt("tensor too large"))?;
        let data = c.f32s(len).ok_or_else(|| corrupt(&format!("truncated payload of {name:?}")))?;
        slots[idx] = Some(Tensor::from_vec(&shape, data).map_err(|e| corrupt(&e.to_string()))?);
    }
    let tensors: Vec<Tensor<f32>> = slots.into_iter().map(|t| t.expect("all names seen")).collect();

    let vocab_len = c.u32().ok_or_else(|| corrupt("truncated vocabulary"))? as usize;
    let tokens = (0..vocab_len)
        .map(|_| c.string())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| corrupt("truncated vocabulary"))?;
    if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
        return Err(corrupt("vocabulary does not start with the reserved tokens"));
    }
    let vocab = Vocabulary::from_tokens(tokens.into_iter().skip(SPECIALS.len())).map_err(|e| corrupt(&e.to_string()))?;
    let dims = c.u32().ok_or_else(|| corrupt("truncated stats"))? as usize;
    let mean = c.f32s(dims).ok_or_else(|| corrupt("truncated stats"))?;
    let std = c.f32s(dims).ok_or_else(|| corrupt("truncated stats"))?;
    let alpha = c.f64().ok_or_else(|| corrupt("truncated trailer"))?;
    let max_decode_len = c.u32().ok_or_else(|| corrupt("truncated trailer"))? as usize;
    let best_val_cider = c.f64().ok_or_else(|| corrupt("truncated trailer"))?;
    let epoch = c.u32().ok_or_else(|| corrupt("truncated trailer"))? as usize;
    if c.remaining() != 0 {
        return Err(corrupt("trailing bytes"));
    }

    // architecture sizes come from the tensors themselves; every other
    // section must agree with them
    let shape_err = |source| CheckpointError::Shape {
        path: path.to_path_buf(),
        source,
    };
    let word_emb = tensors[6].shape();
    let config = ModelConfig {
        feat_dim: tensors[0].cols(),
        enc_hidden: tensors[1].cols(),
        v_dim: tensors[4].rows(),
        dec_hidden: tensors[8].cols(),
        word_emb_dim: word_emb.get(1).copied().unwrap_or(0),
        vocab_size: vocab.len(),
        sent_emb_dim: tensors[13].rows(),
        alpha,
        max_decode_len,
    };
    let params = ModelParams::from_tensors(&config, tensors).map_err(shape_err)?;
    if dims != config.feat_dim {
        return Err(shape_err(ModelError::DimensionMismatch {
            expected: config.feat_dim,
            found: dims,
        }));
    }
    config.validate().map_err(|e| corrupt(&e))?;
    Ok(Checkpoint {
        config,
        params,
        vocab,
        stats: FeatureStats { mean, std },
        best_val_cider,
        epoch,
    })
}

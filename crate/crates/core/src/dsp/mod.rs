//! Log-mel spectrogram (LMS) extraction, global standardization and the
//! binary feature/statistics file formats.

mod format;
mod mel;
mod stats;
mod wav;

use std::path::PathBuf;

pub use format::{read_features, read_stats, write_features, write_stats};
pub use mel::{extract_lms, frame_count, LmsConfig, ENERGY_FLOOR};
pub use stats::{compute_stats, standardize, STD_FLOOR};
pub use wav::read_wav;

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("clip has {samples} samples, fewer than one {window}-sample window")]
    ClipTooShort { samples: usize, window: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("no feature matrices given")]
    EmptyCollection,
    #[error("dimension mismatch: features have {features} bands, stats have {stats}")]
    DimensionMismatch { features: usize, stats: usize },
    #[error("{path}: bad magic bytes")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported version {found}")]
    VersionMismatch { path: PathBuf, found: u32 },
    #[error("{path}: file truncated")]
    TruncatedFile { path: PathBuf },
    #[error("{path}: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono PCM audio with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    pub const MIN_SAMPLE_RATE: u32 = 8000;

    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, DspError> {
        if samples.is_empty() {
            return Err(DspError::InvalidClip("no samples".into()));
        }
        if sample_rate < Self::MIN_SAMPLE_RATE {
            return Err(DspError::InvalidClip(format!(
                "sample rate {sample_rate} Hz below {} Hz",
                Self::MIN_SAMPLE_RATE
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(DspError::InvalidClip(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// `T × D` matrix of per-frame features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dims: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dims: usize, data: Vec<f32>) -> Result<Self, DspError> {
        if frames == 0 || dims == 0 {
            return Err(DspError::InvalidParam(format!(
                "feature matrix must be non-empty, got {frames}x{dims}"
            )));
        }
        if data.len() != frames * dims {
            return Err(DspError::InvalidParam(format!(
                "{} values for a {frames}x{dims} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DspError::InvalidParam("non-finite feature value".into()));
        }
        Ok(Self { frames, dims, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Per-band mean and standard deviation used for global standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl FeatureStats {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Zero mean, unit deviation: standardization becomes the identity.
    pub fn identity(dims: usize) -> Self {
        Self {
            mean: vec![0.0; dims],
            std: vec![1.0; dims],
        }
    }
}

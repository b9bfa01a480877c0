//! Caption corpus: vocabulary, line-delimited manifests, sentence-embedding
//! tables and the hashing fallback embedder.

mod embed;
mod manifest;
mod vocab;

use std::path::PathBuf;

pub use embed::{fallback_embed, read_embeddings, write_embeddings, EmbeddingTable};
pub use manifest::{load_manifest, save_manifest, validate_manifest, CaptionRecord, ManifestEntry};
pub use vocab::{build_vocab, read_vocab, write_vocab, Vocabulary, EOS, PAD, SOS, SPECIALS, UNK};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate audio_id {0:?}")]
    DuplicateAudioId(String),
    #[error("duplicate caption_id {0:?}")]
    DuplicateCaptionId(String),
    #[error("line {line}: missing field {field:?}")]
    MissingField { line: usize, field: &'static str },
    #[error("cannot embed an empty token list")]
    EmptyTokenList,
    #[error("invalid embedding table: {0}")]
    InvalidTable(String),
    #[error("{path}: bad magic bytes")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported version {found}")]
    VersionMismatch { path: PathBuf, found: u32 },
    #[error("embedding dimension {found}, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("{path}: file truncated")]
    TruncatedFile { path: PathBuf },
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

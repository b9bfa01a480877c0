//! Sentence-embedding tables (`SEMB` files) and a deterministic hashing
//! embedder used when no pretrained sentence encoder is available.
//!
//! ```text
//! SEMB: "SEMB" | u32 version=1 | u32 N | u32 dim | N·dim f32, row-major
//! ```

use std::fs;
use std::path::Path;

use super::CorpusError;
use crate::binio::{put_f32s, put_u32, Cursor};

const MAGIC: &[u8; 4] = b"SEMB";
const VERSION: u32 = 1;

/// `N × dim` matrix of sentence embeddings, one row per caption.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, CorpusError> {
        if dim == 0 {
            return Err(CorpusError::InvalidTable("dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(CorpusError::InvalidTable(format!(
                "{} values is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::InvalidTable("non-finite entry".into()));
        }
        if let Some(i) = data.chunks_exact(dim).position(|r| r.iter().all(|&v| v == 0.0)) {
            return Err(CorpusError::InvalidTable(format!("row {i} is all zero")));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self, CorpusError> {
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(CorpusError::DimMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> Option<&[f32]> {
        (i < self.rows()).then(|| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

// 64-bit FNV-1a followed by the splitmix64 finalizer.
fn feature_hash(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for b in seed.to_le_bytes() {
        eat(b);
    }
    eat(parts.len() as u8);
    for part in parts {
        eat(0x1f);
        for &b in part.as_bytes() {
            eat(b);
        }
    }
    let mut z = h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes every unigram and bigram of `tokens` to a signed, weighted
/// coordinate of a `dim`-vector, sums, and L2-normalizes.
///
/// The coordinate is `h % dim`, the sign is bit 63 of `h`, and the weight
/// is `0.5 + ((h >> 32) & 0xfffff) / 2^20`.
pub fn fallback_embed<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Result<Vec<f32>, CorpusError> {
    if tokens.is_empty() {
        return Err(CorpusError::EmptyTokenList);
    }
    if dim == 0 {
        return Err(CorpusError::InvalidTable("dimension must be positive".into()));
    }
    let mut acc = vec![0.0f64; dim];
    let mut add = |h: u64| {
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        let weight = 0.5 + ((h >> 32) & 0xf_ffff) as f64 / (1u64 << 20) as f64;
        acc[(h % dim as u64) as usize] += sign * weight;
    };
    for t in tokens {
        add(feature_hash(seed, &[t.as_ref()]));
    }
    for pair in tokens.windows(2) {
        add(feature_hash(seed, &[pair[0].as_ref(), pair[1].as_ref()]));
    }
    let mut norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every feature cancelled; fall back to a one-hot of the full sequence
        let all: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        acc[(feature_hash(seed, &all) % dim as u64) as usize] = 1.0;
        norm = 1.0;
    }
    Ok(acc.iter().map(|v| (v / norm) as f32).collect())
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<(), CorpusError> {
    let mut buf = Vec::with_capacity(16 + table.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION).unwrap();
    put_u32(&mut buf, table.rows() as u32).unwrap();
    put_u32(&mut buf, table.dim as u32).unwrap();
    put_f32s(&mut buf, &table.data).unwrap();
    fs::write(path, buf).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a `SEMB` file, optionally requiring a specific dimension.
pub fn read_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let truncated = || CorpusError::TruncatedFile {
        path: path.to_path_buf(),
    };
    let mut cur = Cursor::new(&bytes);
    if cur.take(4).ok_or_else(truncated)? != MAGIC {
        return Err(CorpusError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = cur.u32().ok_or_else(truncated)?;
    if version != VERSION {
        return Err(CorpusError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let rows = cur.u32().ok_or_else(truncated)? as usize;
    let dim = cur.u32().ok_or_else(truncated)? as usize;
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(CorpusError::DimMismatch {
                expected,
                found: dim,
            });
        }
    }
    let data = rows
        .checked_mul(dim)
        .and_then(|n| cur.f32s(n))
        .ok_or_else(truncated)?;
    EmbeddingTable::new(dim, data)
}

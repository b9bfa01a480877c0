//! `LMSF` feature files and `LMST` statistics files.
//!
//! ```text
//! LMSF: "LMSF" | u32 version=1 | u32 T | u32 D | T·D f32, row-major
//! LMST: "LMST" | u32 version=1 | u32 D | D f32 means | D f32 stds
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{DspError, FeatureMatrix, FeatureStats};
use crate::binio::{put_f32s, put_u32, Cursor};

const FEATURE_MAGIC: &[u8; 4] = b"LMSF";
const STATS_MAGIC: &[u8; 4] = b"LMST";
const VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DspError + '_ {
    move |source| DspError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open<'a>(bytes: &'a [u8], magic: &[u8; 4], path: &Path) -> Result<Cursor<'a>, DspError> {
    let mut cur = Cursor::new(bytes);
    let truncated = || DspError::TruncatedFile {
        path: path.to_path_buf(),
    };
    if cur.take(4).ok_or_else(truncated)? != magic {
        return Err(DspError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = cur.u32().ok_or_else(truncated)?;
    if version != VERSION {
        return Err(DspError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
        });
    }
    Ok(cur)
}

pub fn write_features(f: &FeatureMatrix, path: &Path) -> Result<(), DspError> {
    let mut buf = Vec::with_capacity(16 + f.as_slice().len() * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    put_u32(&mut buf, VERSION).unwrap();
    put_u32(&mut buf, f.frames() as u32).unwrap();
    put_u32(&mut buf, f.dims() as u32).unwrap();
    put_f32s(&mut buf, f.as_slice()).unwrap();
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix, DspError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut cur = open(&bytes, FEATURE_MAGIC, path)?;
    let truncated = || DspError::TruncatedFile {
        path: path.to_path_buf(),
    };
    let frames = cur.u32().ok_or_else(truncated)? as usize;
    let dims = cur.u32().ok_or_else(truncated)? as usize;
    let data = frames
        .checked_mul(dims)
        .and_then(|n| cur.f32s(n))
        .ok_or_else(truncated)?;
    FeatureMatrix::new(frames, dims, data)
}

pub fn write_stats(stats: &FeatureStats, path: &Path) -> Result<(), DspError> {
    let mut buf = Vec::with_capacity(12 + stats.dims() * 8);
    buf.extend_from_slice(STATS_MAGIC);
    put_u32(&mut buf, VERSION).unwrap();
    put_u32(&mut buf, stats.dims() as u32).unwrap();
    put_f32s(&mut buf, &stats.mean).unwrap();
    put_f32s(&mut buf, &stats.std).unwrap();
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_stats(path: &Path) -> Result<FeatureStats, DspError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut cur = open(&bytes, STATS_MAGIC, path)?;
    let truncated = || DspError::TruncatedFile {
        path: path.to_path_buf(),
    };
    let dims = cur.u32().ok_or_else(truncated)? as usize;
    let mean = cur.f32s(dims).ok_or_else(truncated)?;
    let std = cur.f32s(dims).ok_or_else(truncated)?;
    Ok(FeatureStats { mean, std })
}

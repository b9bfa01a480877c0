use super::{DspError, FeatureMatrix, FeatureStats};

/// Lower bound applied to every per-band standard deviation.
pub const STD_FLOOR: f64 = 1e-5;

/// Per-band mean and population standard deviation over every frame of
/// every matrix, pooled.
pub fn compute_stats(features: &[FeatureMatrix]) -> Result<FeatureStats, DspError> {
    let first = features.first().ok_or(DspError::EmptyCollection)?;
    let dims = first.dims();
    let mut sum = vec![0.0f64; dims];
    let mut count = 0usize;
    for f in features {
        if f.dims() != dims {
            return Err(DspError::DimensionMismatch {
                features: f.dims(),
                stats: dims,
            });
        }
        for row in f.rows() {
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v as f64;
            }
        }
        count += f.frames();
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();

    // second pass keeps the variance free of cancellation
    let mut sq = vec![0.0f64; dims];
    for f in features {
        for row in f.rows() {
            for ((s, &v), m) in sq.iter_mut().zip(row).zip(&mean) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
    }
    let std = sq
        .iter()
        .map(|s| ((s / count as f64).sqrt().max(STD_FLOOR)) as f32)
        .collect();
    Ok(FeatureStats {
        mean: mean.into_iter().map(|m| m as f32).collect(),
        std,
    })
}

/// `(f - mean) / std`, band-wise.
pub fn standardize(f: &FeatureMatrix, stats: &FeatureStats) -> Result<FeatureMatrix, DspError> {
    if f.dims() != stats.dims() || stats.std.len() != stats.dims() {
        return Err(DspError::DimensionMismatch {
            features: f.dims(),
            stats: stats.dims(),
        });
    }
    let data = f
        .rows()
        .flat_map(|row| {
            row.iter()
                .zip(&stats.mean)
                .zip(&stats.std)
                .map(|((&v, &m), &s)| ((v as f64 - m as f64) / s as f64) as f32)
        })
        .collect();
    FeatureMatrix::new(f.frames(), f.dims(), data)
}

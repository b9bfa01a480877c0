use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::TrainError;
use crate::corpus::ManifestEntry;

/// Splits by audio clip: every caption of a clip lands on the same side.
/// The validation side holds `round(val_ratio * N)` clips, clamped to
/// `1..=N-1`. Both sides keep manifest order.
pub fn split_dev(
    entries: &[ManifestEntry],
    val_ratio: f64,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>), TrainError> {
    let n = entries.len();
    if n < 2 {
        return Err(TrainError::TooFewEntries(n));
    }
    if !(val_ratio > 0.0 && val_ratio < 1.0) {
        return Err(TrainError::InvalidConfig(format!("val_ratio {val_ratio} outside (0, 1)")));
    }
    let n_val = ((val_ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
    let mut is_val = vec![false; n];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (val, train): (Vec<_>, Vec<_>) = entries.iter().cloned().zip(is_val).partition(|(_, v)| *v);
    Ok((
        train.into_iter().map(|(e, _)| e).collect(),
        val.into_iter().map(|(e, _)| e).collect(),
    ))
}

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioClip, DspError, FeatureMatrix};

/// Filterbank energies are clamped to this value before the logarithm.
pub const ENERGY_FLOOR: f64 = 1e-10;

/// Framing and filterbank parameters. Defaults: 40 ms Hann windows every
/// 20 ms, 64 HTK mel bands spanning 0 Hz to Nyquist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmsConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
}

impl Default for LmsConfig {
    fn default() -> Self {
        Self {
            window_ms: 40.0,
            hop_ms: 20.0,
            n_mels: 64,
        }
    }
}

impl LmsConfig {
    fn validate(&self) -> Result<(), DspError> {
        if !(self.window_ms > 0.0) || !(self.hop_ms > 0.0) || self.n_mels == 0 {
            return Err(DspError::InvalidParam(format!(
                "window_ms, hop_ms and n_mels must be positive (got {}, {}, {})",
                self.window_ms, self.hop_ms, self.n_mels
            )));
        }
        if self.window_ms < self.hop_ms {
            return Err(DspError::InvalidParam(format!(
                "window ({} ms) shorter than hop ({} ms)",
                self.window_ms, self.hop_ms
            )));
        }
        Ok(())
    }

    /// Window and hop lengths in samples at `sample_rate`.
    pub fn lengths(&self, sample_rate: u32) -> Result<(usize, usize), DspError> {
        self.validate()?;
        let window = (self.window_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        if window == 0 || hop == 0 {
            return Err(DspError::InvalidParam(format!(
                "window/hop round to zero samples at {sample_rate} Hz"
            )));
        }
        Ok((window, hop))
    }
}

/// `1 + floor((n - window) / hop)`, or `None` when `n < window`.
pub fn frame_count(n_samples: usize, window: usize, hop: usize) -> Option<usize> {
    (n_samples >= window).then(|| 1 + (n_samples - window) / hop)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK filters over the `n_fft / 2 + 1` power-spectrum bins,
/// one row per band.
fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect();

    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            bin_hz
                .iter()
                .map(|&f| {
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Log-mel spectrogram of `clip`.
pub fn extract_lms(clip: &AudioClip, config: &LmsConfig) -> Result<FeatureMatrix, DspError> {
    let (window, hop) = config.lengths(clip.sample_rate())?;
    let samples = clip.samples();
    let frames = frame_count(samples.len(), window, hop).ok_or(DspError::ClipTooShort {
        samples: samples.len(),
        window,
    })?;

    let n_fft = window.next_power_of_two();
    let n_bins = n_fft / 2 + 1;
    // periodic Hann
    let hann: Vec<f64> = (0..window)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / window as f64).cos())
        .collect();
    let bank = mel_filterbank(config.n_mels, n_fft, clip.sample_rate());
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0f64; n_bins];
    let mut out = Vec::with_capacity(frames * config.n_mels);
    for t in 0..frames {
        let start = t * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < window {
                Complex::new(samples[start + i] as f64 * hann[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for filter in &bank {
            let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            out.push(energy.max(ENERGY_FLOOR).ln() as f32);
        }
    }
    FeatureMatrix::new(frames, config.n_mels, out)
}

//! Synthetic WAV corpora with caption sidecar files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

pub const SAMPLE_RATE: u32 = 16_000;

const SOURCES: [(&str, f64); 8] = [
    ("car", 110.0),
    ("dog", 440.0),
    ("bell", 1760.0),
    ("engine", 70.0),
    ("bird", 3200.0),
    ("siren", 900.0),
    ("drum", 200.0),
    ("whistle", 2500.0),
];

/// Mono 16-bit PCM.
pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

/// Writes `n` (≤ 8) one-second clips, each a tone with a distinct pitch and
/// two sidecar captions. Returns the WAV paths.
pub fn write_corpus(dir: &Path, n: usize) -> Vec<PathBuf> {
    (0..n)
        .map(|i| {
            let (name, freq) = SOURCES[i % SOURCES.len()];
            let samples: Vec<f32> = (0..SAMPLE_RATE as usize)
                .map(|t| {
                    let x = t as f64 / SAMPLE_RATE as f64;
                    let env = 0.5 + 0.4 * (2.0 * PI * (i as f64 + 1.0) * x).sin();
                    (0.6 * env * (2.0 * PI * freq * x).sin()) as f32
                })
                .collect();
            let wav = dir.join(format!("clip{i:02}.wav"));
            write_wav(&wav, &samples, SAMPLE_RATE);
            std::fs::write(
                wav.with_extension("txt"),
                format!("a {name} makes a sound\nthe {name} is heard nearby\n"),
            )
            .unwrap();
            wav
        })
        .collect()
}

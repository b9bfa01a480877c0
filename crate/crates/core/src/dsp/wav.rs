use std::path::Path;

use hound::{SampleFormat, WavReader};

use super::{AudioClip, DspError};

/// Reads a 16-bit PCM WAV file; multi-channel audio is averaged to mono.
pub fn read_wav(path: &Path) -> Result<AudioClip, DspError> {
    let wav_err = |message: String| DspError::Wav {
        path: path.to_path_buf(),
        message,
    };
    let reader = WavReader::open(path).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "expected 16-bit PCM, found {:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    let samples: Vec<f32> = raw
        .chunks(channels)
        .map(|frame| {
            let sum: f32 = frame.iter().map(|&s| s as f32 / 32768.0).sum();
            sum / frame.len() as f32
        })
        .collect();
    AudioClip::new(samples, spec.sample_rate).map_err(|e| wav_err(e.to_string()))
}

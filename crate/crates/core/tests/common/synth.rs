//! Synthetic corpora for training tests.

use audiocap::corpus::{fallback_embed, CaptionRecord, EmbeddingTable, ManifestEntry};
use audiocap::dsp::FeatureMatrix;
use audiocap::trainer::{Architecture, TrainingClip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub const WORDS: [&str; 24] = [
    "a", "car", "dog", "engine", "rain", "door", "bird", "man", "woman", "water", "wind", "bell", "runs", "barks",
    "idles", "falls", "closes", "sings", "talks", "flows", "blows", "rings", "loudly", "softly",
];

pub fn small_arch() -> Architecture {
    Architecture {
        enc_hidden: 16,
        v_dim: 8,
        dec_hidden: 24,
        word_emb_dim: 12,
        sent_emb_dim: 16,
        max_decode_len: 12,
    }
}

/// Standard-normal-ish frames (sum of uniforms), stored at f32.
pub fn random_features(rng: &mut impl Rng, frames: usize, dims: usize) -> FeatureMatrix {
    let data = (0..frames * dims)
        .map(|_| ((0..4).map(|_| rng.gen::<f64>()).sum::<f64>() - 2.0) as f32 * 1.7)
        .collect();
    FeatureMatrix::new(frames, dims, data).unwrap()
}

/// `n` pairwise distinct captions of 5 to 8 tokens.
pub fn distinct_captions(n: usize, seed: u64) -> Vec<String> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::new();
    while out.len() < n {
        let len = rng.gen_range(5..=8);
        let c: Vec<&str> = (0..len).map(|_| *WORDS.choose(&mut rng).unwrap()).collect();
        let c = c.join(" ");
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Clips with the given caption sets; embedding rows follow caption order.
pub fn corpus_from(
    captions: &[Vec<String>],
    features: Vec<FeatureMatrix>,
    emb_dim: usize,
    emb_seed: u64,
) -> (Vec<TrainingClip>, EmbeddingTable) {
    let mut rows = Vec::new();
    let clips = captions
        .iter()
        .zip(features)
        .enumerate()
        .map(|(i, (caps, features))| {
            let captions = caps
                .iter()
                .enumerate()
                .map(|(k, text)| {
                    let mut rec = CaptionRecord::new(format!("clip{i:03}_{k}"), text);
                    rec.embedding_row = Some(rows.len());
                    rows.push(fallback_embed(&rec.tokens, emb_dim, emb_seed).unwrap());
                    rec
                })
                .collect();
            TrainingClip {
                entry: ManifestEntry {
                    audio_id: format!("clip{i:03}"),
                    feature_path: format!("clip{i:03}.lmsf"),
                    captions,
                },
                features,
            }
        })
        .collect();
    (clips, EmbeddingTable::from_rows(emb_dim, &rows).unwrap())
}

/// One caption per clip, random features.
pub fn single_caption_corpus(n: usize, frames: usize, dims: usize, emb_dim: usize, seed: u64) -> (Vec<TrainingClip>, EmbeddingTable) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let feats = (0..n).map(|_| random_features(&mut rng, frames, dims)).collect();
    let caps: Vec<Vec<String>> = distinct_captions(n, seed).into_iter().map(|c| vec![c]).collect();
    corpus_from(&caps, feats, emb_dim, seed)
}

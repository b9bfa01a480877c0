use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_step, split_dev, AdamConfig, AdamState, Checkpoint, TrainError};
use crate::captioner::{ModelConfig, ModelParams};
use crate::corpus::{build_vocab, EmbeddingTable, ManifestEntry, Vocabulary};
use crate::dsp::{compute_stats, standardize, FeatureMatrix, FeatureStats};
use crate::metrics::{cider, EvalCorpus, EvalItem};
use crate::numcore::Real;

/// Pairs per gradient work unit. Units are evaluated in parallel and summed
/// in batch order, so results do not depend on the thread count.
const WORK_UNIT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Word-level cross entropy only; sentence embeddings are never read.
    CeOnly,
    /// Cross entropy plus alpha times the cosine sentence loss.
    Combined,
}

/// Layer sizes not implied by the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub enc_hidden: usize,
    pub v_dim: usize,
    pub dec_hidden: usize,
    pub word_emb_dim: usize,
    /// Used only without embeddings; otherwise the table width wins.
    pub sent_emb_dim: usize,
    pub max_decode_len: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        let r = ModelConfig::reference(5);
        Self {
            enc_hidden: r.enc_hidden,
            v_dim: r.v_dim,
            dec_hidden: r.dec_hidden,
            word_emb_dim: r.word_emb_dim,
            sent_emb_dim: r.sent_emb_dim,
            max_decode_len: r.max_decode_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub alpha: f64,
    pub val_ratio: f64,
    pub seed: u64,
    pub loss_mode: LossMode,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
    /// Minimum training-split count for a token to enter the vocabulary.
    pub min_count: usize,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 32,
            epochs: 25,
            alpha: 10.0,
            val_ratio: 0.1,
            seed: 0,
            loss_mode: LossMode::Combined,
            clip_norm: None,
            min_count: 1,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return bad(format!("val_ratio {} outside (0, 1)", self.val_ratio));
        }
        if !(self.adam.lr > 0.0) || !self.adam.lr.is_finite() {
            return bad(format!("lr {} must be positive", self.adam.lr));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha {} must be finite and non-negative", self.alpha));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) || !c.is_finite() {
                return bad(format!("clip norm {c} must be positive"));
            }
        }
        Ok(())
    }
}

/// A manifest entry with its raw (unstandardized) features.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingClip {
    pub entry: ManifestEntry,
    pub features: FeatureMatrix,
}

/// Where validation clips come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Validation<'a> {
    /// Hold out part of the clips by [`split_dev`] with the configured ratio.
    Split,
    /// Train on every clip and validate on these.
    Clips(&'a [TrainingClip]),
}

#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub clips: &'a [TrainingClip],
    /// Required for [`LossMode::Combined`], ignored otherwise.
    pub embeddings: Option<&'a EmbeddingTable>,
    /// Precomputed vocabulary; built from the training side when absent.
    pub vocab: Option<&'a Vocabulary>,
    /// Precomputed statistics; computed from the training side when absent.
    pub stats: Option<&'a FeatureStats>,
    pub validation: Validation<'a>,
}

impl<'a> TrainInputs<'a> {
    pub fn new(clips: &'a [TrainingClip], embeddings: Option<&'a EmbeddingTable>) -> Self {
        Self {
            clips,
            embeddings,
            vocab: None,
            stats: None,
            validation: Validation::Split,
        }
    }
}

/// One line of the training log. Losses are means over the epoch's pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub ce: f64,
    pub sentence: Option<f64>,
    pub combined: f64,
    pub val_cider: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<R> {
    /// Best-epoch parameters (stored at single precision).
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    /// Parameters after the last epoch, in the working precision.
    pub final_params: ModelParams<R>,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

struct Pair<'a> {
    clip: usize,
    ids: Vec<usize>,
    target: Option<&'a [f32]>,
}

struct Prepared {
    features: Vec<FeatureMatrix>,
    refs: Vec<Vec<Vec<String>>>,
    audio_ids: Vec<String>,
}

fn prepare(clips: &[&TrainingClip], stats: &FeatureStats) -> Result<Prepared, TrainError> {
    let features = clips
        .iter()
        .map(|c| standardize(&c.features, stats))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        features,
        refs: clips
            .iter()
            .map(|c| c.entry.captions.iter().map(|k| k.tokens.clone()).collect())
            .collect(),
        audio_ids: clips.iter().map(|c| c.entry.audio_id.clone()).collect(),
    })
}

/// Trains in precision `R` and returns the best-validation-CIDEr epoch.
/// `on_epoch` sees each log record as soon as the epoch finishes.
pub fn train<R: Real>(
    inputs: TrainInputs<'_>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<R>, TrainError> {
    cfg.validate()?;
    let (train_clips, val_clips): (Vec<&TrainingClip>, Vec<&TrainingClip>) = match inputs.validation {
        Validation::Split => {
            let entries: Vec<ManifestEntry> = inputs.clips.iter().map(|c| c.entry.clone()).collect();
            let (train_e, _) = split_dev(&entries, cfg.val_ratio, cfg.seed)?;
            let in_train: std::collections::HashSet<&str> = train_e.iter().map(|e| e.audio_id.as_str()).collect();
            inputs.clips.iter().partition(|c| in_train.contains(c.entry.audio_id.as_str()))
        }
        Validation::Clips(val) => {
            if inputs.clips.is_empty() || val.is_empty() {
                return Err(TrainError::TooFewEntries(inputs.clips.len().min(val.len())));
            }
            (inputs.clips.iter().collect(), val.iter().collect())
        }
    };

    let stats = match inputs.stats {
        Some(s) => s.clone(),
        None => {
            let feats: Vec<FeatureMatrix> = train_clips.iter().map(|c| c.features.clone()).collect();
            compute_stats(&feats)?
        }
    };
    let vocab = match inputs.vocab {
        Some(v) => v.clone(),
        None => {
            let entries: Vec<ManifestEntry> = train_clips.iter().map(|c| c.entry.clone()).collect();
            build_vocab(&entries, cfg.min_count)?
        }
    };

    let embeddings = match cfg.loss_mode {
        LossMode::Combined => Some(inputs.embeddings.ok_or_else(|| {
            TrainError::InvalidConfig("combined loss needs a sentence embedding table".into())
        })?),
        LossMode::CeOnly => None,
    };
    let train_set = prepare(&train_clips, &stats)?;
    let val_set = prepare(&val_clips, &stats)?;

    let mut pairs = Vec::new();
    for (ci, clip) in train_clips.iter().enumerate() {
        for cap in &clip.entry.captions {
            let target = match embeddings {
                Some(table) => Some(
                    cap.embedding_row
                        .and_then(|r| table.row(r))
                        .ok_or_else(|| TrainError::MissingEmbedding(cap.caption_id.clone()))?,
                ),
                None => None,
            };
            pairs.push(Pair {
                clip: ci,
                ids: vocab.encode(&cap.tokens),
                target,
            });
        }
    }

    let alpha = match cfg.loss_mode {
        LossMode::Combined => cfg.alpha,
        LossMode::CeOnly => 0.0,
    };
    let model_cfg = ModelConfig {
        feat_dim: stats.dims(),
        enc_hidden: cfg.arch.enc_hidden,
        v_dim: cfg.arch.v_dim,
        dec_hidden: cfg.arch.dec_hidden,
        word_emb_dim: cfg.arch.word_emb_dim,
        vocab_size: vocab.len(),
        sent_emb_dim: embeddings.map_or(cfg.arch.sent_emb_dim, EmbeddingTable::dim),
        alpha,
        max_decode_len: cfg.arch.max_decode_len,
    };
    model_cfg.validate().map_err(TrainError::InvalidConfig)?;

    let mut params = ModelParams::<R>::init(&model_cfg, cfg.seed);
    let mut adam = AdamState::new(&params);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed ^ 0x5eed_5e1f_ba7c_4e55);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams<R>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut ce_sum, mut sent_sum, mut comb_sum) = (0.0, 0.0, 0.0);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch = chunk.to_vec();
            batch.sort_by_key(|&i| pairs[i].ids.len());
            let (grads, reports) = batch_gradient(&params, &train_set, &pairs, &batch, alpha)?;
            let n = batch.len() as f64;
            let ce: f64 = reports.iter().map(|r| r.ce).sum::<f64>() / n;
            let sentence = embeddings.map(|_| reports.iter().map(|r| r.sentence.unwrap_or(0.0)).sum::<f64>() / n);
            let combined: f64 = reports.iter().map(|r| r.combined).sum::<f64>() / n;
            let mut grads = grads;
            grads.scale(R::lit(1.0 / n));
            let grad_norm = grads.global_norm();
            if !combined.is_finite() || !grad_norm.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    ce,
                    sentence,
                    grad_norm,
                    audio_ids: batch.iter().map(|&i| train_set.audio_ids[pairs[i].clip].clone()).collect(),
                });
            }
            if let Some(c) = cfg.clip_norm {
                if grad_norm > c {
                    grads.scale(R::lit(c / grad_norm));
                }
            }
            adam_step(&mut params, &grads, &mut adam, &cfg.adam)?;
            ce_sum += ce * n;
            sent_sum += sentence.unwrap_or(0.0) * n;
            comb_sum += combined * n;
        }

        let val_cider = validation_cider(&params, &val_set, &vocab, model_cfg.max_decode_len)?;
        let total = pairs.len().max(1) as f64;
        let record = EpochRecord {
            epoch,
            ce: ce_sum / total,
            sentence: embeddings.map(|_| sent_sum / total),
            combined: comb_sum / total,
            val_cider,
        };
        on_epoch(&record);
        log.push(record);
        if best.as_ref().is_none_or(|(score, _, _)| val_cider > *score) {
            best = Some((val_cider, epoch, params.clone()));
        }
    }

    let (best_val_cider, epoch, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: model_cfg,
            params: best_params.cast(),
            vocab,
            stats,
            best_val_cider,
            epoch,
        },
        log,
        final_params: params,
        train_ids: train_set.audio_ids,
        val_ids: val_set.audio_ids,
    })
}

type BatchResult<R> = (ModelParams<R>, Vec<crate::captioner::LossReport>);

fn batch_gradient<R: Real>(
    params: &ModelParams<R>,
    set: &Prepared,
    pairs: &[Pair<'_>],
    batch: &[usize],
    alpha: f64,
) -> Result<BatchResult<R>, TrainError> {
    let units: Vec<BatchResult<R>> = batch
        .par_chunks(WORK_UNIT)
        .map(|unit| {
            let mut grads = params.zeros_like();
            let mut reports = Vec::with_capacity(unit.len());
            for &i in unit {
                let pair = &pairs[i];
                let (report, cache) = params.forward_loss(&set.features[pair.clip], &pair.ids, pair.target, alpha)?;
                params.backward_into(&cache, &mut grads)?;
                reports.push(report);
            }
            Ok((grads, reports))
        })
        .collect::<Result<_, TrainError>>()?;
    let mut units = units.into_iter();
    let (mut grads, mut reports) = units.next().expect("non-empty batch");
    for (g, r) in units {
        grads.axpy(R::one(), &g);
        reports.extend(r);
    }
    Ok((grads, reports))
}

/// Greedy-decoding CIDEr on the validation clips, with IDF statistics
/// taken from the validation references.
fn validation_cider<R: Real>(
    params: &ModelParams<R>,
    set: &Prepared,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<f64, TrainError> {
    let hyps = set
        .features
        .par_iter()
        .map(|f| params.greedy_decode(f, vocab, max_len))
        .collect::<Result<Vec<_>, _>>()?;
    let items = hyps
        .into_iter()
        .zip(&set.refs)
        .zip(&set.audio_ids)
        .map(|((hypothesis, references), audio_id)| EvalItem {
            audio_id: audio_id.clone(),
            hypothesis,
            references: references.clone(),
        })
        .collect();
    Ok(cider(&EvalCorpus::new(items)?)?)
}

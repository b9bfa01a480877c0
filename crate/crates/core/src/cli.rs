//! Command-line front end. Every flag can also come from an `AUDIOCAP_*`
//! environment variable; explicit flags win over the environment, which
//! wins over the built-in defaults.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::captioner::ModelError;
use crate::corpus::{
    build_vocab, fallback_embed, load_manifest, read_embeddings, read_vocab, save_manifest, write_embeddings,
    write_vocab, CaptionRecord, CorpusError, EmbeddingTable, ManifestEntry,
};
use crate::dsp::{
    compute_stats, extract_lms, read_features, read_stats, read_wav, write_features, write_stats, DspError,
    FeatureMatrix, LmsConfig,
};
use crate::metrics::{evaluate, EvalCorpus, EvalItem, EvalOptions, MetricsError};
use crate::trainer::{
    load_checkpoint, save_checkpoint, split_dev, train, AdamConfig, Architecture, Captioner, CheckpointError,
    LossMode, TrainConfig, TrainError, TrainInputs, TrainingClip,
};

#[derive(Debug, Parser)]
#[command(name = "audiocap", version, about = "Audio captioning: features, training, decoding and scoring")]
pub struct Cli {
    /// Worker threads for extraction, training batches and decoding
    /// (default: all cores).
    #[arg(long, global = true, env = "AUDIOCAP_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract log-mel features from a directory of WAV files.
    Extract(ExtractArgs),
    /// Compute standardization statistics over the training split.
    Stats(StatsArgs),
    /// Build the token vocabulary from manifest captions.
    BuildVocab(BuildVocabArgs),
    /// Write sentence embeddings for every caption.
    Embed(EmbedArgs),
    /// Train a captioner and write the best-epoch checkpoint.
    Train(TrainArgs),
    /// Greedy-decode captions for features or WAV files.
    Caption(CaptionArgs),
    /// Score hypotheses against manifest references.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, env = "AUDIOCAP_WAV_DIR")]
    pub wav_dir: PathBuf,
    #[arg(long, env = "AUDIOCAP_OUT_DIR")]
    pub out_dir: PathBuf,
    #[arg(long, env = "AUDIOCAP_MANIFEST_OUT")]
    pub manifest_out: PathBuf,
    /// Reject clips whose sample rate differs from this value.
    #[arg(long, env = "AUDIOCAP_SAMPLE_RATE_CHECK")]
    pub sample_rate_check: Option<u32>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, env = "AUDIOCAP_MANIFEST")]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1, env = "AUDIOCAP_VAL_RATIO")]
    pub val_ratio: f64,
    #[arg(long, default_value_t = 0, env = "AUDIOCAP_SEED")]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[arg(long, env = "AUDIOCAP_MANIFEST")]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1, env = "AUDIOCAP_MIN_COUNT")]
    pub min_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedMode {
    /// Hashed bag of unigrams and bigrams.
    Fallback,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, env = "AUDIOCAP_MANIFEST")]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = EmbedMode::Fallback)]
    pub mode: EmbedMode,
    #[arg(long, default_value_t = 768, env = "AUDIOCAP_EMBED_DIM")]
    pub dim: usize,
    #[arg(long, default_value_t = 0, env = "AUDIOCAP_SEED")]
    pub seed: u64,
    /// Where to write the manifest with embedding rows (default: in place).
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Ce,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, env = "AUDIOCAP_MANIFEST")]
    pub manifest: PathBuf,
    /// Sentence embeddings; required for the combined loss.
    #[arg(long, env = "AUDIOCAP_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LossArg::Combined, env = "AUDIOCAP_LOSS")]
    pub loss: LossArg,
    #[arg(long, default_value_t = 10.0, env = "AUDIOCAP_ALPHA")]
    pub alpha: f64,
    #[arg(long, default_value_t = 25, env = "AUDIOCAP_EPOCHS")]
    pub epochs: usize,
    #[arg(long, default_value_t = 32, env = "AUDIOCAP_BATCH_SIZE")]
    pub batch_size: usize,
    #[arg(long, default_value_t = 4e-4, env = "AUDIOCAP_LR")]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1, env = "AUDIOCAP_VAL_RATIO")]
    pub val_ratio: f64,
    #[arg(long, default_value_t = 0, env = "AUDIOCAP_SEED")]
    pub seed: u64,
    #[arg(long)]
    pub out_ckpt: PathBuf,
    /// Per-epoch log, one JSON record per line.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Precision::F32, env = "AUDIOCAP_PRECISION")]
    pub precision: Precision,
    /// Rescale gradients whose global L2 norm exceeds this value.
    #[arg(long, env = "AUDIOCAP_CLIP_GRAD")]
    pub clip_grad: Option<f64>,
    /// Vocabulary file; built from the training split when omitted.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Statistics file; computed from the training split when omitted.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[arg(long, default_value_t = 512)]
    pub enc_hidden: usize,
    #[arg(long, default_value_t = 512)]
    pub dec_hidden: usize,
    #[arg(long, default_value_t = 256)]
    pub v_dim: usize,
    #[arg(long, default_value_t = 256)]
    pub word_emb_dim: usize,
    /// Sentence projection width when training without embeddings.
    #[arg(long, default_value_t = 768)]
    pub sent_emb_dim: usize,
    #[arg(long, default_value_t = 50)]
    pub max_decode_len: usize,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["features", "wav", "manifest"])))]
pub struct CaptionArgs {
    #[arg(long, env = "AUDIOCAP_CKPT")]
    pub ckpt: PathBuf,
    /// LMSF files or directories of them.
    #[arg(long, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// WAV files or directories of them.
    #[arg(long, num_args = 1..)]
    pub wav: Vec<PathBuf>,
    /// Caption every clip listed in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub hypotheses: PathBuf,
    #[arg(long, env = "AUDIOCAP_MANIFEST")]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_report: PathBuf,
    /// Report CIDEr without the ×10 scale.
    #[arg(long)]
    pub cider_raw: bool,
}

/// A failed command: machine-readable kind, message and process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    fn input(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            exit_code: 1,
        }
    }

    /// Single-line JSON record for stderr.
    pub fn record(&self) -> String {
        serde_json::json!({"error": self.kind, "message": self.message, "exit_code": self.exit_code}).to_string()
    }
}

fn variant_name<E: std::fmt::Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::input(&variant_name(&e), e.to_string())
            }
        }
    )*};
}
input_error!(CorpusError, DspError, MetricsError, CheckpointError, ModelError);

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let kind = match &e {
            TrainError::Corpus(inner) => variant_name(inner),
            TrainError::Dsp(inner) => variant_name(inner),
            TrainError::Model(inner) => variant_name(inner),
            TrainError::Metrics(inner) => variant_name(inner),
            other => variant_name(other),
        };
        let exit_code = if matches!(e, TrainError::NonFiniteLoss { .. }) { 2 } else { 1 };
        Self {
            kind,
            message: e.to_string(),
            exit_code,
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::input("Io", format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Relative feature paths are resolved against the manifest's directory.
pub fn resolve_feature_path(manifest: &Path, feature_path: &str) -> PathBuf {
    let p = Path::new(feature_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(p)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(CliError::input("InvalidArgument", "--jobs must be at least 1"));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| CliError::input("InvalidArgument", e.to_string()))?
    };
    pool.install(|| match cli.command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::BuildVocab(a) => cmd_build_vocab(&a),
        Command::Embed(a) => cmd_embed(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Caption(a) => cmd_caption(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    })
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    Ok(files)
}

fn expand_inputs(paths: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(list_files(p, ext)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Path written into the manifest: relative to the manifest directory when
/// the feature file lives below it, absolute otherwise.
fn manifest_feature_path(manifest: &Path, feature: &Path) -> String {
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let base = canon(manifest.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")));
    let feat = canon(feature);
    match feat.strip_prefix(&base) {
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => feat.to_string_lossy().into_owned(),
    }
}

/// Captions for `clip.wav` come from `clip.txt`, one caption per line with
/// whitespace-separated tokens.
fn sidecar_captions(wav: &Path, audio_id: &str) -> Result<Vec<CaptionRecord>, CliError> {
    let txt = wav.with_extension("txt");
    let text = fs::read_to_string(&txt).map_err(|e| io_error(&txt, e))?;
    let caps: Vec<CaptionRecord> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| CaptionRecord::new(format!("{audio_id}_{k}"), l.trim()))
        .collect();
    if caps.is_empty() {
        return Err(CliError::input("MissingField", format!("{}: no captions", txt.display())));
    }
    Ok(caps)
}

fn cmd_extract(a: &ExtractArgs) -> Result<(), CliError> {
    let wavs = list_files(&a.wav_dir, "wav")?;
    if wavs.is_empty() {
        return Err(CliError::input("EmptyCollection", format!("no WAV files in {}", a.wav_dir.display())));
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| io_error(&a.out_dir, e))?;
    let cfg = LmsConfig::default();
    let results: Vec<Result<ManifestEntry, CliError>> = wavs
        .par_iter()
        .map(|wav| {
            let audio_id = stem(wav);
            let clip = read_wav(wav)?;
            if let Some(sr) = a.sample_rate_check {
                if clip.sample_rate() != sr {
                    return Err(CliError::input(
                        "SampleRateMismatch",
                        format!("{}: sample rate {} Hz, expected {sr} Hz", wav.display(), clip.sample_rate()),
                    ));
                }
            }
            let features = extract_lms(&clip, &cfg).map_err(|e| CliError::input(&variant_name(&e), format!("{}: {e}", wav.display())))?;
            let out = a.out_dir.join(format!("{audio_id}.lmsf"));
            write_features(&features, &out)?;
            let captions = sidecar_captions(wav, &audio_id)?;
            Ok(ManifestEntry {
                audio_id,
                feature_path: manifest_feature_path(&a.manifest_out, &out),
                captions,
            })
        })
        .collect();
    let mut entries = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => {
                eprintln!("{}", e.record());
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    if let Some(dir) = a.manifest_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    save_manifest(&entries, &a.manifest_out)?;
    Ok(())
}

fn load_clips(manifest_path: &Path, entries: &[ManifestEntry]) -> Result<Vec<FeatureMatrix>, CliError> {
    entries
        .par_iter()
        .map(|e| Ok(read_features(&resolve_feature_path(manifest_path, &e.feature_path))?))
        .collect()
}

fn cmd_stats(a: &StatsArgs) -> Result<(), CliError> {
    let entries = load_manifest(&a.manifest)?;
    let (train, _) = split_dev(&entries, a.val_ratio, a.seed)?;
    let feats = load_clips(&a.manifest, &train)?;
    write_stats(&compute_stats(&feats)?, &a.out)?;
    Ok(())
}

fn cmd_build_vocab(a: &BuildVocabArgs) -> Result<(), CliError> {
    let entries = load_manifest(&a.manifest)?;
    write_vocab(&build_vocab(&entries, a.min_count)?, &a.out)?;
    Ok(())
}

fn cmd_embed(a: &EmbedArgs) -> Result<(), CliError> {
    let mut entries = load_manifest(&a.manifest)?;
    let mut rows = Vec::new();
    for e in &mut entries {
        for c in &mut e.captions {
            c.embedding_row = Some(rows.len());
            rows.push(match a.mode {
                EmbedMode::Fallback => fallback_embed(&c.tokens, a.dim, a.seed)?,
            });
        }
    }
    write_embeddings(&EmbeddingTable::from_rows(a.dim, &rows)?, &a.out)?;
    save_manifest(&entries, a.manifest_out.as_deref().unwrap_or(&a.manifest))?;
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let loss_mode = match a.loss {
        LossArg::Ce => LossMode::CeOnly,
        LossArg::Combined => LossMode::Combined,
    };
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        batch_size: a.batch_size,
        epochs: a.epochs,
        alpha: a.alpha,
        val_ratio: a.val_ratio,
        seed: a.seed,
        loss_mode,
        clip_norm: a.clip_grad,
        min_count: a.min_count,
        arch: Architecture {
            enc_hidden: a.enc_hidden,
            v_dim: a.v_dim,
            dec_hidden: a.dec_hidden,
            word_emb_dim: a.word_emb_dim,
            sent_emb_dim: a.sent_emb_dim,
            max_decode_len: a.max_decode_len,
        },
    };
    cfg.validate()?;
    let embeddings = match (loss_mode, &a.embeddings) {
        (LossMode::Combined, Some(p)) => Some(read_embeddings(p, None)?),
        (LossMode::Combined, None) => {
            return Err(CliError::input("MissingArgument", "--embeddings is required with --loss combined"));
        }
        (LossMode::CeOnly, _) => None,
    };
    let vocab = a.vocab.as_deref().map(read_vocab).transpose()?;
    let stats = a.stats.as_deref().map(read_stats).transpose()?;

    let entries = load_manifest(&a.manifest)?;
    let features = load_clips(&a.manifest, &entries)?;
    let clips: Vec<TrainingClip> = entries
        .into_iter()
        .zip(features)
        .map(|(entry, features)| TrainingClip { entry, features })
        .collect();
    let inputs = TrainInputs {
        vocab: vocab.as_ref(),
        stats: stats.as_ref(),
        ..TrainInputs::new(&clips, embeddings.as_ref())
    };

    let mut log_file = match &a.log {
        Some(p) => {
            write_file(p, b"")?;
            Some((p.clone(), fs::OpenOptions::new().append(true).open(p).map_err(|e| io_error(p, e))?))
        }
        None => None,
    };
    let mut log_err = None;
    let mut on_epoch = |r: &crate::trainer::EpochRecord| {
        let line = serde_json::to_string(r).expect("record serializes");
        if let Some((p, f)) = &mut log_file {
            if let Err(e) = writeln!(f, "{line}") {
                log_err.get_or_insert(io_error(p, e));
            }
        }
    };
    let checkpoint = match a.precision {
        Precision::F32 => train::<f32>(inputs, &cfg, &mut on_epoch)?.checkpoint,
        Precision::F64 => train::<f64>(inputs, &cfg, &mut on_epoch)?.checkpoint,
    };
    if let Some(e) = log_err {
        return Err(e);
    }
    save_checkpoint(&checkpoint, &a.out_ckpt)?;
    Ok(())
}

/// One line of a hypotheses file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub audio_id: String,
    pub hypothesis: Vec<String>,
}

fn cmd_caption(a: &CaptionArgs) -> Result<(), CliError> {
    let captioner = Captioner::new(load_checkpoint(&a.ckpt)?);
    let mut jobs: Vec<(String, PathBuf, bool)> = Vec::new();
    for p in expand_inputs(&a.features, "lmsf")? {
        jobs.push((stem(&p), p, false));
    }
    for p in expand_inputs(&a.wav, "wav")? {
        jobs.push((stem(&p), p, true));
    }
    if let Some(m) = &a.manifest {
        for e in load_manifest(m)? {
            let p = resolve_feature_path(m, &e.feature_path);
            jobs.push((e.audio_id, p, false));
        }
    }
    let cfg = LmsConfig::default();
    let hyps = jobs
        .par_iter()
        .map(|(audio_id, path, is_wav)| {
            let raw = if *is_wav {
                extract_lms(&read_wav(path)?, &cfg)?
            } else {
                read_features(path)?
            };
            Ok(Hypothesis {
                audio_id: audio_id.clone(),
                hypothesis: captioner.caption(&raw)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = String::new();
    for h in &hyps {
        out.push_str(&serde_json::to_string(h).expect("hypothesis serializes"));
        out.push('\n');
    }
    write_file(&a.out, out.as_bytes())
}

fn read_hypotheses(path: &Path) -> Result<Vec<Hypothesis>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::input("ParseError", format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let hyps = read_hypotheses(&a.hypotheses)?;
    let refs: HashMap<String, Vec<Vec<String>>> = load_manifest(&a.manifest)?
        .into_iter()
        .map(|e| (e.audio_id, e.captions.into_iter().map(|c| c.tokens).collect()))
        .collect();
    let items = hyps
        .into_iter()
        .map(|h| {
            let references = refs
                .get(&h.audio_id)
                .cloned()
                .ok_or_else(|| CliError::input("UnknownAudioId", format!("{:?} not in manifest", h.audio_id)))?;
            Ok(EvalItem {
                audio_id: h.audio_id,
                hypothesis: h.hypothesis,
                references,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = evaluate(&EvalCorpus::new(items)?, EvalOptions { cider_raw: a.cider_raw })?;
    let line = report.to_record();
    write_file(&a.out_report, format!("{line}\n").as_bytes())?;
    println!("{line}");
    Ok(())
}

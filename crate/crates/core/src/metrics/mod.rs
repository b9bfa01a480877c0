//! Corpus-level multi-reference caption metrics: cumulative BLEU@1-4,
//! ROUGE-L, CIDEr and output richness.
//!
//! Metrics consume token arrays as given; no re-tokenization or case
//! folding happens here.

mod bleu;
mod cider;
mod rouge;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, bleu_stats, BleuStats};
pub use cider::{cider, cider_with, CiderOptions};
pub use rouge::{lcs_len, rouge_l, rouge_l_with, ROUGE_BETA};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("evaluation corpus is empty")]
    EmptyCorpus,
    #[error("prediction list is empty")]
    EmptyList,
    #[error("BLEU order {0} outside 1..=4")]
    BadOrder(usize),
    #[error("duplicate audio_id {0:?} in evaluation corpus")]
    DuplicateAudioId(String),
    #[error("item {0:?} has no references")]
    NoReferences(String),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One hypothesis with its reference captions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub audio_id: String,
    pub hypothesis: Vec<String>,
    pub references: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCorpus {
    items: Vec<EvalItem>,
}

impl EvalCorpus {
    pub fn new(items: Vec<EvalItem>) -> Result<Self, MetricsError> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.audio_id.as_str()) {
                return Err(MetricsError::DuplicateAudioId(item.audio_id.clone()));
            }
            if item.references.is_empty() {
                return Err(MetricsError::NoReferences(item.audio_id.clone()));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[EvalItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub(crate) fn non_empty(&self) -> Result<&[EvalItem], MetricsError> {
        if self.items.is_empty() {
            Err(MetricsError::EmptyCorpus)
        } else {
            Ok(&self.items)
        }
    }
}

/// Line-delimited `{audio_id, hypothesis, references}` records.
pub fn read_eval_corpus(path: &Path) -> Result<EvalCorpus, MetricsError> {
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let items = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MetricsError::ParseError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<EvalItem>, _>>()?;
    EvalCorpus::new(items)
}

/// Fraction of distinct sentences among all predictions.
pub fn richness<S: AsRef<[String]>>(hypotheses: &[S]) -> Result<f64, MetricsError> {
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let distinct: HashSet<String> = hypotheses.iter().map(|h| h.as_ref().join(" ")).collect();
    Ok(distinct.len() as f64 / hypotheses.len() as f64)
}

/// Sum of `values` independent of their order.
pub(crate) fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values.into_iter().sum::<f64>() / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub richness: f64,
}

impl ScoreReport {
    /// Single-line JSON record, every score to 6 decimal places.
    pub fn to_record(&self) -> String {
        format!(
            "{{\"bleu1\":{:.6},\"bleu2\":{:.6},\"bleu3\":{:.6},\"bleu4\":{:.6},\"rouge_l\":{:.6},\"cider\":{:.6},\"richness\":{:.6}}}",
            self.bleu1, self.bleu2, self.bleu3, self.bleu4, self.rouge_l, self.cider, self.richness
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// Report CIDEr without the ×10 scale.
    pub cider_raw: bool,
}

pub fn evaluate(corpus: &EvalCorpus, options: EvalOptions) -> Result<ScoreReport, MetricsError> {
    let items = corpus.non_empty()?;
    let cider_options = if options.cider_raw {
        CiderOptions::raw()
    } else {
        CiderOptions::default()
    };
    let hyps: Vec<&[String]> = items.iter().map(|i| i.hypothesis.as_slice()).collect();
    Ok(ScoreReport {
        bleu1: bleu(corpus, 1)?,
        bleu2: bleu(corpus, 2)?,
        bleu3: bleu(corpus, 3)?,
        bleu4: bleu(corpus, 4)?,
        rouge_l: rouge_l(corpus)?,
        cider: cider_with(corpus, cider_options)?,
        richness: richness_of(&hyps)?,
    })
}

fn richness_of(hyps: &[&[String]]) -> Result<f64, MetricsError> {
    if hyps.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let distinct: HashSet<String> = hyps.iter().map(|h| h.join(" ")).collect();
    Ok(distinct.len() as f64 / hyps.len() as f64)
}

#[cfg(test)]
pub(crate) fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
pub(crate) fn item(id: &str, hyp: &str, refs: &[&str]) -> EvalItem {
    EvalItem {
        audio_id: id.into(),
        hypothesis: toks(hyp),
        references: refs.iter().map(|r| toks(r)).collect(),
    }
}

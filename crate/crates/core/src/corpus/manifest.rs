//! Line-delimited JSON manifest: one audio clip per line with its reference
//! captions.
//!
//! ```text
//! {"audio_id":"c01","feature_path":"feats/c01.lmsf","captions":[
//!   {"caption_id":"c01_0","text":"a car passes","tokens":["a","car","passes"],"embedding_row":0}]}
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub embedding_row: Option<usize>,
}

impl CaptionRecord {
    /// Record whose tokens are the whitespace-separated words of `text`.
    pub fn new(caption_id: impl Into<String>, text: &str) -> Self {
        Self {
            caption_id: caption_id.into(),
            text: text.to_owned(),
            tokens: text.split_whitespace().map(str::to_owned).collect(),
            embedding_row: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub audio_id: String,
    pub feature_path: String,
    pub captions: Vec<CaptionRecord>,
}

#[derive(Deserialize)]
struct RawCaption {
    caption_id: Option<String>,
    text: Option<String>,
    tokens: Option<Vec<String>>,
    #[serde(default)]
    embedding_row: Option<usize>,
}

#[derive(Deserialize)]
struct RawEntry {
    audio_id: Option<String>,
    feature_path: Option<String>,
    captions: Option<Vec<RawCaption>>,
}

fn parse_line(line: &str, lineno: usize) -> Result<ManifestEntry, CorpusError> {
    let raw: RawEntry = serde_json::from_str(line).map_err(|e| CorpusError::ParseError {
        line: lineno,
        message: e.to_string(),
    })?;
    let missing = |field| CorpusError::MissingField {
        line: lineno,
        field,
    };
    let captions = raw.captions.unwrap_or_default();
    if captions.is_empty() {
        return Err(missing("captions"));
    }
    let captions = captions
        .into_iter()
        .map(|c| {
            let tokens = c.tokens.filter(|t| !t.is_empty()).ok_or(missing("tokens"))?;
            Ok(CaptionRecord {
                caption_id: c.caption_id.ok_or(missing("caption_id"))?,
                text: c.text.unwrap_or_else(|| tokens.join(" ")),
                tokens,
                embedding_row: c.embedding_row,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Ok(ManifestEntry {
        audio_id: raw.audio_id.ok_or(missing("audio_id"))?,
        feature_path: raw.feature_path.ok_or(missing("feature_path"))?,
        captions,
    })
}

/// Rejects duplicate audio or caption ids and empty caption lists.
pub fn validate_manifest(entries: &[ManifestEntry]) -> Result<(), CorpusError> {
    let mut audio = HashSet::new();
    let mut caps = HashSet::new();
    for (i, e) in entries.iter().enumerate() {
        if e.captions.is_empty() {
            return Err(CorpusError::MissingField {
                line: i + 1,
                field: "captions",
            });
        }
        if !audio.insert(e.audio_id.as_str()) {
            return Err(CorpusError::DuplicateAudioId(e.audio_id.clone()));
        }
        for c in &e.captions {
            if c.tokens.is_empty() {
                return Err(CorpusError::MissingField {
                    line: i + 1,
                    field: "tokens",
                });
            }
            if !caps.insert(c.caption_id.as_str()) {
                return Err(CorpusError::DuplicateCaptionId(c.caption_id.clone()));
            }
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let entries = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    validate_manifest(&entries)?;
    Ok(entries)
}

pub fn save_manifest(entries: &[ManifestEntry], path: &Path) -> Result<(), CorpusError> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

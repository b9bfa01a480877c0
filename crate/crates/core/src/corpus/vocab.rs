use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{CorpusError, ManifestEntry};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Reserved tokens for ids 0..4.
pub const SPECIALS: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Token inventory. Ids 0..4 are reserved for PAD, SOS, EOS and UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from surface tokens in id order (ids start at 4).
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut token_to_id = HashMap::new();
        for tok in tokens {
            let tok = tok.into();
            if SPECIALS.contains(&tok.as_str()) {
                return Err(CorpusError::InvalidVocab(format!("reserved token {tok:?}")));
            }
            if token_to_id.insert(tok.clone(), id_to_token.len()).is_some() {
                return Err(CorpusError::InvalidVocab(format!("duplicate token {tok:?}")));
            }
            id_to_token.push(tok);
        }
        if id_to_token.len() < 5 {
            return Err(CorpusError::InvalidVocab("no surface tokens".into()));
        }
        Ok(Self {
            id_to_token,
            token_to_id,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_special(id: usize) -> bool {
        id <= UNK
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Surface tokens in id order, specials excluded.
    pub fn surface_tokens(&self) -> &[String] {
        &self.id_to_token[SPECIALS.len()..]
    }

    /// Token ids followed by EOS; unknown tokens become UNK.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()))
            .chain(std::iter::once(EOS))
            .collect()
    }

    /// Surface tokens up to the first EOS; specials are dropped.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| !Self::is_special(id))
            .filter_map(|&id| self.token(id).map(str::to_owned))
            .collect()
    }
}

/// Counts caption tokens and keeps those seen at least `min_count` times,
/// ordered by descending count, ties lexicographic.
pub fn build_vocab(manifest: &[ManifestEntry], min_count: usize) -> Result<Vocabulary, CorpusError> {
    if manifest.is_empty() {
        return Err(CorpusError::EmptyManifest);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for entry in manifest {
        for cap in &entry.captions {
            for tok in &cap.tokens {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(tok, c)| c >= min_count.max(1) && !SPECIALS.contains(&tok))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t))
}

/// One JSON string per line, in id order, specials included.
pub fn write_vocab(vocab: &Vocabulary, path: &Path) -> Result<(), CorpusError> {
    let mut out = String::new();
    for tok in &vocab.id_to_token {
        out.push_str(&serde_json::to_string(tok).expect("string serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok: String = serde_json::from_str(line).map_err(|e| CorpusError::ParseError {
            line: i + 1,
            message: e.to_string(),
        })?;
        if i < SPECIALS.len() {
            if tok != SPECIALS[i] {
                return Err(CorpusError::InvalidVocab(format!(
                    "line {}: expected special {:?}, found {tok:?}",
                    i + 1,
                    SPECIALS[i]
                )));
            }
        } else {
            tokens.push(tok);
        }
    }
    Vocabulary::from_tokens(tokens)
}

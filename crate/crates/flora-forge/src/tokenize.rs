//! Pluggable token counting. All length budgets in the pipeline are
//! defined in tokens under one active counter per run.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{FloraError, Result};

/// A deterministic token counter. Immutable after construction.
#[derive(Debug, Clone)]
pub enum TokenCounter {
    /// Fixed characters-per-token ratio; count = ceil(chars / ratio).
    Heuristic { ratio: f64 },
    /// Greedy longest-match segmentation over a fixed vocabulary.
    /// Characters not covered by any vocab entry count as one token each.
    VocabFile {
        name: String,
        vocab: HashSet<String>,
        max_token_chars: usize,
    },
}

impl TokenCounter {
    pub fn heuristic(ratio: f64) -> Self {
        TokenCounter::Heuristic { ratio }
    }

    /// Loads a vocabulary file: UTF-8, one token string per line, blank
    /// lines ignored.
    pub fn from_vocab_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FloraError::io(path, e))?;
        let vocab: HashSet<String> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| l.to_string())
            .collect();
        if vocab.is_empty() {
            return Err(FloraError::MalformedVocab {
                path: path.display().to_string(),
                reason: "no tokens".into(),
            });
        }
        let max_token_chars = vocab.iter().map(|t| t.chars().count()).max().unwrap_or(1);
        Ok(TokenCounter::VocabFile {
            name: format!("vocab:{}", path.display()),
            vocab,
            max_token_chars,
        })
    }

    /// Parses a CLI counter spec: `heuristic:<ratio>` or `vocab:<path>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec.split_once(':') {
            Some(("heuristic", ratio)) => {
                let ratio: f64 = ratio
                    .parse()
                    .map_err(|_| FloraError::InvalidConfig(format!("bad ratio in {spec:?}")))?;
                if ratio <= 0.0 {
                    return Err(FloraError::InvalidConfig("ratio must be positive".into()));
                }
                Ok(TokenCounter::heuristic(ratio))
            }
            Some(("vocab", path)) => TokenCounter::from_vocab_file(path),
            _ if spec == "heuristic" => Ok(TokenCounter::heuristic(4.0)),
            _ => Err(FloraError::InvalidConfig(format!(
                "unknown counter spec {spec:?}"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TokenCounter::Heuristic { ratio } => format!("heuristic:{ratio}"),
            TokenCounter::VocabFile { name, .. } => name.clone(),
        }
    }

    pub fn count(&self, text: &str) -> usize {
        if text.is_empty() {
            return 0;
        }
        match self {
            TokenCounter::Heuristic { ratio } => {
                let chars = text.chars().count();
                (chars as f64 / ratio).ceil() as usize
            }
            TokenCounter::VocabFile {
                vocab,
                max_token_chars,
                ..
            } => greedy_count(text, vocab, *max_token_chars),
        }
    }
}

fn greedy_count(text: &str, vocab: &HashSet<String>, max_token_chars: usize) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut count = 0;
    let mut buf = String::new();
    while pos < chars.len() {
        let mut matched = 0;
        let upper = max_token_chars.min(chars.len() - pos);
        for len in (1..=upper).rev() {
            buf.clear();
            buf.extend(&chars[pos..pos + len]);
            if vocab.contains(buf.as_str()) {
                matched = len;
                break;
            }
        }
        // unknown character falls back to a single one-char token
        pos += matched.max(1);
        count += 1;
    }
    count
}

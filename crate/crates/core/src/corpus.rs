//! Per-language transcript corpora.
//!
//! A corpus file is tab-separated with a header row naming at least a
//! `sentence` column and optionally a `path` column for the audio clip, as
//! in Common Voice `validated.tsv` exports. Other columns are ignored.

use std::path::Path;

use thiserror::Error;

use crate::g2p::{G2pError, Ruleset, UnmatchedMode};
use crate::ipa::NormalizationPolicy;
use crate::selection::Utterance;
use crate::stats::PhonemeCounts;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("corpus line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("corpus line {line}: {source}")]
    G2p { line: usize, source: G2pError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLine {
    /// 1-based line number in the file.
    pub line: usize,
    pub audio_path: String,
    pub sentence: String,
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusLine>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusLine>, CorpusError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let sentence_col =
        cols.iter()
            .position(|c| *c == "sentence")
            .ok_or_else(|| CorpusError::Format {
                line: 1,
                message: "header has no 'sentence' column".into(),
            })?;
    let path_col = cols.iter().position(|c| *c == "path");
    let mut out = Vec::new();
    for (idx, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let sentence = fields
            .get(sentence_col)
            .ok_or_else(|| CorpusError::Format {
                line: idx + 1,
                message: format!("missing column {}", sentence_col + 1),
            })?;
        out.push(CorpusLine {
            line: idx + 1,
            audio_path: path_col
                .and_then(|c| fields.get(c))
                .map_or(String::new(), |s| s.trim().to_string()),
            sentence: sentence.trim().to_string(),
        });
    }
    Ok(out)
}

/// Transliterates every line; errors carry the corpus file line number.
pub fn convert_corpus(
    lines: &[CorpusLine],
    rules: &Ruleset,
    policy: &NormalizationPolicy,
    mode: UnmatchedMode,
) -> Result<Vec<Utterance>, CorpusError> {
    lines
        .iter()
        .map(|l| {
            rules
                .transliterate(&l.sentence, policy, mode)
                .map(|phonemes| Utterance {
                    audio_path: l.audio_path.clone(),
                    phonemes,
                })
                .map_err(|source| CorpusError::G2p {
                    line: l.line,
                    source,
                })
        })
        .collect()
}

pub fn count_utterances(utterances: &[Utterance]) -> PhonemeCounts {
    let mut counts = PhonemeCounts::new();
    for p in utterances.iter().flat_map(|u| u.phonemes.iter()) {
        *counts.entry(p.clone()).or_insert(0) += 1;
    }
    counts
}

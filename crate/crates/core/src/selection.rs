//! Source-language selection strategies and training manifest assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ipa::{Phoneme, PhonemeSequence};
use crate::registry::{Registry, RegistryError};
use crate::stats::SimilarityMatrix;

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("target '{0}' is not in the similarity matrix")]
    UnknownTarget(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("the corpus_sim strategy requires a similarity matrix")]
    MissingMatrix,
    #[error("unknown strategy '{0}' (expected monolingual, family, all or corpus_sim)")]
    UnknownStrategy(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("no phoneme set for language '{0}'")]
    MissingLanguage(String),
    #[error("language '{lang}', utterance {index} ({audio}): phoneme '{phoneme}' is not in the inventory")]
    OutOfInventory {
        lang: String,
        index: usize,
        audio: String,
        phoneme: Phoneme,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Monolingual,
    Family,
    All,
    CorpusSim,
}

impl FromStr for Strategy {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "monolingual" => Ok(Strategy::Monolingual),
            "family" => Ok(Strategy::Family),
            "all" => Ok(Strategy::All),
            "corpus_sim" => Ok(Strategy::CorpusSim),
            other => Err(SelectionError::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Monolingual => "monolingual",
            Strategy::Family => "family",
            Strategy::All => "all",
            Strategy::CorpusSim => "corpus_sim",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Source {
    pub code: String,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub target: String,
    pub strategy: Strategy,
    pub sources: Vec<Source>,
    pub k: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SelectionResult {
    pub fn source_codes(&self) -> Vec<&str> {
        self.sources.iter().map(|s| s.code.as_str()).collect()
    }

    /// Target first, then sources in selection order.
    pub fn languages(&self) -> Vec<&str> {
        std::iter::once(self.target.as_str())
            .chain(self.sources.iter().map(|s| s.code.as_str()))
            .collect()
    }
}

/// The `k` languages most similar to `target`, best first. Equal
/// similarities are ordered by more recording hours (from `registry`, 0 when
/// unknown), then by code.
pub fn select_top_k(
    target: &str,
    matrix: &SimilarityMatrix,
    k: usize,
    registry: Option<&Registry>,
) -> Result<SelectionResult, SelectionError> {
    if k == 0 {
        return Err(SelectionError::ZeroK);
    }
    let t = matrix
        .index_of(target)
        .ok_or_else(|| SelectionError::UnknownTarget(target.to_string()))?;
    let hours = |code: &str| registry.and_then(|r| r.hours(code)).unwrap_or(0.0);
    let mut candidates: Vec<(usize, f64)> = (0..matrix.len())
        .filter(|&j| j != t)
        .map(|j| (j, matrix.values()[t][j]))
        .collect();
    let codes = matrix.codes();
    candidates.sort_by(|&(a, sa), &(b, sb)| {
        sb.total_cmp(&sa)
            .then_with(|| hours(&codes[b]).total_cmp(&hours(&codes[a])))
            .then_with(|| codes[a].cmp(&codes[b]))
    });
    let mut warnings = Vec::new();
    if k > candidates.len() {
        warnings.push(format!(
            "k = {k} exceeds the {} available source languages; truncated",
            candidates.len()
        ));
    }
    let sources = candidates
        .into_iter()
        .take(k)
        .map(|(j, s)| Source {
            code: codes[j].clone(),
            similarity: Some(s),
        })
        .collect();
    Ok(SelectionResult {
        target: target.to_string(),
        strategy: Strategy::CorpusSim,
        sources,
        k,
        warnings,
    })
}

/// Applies one of the named strategies. Family and all-language sources are
/// in code order and carry similarity scores when a matrix is given.
pub fn select_strategy(
    target: &str,
    strategy: Strategy,
    registry: &Registry,
    matrix: Option<&SimilarityMatrix>,
    k: usize,
) -> Result<SelectionResult, SelectionError> {
    let score = |code: &str| matrix.and_then(|m| m.get(target, code));
    let listed = |records: Vec<&crate::registry::LanguageRecord>| -> Vec<Source> {
        records
            .into_iter()
            .map(|r| Source {
                code: r.code.clone(),
                similarity: score(&r.code),
            })
            .collect()
    };
    let sources = match strategy {
        Strategy::CorpusSim => {
            let m = matrix.ok_or(SelectionError::MissingMatrix)?;
            return select_top_k(target, m, k, Some(registry));
        }
        Strategy::Monolingual => {
            registry.require(target)?;
            Vec::new()
        }
        Strategy::Family => {
            let family = &registry.require(target)?.family;
            listed(registry.family_members(family, Some(target)))
        }
        Strategy::All => {
            registry.require(target)?;
            listed(registry.iter().filter(|r| r.code != target).collect())
        }
    };
    let k = sources.len();
    Ok(SelectionResult {
        target: target.to_string(),
        strategy,
        sources,
        k,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhonemeInventory {
    pub language_scope: Vec<String>,
    pub phonemes: BTreeSet<Phoneme>,
}

impl PhonemeInventory {
    pub fn contains(&self, p: &Phoneme) -> bool {
        self.phonemes.contains(p)
    }
}

/// Sorted union of the phoneme sets of every language in `scope`.
pub fn build_inventory(
    scope: &[&str],
    sets: &BTreeMap<String, BTreeSet<Phoneme>>,
) -> Result<PhonemeInventory, SelectionError> {
    let mut phonemes = BTreeSet::new();
    for &code in scope {
        let set = sets
            .get(code)
            .ok_or_else(|| SelectionError::MissingLanguage(code.to_string()))?;
        phonemes.extend(set.iter().cloned());
    }
    Ok(PhonemeInventory {
        language_scope: scope.iter().map(|s| s.to_string()).collect(),
        phonemes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub audio_path: String,
    pub phonemes: PhonemeSequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub lang: String,
    pub audio_path: String,
    pub phonemes: PhonemeSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestLanguage {
    pub code: String,
    pub family: String,
    pub branch: Option<String>,
    pub hours: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingManifest {
    pub selection: SelectionResult,
    pub languages: Vec<ManifestLanguage>,
    pub utterances: Vec<ManifestEntry>,
    pub inventory: PhonemeInventory,
    pub total_hours: f64,
}

/// Per-language phoneme sets observed in converted corpora.
pub fn phoneme_sets(
    corpora: &BTreeMap<String, Vec<Utterance>>,
) -> BTreeMap<String, BTreeSet<Phoneme>> {
    corpora
        .iter()
        .map(|(code, utts)| {
            let set = utts
                .iter()
                .flat_map(|u| u.phonemes.iter().cloned())
                .collect();
            (code.clone(), set)
        })
        .collect()
}

/// Assembles the manifest for `selection`, taking the inventory from the
/// same corpora.
pub fn emit_manifest(
    selection: &SelectionResult,
    corpora: &BTreeMap<String, Vec<Utterance>>,
    registry: &Registry,
) -> Result<TrainingManifest, SelectionError> {
    let languages = selection.languages();
    let inventory = build_inventory(&languages, &phoneme_sets(corpora))?;
    assemble_manifest(selection, corpora, inventory, registry)
}

/// Assembles a manifest against a given inventory, rejecting any utterance
/// with a phoneme outside it.
pub fn assemble_manifest(
    selection: &SelectionResult,
    corpora: &BTreeMap<String, Vec<Utterance>>,
    inventory: PhonemeInventory,
    registry: &Registry,
) -> Result<TrainingManifest, SelectionError> {
    let mut languages = Vec::new();
    let mut utterances = Vec::new();
    let mut total_hours = 0.0;
    for code in selection.languages() {
        let rec = registry.require(code)?;
        total_hours += rec.recording_hours;
        languages.push(ManifestLanguage {
            code: code.to_string(),
            family: rec.family.clone(),
            branch: rec.branch.clone(),
            hours: rec.recording_hours,
        });
        let utts = corpora
            .get(code)
            .ok_or_else(|| SelectionError::MissingLanguage(code.to_string()))?;
        for (index, u) in utts.iter().enumerate() {
            if let Some(p) = u.phonemes.iter().find(|p| !inventory.contains(p)) {
                return Err(SelectionError::OutOfInventory {
                    lang: code.to_string(),
                    index: index + 1,
                    audio: u.audio_path.clone(),
                    phoneme: p.clone(),
                });
            }
            utterances.push(ManifestEntry {
                lang: code.to_string(),
                audio_path: u.audio_path.clone(),
                phonemes: u.phonemes.clone(),
            });
        }
    }
    Ok(TrainingManifest {
        selection: selection.clone(),
        languages,
        utterances,
        inventory,
        total_hours,
    })
}

impl TrainingManifest {
    /// Writes the `#`-prefixed header block followed by the
    /// `lang<TAB>audio_path<TAB>ipa` table.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# target: {}", self.selection.target)?;
        writeln!(out, "# strategy: {}", self.selection.strategy)?;
        write!(out, "# sources:")?;
        for s in &self.selection.sources {
            match s.similarity {
                Some(v) => write!(out, " {}={}", s.code, crate::export::fmt_f64(v))?,
                None => write!(out, " {}", s.code)?,
            }
        }
        writeln!(out)?;
        for l in &self.languages {
            writeln!(
                out,
                "# language: {} family={} branch={} hours={}",
                l.code,
                l.family,
                l.branch.as_deref().unwrap_or("-"),
                crate::export::fmt_f64(l.hours)
            )?;
        }
        let inv: Vec<&str> = self
            .inventory
            .phonemes
            .iter()
            .map(Phoneme::as_str)
            .collect();
        writeln!(out, "# inventory: {}", inv.join(" "))?;
        writeln!(
            out,
            "# total_hours: {}",
            crate::export::fmt_f64(self.total_hours)
        )?;
        writeln!(out, "lang\taudio_path\tipa")?;
        for u in &self.utterances {
            writeln!(out, "{}\t{}\t{}", u.lang, u.audio_path, u.phonemes)?;
        }
        Ok(())
    }
}

//! Unigram phoneme distributions and their cosine-similarity matrix.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::g2p::{G2pError, Ruleset, UnmatchedMode};
use crate::ipa::{NormalizationPolicy, Phoneme};

pub type PhonemeCounts = BTreeMap<Phoneme, u64>;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("line {line}: {source}")]
    G2p { line: usize, source: G2pError },
    #[error("phoneme '{0}' is not in the vocabulary")]
    OutOfVocabulary(Phoneme),
    #[error("distribution for '{0}' is all zero; cosine similarity is undefined")]
    ZeroVector(String),
    #[error("distributions have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("a similarity matrix needs at least 2 languages, got {0}")]
    TooFewLanguages(usize),
    #[error("matrix row '{row}': {message}")]
    Matrix { row: String, message: String },
}

/// Counts phonemes over every utterance. Errors carry the 1-based line number.
pub fn count_phonemes<'a>(
    utterances: impl IntoIterator<Item = &'a str>,
    rules: &Ruleset,
    policy: &NormalizationPolicy,
    mode: UnmatchedMode,
) -> Result<PhonemeCounts, StatsError> {
    let mut counts = PhonemeCounts::new();
    for (idx, text) in utterances.into_iter().enumerate() {
        let seq = rules
            .transliterate(text, policy, mode)
            .map_err(|source| StatsError::G2p {
                line: idx + 1,
                source,
            })?;
        for p in seq.0 {
            *counts.entry(p).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// The shared, codepoint-sorted phoneme axis of all distributions in an analysis.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GlobalVocabulary {
    phonemes: Vec<Phoneme>,
}

impl GlobalVocabulary {
    pub fn from_phonemes(phonemes: impl IntoIterator<Item = Phoneme>) -> Self {
        let set: BTreeSet<Phoneme> = phonemes.into_iter().collect();
        GlobalVocabulary {
            phonemes: set.into_iter().collect(),
        }
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    pub fn index_of(&self, p: &Phoneme) -> Option<usize> {
        self.phonemes.binary_search(p).ok()
    }
}

pub fn build_vocabulary<'a>(
    counts: impl IntoIterator<Item = &'a PhonemeCounts>,
) -> GlobalVocabulary {
    GlobalVocabulary::from_phonemes(counts.into_iter().flat_map(|c| c.keys().cloned()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeDistribution {
    pub language_code: String,
    pub probabilities: Vec<f64>,
    pub total_count: u64,
}

impl PhonemeDistribution {
    pub fn is_zero(&self) -> bool {
        self.total_count == 0 || self.probabilities.iter().all(|&p| p == 0.0)
    }
}

pub fn to_distribution(
    language_code: &str,
    counts: &PhonemeCounts,
    vocab: &GlobalVocabulary,
) -> Result<PhonemeDistribution, StatsError> {
    let mut raw = vec![0u64; vocab.len()];
    for (p, &n) in counts {
        let idx = vocab
            .index_of(p)
            .ok_or_else(|| StatsError::OutOfVocabulary(p.clone()))?;
        raw[idx] = n;
    }
    let total: u64 = raw.iter().sum();
    let probabilities = if total == 0 {
        vec![0.0; raw.len()]
    } else {
        raw.iter().map(|&n| n as f64 / total as f64).collect()
    };
    Ok(PhonemeDistribution {
        language_code: language_code.to_string(),
        probabilities,
        total_count: total,
    })
}

/// Cosine of the angle between two nonnegative vectors, clamped to [0, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

pub fn cosine_similarity(
    a: &PhonemeDistribution,
    b: &PhonemeDistribution,
) -> Result<f64, StatsError> {
    if a.probabilities.len() != b.probabilities.len() {
        return Err(StatsError::DimensionMismatch(
            a.probabilities.len(),
            b.probabilities.len(),
        ));
    }
    for d in [a, b] {
        if d.is_zero() {
            return Err(StatsError::ZeroVector(d.language_code.clone()));
        }
    }
    Ok(cosine(&a.probabilities, &b.probabilities).expect("checked above"))
}

/// Symmetric matrix of pairwise similarities with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    codes: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Builds a matrix from explicit values, checking shape, symmetry and range.
    pub fn from_values(codes: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let n = codes.len();
        if values.len() != n {
            return Err(StatsError::DimensionMismatch(values.len(), n));
        }
        for (i, row) in values.iter().enumerate() {
            let err = |message: String| StatsError::Matrix {
                row: codes[i].clone(),
                message,
            };
            if row.len() != n {
                return Err(err(format!("expected {n} columns, found {}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(format!("value {v} outside [0, 1]")));
                }
                if v != values[j][i] {
                    return Err(err(format!("not symmetric at column '{}'", codes[j])));
                }
            }
        }
        Ok(SimilarityMatrix { codes, values })
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.values[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn row(&self, code: &str) -> Option<&[f64]> {
        self.index_of(code).map(|i| self.values[i].as_slice())
    }
}

/// Pairwise cosine similarities; upper triangle computed once and mirrored.
pub fn similarity_matrix(dists: &[PhonemeDistribution]) -> Result<SimilarityMatrix, StatsError> {
    if dists.len() < 2 {
        return Err(StatsError::TooFewLanguages(dists.len()));
    }
    if let Some(d) = dists.iter().find(|d| d.is_zero()) {
        return Err(StatsError::ZeroVector(d.language_code.clone()));
    }
    let n = dists.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in (i + 1)..n {
            let v = cosine_similarity(&dists[i], &dists[j])?;
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(SimilarityMatrix {
        codes: dists.iter().map(|d| d.language_code.clone()).collect(),
        values,
    })
}

/// Mean off-diagonal similarity among the members of each family present in
/// the matrix. Families with fewer than two members are left out.
pub fn family_cohesion(
    matrix: &SimilarityMatrix,
    family_of: impl Fn(&str) -> Option<String>,
) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, code) in matrix.codes.iter().enumerate() {
        if let Some(f) = family_of(code) {
            groups.entry(f).or_default().push(i);
        }
    }
    groups
        .into_iter()
        .filter(|(_, idx)| idx.len() >= 2)
        .map(|(family, idx)| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    sum += matrix.values[i][j];
                    n += 1;
                }
            }
            (family, sum / n as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ph(s: &str) -> Phoneme {
        Phoneme::parse(s).unwrap()
    }

    fn counts(pairs: &[(&str, u64)]) -> PhonemeCounts {
        pairs.iter().map(|(p, n)| (ph(p), *n)).collect()
    }

    fn dist(code: &str, p: &[f64]) -> PhonemeDistribution {
        PhonemeDistribution {
            language_code: code.into(),
            probabilities: p.to_vec(),
            total_count: 1,
        }
    }

    #[test]
    fn counts_simple_corpus() {
        let rs = Ruleset::parse("a\ta\nb\tb\n", "x").unwrap();
        let policy = NormalizationPolicy::default();
        let c = count_phonemes(["aba"], &rs, &policy, UnmatchedMode::Error).unwrap();
        assert_eq!(c, counts(&[("a", 2), ("b", 1)]));
        let empty: [&str; 0] = [];
        assert!(count_phonemes(empty, &rs, &policy, UnmatchedMode::Error)
            .unwrap()
            .is_empty());
        match count_phonemes(["ab", "abq"], &rs, &policy, UnmatchedMode::Error) {
            Err(StatsError::G2p { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vocabulary_union() {
        let a = counts(&[("a", 1), ("b", 1)]);
        let b = counts(&[("b", 1), ("c", 1)]);
        let v = build_vocabulary([&a, &b]);
        let got: Vec<&str> = v.phonemes().iter().map(Phoneme::as_str).collect();
        assert_eq!(got, ["a", "b", "c"]);
        let single = build_vocabulary([&b]);
        assert_eq!(single.len(), 2);
    }

    #[test]
    fn distribution_arithmetic() {
        let v = GlobalVocabulary::from_phonemes(["a", "b", "c"].map(ph));
        let d = to_distribution("x", &counts(&[("a", 2), ("b", 1)]), &v).unwrap();
        assert_eq!(d.probabilities, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert_eq!(d.total_count, 3);
        let z = to_distribution("x", &PhonemeCounts::new(), &v).unwrap();
        assert_eq!(z.probabilities, vec![0.0; 3]);
        assert_eq!(z.total_count, 0);
        assert!(matches!(
            to_distribution("x", &counts(&[("d", 1)]), &v),
            Err(StatsError::OutOfVocabulary(_))
        ));
    }

    #[test]
    fn cosine_cases() {
        let a = dist("a", &[0.5, 0.5, 0.0]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() <= 1e-12);
        let e1 = dist("x", &[1.0, 0.0]);
        let e2 = dist("y", &[0.0, 1.0]);
        assert_eq!(cosine_similarity(&e1, &e2).unwrap(), 0.0);
        let b = dist("b", &[0.5, 0.25, 0.25]);
        // dot = 0.375, |a| = sqrt(0.5), |b| = sqrt(0.375)
        let expect = 0.375 / (0.5f64.sqrt() * 0.375f64.sqrt());
        assert!((cosine_similarity(&a, &b).unwrap() - expect).abs() <= 1e-12);
        let z = dist("z", &[0.0, 0.0, 0.0]);
        assert!(matches!(
            cosine_similarity(&a, &z),
            Err(StatsError::ZeroVector(code)) if code == "z"
        ));
    }

    #[test]
    fn matrix_small_cases() {
        let a = dist("a", &[0.5, 0.5]);
        let m = similarity_matrix(&[a.clone(), dist("b", &[0.5, 0.5])]).unwrap();
        assert_eq!(m.get("a", "a"), Some(1.0));
        assert!((m.get("a", "b").unwrap() - 1.0).abs() < 1e-15);
        let m = similarity_matrix(&[dist("x", &[1.0, 0.0]), dist("y", &[0.0, 1.0])]).unwrap();
        assert_eq!(m.values(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            similarity_matrix(std::slice::from_ref(&a)),
            Err(StatsError::TooFewLanguages(1))
        ));
        assert!(similarity_matrix(&[a, dist("z", &[0.0, 0.0])]).is_err());
    }

    #[test]
    fn cohesion_means() {
        let m = SimilarityMatrix::from_values(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![1.0, 0.8, 0.2],
                vec![0.8, 1.0, 0.4],
                vec![0.2, 0.4, 1.0],
            ],
        )
        .unwrap();
        let fam = |c: &str| {
            Some(if c == "c" {
                "G".to_string()
            } else {
                "F".to_string()
            })
        };
        let coh = family_cohesion(&m, fam);
        assert_eq!(coh.len(), 1);
        assert_eq!(coh["F"], 0.8);
    }
}

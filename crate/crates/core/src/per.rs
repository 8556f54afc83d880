//! Phoneme error rate over segment sequences.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PerError {
    #[error("reference {0} is empty; PER is undefined")]
    EmptyReference(usize),
    #[error("no reference/hypothesis pairs")]
    NoPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_length: usize,
    pub per_percent: f64,
}

impl PerReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    fn from_counts(s: usize, i: usize, d: usize, n: usize) -> Self {
        PerReport {
            substitutions: s,
            insertions: i,
            deletions: d,
            reference_length: n,
            per_percent: 100.0 * (s + i + d) as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Pool counts across utterances, then divide.
    #[default]
    Micro,
    /// Mean of per-utterance rates.
    Macro,
}

/// Unit-cost edit distance table between `reference` and `hypothesis`.
fn distance_table<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<Vec<usize>> {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    distance_table(a, b)[a.len()][b.len()]
}

/// Error counts from one minimal alignment.
///
/// The backtrace takes an exact match when available; otherwise it prefers
/// deletion, then insertion, then substitution, so error-type counts are
/// reproducible.
pub fn align_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> (usize, usize, usize) {
    let d = distance_table(reference, hypothesis);
    let (mut i, mut j) = (reference.len(), hypothesis.len());
    let (mut s, mut ins, mut del) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && reference[i - 1] == hypothesis[j - 1] && d[i][j] == d[i - 1][j - 1] {
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            del += 1;
            i -= 1;
        } else if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            s += 1;
            i -= 1;
            j -= 1;
        }
    }
    (s, ins, del)
}

pub fn per<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<PerReport, PerError> {
    if reference.is_empty() {
        return Err(PerError::EmptyReference(0));
    }
    let (s, i, d) = align_counts(reference, hypothesis);
    Ok(PerReport::from_counts(s, i, d, reference.len()))
}

/// Corpus-level PER. Errors name the 1-based pair index of an empty reference.
pub fn corpus_per<T: PartialEq, R: AsRef<[T]>>(
    pairs: &[(R, R)],
    averaging: Averaging,
) -> Result<PerReport, PerError> {
    if pairs.is_empty() {
        return Err(PerError::NoPairs);
    }
    let (mut s, mut i, mut d, mut n) = (0, 0, 0, 0);
    let mut rate_sum = 0.0;
    for (idx, (r, h)) in pairs.iter().enumerate() {
        let report = per(r.as_ref(), h.as_ref()).map_err(|_| PerError::EmptyReference(idx + 1))?;
        s += report.substitutions;
        i += report.insertions;
        d += report.deletions;
        n += report.reference_length;
        rate_sum += report.per_percent;
    }
    let mut report = PerReport::from_counts(s, i, d, n);
    if averaging == Averaging::Macro {
        report.per_percent = rate_sum / pairs.len() as f64;
    }
    Ok(report)
}

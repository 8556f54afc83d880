//! Binary typological feature matrices (Grambank-style) and their projection.

use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::projection::{pca_project, Projection, ProjectionError};

#[derive(Debug, Error)]
pub enum TypologyError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("feature file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("language '{language}', feature '{feature}': value '{value}' is not 0, 1 or ?")]
    NonTernary {
        language: String,
        feature: String,
        value: String,
    },
    #[error("{0} entries are missing; impute before projecting")]
    Incomplete(usize),
    #[error("unknown imputation method '{0}' (expected none or column_mode)")]
    UnknownMethod(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

/// `None` marks a missing value.
pub type Cell = Option<bool>;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub language_ids: Vec<String>,
    pub feature_ids: Vec<String>,
    pub values: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedFeatures {
    pub matrix: FeatureMatrix,
    pub warnings: Vec<String>,
}

impl FeatureMatrix {
    pub fn load(path: impl AsRef<Path>) -> Result<LoadedFeatures, TypologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TypologyError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses a CSV whose first column holds language ids and whose header
    /// row holds feature ids. Fully-missing columns, then fully-missing rows,
    /// are dropped with a warning each.
    pub fn parse(text: &str) -> Result<LoadedFeatures, TypologyError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let perr = |e: csv::Error| TypologyError::Parse {
            line: e.position().map_or(1, |p| p.line()),
            message: e.to_string(),
        };
        let header = rdr.headers().map_err(perr)?.clone();
        if header.len() < 2 {
            return Err(TypologyError::Parse {
                line: 1,
                message: "expected a language id column and at least one feature".into(),
            });
        }
        let feature_ids: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut language_ids = Vec::new();
        let mut values = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(perr)?;
            let lang = row.get(0).unwrap_or("").to_string();
            let mut cells = Vec::with_capacity(feature_ids.len());
            for (j, raw) in row.iter().skip(1).enumerate() {
                cells.push(match raw {
                    "0" => Some(false),
                    "1" => Some(true),
                    "?" => None,
                    other => {
                        return Err(TypologyError::NonTernary {
                            language: lang,
                            feature: feature_ids[j].clone(),
                            value: other.to_string(),
                        })
                    }
                });
            }
            language_ids.push(lang);
            values.push(cells);
        }

        let mut warnings = Vec::new();
        let keep_cols: Vec<usize> = (0..feature_ids.len())
            .filter(|&j| {
                let any = values.iter().any(|r: &Vec<Cell>| r[j].is_some());
                if !any {
                    warnings.push(format!(
                        "dropped feature '{}': all values missing",
                        feature_ids[j]
                    ));
                }
                any
            })
            .collect();
        let mut matrix = FeatureMatrix {
            language_ids: Vec::new(),
            feature_ids: keep_cols.iter().map(|&j| feature_ids[j].clone()).collect(),
            values: Vec::new(),
        };
        for (lang, row) in language_ids.into_iter().zip(values) {
            let kept: Vec<Cell> = keep_cols.iter().map(|&j| row[j]).collect();
            if kept.iter().all(Option::is_none) {
                warnings.push(format!("dropped language '{lang}': all values missing"));
                continue;
            }
            matrix.language_ids.push(lang);
            matrix.values.push(kept);
        }
        Ok(LoadedFeatures { matrix, warnings })
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Permutes features into `order` (indices into the current features).
    pub fn select_features(&self, order: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            language_ids: self.language_ids.clone(),
            feature_ids: order.iter().map(|&j| self.feature_ids[j].clone()).collect(),
            values: self
                .values
                .iter()
                .map(|r| order.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImputeMethod {
    /// Requires complete data.
    #[default]
    None,
    /// Majority value of the column; ties go to 0. A degraded stand-in for
    /// model-based imputation.
    ColumnMode,
}

impl FromStr for ImputeMethod {
    type Err = TypologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ImputeMethod::None),
            "column_mode" => Ok(ImputeMethod::ColumnMode),
            other => Err(TypologyError::UnknownMethod(other.to_string())),
        }
    }
}

/// Fills missing entries, returning a complete 0/1 matrix.
pub fn impute(fm: &FeatureMatrix, method: ImputeMethod) -> Result<Vec<Vec<u8>>, TypologyError> {
    match method {
        ImputeMethod::None => {
            let missing = fm.missing_count();
            if missing > 0 {
                return Err(TypologyError::Incomplete(missing));
            }
            Ok(fm
                .values
                .iter()
                .map(|r| r.iter().map(|c| c.unwrap() as u8).collect())
                .collect())
        }
        ImputeMethod::ColumnMode => {
            let d = fm.feature_ids.len();
            let modes: Vec<u8> = (0..d)
                .map(|j| {
                    let ones = fm.values.iter().filter(|r| r[j] == Some(true)).count();
                    let zeros = fm.values.iter().filter(|r| r[j] == Some(false)).count();
                    (ones > zeros) as u8
                })
                .collect();
            Ok(fm
                .values
                .iter()
                .map(|r| {
                    r.iter()
                        .zip(&modes)
                        .map(|(c, &m)| c.map_or(m, |b| b as u8))
                        .collect()
                })
                .collect())
        }
    }
}

/// Lifts a complete matrix back into a [`FeatureMatrix`] with no missing cells.
pub fn complete_matrix(fm: &FeatureMatrix, complete: &[Vec<u8>]) -> FeatureMatrix {
    FeatureMatrix {
        language_ids: fm.language_ids.clone(),
        feature_ids: fm.feature_ids.clone(),
        values: complete
            .iter()
            .map(|r| r.iter().map(|&v| Some(v == 1)).collect())
            .collect(),
    }
}

/// PCA of the binary rows, one row per language.
pub fn project_typology(
    complete: &[Vec<u8>],
    ids: &[String],
    dims: usize,
) -> Result<Projection, TypologyError> {
    let rows: Vec<Vec<f64>> = complete
        .iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    Ok(pca_project(&rows, ids, dims)?)
}

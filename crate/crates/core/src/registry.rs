//! Language metadata: family, branch and validated recording hours.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Languages with strictly fewer validated hours than this are low-resource.
pub const DEFAULT_LOW_RESOURCE_HOURS: f64 = 15.0;

const HEADER: [&str; 5] = ["code", "name", "family", "branch", "hours"];

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("registry line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("registry line {line}: duplicate language code '{code}'")]
    DuplicateCode { line: u64, code: String },
    #[error("unknown language code '{0}'")]
    UnknownCode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageRecord {
    pub code: String,
    pub name: String,
    pub family: String,
    pub branch: Option<String>,
    pub recording_hours: f64,
}

/// An immutable set of languages keyed (and iterated) by code.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    languages: BTreeMap<String, LanguageRecord>,
    low_resource_threshold_hours: f64,
}

impl Default for Registry {
    fn default() -> Self {
        Self {
            languages: BTreeMap::new(),
            low_resource_threshold_hours: DEFAULT_LOW_RESOURCE_HOURS,
        }
    }
}

impl Registry {
    /// Builds a registry from records, rejecting duplicate codes and negative hours.
    pub fn from_records(
        records: impl IntoIterator<Item = LanguageRecord>,
    ) -> Result<Self, RegistryError> {
        let mut reg = Registry::default();
        for (idx, rec) in records.into_iter().enumerate() {
            reg.insert(rec, idx as u64 + 1)?;
        }
        Ok(reg)
    }

    fn insert(&mut self, rec: LanguageRecord, line: u64) -> Result<(), RegistryError> {
        if !(rec.recording_hours >= 0.0 && rec.recording_hours.is_finite()) {
            return Err(RegistryError::Parse {
                line,
                message: format!(
                    "recording hours for '{}' must be a finite nonnegative number",
                    rec.code
                ),
            });
        }
        if self.languages.contains_key(&rec.code) {
            return Err(RegistryError::DuplicateCode {
                line,
                code: rec.code,
            });
        }
        self.languages.insert(rec.code.clone(), rec);
        Ok(())
    }

    pub fn with_threshold(mut self, hours: f64) -> Self {
        self.low_resource_threshold_hours = hours;
        self
    }

    pub fn threshold(&self) -> f64 {
        self.low_resource_threshold_hours
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<&LanguageRecord> {
        self.languages.get(code)
    }

    pub fn require(&self, code: &str) -> Result<&LanguageRecord, RegistryError> {
        self.get(code)
            .ok_or_else(|| RegistryError::UnknownCode(code.to_string()))
    }

    /// Records in code order.
    pub fn iter(&self) -> impl Iterator<Item = &LanguageRecord> {
        self.languages.values()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(String::as_str)
    }

    pub fn hours(&self, code: &str) -> Option<f64> {
        self.get(code).map(|r| r.recording_hours)
    }

    pub fn is_low_resource(&self, code: &str) -> Result<bool, RegistryError> {
        let rec = self.require(code)?;
        Ok(rec.recording_hours < self.low_resource_threshold_hours)
    }

    /// All languages of `family` in code order, minus `exclude` when given.
    pub fn family_members(&self, family: &str, exclude: Option<&str>) -> Vec<&LanguageRecord> {
        self.iter()
            .filter(|r| r.family == family && Some(r.code.as_str()) != exclude)
            .collect()
    }

    /// Distinct family names in sorted order.
    pub fn families(&self) -> Vec<&str> {
        let mut fams: Vec<&str> = self.iter().map(|r| r.family.as_str()).collect();
        fams.sort_unstable();
        fams.dedup();
        fams
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses the `code,name,family,branch,hours` CSV format. An empty input
    /// (no header either) yields an empty registry.
    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut reg = Registry::default();
        if text.trim().is_empty() {
            return Ok(reg);
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let found: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
        if found != HEADER {
            return Err(RegistryError::Parse {
                line: 1,
                message: format!(
                    "expected header '{}', found '{}'",
                    HEADER.join(","),
                    found.join(",")
                ),
            });
        }
        for row in rdr.records() {
            let row = row.map_err(|e| csv_error(e, 0))?;
            let line = row.position().map_or(0, |p| p.line());
            let field = |i: usize| row.get(i).unwrap_or("").to_string();
            let code = field(0);
            if code.is_empty() {
                return Err(RegistryError::Parse {
                    line,
                    message: "empty language code".into(),
                });
            }
            let hours: f64 = field(4).parse().map_err(|_| RegistryError::Parse {
                line,
                message: format!("invalid hours value '{}'", field(4)),
            })?;
            let branch = field(3);
            let rec = LanguageRecord {
                code,
                name: field(1),
                family: field(2),
                branch: (!branch.is_empty()).then_some(branch),
                recording_hours: hours,
            };
            reg.insert(rec, line)?;
        }
        Ok(reg)
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> RegistryError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    RegistryError::Parse {
        line,
        message: e.to_string(),
    }
}

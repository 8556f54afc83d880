//! End-to-end run: corpora through G2P, distributions, similarity, PCA,
//! family contours, source selection and the training manifest.
//!
//! Every artifact is first written to a scratch directory inside the output
//! directory and only moved into place once all stages have succeeded.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::contour::{family_contours, ContourOptions, FamilyPoint, LevelMode};
use crate::corpus::{convert_corpus, count_utterances, read_corpus};
use crate::error::Error;
use crate::export;
use crate::g2p::{Ruleset, UnmatchedMode};
use crate::ipa::NormalizationPolicy;
use crate::kde::{BandwidthRule, DEFAULT_PADDING_BANDWIDTHS, DEFAULT_RESOLUTION};
use crate::projection::pca_project;
use crate::registry::Registry;
use crate::selection::{
    emit_manifest, select_strategy, SelectionResult, Strategy, Utterance, DEFAULT_TOP_K,
};
use crate::stats::{
    build_vocabulary, family_cohesion, similarity_matrix, to_distribution, GlobalVocabulary,
    PhonemeCounts, PhonemeDistribution, SimilarityMatrix,
};

/// Converted utterances per language code.
pub type Corpora = BTreeMap<String, Vec<Utterance>>;

pub const DEFAULT_CONTOUR_LEVEL: f64 = 0.1;
pub const MIN_RESOLUTION: usize = 16;

/// Artifact file names, in the order they are written.
pub const ARTIFACTS: [&str; 8] = [
    "distributions.csv",
    "similarity.csv",
    "family_similarity.json",
    "coords.csv",
    "contours.json",
    "contours.svg",
    "selection.json",
    "manifest.tsv",
];

/// Config as read from a TOML file or built from command-line flags. Every
/// field is optional so that two layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub corpus_dir: Option<PathBuf>,
    pub rules_dir: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub target: Option<String>,
    pub strategy: Option<String>,
    pub k: Option<usize>,
    pub contour_level: Option<f64>,
    pub relative_level: Option<bool>,
    pub resolution: Option<usize>,
    pub unmatched: Option<String>,
    pub output_dir: Option<PathBuf>,
}

impl PartialConfig {
    /// Reads a TOML config. Relative paths are resolved against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PartialConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.corpus_dir,
            &mut cfg.rules_dir,
            &mut cfg.registry,
            &mut cfg.policy,
            &mut cfg.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            corpus_dir: over.corpus_dir.or(self.corpus_dir),
            rules_dir: over.rules_dir.or(self.rules_dir),
            registry: over.registry.or(self.registry),
            policy: over.policy.or(self.policy),
            target: over.target.or(self.target),
            strategy: over.strategy.or(self.strategy),
            k: over.k.or(self.k),
            contour_level: over.contour_level.or(self.contour_level),
            relative_level: over.relative_level.or(self.relative_level),
            resolution: over.resolution.or(self.resolution),
            unmatched: over.unmatched.or(self.unmatched),
            output_dir: over.output_dir.or(self.output_dir),
        }
    }

    pub fn resolve(self) -> Result<PipelineConfig, Error> {
        let need = |v: Option<PathBuf>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("missing required setting '{name}'")))
        };
        let strategy = match self.strategy {
            Some(s) => s.parse()?,
            None => Strategy::CorpusSim,
        };
        let unmatched = match self.unmatched {
            Some(s) => s.parse().map_err(Error::Config)?,
            None => UnmatchedMode::Error,
        };
        let cfg = PipelineConfig {
            corpus_dir: need(self.corpus_dir, "corpus_dir")?,
            rules_dir: need(self.rules_dir, "rules_dir")?,
            registry: need(self.registry, "registry")?,
            policy: self.policy,
            target: self
                .target
                .ok_or_else(|| Error::Config("missing required setting 'target'".into()))?,
            strategy,
            k: self.k.unwrap_or(DEFAULT_TOP_K),
            contour_level: self.contour_level.unwrap_or(DEFAULT_CONTOUR_LEVEL),
            relative_level: self.relative_level.unwrap_or(false),
            resolution: self.resolution.unwrap_or(DEFAULT_RESOLUTION),
            unmatched,
            output_dir: need(self.output_dir, "output_dir")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Holds one `<code>.tsv` transcript file per language.
    pub corpus_dir: PathBuf,
    /// Holds one `<code>.tsv` G2P ruleset per language.
    pub rules_dir: PathBuf,
    pub registry: PathBuf,
    /// Built-in default policy when absent.
    pub policy: Option<PathBuf>,
    pub target: String,
    pub strategy: Strategy,
    pub k: usize,
    pub contour_level: f64,
    /// Read `contour_level` as a fraction of each family's peak density.
    pub relative_level: bool,
    pub resolution: usize,
    pub unmatched: UnmatchedMode,
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.contour_level > 0.0 && self.contour_level.is_finite()) {
            return Err(Error::Config(format!(
                "contour_level must be positive, got {}",
                self.contour_level
            )));
        }
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "resolution must be at least {MIN_RESOLUTION}, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Registry,
    Policy,
    Corpus,
    G2p,
    Distributions,
    Similarity,
    Projection,
    Contours,
    Selection,
    Manifest,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Registry => "registry",
            Stage::Policy => "policy",
            Stage::Corpus => "corpus",
            Stage::G2p => "g2p",
            Stage::Distributions => "distributions",
            Stage::Similarity => "similarity",
            Stage::Projection => "projection",
            Stage::Contours => "contours",
            Stage::Selection => "selection",
            Stage::Manifest => "manifest",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage{}: {source}", .language.as_ref().map(|l| format!(" [{l}]")).unwrap_or_default())]
pub struct PipelineError {
    pub stage: Stage,
    pub language: Option<String>,
    pub source: Error,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        if self.stage == Stage::Write {
            3
        } else {
            self.source.exit_code()
        }
    }
}

fn at<E: Into<Error>>(
    stage: Stage,
    language: Option<&str>,
) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError {
        stage,
        language: language.map(str::to_string),
        source: e.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub languages: Vec<String>,
    pub selection: SelectionResult,
    pub warnings: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

fn io_out(context: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Output {
        context: context.to_string(),
        source,
    }
}

/// Reads and transliterates `<corpus_dir>/<code>.tsv` with
/// `<rules_dir>/<code>.tsv` for each code. Languages without a corpus file or
/// with an empty one are left out with a warning, except `required`, which
/// must be present.
pub fn load_corpora(
    corpus_dir: &Path,
    rules_dir: &Path,
    codes: &[String],
    required: Option<&str>,
    policy: &NormalizationPolicy,
    mode: UnmatchedMode,
) -> Result<(Corpora, Vec<String>), PipelineError> {
    let mut corpora = BTreeMap::new();
    let mut warnings = Vec::new();
    for code in codes {
        let code = code.as_str();
        let missing = |message: String| PipelineError {
            stage: Stage::Corpus,
            language: Some(code.to_string()),
            source: Error::Config(message),
        };
        let path = corpus_dir.join(format!("{code}.tsv"));
        if !path.is_file() {
            if Some(code) == required {
                return Err(missing(format!("no corpus file {}", path.display())));
            }
            warnings.push(format!("{code}: no corpus file; excluded"));
            continue;
        }
        let lines = read_corpus(&path).map_err(at(Stage::Corpus, Some(code)))?;
        if lines.is_empty() {
            if Some(code) == required {
                return Err(missing(format!("{} has no utterances", path.display())));
            }
            warnings.push(format!("{code}: empty corpus; excluded"));
            continue;
        }
        let rules = Ruleset::load(rules_dir.join(format!("{code}.tsv")))
            .map_err(at(Stage::G2p, Some(code)))?;
        let utts =
            convert_corpus(&lines, &rules, policy, mode).map_err(at(Stage::G2p, Some(code)))?;
        corpora.insert(code.to_string(), utts);
    }
    Ok((corpora, warnings))
}

/// Phoneme distributions over the shared vocabulary and their similarity matrix.
pub fn analyze(
    corpora: &Corpora,
) -> Result<(GlobalVocabulary, Vec<PhonemeDistribution>, SimilarityMatrix), PipelineError> {
    let counts: Vec<(&String, PhonemeCounts)> = corpora
        .iter()
        .map(|(c, u)| (c, count_utterances(u)))
        .collect();
    let vocab = build_vocabulary(counts.iter().map(|(_, c)| c));
    let dists = counts
        .iter()
        .map(|(code, c)| {
            to_distribution(code, c, &vocab).map_err(at(Stage::Distributions, Some(code)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let matrix = similarity_matrix(&dists).map_err(at(Stage::Similarity, None))?;
    Ok((vocab, dists, matrix))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    cfg.validate().map_err(at(Stage::Config, None))?;
    let mut warnings = Vec::new();

    let registry = Registry::load(&cfg.registry).map_err(at(Stage::Registry, None))?;
    registry
        .require(&cfg.target)
        .map_err(at(Stage::Registry, Some(&cfg.target)))?;
    let policy = match &cfg.policy {
        Some(p) => NormalizationPolicy::load(p).map_err(at(Stage::Policy, None))?,
        None => NormalizationPolicy::default(),
    };

    let codes: Vec<String> = registry.codes().map(str::to_string).collect();
    let (corpora, corpus_warnings) = load_corpora(
        &cfg.corpus_dir,
        &cfg.rules_dir,
        &codes,
        Some(&cfg.target),
        &policy,
        cfg.unmatched,
    )?;
    warnings.extend(corpus_warnings);
    let (vocab, dists, matrix) = analyze(&corpora)?;
    let family_of = |code: &str| registry.get(code).map(|r| r.family.clone());
    let cohesion = family_cohesion(&matrix, family_of);

    // Each language is embedded as its row of the similarity matrix.
    let ids: Vec<String> = matrix.codes().to_vec();
    let projection = pca_project(matrix.values(), &ids, 2).map_err(at(Stage::Projection, None))?;

    let families: BTreeMap<String, String> = ids
        .iter()
        .filter_map(|id| family_of(id).map(|f| (id.clone(), f)))
        .collect();
    let points: Vec<FamilyPoint> = ids
        .iter()
        .zip(projection.xy())
        .map(|(id, (x, y))| FamilyPoint {
            id: id.clone(),
            family: families[id].clone(),
            x,
            y,
            hours: registry.hours(id).unwrap_or(0.0),
        })
        .collect();
    let opts = ContourOptions {
        level: cfg.contour_level,
        mode: if cfg.relative_level {
            LevelMode::Relative
        } else {
            LevelMode::Absolute
        },
        resolution: cfg.resolution,
        padding: DEFAULT_PADDING_BANDWIDTHS,
        bandwidth: BandwidthRule::Silverman,
    };
    let (contours, contour_warnings) =
        family_contours(&points, &opts).map_err(at(Stage::Contours, None))?;
    warnings.extend(contour_warnings);

    let mut selection = select_strategy(&cfg.target, cfg.strategy, &registry, Some(&matrix), cfg.k)
        .map_err(at(Stage::Selection, Some(&cfg.target)))?;
    // Family and all-language strategies may name languages without a corpus.
    selection.sources.retain(|s| corpora.contains_key(&s.code));
    selection.k = match cfg.strategy {
        Strategy::CorpusSim => selection.k,
        _ => selection.sources.len(),
    };
    warnings.extend(selection.warnings.iter().cloned());
    let manifest = emit_manifest(&selection, &corpora, &registry)
        .map_err(at(Stage::Manifest, Some(&cfg.target)))?;

    let write = at(Stage::Write, None);
    let artifacts = (|| -> Result<Vec<PathBuf>, Error> {
        fs::create_dir_all(&cfg.output_dir).map_err(io_out("creating output directory"))?;
        let scratch = tempfile::Builder::new()
            .prefix(".phonosim-")
            .tempdir_in(&cfg.output_dir)
            .map_err(io_out("creating scratch directory"))?;
        let file = |name: &str| scratch.path().join(name);
        let create = |name: &str| fs::File::create(file(name)).map_err(io_out("creating artifact"));
        let put = |name: &str, text: &str| {
            fs::write(file(name), text).map_err(io_out("writing artifact"))
        };

        export::write_distributions(create(ARTIFACTS[0])?, &vocab, &dists)?;
        export::write_matrix(create(ARTIFACTS[1])?, &matrix)?;
        put(ARTIFACTS[2], &export::scores_json(&cohesion)?)?;
        export::write_coords(create(ARTIFACTS[3])?, &projection, Some(&families))?;
        put(ARTIFACTS[4], &export::contours_json(&contours)?)?;
        let svg_points: Vec<(String, String, f64, f64)> = points
            .iter()
            .map(|p| (p.id.clone(), p.family.clone(), p.x, p.y))
            .collect();
        put(ARTIFACTS[5], &export::contours_svg(&svg_points, &contours))?;
        put(ARTIFACTS[6], &export::selection_json(&selection)?)?;
        let mut tsv = Vec::new();
        manifest
            .write_tsv(&mut tsv)
            .map_err(io_out("writing manifest"))?;
        fs::write(file(ARTIFACTS[7]), tsv).map_err(io_out("writing manifest"))?;

        let mut done = Vec::new();
        for name in ARTIFACTS {
            let dest = cfg.output_dir.join(name);
            fs::rename(file(name), &dest).map_err(io_out("moving artifact into place"))?;
            done.push(dest);
        }
        Ok(done)
    })()
    .map_err(write)?;

    Ok(PipelineSummary {
        languages: ids,
        selection,
        warnings,
        artifacts,
    })
}

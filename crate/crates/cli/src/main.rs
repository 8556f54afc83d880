use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phonosim_core::contour::{family_contours, ContourOptions, FamilyPoint, LevelMode};
use phonosim_core::export::{self, ExportError};
use phonosim_core::g2p::{Ruleset, UnmatchedMode};
use phonosim_core::ipa::{tokenize_ipa, NormalizationPolicy, PhonemeSequence};
use phonosim_core::kde::{BandwidthRule, DEFAULT_PADDING_BANDWIDTHS, DEFAULT_RESOLUTION};
use phonosim_core::per::{corpus_per, Averaging};
use phonosim_core::pipeline::{self, PartialConfig, PipelineError, DEFAULT_CONTOUR_LEVEL};
use phonosim_core::projection::pca_project;
use phonosim_core::registry::Registry;
use phonosim_core::selection::{emit_manifest, select_strategy, Strategy, DEFAULT_TOP_K};
use phonosim_core::stats::family_cohesion;
use phonosim_core::typology::{
    complete_matrix, impute, project_typology, FeatureMatrix, ImputeMethod,
};
use phonosim_core::Error;

#[derive(Parser)]
#[command(
    name = "phonosim",
    version,
    about = "Phoneme-distribution language similarity toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Language registry checks.
    #[command(subcommand)]
    Registry(RegistryCmd),
    /// IPA segmentation.
    #[command(subcommand)]
    Ipa(IpaCmd),
    /// Transliterate standard input, one utterance per line.
    G2p(G2pArgs),
    /// Phoneme distributions and similarity.
    #[command(subcommand)]
    Sim(SimCmd),
    /// 2D PCA of a labelled numeric table such as a similarity matrix.
    Pca(PcaArgs),
    /// Per-family KDE contours over 2D coordinates.
    Contours(ContoursArgs),
    /// PCA of a binary typological feature matrix.
    Typology(TypologyArgs),
    /// Choose source languages for a target and optionally emit a manifest.
    Select(SelectArgs),
    /// Phoneme error rate between line-aligned files.
    Per(PerArgs),
    /// Run every stage from corpora to training manifest.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum RegistryCmd {
    /// Load a registry and list each language with its low-resource flag.
    Validate {
        path: PathBuf,
        /// Low-resource threshold in hours.
        #[arg(long, default_value_t = phonosim_core::registry::DEFAULT_LOW_RESOURCE_HOURS)]
        threshold: f64,
    },
}

#[derive(Subcommand)]
enum IpaCmd {
    /// Print the space-separated segments of each input line.
    Tokenize {
        /// Normalization policy file; the built-in default when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Skip normalization.
        #[arg(long, conflicts_with = "policy")]
        raw: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Error,
    Skip,
    Passthrough,
}

impl From<Mode> for UnmatchedMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Error => UnmatchedMode::Error,
            Mode::Skip => UnmatchedMode::Skip,
            Mode::Passthrough => UnmatchedMode::Passthrough,
        }
    }
}

#[derive(Args)]
struct G2pArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, value_enum, default_value = "error")]
    mode: Mode,
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Build the language similarity matrix from per-language corpora.
    Matrix(SimArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Directory of `<code>.tsv` transcript files.
    #[arg(long)]
    corpus_dir: PathBuf,
    /// Directory of `<code>.tsv` G2P rule files.
    #[arg(long)]
    rules_dir: PathBuf,
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Restricts languages to the registry and enables `--cohesion`.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "error")]
    mode: Mode,
    /// Similarity matrix CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the phoneme distributions CSV.
    #[arg(long)]
    distributions: Option<PathBuf>,
    /// Also write mean within-family similarity as JSON.
    #[arg(long, requires = "registry")]
    cohesion: Option<PathBuf>,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Adds a family column.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContourFormat {
    Json,
    Svg,
}

#[derive(Args)]
struct ContoursArgs {
    #[arg(long)]
    coords: PathBuf,
    #[arg(long)]
    registry: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CONTOUR_LEVEL)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Output file; format follows the extension unless `--format` is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<ContourFormat>,
    /// Read the level as a fraction of each family's peak density.
    #[arg(long)]
    relative: bool,
    /// Bandwidth from min(σ, IQR/1.34) instead of σ.
    #[arg(long)]
    robust: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Impute {
    None,
    ColumnMode,
}

#[derive(Args)]
struct TypologyArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    impute: Impute,
    /// Adds a family column.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    CorpusSim,
    Family,
    All,
    Monolingual,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::CorpusSim => Strategy::CorpusSim,
            StrategyArg::Family => Strategy::Family,
            StrategyArg::All => Strategy::All,
            StrategyArg::Monolingual => Strategy::Monolingual,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    target: String,
    #[arg(long, value_enum, default_value = "corpus-sim")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    k: usize,
    #[arg(long)]
    registry: PathBuf,
    /// Similarity matrix CSV; required by corpus-sim.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Selection report JSON; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training manifest TSV; needs corpora and rules.
    #[arg(long, requires_all = ["corpus_dir", "rules_dir"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    rules_dir: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "error")]
    mode: Mode,
}

#[derive(Args)]
struct PerArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    /// Average per-utterance rates instead of pooling counts.
    #[arg(long = "macro")]
    macro_average: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML config; flags below override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    rules_dir: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    relative: bool,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

macro_rules! data_err {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::from(Error::from(e))
            }
        }
    )*};
}

data_err!(
    phonosim_core::registry::RegistryError,
    phonosim_core::ipa::IpaError,
    phonosim_core::g2p::G2pError,
    phonosim_core::stats::StatsError,
    phonosim_core::projection::ProjectionError,
    phonosim_core::contour::FamilyContourError,
    phonosim_core::selection::SelectionError,
    phonosim_core::typology::TypologyError,
    phonosim_core::per::PerError
);

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        let code = match e {
            ExportError::Io(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Run<T = ()> = Result<T, Failure>;

fn input_err(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn output_err(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("writing {}: {e}", path.display()),
    }
}

fn read_text(path: &Path) -> Run<String> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Run {
    fs::write(path, text).map_err(|e| output_err(path, e))
}

fn create(path: &Path) -> Run<fs::File> {
    fs::File::create(path).map_err(|e| output_err(path, e))
}

fn load_policy(path: Option<&Path>) -> Run<NormalizationPolicy> {
    Ok(match path {
        Some(p) => NormalizationPolicy::load(p)?,
        None => NormalizationPolicy::default(),
    })
}

fn family_map(registry: &Registry) -> BTreeMap<String, String> {
    registry
        .iter()
        .map(|r| (r.code.clone(), r.family.clone()))
        .collect()
}

fn stdin_lines() -> Run<Vec<String>> {
    io::stdin()
        .lock()
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| Failure {
            code: 2,
            message: format!("reading standard input: {e}"),
        })
}

fn print_lines(lines: impl IntoIterator<Item = String>) -> Run {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let fail = |e: io::Error| Failure {
        code: 3,
        message: format!("writing standard output: {e}"),
    };
    for line in lines {
        writeln!(out, "{line}").map_err(fail)?;
    }
    out.flush().map_err(fail)
}

fn warn(messages: &[String]) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Registry(RegistryCmd::Validate { path, threshold }) => {
            let reg = Registry::load(&path)?.with_threshold(threshold);
            let mut lines = Vec::new();
            let mut low = 0;
            for r in reg.iter() {
                let flag = reg.is_low_resource(&r.code)?;
                low += usize::from(flag);
                lines.push(format!(
                    "{}\t{}\t{}\t{}\t{}",
                    r.code,
                    r.family,
                    export::fmt_f64(r.recording_hours),
                    if flag { "low" } else { "-" },
                    r.name
                ));
            }
            lines.push(format!(
                "{} languages, {low} low-resource (< {} h)",
                reg.len(),
                export::fmt_f64(threshold)
            ));
            print_lines(lines)
        }
        Command::Ipa(IpaCmd::Tokenize { policy, raw }) => {
            let policy = if raw {
                NormalizationPolicy::identity()
            } else {
                load_policy(policy.as_deref())?
            };
            let mut out = Vec::new();
            for (idx, line) in stdin_lines()?.iter().enumerate() {
                let seq = tokenize_ipa(line).map_err(|e| Failure {
                    code: 2,
                    message: format!("line {}: {e}", idx + 1),
                })?;
                out.push(policy.normalize(&seq).to_string());
            }
            print_lines(out)
        }
        Command::G2p(args) => {
            let rules = Ruleset::load(&args.rules)?;
            let policy = load_policy(args.policy.as_deref())?;
            let mut out = Vec::new();
            for (idx, line) in stdin_lines()?.iter().enumerate() {
                let seq = rules
                    .transliterate(line, &policy, args.mode.into())
                    .map_err(|e| Failure {
                        code: 2,
                        message: format!("line {}: {e}", idx + 1),
                    })?;
                out.push(seq.to_string());
            }
            print_lines(out)
        }
        Command::Sim(SimCmd::Matrix(args)) => sim_matrix(args),
        Command::Pca(args) => {
            let file = fs::File::open(&args.input).map_err(|e| input_err(&args.input, e))?;
            let table = export::read_labeled_rows(file)?;
            let proj = pca_project(&table.rows, &table.ids, 2)?;
            let families = match &args.registry {
                Some(p) => Some(family_map(&Registry::load(p)?)),
                None => None,
            };
            export::write_coords(create(&args.out)?, &proj, families.as_ref())?;
            Ok(())
        }
        Command::Contours(args) => contours(args),
        Command::Typology(args) => {
            let loaded = FeatureMatrix::load(&args.features)?;
            warn(&loaded.warnings);
            let method = match args.impute {
                Impute::None => ImputeMethod::None,
                Impute::ColumnMode => ImputeMethod::ColumnMode,
            };
            let complete = impute(&loaded.matrix, method)?;
            let fm = complete_matrix(&loaded.matrix, &complete);
            let proj = project_typology(&complete, &fm.language_ids, 2)?;
            let families = match &args.registry {
                Some(p) => Some(family_map(&Registry::load(p)?)),
                None => None,
            };
            export::write_coords(create(&args.out)?, &proj, families.as_ref())?;
            Ok(())
        }
        Command::Select(args) => select(args),
        Command::Per(args) => {
            let read_seqs = |path: &Path| -> Run<Vec<PhonemeSequence>> {
                read_text(path)?
                    .lines()
                    .enumerate()
                    .map(|(idx, l)| {
                        tokenize_ipa(l).map_err(|e| Failure {
                            code: 2,
                            message: format!("{} line {}: {e}", path.display(), idx + 1),
                        })
                    })
                    .collect()
            };
            let refs = read_seqs(&args.reference)?;
            let hyps = read_seqs(&args.hyp)?;
            if refs.len() != hyps.len() {
                return Err(Failure {
                    code: 2,
                    message: format!(
                        "{} reference lines but {} hypothesis lines",
                        refs.len(),
                        hyps.len()
                    ),
                });
            }
            let pairs: Vec<_> = refs
                .into_iter()
                .map(|r| r.0)
                .zip(hyps.into_iter().map(|h| h.0))
                .collect();
            let averaging = if args.macro_average {
                Averaging::Macro
            } else {
                Averaging::Micro
            };
            let report = corpus_per(&pairs, averaging)?;
            let json = serde_json::json!({
                "utterances": pairs.len(),
                "averaging": if args.macro_average { "macro" } else { "micro" },
                "substitutions": report.substitutions,
                "insertions": report.insertions,
                "deletions": report.deletions,
                "reference_length": report.reference_length,
                "per_percent": export::round12(report.per_percent),
            });
            print_lines([serde_json::to_string_pretty(&json).expect("serializable")])
        }
        Command::Pipeline(args) => {
            let base = match &args.config {
                Some(p) => PartialConfig::load(p)?,
                None => PartialConfig::default(),
            };
            let flags = PartialConfig {
                corpus_dir: args.corpus_dir,
                rules_dir: args.rules_dir,
                registry: args.registry,
                policy: args.policy,
                target: args.target,
                strategy: args.strategy,
                k: args.k,
                contour_level: args.level,
                relative_level: args.relative.then_some(true),
                resolution: args.resolution,
                unmatched: args.mode,
                output_dir: args.out_dir,
            };
            let cfg = base.merge(flags).resolve()?;
            let summary = pipeline::run_pipeline(&cfg)?;
            warn(&summary.warnings);
            let mut lines = vec![format!(
                "target {}: sources {}",
                summary.selection.target,
                summary.selection.source_codes().join(" ")
            )];
            lines.extend(summary.artifacts.iter().map(|p| p.display().to_string()));
            print_lines(lines)
        }
    }
}

fn sim_matrix(args: SimArgs) -> Run {
    let policy = load_policy(args.policy.as_deref())?;
    let registry = match &args.registry {
        Some(p) => Some(Registry::load(p)?),
        None => None,
    };
    let codes: Vec<String> = match &registry {
        Some(r) => r.codes().map(str::to_string).collect(),
        None => {
            let entries =
                fs::read_dir(&args.corpus_dir).map_err(|e| input_err(&args.corpus_dir, e))?;
            let mut codes = Vec::new();
            for entry in entries {
                let path = entry.map_err(|e| input_err(&args.corpus_dir, e))?.path();
                if path.extension().is_some_and(|x| x == "tsv") {
                    if let Some(stem) = path.file_stem() {
                        codes.push(stem.to_string_lossy().into_owned());
                    }
                }
            }
            codes.sort();
            codes
        }
    };
    let (corpora, warnings) = pipeline::load_corpora(
        &args.corpus_dir,
        &args.rules_dir,
        &codes,
        None,
        &policy,
        args.mode.into(),
    )?;
    warn(&warnings);
    let (vocab, dists, matrix) = pipeline::analyze(&corpora)?;
    export::write_matrix(create(&args.out)?, &matrix)?;
    if let Some(p) = &args.distributions {
        export::write_distributions(create(p)?, &vocab, &dists)?;
    }
    if let (Some(p), Some(reg)) = (&args.cohesion, &registry) {
        let scores = family_cohesion(&matrix, |c| reg.get(c).map(|r| r.family.clone()));
        write_text(p, &export::scores_json(&scores)?)?;
    }
    Ok(())
}

fn contours(args: ContoursArgs) -> Run {
    if args.resolution < pipeline::MIN_RESOLUTION {
        return Err(Failure {
            code: 2,
            message: format!(
                "resolution must be at least {}, got {}",
                pipeline::MIN_RESOLUTION,
                args.resolution
            ),
        });
    }
    let registry = Registry::load(&args.registry)?;
    let file = fs::File::open(&args.coords).map_err(|e| input_err(&args.coords, e))?;
    let rows = export::read_coords(file)?;
    let mut points = Vec::new();
    for row in rows {
        let rec = registry.require(&row.id)?;
        points.push(FamilyPoint {
            id: row.id,
            family: rec.family.clone(),
            x: row.x,
            y: row.y,
            hours: rec.recording_hours,
        });
    }
    let opts = ContourOptions {
        level: args.level,
        mode: if args.relative {
            LevelMode::Relative
        } else {
            LevelMode::Absolute
        },
        resolution: args.resolution,
        padding: DEFAULT_PADDING_BANDWIDTHS,
        bandwidth: if args.robust {
            BandwidthRule::SilvermanRobust
        } else {
            BandwidthRule::Silverman
        },
    };
    let (sets, warnings) = family_contours(&points, &opts)?;
    warn(&warnings);
    let format = args.format.unwrap_or(
        if args
            .out
            .extension()
            .is_some_and(|x| x.eq_ignore_ascii_case("svg"))
        {
            ContourFormat::Svg
        } else {
            ContourFormat::Json
        },
    );
    let text = match format {
        ContourFormat::Json => export::contours_json(&sets)?,
        ContourFormat::Svg => {
            let pts: Vec<(String, String, f64, f64)> = points
                .iter()
                .map(|p| (p.id.clone(), p.family.clone(), p.x, p.y))
                .collect();
            export::contours_svg(&pts, &sets)
        }
    };
    write_text(&args.out, &text)
}

fn select(args: SelectArgs) -> Run {
    let registry = Registry::load(&args.registry)?;
    let matrix = match &args.matrix {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| input_err(p, e))?;
            Some(export::read_matrix(file)?)
        }
        None => None,
    };
    let selection = select_strategy(
        &args.target,
        args.strategy.into(),
        &registry,
        matrix.as_ref(),
        args.k,
    )?;
    warn(&selection.warnings);
    let json = export::selection_json(&selection)?;
    match &args.out {
        Some(p) => write_text(p, &json)?,
        None => print_lines([json.trim_end().to_string()])?,
    }
    if let (Some(path), Some(corpus_dir), Some(rules_dir)) =
        (&args.manifest, &args.corpus_dir, &args.rules_dir)
    {
        let policy = load_policy(args.policy.as_deref())?;
        let codes: Vec<String> = selection
            .languages()
            .into_iter()
            .map(str::to_string)
            .collect();
        let (corpora, warnings) = pipeline::load_corpora(
            corpus_dir,
            rules_dir,
            &codes,
            Some(&args.target),
            &policy,
            args.mode.into(),
        )?;
        warn(&warnings);
        let manifest = emit_manifest(&selection, &corpora, &registry)?;
        let mut buf = Vec::new();
        manifest
            .write_tsv(&mut buf)
            .map_err(|e| output_err(path, e))?;
        fs::write(path, buf).map_err(|e| output_err(path, e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

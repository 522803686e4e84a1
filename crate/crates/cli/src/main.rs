//! `trackrec` — train and query a content-based track recommender.
//!
//! Subcommands cover the whole pipeline: `gen` (synthetic datasets),
//! `analyze` (feature statistics), `select` (feature selection report),
//! `train` (fit a k-means model), `sweep` (silhouette vs k curve),
//! `search` (staged grid/random search for k), `recommend` (query a
//! trained model) and `export` (dataset format conversion).
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 usage or config error.
//! Every randomized step draws from the command's `--seed` (default 0);
//! wall-clock entropy is never used.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trackrec_cli::parse::{parse_fractions, parse_k_values};
use trackrec_cli::{ModelFile, ModelFileError};
use trackrec_core::canon::to_canonical_json;
use trackrec_core::clustering::{
    build_index, kmeans_fit_traced, ClusterError, FitConfig, FitTrace, Variant,
};
use trackrec_core::datagen::{self, GenConfig, GenError};
use trackrec_core::evaluation::{
    staged_search, sweep_k, CandidateSet, EvalError, EvalReport, SearchPlan, SearchStage, Strategy,
};
use trackrec_core::features::{
    build_matrix, fit_scaler, select_features, FeatureError, SelectionConfig,
};
use trackrec_core::ingest::{self, Format, IngestError};
use trackrec_core::model::ModelError;
use trackrec_core::recommend::{recommend, RecommendConfig, RecommendError, Recommendation};
use trackrec_core::seed::derive_seed;
use trackrec_core::{TrackRecord, TrackStore};

#[derive(Parser)]
#[command(
    name = "trackrec",
    version,
    about = "Cluster tracks by audio features and recommend songs via similar-artist counts"
)]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores). Never affects
    /// results, only speed.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted clusters.
    Gen(GenArgs),
    /// Compute per-feature statistics as JSON.
    Analyze(AnalyzeArgs),
    /// Run feature selection and emit the report as JSON.
    Select(SelectArgs),
    /// Train a k-means model and write a model file.
    Train(TrainArgs),
    /// Fit a range of k values and write the silhouette-vs-k curve as CSV.
    Sweep(SweepArgs),
    /// Staged grid/random search for the best k on growing data fractions.
    Search(SearchArgs),
    /// Recommend tracks for input track ids using a trained model.
    Recommend(RecommendArgs),
    /// Re-export a dataset as JSONL or CSV.
    Export(ExportArgs),
}

#[derive(Debug)]
enum CliError {
    /// Bad flags or config; exit 2.
    Usage(String),
    /// Pipeline failure; exit 1.
    Pipeline { kind: &'static str, message: String },
}

impl CliError {
    fn pipeline(kind: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Pipeline {
            kind,
            message: err.to_string(),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::pipeline(e.kind(), &e)
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match &e {
            GenError::Config(msg) => CliError::Usage(msg.clone()),
            GenError::Io { .. } => CliError::pipeline(e.kind(), &e),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match &e {
            FeatureError::InvalidConfig(msg) => CliError::Usage(msg.clone()),
            _ => CliError::pipeline(e.kind(), &e),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match &e {
            ClusterError::InvalidConfig(msg) => CliError::Usage(msg.clone()),
            _ => CliError::pipeline(e.kind(), &e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Plan(msg) | EvalError::Input(msg) => CliError::Usage(msg),
            EvalError::Feature(inner) => inner.into(),
            other => CliError::pipeline(other.kind(), &other),
        }
    }
}

impl From<RecommendError> for CliError {
    fn from(e: RecommendError) -> Self {
        CliError::pipeline(e.kind(), &e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::pipeline(e.kind(), &e)
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::pipeline(e.kind(), &e)
    }
}

fn io_error(path: &Path, err: std::io::Error) -> CliError {
    CliError::Pipeline {
        kind: "IoError",
        message: format!("{}: {err}", path.display()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Jsonl => Format::Jsonl,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Lloyd,
    Minibatch,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Lloyd => Variant::Lloyd,
            VariantArg::Minibatch => Variant::MiniBatch,
        }
    }
}

/// Dataset input shared by most commands.
#[derive(Args)]
struct DataArgs {
    /// Dataset file(s); multiple files are merged in path-sorted order.
    #[arg(long = "data", required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Input format override (default: inferred per file extension).
    #[arg(long = "input-format", value_enum)]
    input_format: Option<FormatArg>,
}

impl DataArgs {
    fn load(&self) -> Result<Vec<TrackRecord>, CliError> {
        match self.input_format {
            None => Ok(ingest::load_datasets(&self.data)?),
            Some(format) => {
                let mut sorted = self.data.clone();
                sorted.sort();
                let mut records = Vec::new();
                for path in &sorted {
                    records.extend(ingest::load_dataset(path, format.into())?);
                }
                let mut seen = HashSet::with_capacity(records.len());
                for r in &records {
                    if !seen.insert(r.track_id.clone()) {
                        return Err(IngestError::DuplicateTrackId(r.track_id.clone()).into());
                    }
                }
                Ok(records)
            }
        }
    }

    /// Load records and fold segment summaries into the feature maps, the
    /// ingestion step every modeling command starts from.
    fn load_for_modeling(&self) -> Result<Vec<TrackRecord>, CliError> {
        let mut records = self.load()?;
        ingest::merge_segment_features(&mut records);
        Ok(records)
    }
}

#[derive(Args)]
struct SelectionFlags {
    /// Drop features with variance below this threshold.
    #[arg(long, default_value_t = 1e-12)]
    variance_epsilon: f64,
    /// Drop features missing in more than this fraction of records.
    #[arg(long, default_value_t = 0.5)]
    max_missing_fraction: f64,
    /// Feature names to drop unconditionally (comma-separated or repeated).
    #[arg(long = "drop", value_delimiter = ',')]
    manual_drop: Vec<String>,
    /// Feature names to keep even when a rule would drop them.
    #[arg(long = "keep", value_delimiter = ',')]
    manual_keep: Vec<String>,
}

impl SelectionFlags {
    fn to_config(&self) -> Result<SelectionConfig, CliError> {
        let config = SelectionConfig {
            variance_epsilon: self.variance_epsilon,
            max_missing_fraction: self.max_missing_fraction,
            manual_drop: self.manual_drop.clone(),
            manual_keep: self.manual_keep.clone(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct FitFlags {
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    /// Relative centroid-shift convergence threshold.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent restarts; best inertia wins.
    #[arg(long, default_value_t = 4)]
    n_init: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Lloyd)]
    variant: VariantArg,
    /// Mini-batch size (minibatch variant only).
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
}

impl FitFlags {
    fn to_config(&self, k: usize) -> Result<FitConfig, CliError> {
        let config = FitConfig {
            k,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            seed: self.seed,
            n_init: self.n_init,
            variant: self.variant.into(),
            batch_size: self.batch_size,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_name = "N")]
    tracks: usize,
    /// Artist count (default: tracks/20, at least the cluster count).
    #[arg(long)]
    artists: Option<usize>,
    /// Planted cluster count.
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = 54)]
    features: usize,
    /// Inter-centroid distance over within-cluster standard deviation.
    #[arg(long, default_value_t = 8.0)]
    separation: f64,
    /// Constant decoy features.
    #[arg(long, default_value_t = 0)]
    noise_features: usize,
    /// Genre terms per planted cluster.
    #[arg(long, default_value_t = 4)]
    genre_vocab: usize,
    #[arg(long, default_value_t = 0.0)]
    missing_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL path; the ground truth goes to `<out>.truth.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

fn truth_path(out: &Path) -> PathBuf {
    let name = out.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let truth_name = match name.strip_suffix(".jsonl") {
        Some(stem) => format!("{stem}.truth.jsonl"),
        None => format!("{name}.truth.jsonl"),
    };
    out.with_file_name(truth_name)
}

fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let artists = args
        .artists
        .unwrap_or_else(|| (args.tracks / 20).max(args.clusters).max(1))
        .min(args.tracks.max(1));
    let config = GenConfig {
        n_tracks: args.tracks,
        n_artists: artists,
        n_clusters_true: args.clusters,
        n_features: args.features,
        separation: args.separation,
        noise_features: args.noise_features,
        genre_vocab_per_cluster: args.genre_vocab,
        missing_rate: args.missing_rate,
        seed: args.seed,
    };
    config.validate()?;
    let (records, truth) = datagen::generate(&config)?;
    ingest::write_jsonl(&args.out, &records)?;
    let truth_out = truth_path(&args.out);
    datagen::write_truth(&truth_out, &truth)?;
    eprintln!(
        "wrote {} tracks to {} (truth: {})",
        records.len(),
        args.out.display(),
        truth_out.display()
    );
    Ok(())
}

fn write_output(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, contents).map_err(|e| io_error(path, e))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{contents}"),
    }
    Ok(())
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output path for the stats JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let records = args.data.load_for_modeling()?;
    let stats = ingest::compute_stats(&records)?;
    let json = to_canonical_json(&stats).expect("stats serialize");
    write_output(args.out.as_deref(), &json)
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    selection: SelectionFlags,
    /// Output path for the selection report JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_select(args: &SelectArgs) -> Result<(), CliError> {
    let selection = args.selection.to_config()?;
    let records = args.data.load_for_modeling()?;
    let stats = ingest::compute_stats(&records)?;
    let report = select_features(&stats, &selection)?;
    let json = to_canonical_json(&report).expect("report serializes");
    write_output(args.out.as_deref(), &json)
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of clusters to fit.
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    fit: FitFlags,
    /// Model file output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional iteration-trace CSV (`iteration,inertia,max_shift`).
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn write_trace(path: &Path, trace: &FitTrace) -> Result<(), CliError> {
    let mut out = String::from("iteration,inertia,max_shift\n");
    for row in trace {
        out.push_str(&format!("{},{},{}\n", row.iteration, row.inertia, row.max_shift));
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let selection = args.selection.to_config()?;
    let fit_config = args.fit.to_config(args.k)?;

    let records = args.data.load_for_modeling()?;
    let stats = ingest::compute_stats(&records)?;
    let report = select_features(&stats, &selection)?;
    let schema = fit_scaler(&records, &report.kept)?.with_provenance(report.summary());
    let matrix = build_matrix(&records, &schema);
    drop(records);
    let (model, trace) = kmeans_fit_traced(&matrix, &fit_config)?;

    if let Some(trace_path) = &args.trace {
        write_trace(trace_path, &trace)?;
    }
    eprintln!(
        "fit k={} in {} iterations (converged: {}, inertia: {:.6})",
        model.k, model.iterations_run, model.converged, model.inertia
    );
    ModelFile::new(model, report).save(&args.out)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate k values: `5`, `2,3,5`, or `2..8` (inclusive).
    #[arg(long)]
    k: String,
    /// Rows to sample for each silhouette score (default: all rows).
    #[arg(long)]
    sample_size: Option<usize>,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    fit: FitFlags,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

const SWEEP_HEADER: &str = "k,silhouette,inertia,sample_size,wall_time_ms,seed";

fn sweep_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.silhouette, r.inertia, r.sample_size, r.wall_time_ms, r.seed
        ));
    }
    out
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let k_values = parse_k_values(&args.k).map_err(CliError::Usage)?;
    if k_values.iter().any(|&k| k < 2) {
        return Err(CliError::Usage("sweep requires k >= 2".into()));
    }
    let selection = args.selection.to_config()?;
    let fit_base = args.fit.to_config(2)?;

    let records = args.data.load_for_modeling()?;
    let stats = ingest::compute_stats(&records)?;
    let report = select_features(&stats, &selection)?;
    let schema = fit_scaler(&records, &report.kept)?.with_provenance(report.summary());
    let matrix = build_matrix(&records, &schema);
    drop(records);

    let reports = sweep_k(&matrix, &k_values, &fit_base, args.sample_size)?;
    fs::write(&args.out, sweep_csv(&reports)).map_err(|e| io_error(&args.out, e))?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate k range, inclusive.
    #[arg(long, default_value = "2..10")]
    k_range: String,
    /// Data fraction per stage, strictly increasing and ending at 1.0.
    #[arg(long, default_value = "0.1,0.25,1.0")]
    fractions: String,
    /// Per-stage strategy (`grid` or `random`), one per fraction.
    #[arg(long, default_value = "grid,grid,random")]
    strategies: String,
    /// Candidates a random stage draws (default: the whole surviving pool).
    #[arg(long)]
    budget: Option<usize>,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    fit: FitFlags,
    /// Directory for per-stage report CSVs (`stage_1.csv`, ...).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn cmd_search(args: &SearchArgs) -> Result<(), CliError> {
    let ks = parse_k_values(&args.k_range).map_err(CliError::Usage)?;
    let (lo, hi) = (ks[0], *ks.last().unwrap());
    let fractions = parse_fractions(&args.fractions).map_err(CliError::Usage)?;
    let strategies: Vec<Strategy> = args
        .strategies
        .split(',')
        .map(|s| match s.trim() {
            "grid" => Ok(Strategy::Grid),
            "random" => Ok(Strategy::Random),
            other => Err(CliError::Usage(format!("unknown strategy {other:?}"))),
        })
        .collect::<Result<_, _>>()?;
    if fractions.len() != strategies.len() {
        return Err(CliError::Usage(format!(
            "{} fractions but {} strategies",
            fractions.len(),
            strategies.len()
        )));
    }
    let budget = args.budget.unwrap_or(hi - lo + 1);
    let plan = SearchPlan {
        stages: fractions
            .iter()
            .zip(&strategies)
            .enumerate()
            .map(|(t, (&fraction, &strategy))| SearchStage {
                fraction,
                strategy,
                candidates: CandidateSet::Range { lo, hi },
                budget: Some(budget),
                seed: derive_seed(args.fit.seed, t as u64),
            })
            .collect(),
    };
    plan.validate()?;
    let selection = args.selection.to_config()?;
    let fit_base = args.fit.to_config(2)?;

    let records = args.data.load_for_modeling()?;
    let (best_k, stage_reports) = staged_search(&records, &plan, &selection, &fit_base)?;

    fs::create_dir_all(&args.out_dir).map_err(|e| io_error(&args.out_dir, e))?;
    for stage in &stage_reports {
        let path = args.out_dir.join(format!("stage_{}.csv", stage.stage + 1));
        fs::write(&path, sweep_csv(&stage.reports)).map_err(|e| io_error(&path, e))?;
        eprintln!(
            "stage {} ({} @ {:.0}%): wrote {}",
            stage.stage + 1,
            stage.strategy,
            stage.fraction * 100.0,
            path.display()
        );
    }
    println!("best_k={best_k}");
    Ok(())
}

#[derive(Args)]
struct RecommendArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Input track ids (comma-separated or repeated).
    #[arg(long = "input", required = true, value_delimiter = ',')]
    input: Vec<String>,
    /// Top-n similar artists to recommend from.
    #[arg(short = 'n', long, default_value_t = 5)]
    top_n_artists: usize,
    #[arg(long, default_value_t = 10)]
    max_songs: usize,
    /// Exclude tracks by the input tracks' own artists.
    #[arg(long, default_value_t = false)]
    exclude_input_artists: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Table,
    Json,
}

fn recommendation_table(
    store: &TrackStore,
    inputs: &[String],
    recs: &[Recommendation],
) -> String {
    let input_track = inputs.join(",");
    let input_genres: Vec<String> = {
        let mut terms: Vec<String> = inputs
            .iter()
            .filter_map(|id| store.get(id))
            .flat_map(|r| r.artist_terms.iter().cloned())
            .collect();
        terms.sort_unstable();
        terms.dedup();
        terms
    };
    let input_genres = input_genres.join("|");

    let header = [
        "input_track",
        "input_genres",
        "rec_track",
        "rec_artist",
        "rec_genres",
        "genre_overlap",
    ];
    let rows: Vec<[String; 6]> = recs
        .iter()
        .map(|r| {
            [
                input_track.clone(),
                input_genres.clone(),
                r.track_id.clone(),
                r.artist_id.clone(),
                store
                    .get(&r.track_id)
                    .map(|t| t.artist_terms.join("|"))
                    .unwrap_or_default(),
                format!("{:.4}", r.genre_overlap),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let fmt_row = |cells: &[&str]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = fmt_row(&header);
    out.push('\n');
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        out.push_str(&fmt_row(&cells));
        out.push('\n');
    }
    out
}

fn cmd_recommend(args: &RecommendArgs) -> Result<(), CliError> {
    if args.top_n_artists == 0 || args.max_songs == 0 {
        return Err(CliError::Usage(
            "top_n_artists and max_songs must be >= 1".into(),
        ));
    }
    let model_file = ModelFile::load(&args.model)?;
    let model = model_file.model;

    let records = args.data.load_for_modeling()?;
    let matrix = build_matrix(&records, &model.schema);
    let store = TrackStore::new(records)?;
    let index = build_index(&model, &matrix)?;

    let config = RecommendConfig {
        top_n_artists: args.top_n_artists,
        max_songs: args.max_songs,
        exclude_input_artists: args.exclude_input_artists,
    };
    let recs = recommend(&model, &index, &store, &args.input, &config)?;

    match args.format {
        OutputFormat::Json => {
            println!("{}", to_canonical_json(&recs).expect("recs serialize"));
        }
        OutputFormat::Table => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(recommendation_table(&store, &args.input, &recs).as_bytes())
                .map_err(|e| io_error(Path::new("stdout"), e))?;
        }
    }
    Ok(())
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
    /// Output format (default: inferred from the output extension).
    #[arg(long, value_enum)]
    to: Option<FormatArg>,
}

fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let records = args.data.load()?;
    let format = args
        .to
        .map(Format::from)
        .unwrap_or_else(|| Format::from_path(&args.out));
    match format {
        Format::Jsonl => ingest::write_jsonl(&args.out, &records)?,
        Format::Csv => ingest::write_csv(&args.out, &records)?,
    }
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Select(args) => cmd_select(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Search(args) => cmd_search(args),
        Command::Recommend(args) => cmd_recommend(args),
        Command::Export(args) => cmd_export(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = if cli.workers == 0 {
        run(&cli.command)
    } else {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build()
        {
            Ok(pool) => pool.install(|| run(&cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot build worker pool: {e}"))),
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Pipeline { kind, message }) => {
            eprintln!("error: {kind}: {message}");
            ExitCode::from(1)
        }
    }
}

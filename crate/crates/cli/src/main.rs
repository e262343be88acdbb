use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qubofit::data::{SplitAssignment, SplitMode, SplitRatios};
use qubofit::landscape;
use qubofit::latent::{BinaryCodeSet, ProjectionKind};
use qubofit::optim::OptimizerSpec;
use qubofit::qubo::{regression_metrics, QuboModel};
use qubofit::retrieve::RetrievalIndex;
use qubofit::{Dataset, Error, ErrorClass, Result};

use qubofit_cli::config::{ExperimentConfig, LatentConfig, OracleConfig, OracleKind, PathsConfig, SplitConfig};
use qubofit_cli::pipeline::run_pipeline;
use qubofit_cli::report::summarize_per_optimizer;
use qubofit_cli::stages::{self, FittedOracle};

#[derive(Parser)]
#[command(name = "qubofit", version, about = "Binary-latent QUBO fitness landscape pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON configuration.
    ///
    /// Trailing arguments override config keys: `--latent.m 64`.
    Run(RunArgs),
    /// Load inputs, validate them and write the split assignment.
    Ingest(IngestArgs),
    /// Fit a projection on the training rows and binarize every row.
    Binarize(BinarizeArgs),
    /// Fit the QUBO surrogate by ridge regression.
    FitQubo(FitQuboArgs),
    /// Maximize a fitted surrogate with one optimizer.
    Optimize(OptimizeArgs),
    /// Decode an optimizer result by Hamming retrieval and score it.
    Decode(DecodeArgs),
    /// Landscape diagnostics of a fitted surrogate.
    Diagnose(DiagnoseArgs),
    /// Sequence-level oracle commands.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Aggregate decoded run records into a design report.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Config overrides as `--section.key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    fitness: PathBuf,
    #[arg(long, default_value = "fitness")]
    fitness_column: String,
    #[arg(long)]
    sequences: Option<PathBuf>,
    #[arg(long, default_value = "sequence")]
    sequence_column: String,
    /// two_stage_random or stratified_quantile.
    #[arg(long, default_value = "two_stage_random")]
    mode: String,
    /// Comma-separated train,val,test fractions.
    #[arg(long, default_value = "0.7,0.1,0.2")]
    ratios: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n_bins: usize,
    #[arg(long, default_value = "split.json")]
    out_split: PathBuf,
}

#[derive(Args)]
struct BinarizeArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Split file; the projection and thresholds fit on its train subset.
    /// Without it, every row counts as training.
    #[arg(long)]
    split: Option<PathBuf>,
    /// pca or random_gaussian.
    #[arg(long, default_value = "pca")]
    kind: String,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = qubofit::latent::DEFAULT_ENTROPY_FLOOR)]
    entropy_floor: f64,
    #[arg(long, default_value = "projection.json")]
    out_model: PathBuf,
    #[arg(long, default_value = "codes.txt")]
    out_codes: PathBuf,
    #[arg(long)]
    out_diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct FitQuboArgs {
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    fitness: PathBuf,
    #[arg(long, default_value = "fitness")]
    fitness_column: String,
    /// Restrict the fit to one split subset of the rows.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    subset: String,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value = "qubo.json")]
    out: PathBuf,
    /// Also export the coefficients as `i j coeff` text.
    #[arg(long)]
    export_coeffs: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// sa, ga, rs, ghc or lbo.
    #[arg(long)]
    optimizer: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// JSON object of hyperparameter overrides, e.g. '{"steps": 1000}'.
    #[arg(long)]
    params: Option<String>,
    /// Seed codes for the kernel search (text codes file).
    #[arg(long)]
    seed_codes: Option<PathBuf>,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    fitness: PathBuf,
    #[arg(long, default_value = "fitness")]
    fitness_column: String,
    #[arg(long)]
    sequences: Option<PathBuf>,
    #[arg(long, default_value = "sequence")]
    sequence_column: String,
    /// Split file; the retrieval index is its train subset. Without it,
    /// every row joins the index.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    oracle: PathBuf,
    /// Mean of the k highest oracle scores is reported for the run.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "record.json")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    model: PathBuf,
    /// Codes file for the identifiability section.
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Verify the landscape propositions exhaustively (m <= 12).
    #[arg(long)]
    verify_exhaustive: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Fit a ridge or GP oracle on embeddings and fitness.
    Fit(OracleFitArgs),
    /// Evaluate a fitted oracle: Spearman, Pearson, RMSE, MAE.
    Eval(OracleEvalArgs),
}

#[derive(Args)]
struct OracleFitArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    fitness: PathBuf,
    #[arg(long, default_value = "fitness")]
    fitness_column: String,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    subset: String,
    /// ridge or gp.
    #[arg(long, default_value = "ridge")]
    kind: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2000)]
    gp_max_train: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "oracle")]
    stem: String,
}

#[derive(Args)]
struct OracleEvalArgs {
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    fitness: PathBuf,
    #[arg(long, default_value = "fitness")]
    fitness_column: String,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    subset: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Decoded run record files.
    #[arg(long, num_args = 1.., required = true)]
    records: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "design_report.json")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => 2u8,
                ErrorClass::Numeric => 3u8,
                ErrorClass::Io => 4u8,
            })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Binarize(args) => cmd_binarize(args),
        Command::FitQubo(args) => cmd_fit_qubo(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Oracle(OracleCmd::Fit(args)) => cmd_oracle_fit(args),
        Command::Oracle(OracleCmd::Eval(args)) => cmd_oracle_eval(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(token) = it.next() {
        let key = token.strip_prefix("--").ok_or_else(|| {
            Error::InvalidArgument(format!("expected an override key like --latent.m, got '{token}'"))
        })?;
        let value = it.next().ok_or_else(|| {
            Error::InvalidArgument(format!("override '--{key}' is missing a value"))
        })?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let overrides = parse_overrides(&args.overrides)?;
    let config = ExperimentConfig::load(&args.config, &overrides)?;
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }
    let output = run_pipeline(&config)?;
    println!("run directory: {}", output.run_dir.display());
    println!(
        "aggregates: best_score = {}, top_{}_mean = {} over {} candidates",
        output.report.aggregates.best_score,
        output.report.aggregates.k,
        output.report.aggregates.top_k_mean,
        output.report.aggregates.n_candidates
    );
    Ok(())
}

fn parse_split_mode(s: &str) -> Result<SplitMode> {
    match s {
        "two_stage_random" => Ok(SplitMode::TwoStageRandom),
        "stratified_quantile" => Ok(SplitMode::StratifiedQuantile),
        other => Err(Error::InvalidArgument(format!(
            "unknown split mode '{other}' (expected two_stage_random or stratified_quantile)"
        ))),
    }
}

fn parse_projection_kind(s: &str) -> Result<ProjectionKind> {
    match s {
        "pca" => Ok(ProjectionKind::Pca),
        "random_gaussian" | "random" => Ok(ProjectionKind::RandomGaussian),
        other => Err(Error::InvalidArgument(format!(
            "unknown projection kind '{other}' (expected pca or random_gaussian)"
        ))),
    }
}

fn parse_ratios(s: &str) -> Result<SplitRatios> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "ratios must be train,val,test, got '{s}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad ratio '{p}'")))
        })
        .collect::<Result<_>>()?;
    Ok(SplitRatios {
        train: nums[0],
        val: nums[1],
        test: nums[2],
    })
}

fn load_codes(path: &Path) -> Result<BinaryCodeSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    BinaryCodeSet::from_text(&text)
}

fn subset_indices(
    split: &Option<SplitAssignment>,
    subset: &str,
    n: usize,
) -> Result<Vec<usize>> {
    match split {
        Some(s) => Ok(s.subset(subset)?.to_vec()),
        None => Ok((0..n).collect()),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let paths = PathsConfig {
        embeddings: args.embeddings,
        fitness: args.fitness,
        sequences: args.sequences,
        fitness_column: args.fitness_column,
        sequence_column: args.sequence_column,
    };
    let dataset = stages::load_dataset(&paths)?;
    let cfg = SplitConfig {
        mode: parse_split_mode(&args.mode)?,
        ratios: parse_ratios(&args.ratios)?,
        seed: args.seed,
        n_bins: args.n_bins,
    };
    let split = stages::stage_split(&dataset, &cfg, &args.out_split)?;
    println!(
        "ingested {} samples (dim {}); split sizes train/val/test = {}/{}/{}",
        dataset.len(),
        dataset.dim(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}

fn cmd_binarize(args: BinarizeArgs) -> Result<()> {
    let embeddings = qubofit::data::npy::read_npy_matrix(&args.embeddings)?;
    let n = embeddings.rows();
    let dataset = Dataset::new(embeddings, vec![0.0; n], None, None)?;
    let split: Option<SplitAssignment> = args
        .split
        .as_ref()
        .map(|p| stages::read_json(p))
        .transpose()?;
    let train = subset_indices(&split, "train", n)?;
    let cfg = LatentConfig {
        kind: parse_projection_kind(&args.kind)?,
        m: args.m,
        seed: args.seed,
        entropy_floor: args.entropy_floor,
    };
    let (_, codes, diag) = stages::stage_binarize(
        &dataset,
        &train,
        &cfg,
        &args.out_model,
        &args.out_codes,
        args.out_diagnostics.as_deref(),
    )?;
    println!(
        "binarized {} rows to {} bits; mean entropy {:.4}, active dims {}",
        codes.len(),
        codes.code_len(),
        diag.mean_entropy,
        diag.active_dims
    );
    Ok(())
}

fn cmd_fit_qubo(args: FitQuboArgs) -> Result<()> {
    let codes = load_codes(&args.codes)?;
    let fitness = stages::load_fitness(&args.fitness, &args.fitness_column)?;
    let split: Option<SplitAssignment> = args
        .split
        .as_ref()
        .map(|p| stages::read_json(p))
        .transpose()?;
    let (codes, fitness) = match &split {
        Some(_) => {
            let idx = subset_indices(&split, &args.subset, codes.len())?;
            let selected_fitness: Vec<f64> = idx.iter().map(|&i| fitness[i]).collect();
            (codes.select(&idx), selected_fitness)
        }
        None => (codes, fitness),
    };
    let model = stages::stage_fit_qubo(
        &codes,
        &fitness,
        args.lambda,
        &args.out,
        args.export_coeffs.as_deref(),
    )?;
    let preds = model.predict_batch(&codes)?;
    let metrics = regression_metrics(&preds, &fitness)?;
    println!(
        "fitted qubo over m = {} (lambda = {}); train spearman {:.4}, rmse {:.4}",
        model.m, model.lambda, metrics.spearman, metrics.rmse
    );
    Ok(())
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let model: QuboModel = stages::read_json(&args.model)?;
    let mut spec_value = serde_json::json!({ "name": args.optimizer });
    if let Some(params) = &args.params {
        let overrides: serde_json::Value = serde_json::from_str(params)
            .map_err(|e| Error::InvalidArgument(format!("bad --params JSON: {e}")))?;
        let obj = overrides
            .as_object()
            .ok_or_else(|| Error::InvalidArgument("--params must be a JSON object".to_string()))?;
        for (k, v) in obj {
            spec_value[k] = v.clone();
        }
    }
    let spec: OptimizerSpec = serde_json::from_value(spec_value)
        .map_err(|e| Error::InvalidArgument(format!("bad optimizer spec: {e}")))?;
    let lbo = args
        .seed_codes
        .as_ref()
        .map(|p| -> Result<(BinaryCodeSet, Vec<f64>)> {
            let codes = load_codes(p)?;
            let values = model.predict_batch(&codes)?;
            Ok((codes, values))
        })
        .transpose()?;
    let result = stages::stage_optimize(
        &model,
        &spec,
        args.seed,
        args.top_k,
        lbo.as_ref().map(|(c, v)| (c, v.as_slice())),
        &args.out,
    )?;
    println!(
        "{} seed {}: best value {} after {} evaluations",
        result.optimizer, result.seed, result.best_value, result.evaluations
    );
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<()> {
    let result: qubofit::optim::OptimizationResult = stages::read_json(&args.result)?;
    let model: QuboModel = stages::read_json(&args.model)?;
    let codes = load_codes(&args.codes)?;
    let paths = PathsConfig {
        embeddings: args.embeddings,
        fitness: args.fitness,
        sequences: args.sequences,
        fitness_column: args.fitness_column,
        sequence_column: args.sequence_column,
    };
    let dataset = stages::load_dataset(&paths)?;
    let split: Option<SplitAssignment> = args
        .split
        .as_ref()
        .map(|p| stages::read_json(p))
        .transpose()?;
    let train = subset_indices(&split, "train", codes.len())?;
    let index = RetrievalIndex::new(
        codes.select(&train),
        dataset.fitness_rows(&train),
        dataset
            .sequences
            .as_ref()
            .map(|s| train.iter().map(|&i| s[i].clone()).collect()),
    )?;
    let oracle = FittedOracle::load(&args.oracle)?;
    let record = stages::stage_decode(
        &result,
        &index,
        &train,
        &model,
        &oracle,
        &dataset,
        args.k,
        Some(&args.out),
    )?;
    println!(
        "{} seed {}: nn distance {}, nn fitness {}, oracle score {}",
        record.optimizer, record.seed, record.nn_distance, record.nn_fitness, record.oracle_score
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let model: QuboModel = stages::read_json(&args.model)?;
    let codes = args.codes.as_ref().map(|p| load_codes(p)).transpose()?;
    let report = landscape::diagnostics_report(&model, codes.as_ref())?;
    let mut value = serde_json::to_value(&report)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    if args.verify_exhaustive {
        let checks = landscape::verify_propositions_exhaustive(&model)?;
        // The greedy certificate: a hill climb from every corner of a small
        // random sample must satisfy the sign condition.
        value["proposition_checks"] = serde_json::to_value(&checks)
            .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
        println!(
            "proposition checks: {} pairs, lipschitz violations {}, spectral violations {}, \
             second-moment max error {:e}, mean-gain max {:e}, truncation violations {}/{}",
            checks.pairs_checked,
            checks.lipschitz_violations,
            checks.spectral_violations,
            checks.second_moment_max_error,
            checks.mean_gain_max_abs,
            checks.truncation_pointwise_violations,
            checks.truncation_gap_violations
        );
    }
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    println!("{text}");
    if let Some(out) = args.out {
        std::fs::write(&out, text + "\n").map_err(|source| Error::Io { path: out, source })?;
    }
    Ok(())
}

fn parse_oracle_kind(s: &str) -> Result<OracleKind> {
    match s {
        "ridge" => Ok(OracleKind::Ridge),
        "gp" => Ok(OracleKind::Gp),
        other => Err(Error::InvalidArgument(format!(
            "unknown oracle kind '{other}' (expected ridge or gp)"
        ))),
    }
}

fn cmd_oracle_fit(args: OracleFitArgs) -> Result<()> {
    let embeddings = qubofit::data::npy::read_npy_matrix(&args.embeddings)?;
    let fitness = stages::load_fitness(&args.fitness, &args.fitness_column)?;
    let dataset = Dataset::new(embeddings, fitness, None, None)?;
    let split: Option<SplitAssignment> = args
        .split
        .as_ref()
        .map(|p| stages::read_json(p))
        .transpose()?;
    let indices = subset_indices(&split, &args.subset, dataset.len())?;
    let cfg = OracleConfig {
        kind: parse_oracle_kind(&args.kind)?,
        alpha: args.alpha,
        gp_max_train: args.gp_max_train,
    };
    let oracle = stages::stage_oracle_fit(&dataset, &indices, &cfg, &args.out_dir, &args.stem)?;
    println!(
        "fitted {} oracle on {} samples -> {}",
        oracle.kind(),
        indices.len(),
        args.out_dir.join(format!("{}.json", args.stem)).display()
    );
    Ok(())
}

fn cmd_oracle_eval(args: OracleEvalArgs) -> Result<()> {
    let oracle = FittedOracle::load(&args.oracle)?;
    let embeddings = qubofit::data::npy::read_npy_matrix(&args.embeddings)?;
    let fitness = stages::load_fitness(&args.fitness, &args.fitness_column)?;
    let dataset = Dataset::new(embeddings, fitness, None, None)?;
    let split: Option<SplitAssignment> = args
        .split
        .as_ref()
        .map(|p| stages::read_json(p))
        .transpose()?;
    let indices = subset_indices(&split, &args.subset, dataset.len())?;
    let metrics = stages::oracle_metrics_on(&oracle, &dataset, &indices)?;
    let value = serde_json::json!({
        "subset": args.subset,
        "n": indices.len(),
        "spearman": metrics.spearman,
        "pearson": metrics.pearson,
        "rmse": metrics.rmse,
        "mae": metrics.mae,
        "r2": metrics.r2,
        "degenerate": metrics.degenerate,
    });
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    println!("{text}");
    if let Some(out) = args.out {
        std::fs::write(&out, text + "\n").map_err(|source| Error::Io { path: out, source })?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.records {
        records.push(stages::read_json(path)?);
    }
    let pooled = qubofit_cli::stages::pooled_candidates(&records);
    let aggregates = qubofit::retrieve::aggregate_design(&pooled, args.k)?;
    let report = serde_json::json!({
        "per_optimizer": summarize_per_optimizer(&records),
        "aggregates": aggregates,
        "records": records,
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    std::fs::write(&args.out, text + "\n").map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    println!(
        "aggregated {} records: best_score = {}, top_{}_mean = {}",
        args.records.len(),
        aggregates.best_score,
        args.k,
        aggregates.top_k_mean
    );
    Ok(())
}

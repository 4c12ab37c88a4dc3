//! The `nftval` command line.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{self, BenchConfig, BenchmarkReport, ModelKind, ReportFormat};
use crate::error::{Error, Result};
use crate::features::{
    self, chronological_split, write_dataset_csv, DatasetSidecar, FeatureSchema, FeatureSet, Standardizer,
    TargetTransform, TokenTable, BAYC_CATEGORIES,
};
use crate::ingest::{self, AssetTraits, TradeRecord};
use crate::model_file::{FittedModel, ModelFile, TrainingMetadata};
use crate::neural::{CnnSpec, TrainConfig};
use crate::rarity;
use crate::synth::{self, PricingFunction, SynthConfig};
use crate::tuner::{self, HyperSpace, SearchConfig, IMPORTANCE_METHOD};
use crate::valuation::{self, ValuationRequest};

#[derive(Debug, Parser)]
#[command(name = "nftval", version, about = "NFT rarity scoring, price benchmarks and valuations")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic collection and trade history.
    Synth(SynthArgs),
    /// Parse trade and trait files and report what was read.
    IngestCheck(IngestCheckArgs),
    /// Score and rank every token of a collection.
    Rarity(RarityArgs),
    /// Build a feature dataset.
    Features(FeaturesArgs),
    /// Project trait and rarity columns onto their first principal components.
    Pca(PcaArgs),
    /// Fit the benchmark grid and report test MSE.
    Benchmark(BenchmarkArgs),
    /// Random search over CNN architectures.
    Tune(TuneArgs),
    /// Fit one model and save it.
    Train(TrainArgs),
    /// Value a token with a saved model.
    Predict(PredictArgs),
    /// Render a saved benchmark report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Trades CSV.
    #[arg(long)]
    trades: PathBuf,
    /// Traits JSON.
    #[arg(long)]
    traits: PathBuf,
    /// Comma-separated trait categories used as features.
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
}

impl DataArgs {
    fn categories(&self) -> Vec<String> {
        self.categories
            .clone()
            .unwrap_or_else(|| BAYC_CATEGORIES.iter().map(|s| s.to_string()).collect())
    }

    fn load(&self) -> Result<(Vec<TradeRecord>, Vec<AssetTraits>)> {
        Ok((load_trades(&self.trades)?, load_traits(&self.traits)?))
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2_000)]
    tokens: usize,
    #[arg(long, default_value_t = 400)]
    days: usize,
    #[arg(long, default_value_t = 15)]
    min_trades_per_day: usize,
    #[arg(long, default_value_t = 35)]
    max_trades_per_day: usize,
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
    /// `interaction` or `linear`.
    #[arg(long, default_value = "interaction")]
    pricing: String,
}

#[derive(Debug, Args)]
struct IngestCheckArgs {
    #[arg(long)]
    trades: Option<PathBuf>,
    #[arg(long)]
    traits: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RarityArgs {
    #[arg(long)]
    traits: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "X1")]
    set: FeatureSet,
    #[arg(long, default_value = "eth")]
    target: TargetTransform,
    /// Test fraction recorded in the sidecar.
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    /// Dataset CSV; the sidecar is written next to it with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PcaArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModelParamArgs {
    /// Ridge penalty.
    #[arg(long, default_value_t = 1.0)]
    ridge_lambda: f64,
    /// Lasso penalty.
    #[arg(long, default_value_t = 1.0)]
    lasso_lambda: f64,
    #[arg(long, default_value_t = 100)]
    forest_trees: usize,
    #[arg(long, default_value_t = 100)]
    boosting_stages: usize,
    /// Fit on raw features instead of standardized ones.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `csv`, `md` or `json`.
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    #[command(flatten)]
    params: ModelParamArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "X1")]
    set: FeatureSet,
    #[arg(long, default_value = "eth")]
    target: TargetTransform,
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Receives trials.csv, importance.csv, tune.json and best_model.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// ols, ridge, lasso, tree, forest, boosted or cnn.
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value = "X1")]
    set: FeatureSet,
    #[arg(long, default_value = "eth")]
    target: TargetTransform,
    /// Held-out test fraction; 0 fits on every row.
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: ModelParamArgs,
    #[arg(long, default_value_t = 32)]
    filters: usize,
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    #[arg(long, default_value_t = 64)]
    units: usize,
    #[arg(long)]
    no_dropout: bool,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    traits: PathBuf,
    /// Valuation request JSON.
    #[arg(long)]
    request: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Benchmark report JSON.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on failures.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::IngestCheck(a) => cmd_ingest_check(a),
        Command::Rarity(a) => cmd_rarity(a),
        Command::Features(a) => cmd_features(a),
        Command::Pca(a) => cmd_pca(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn load_trades(path: &Path) -> Result<Vec<TradeRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest::parse_trades(BufReader::new(file))
}

fn load_traits(path: &Path) -> Result<Vec<AssetTraits>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest::parse_traits(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let defaults = SynthConfig::default();
    let pricing = match a.pricing.as_str() {
        "interaction" => PricingFunction::default_interaction(),
        "linear" => PricingFunction::Linear { base: 5.0, market: 20.0, rarity: 5.0, last_trade: 0.0 },
        other => return Err(Error::InvalidParameter(format!("unknown pricing `{other}`"))),
    };
    let config = SynthConfig {
        seed: a.seed,
        collection_size: a.tokens,
        days: a.days,
        trades_per_day: (a.min_trades_per_day, a.max_trades_per_day),
        noise_sigma: a.noise,
        pricing,
        ..defaults
    };
    let collection = synth::generate_collection(&config)?;
    let (_, ranks) = rarity::rank_assets(&collection)?;
    let trades = synth::generate_trades(&config, &collection, &ranks)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    ingest::write_trades(create(&a.out_dir.join("trades.csv"))?, &trades)?;
    ingest::write_traits(create(&a.out_dir.join("traits.json"))?, &collection)?;
    write_json(&a.out_dir.join("truth.json"), &synth::ground_truth(&config))?;
    log::info!("wrote {} tokens and {} trades to {}", collection.len(), trades.len(), a.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    trades: Option<usize>,
    tokens_traded: Option<usize>,
    first_timestamp: Option<i64>,
    last_timestamp: Option<i64>,
    assets: Option<usize>,
    categories: Option<Vec<String>>,
}

fn cmd_ingest_check(a: IngestCheckArgs) -> Result<()> {
    if a.trades.is_none() && a.traits.is_none() {
        return Err(Error::InvalidParameter("pass --trades and/or --traits".into()));
    }
    let mut summary = IngestSummary {
        trades: None,
        tokens_traded: None,
        first_timestamp: None,
        last_timestamp: None,
        assets: None,
        categories: None,
    };
    if let Some(path) = &a.trades {
        let trades = load_trades(path)?;
        let mut ids: Vec<u64> = trades.iter().map(|t| t.token_id).collect();
        ids.sort_unstable();
        ids.dedup();
        summary.trades = Some(trades.len());
        summary.tokens_traded = Some(ids.len());
        summary.first_timestamp = trades.iter().map(|t| t.timestamp).min();
        summary.last_timestamp = trades.iter().map(|t| t.timestamp).max();
    }
    if let Some(path) = &a.traits {
        let traits = load_traits(path)?;
        let stats = rarity::build_collection_stats(&traits)?;
        summary.assets = Some(traits.len());
        summary.categories = Some(stats.categories.clone());
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_rarity(a: RarityArgs) -> Result<()> {
    let traits = load_traits(&a.traits)?;
    let (_, ranks) = rarity::rank_assets(&traits)?;
    rarity::write_rarity_csv(create(&a.out)?, &ranks)
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let (trades, traits) = a.data.load()?;
    let schema = FeatureSchema::new(a.set, &a.data.categories());
    let dataset = features::dataset_from_records(&trades, &traits, &schema, a.target)?;
    let boundary = chronological_split(&dataset, a.split)
        .ok()
        .and_then(|(_, test)| test.keys.iter().map(|k| k.timestamp).min());
    write_dataset_csv(create(&a.out)?, &dataset)?;
    let sidecar = DatasetSidecar {
        feature_set_id: a.set.to_string(),
        columns: schema.columns.clone(),
        trait_categories: schema.trait_categories.clone(),
        target_transform: a.target,
        rows: dataset.len(),
        test_fraction: a.split,
        split_boundary_timestamp: boundary,
    };
    write_json(&a.out.with_extension("json"), &sidecar)
}

fn cmd_pca(a: PcaArgs) -> Result<()> {
    let (trades, traits) = a.data.load()?;
    let (stats, ranks) = rarity::rank_assets(&traits)?;
    let table = TokenTable::build(&traits, &stats, &ranks, &a.data.categories())?;
    let (rows, prices) = features::trait_rarity_matrix(&trades, &table)?;
    let scaled: Vec<Vec<f64>> = {
        let s = Standardizer::fit(&rows)?;
        rows.iter().map(|r| s.transform_row(r)).collect::<Result<_>>()?
    };
    let k = scaled.first().map_or(0, Vec::len).min(3);
    let result = features::pca(&scaled, k)?;

    let mut w = csv::Writer::from_writer(create(&a.out)?);
    let mut header: Vec<String> = (1..=k).map(|i| format!("pc{i}")).collect();
    header.push("price".into());
    w.write_record(&header)?;
    for (proj, price) in result.projections.iter().zip(&prices) {
        let mut record: Vec<String> = proj.iter().map(f64::to_string).collect();
        record.push(price.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(&a.out, e))
}

fn bench_config(seed: u64, split: f64, categories: Vec<String>, p: &ModelParamArgs) -> BenchConfig {
    let mut config = BenchConfig {
        test_fraction: split,
        seed,
        ridge_lambda: p.ridge_lambda,
        lasso_lambda: p.lasso_lambda,
        standardize: !p.no_standardize,
        categories,
        ..BenchConfig::default()
    };
    config.forest.n_trees = p.forest_trees;
    config.boosting.n_stages = p.boosting_stages;
    config
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<()> {
    let (trades, traits) = a.data.load()?;
    let config = bench_config(a.seed, a.split, a.data.categories(), &a.params);
    let report = bench::run_benchmark(&trades, &traits, &config)?;
    write_text(&a.out, &bench::render_report(&report, a.format)?)
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let report: BenchmarkReport = serde_json::from_str(&text)?;
    if report.cells.len() != 45 {
        return Err(Error::Malformed(format!("benchmark report has {} cells, expected 45", report.cells.len())));
    }
    let rendered = bench::render_report(&report, a.format)?;
    match &a.out {
        Some(path) => write_text(path, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct TuneSummary<'a> {
    feature_set: FeatureSet,
    target: TargetTransform,
    seed: u64,
    n_trials: usize,
    train_rows: usize,
    importance_method: &'a str,
    best_trial: usize,
    best_val_loss: f64,
    best_spec: CnnSpec,
    best_train_loss: &'a [f64],
    best_val_losses: &'a [f64],
    test_mse: f64,
    failures: &'a [tuner::TrialFailure],
    importance: &'a [tuner::ImportanceRow],
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let (trades, traits) = a.data.load()?;
    let schema = FeatureSchema::new(a.set, &a.data.categories());
    let dataset = features::dataset_from_records(&trades, &traits, &schema, a.target)?;
    let (train, test) = chronological_split(&dataset, a.split)?;
    let standardizer = Standardizer::fit_dataset(&train)?;
    let scaled = standardizer.apply(&train)?;

    let config = SearchConfig {
        n_trials: a.trials,
        seed: a.seed,
        train: TrainConfig { epochs_cap: a.epochs, batch_size: a.batch_size, ..TrainConfig::default() },
    };
    let result = tuner::random_search(&HyperSpace::default(), &scaled.rows, &scaled.targets, &config)?;
    let importance = if result.trials.len() >= 2 { tuner::importance_report(&result.trials, a.seed)? } else { Vec::new() };

    let best = result.best_trial();
    let model = best.model.clone().ok_or_else(|| Error::Malformed("best trial kept no model".into()))?;
    let file = ModelFile::new(
        FittedModel::Cnn(model),
        schema,
        a.target,
        Some(standardizer),
        TrainingMetadata::from_dataset(&train, a.seed.wrapping_add(best.index as u64)),
    )?;
    let test_mse = bench::mse(&bench::predict_dataset(&file, &test)?, &test.targets)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    tuner::write_trials_csv(create(&a.out_dir.join("trials.csv"))?, &result.trials)?;
    tuner::write_importance_csv(create(&a.out_dir.join("importance.csv"))?, &importance)?;
    file.save(a.out_dir.join("best_model.json"))?;
    let summary = TuneSummary {
        feature_set: a.set,
        target: a.target,
        seed: a.seed,
        n_trials: a.trials,
        train_rows: train.len(),
        importance_method: IMPORTANCE_METHOD,
        best_trial: best.index,
        best_val_loss: best.best_val_loss,
        best_spec: best.spec,
        best_train_loss: &best.report.train_loss,
        best_val_losses: &best.report.val_loss,
        test_mse,
        failures: &result.failures,
        importance: &importance,
    };
    write_json(&a.out_dir.join("tune.json"), &summary)
}

#[derive(Serialize)]
struct TrainSummary {
    model_kind: String,
    feature_set: FeatureSet,
    target: TargetTransform,
    train_rows: usize,
    test_rows: usize,
    test_mse: Option<f64>,
    model_fingerprint: String,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (trades, traits) = a.data.load()?;
    let schema = FeatureSchema::new(a.set, &a.data.categories());
    let dataset = features::dataset_from_records(&trades, &traits, &schema, a.target)?;
    let (train, test) = if a.split == 0.0 {
        (dataset, None)
    } else {
        let (train, test) = chronological_split(&dataset, a.split)?;
        (train, Some(test))
    };

    let mut config = bench_config(a.seed, a.split, a.data.categories(), &a.params);
    config.cnn = CnnSpec::new(a.filters, a.kernel, a.units, !a.no_dropout, a.lr);
    config.cnn_train = TrainConfig { epochs_cap: a.epochs, batch_size: a.batch_size, ..TrainConfig::default() };
    let file = bench::fit_model_file(a.model, &train, &config)?;
    file.save(&a.out)?;

    let test_mse = match &test {
        Some(t) => Some(bench::mse(&bench::predict_dataset(&file, t)?, &t.targets)?),
        None => None,
    };
    let summary = TrainSummary {
        model_kind: file.model.kind().to_string(),
        feature_set: a.set,
        target: a.target,
        train_rows: train.len(),
        test_rows: test.as_ref().map_or(0, |t| t.len()),
        test_mse,
        model_fingerprint: file.fingerprint()?,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let traits = load_traits(&a.traits)?;
    let text = fs::read_to_string(&a.request).map_err(|e| Error::io(&a.request, e))?;
    let request: ValuationRequest = serde_json::from_str(&text)?;
    let v = valuation::predict_valuation(&model, &traits, &request)?;
    let text = serde_json::to_string_pretty(&v)? + "\n";
    match &a.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

//! The benchmark grid: five regressors × three feature sets × three targets,
//! each fitted once on a chronological train split and scored by test MSE.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    self, chronological_split, Dataset, FeatureSchema, FeatureSet, MarketDay, Standardizer, TargetTransform,
    BAYC_CATEGORIES,
};
use crate::ingest::{AssetTraits, TradeRecord};
use crate::linmod;
use crate::model_file::{FittedModel, ModelFile, TrainingMetadata};
use crate::neural::{self, CnnSpec, TrainConfig};
use crate::rarity;
use crate::trees::{self, BoostingParams, ForestParams};

/// Mean squared difference between two equal-length, non-empty vectors.
pub fn mse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.len() != actuals.len() {
        return Err(Error::DimensionMismatch { expected: actuals.len(), actual: predictions.len() });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("mse of empty vectors".into()));
    }
    let sum: f64 = predictions.iter().zip(actuals).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok(sum / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Lasso,
    Ridge,
    Forest,
    Boosted,
    Tree,
    Cnn,
}

impl ModelKind {
    /// The benchmark rows, in table order.
    pub const BENCHMARK: [ModelKind; 5] =
        [ModelKind::Ols, ModelKind::Lasso, ModelKind::Ridge, ModelKind::Forest, ModelKind::Boosted];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Lasso => "lasso",
            ModelKind::Ridge => "ridge",
            ModelKind::Forest => "forest",
            ModelKind::Boosted => "boosted",
            ModelKind::Tree => "tree",
            ModelKind::Cnn => "cnn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "OLS",
            ModelKind::Lasso => "Lasso",
            ModelKind::Ridge => "Ridge",
            ModelKind::Forest => "Random Forest",
            ModelKind::Boosted => "Gradient Boosting",
            ModelKind::Tree => "Decision Tree",
            ModelKind::Cnn => "CNN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(ModelKind::Ols),
            "lasso" => Ok(ModelKind::Lasso),
            "ridge" => Ok(ModelKind::Ridge),
            "forest" | "rf" | "random_forest" => Ok(ModelKind::Forest),
            "boosted" | "gb" | "gradient_boosting" => Ok(ModelKind::Boosted),
            "tree" => Ok(ModelKind::Tree),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub ridge_lambda: f64,
    pub lasso_lambda: f64,
    pub forest: ForestParams,
    pub boosting: BoostingParams,
    /// Depth cap and leaf size for single trees.
    pub tree_max_depth: Option<usize>,
    pub tree_min_samples_leaf: usize,
    pub cnn: CnnSpec,
    pub cnn_train: TrainConfig,
    /// Fit a standardizer on each train split and apply it to both splits.
    pub standardize: bool,
    pub categories: Vec<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
            ridge_lambda: 1.0,
            lasso_lambda: 1.0,
            forest: ForestParams::default(),
            boosting: BoostingParams::default(),
            tree_max_depth: None,
            tree_min_samples_leaf: 2,
            cnn: CnnSpec::new(32, 3, 64, true, 1e-3),
            cnn_train: TrainConfig::default(),
            standardize: true,
            categories: BAYC_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Fits one model kind on an (already standardized, if desired) training set.
pub fn fit_model(kind: ModelKind, rows: &[Vec<f64>], targets: &[f64], config: &BenchConfig) -> Result<FittedModel> {
    Ok(match kind {
        ModelKind::Ols => FittedModel::Ols(linmod::fit_ols(rows, targets)?),
        ModelKind::Ridge => FittedModel::Ridge(linmod::fit_ridge(rows, targets, config.ridge_lambda)?),
        ModelKind::Lasso => FittedModel::Lasso(linmod::fit_lasso(rows, targets, config.lasso_lambda)?),
        ModelKind::Tree => FittedModel::Tree(trees::fit_tree(
            rows,
            targets,
            config.tree_max_depth,
            config.tree_min_samples_leaf,
        )?),
        ModelKind::Forest => FittedModel::Forest(trees::fit_random_forest(rows, targets, &config.forest, config.seed)?),
        ModelKind::Boosted => {
            FittedModel::Boosted(trees::fit_gradient_boosting(rows, targets, &config.boosting, config.seed)?)
        }
        ModelKind::Cnn => {
            let width = rows.first().map_or(0, Vec::len);
            let init = neural::init_model(config.cnn, width, config.seed)?;
            let train_cfg = TrainConfig { seed: config.seed, ..config.cnn_train };
            FittedModel::Cnn(neural::train(&init, rows, targets, &train_cfg)?.0)
        }
    })
}

/// Fits `kind` on `train` (raw features) and packages it with its standardizer.
pub fn fit_model_file(kind: ModelKind, train: &Dataset, config: &BenchConfig) -> Result<ModelFile> {
    let standardizer = if config.standardize { Some(Standardizer::fit_dataset(train)?) } else { None };
    let scaled = match &standardizer {
        Some(s) => s.apply(train)?,
        None => train.clone(),
    };
    let model = fit_model(kind, &scaled.rows, &scaled.targets, config)?;
    ModelFile::new(
        model,
        train.schema.clone(),
        train.target_transform,
        standardizer,
        TrainingMetadata::from_dataset(train, config.seed),
    )
}

/// Predictions of a model file on every row of a raw dataset.
pub fn predict_dataset(model: &ModelFile, dataset: &Dataset) -> Result<Vec<f64>> {
    dataset.rows.iter().map(|r| model.predict_raw(r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub target: TargetTransform,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub feature_set: FeatureSet,
    pub target: TargetTransform,
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Timestamp of the first test row.
    pub split_boundary_timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub target: TargetTransform,
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    /// Ordered by target, then model in table order, then feature set.
    pub cells: Vec<BenchCell>,
    pub datasets: Vec<DatasetSummary>,
    pub best: Vec<BestCell>,
}

impl BenchmarkReport {
    pub fn cell(&self, model: ModelKind, set: FeatureSet, target: TargetTransform) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.model == model && c.feature_set == set && c.target == target)
    }

    pub fn dataset(&self, set: FeatureSet, target: TargetTransform) -> Option<&DatasetSummary> {
        self.datasets.iter().find(|d| d.feature_set == set && d.target == target)
    }
}

/// Builds the nine datasets (feature set × target) from raw records.
pub fn build_datasets(trades: &[TradeRecord], traits: &[AssetTraits], config: &BenchConfig) -> Result<Vec<Dataset>> {
    let (stats, ranks) = rarity::rank_assets(traits)?;
    let days: Vec<MarketDay> = features::aggregate_market_days(trades);
    let mut out = Vec::with_capacity(9);
    for target in TargetTransform::ALL {
        for set in FeatureSet::ALL {
            let schema = FeatureSchema::new(set, &config.categories);
            let ds = features::build_dataset(trades, traits, &stats, &ranks, &days, &schema, target)?;
            if ds.len() < 2 {
                return Err(Error::EmptyDataset(format!("{set}/{}", target.as_str())));
            }
            out.push(ds);
        }
    }
    Ok(out)
}

pub fn run_benchmark(trades: &[TradeRecord], traits: &[AssetTraits], config: &BenchConfig) -> Result<BenchmarkReport> {
    let datasets = build_datasets(trades, traits, config)?;
    let splits: Vec<(Dataset, Dataset)> = datasets
        .iter()
        .map(|d| chronological_split(d, config.test_fraction))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, ModelKind)> =
        (0..splits.len()).flat_map(|i| ModelKind::BENCHMARK.into_iter().map(move |k| (i, k))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, kind)| {
            let (train, test) = &splits[i];
            let model = fit_model_file(kind, train, config)?;
            mse(&predict_dataset(&model, test)?, &test.targets)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(45);
    for target in TargetTransform::ALL {
        for kind in ModelKind::BENCHMARK {
            for set in FeatureSet::ALL {
                let i = datasets
                    .iter()
                    .position(|d| d.schema.feature_set == set && d.target_transform == target)
                    .expect("all nine datasets built");
                let j = jobs.iter().position(|&(di, k)| di == i && k == kind).expect("job exists");
                let value = scores[j];
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("MSE of {kind} on {set}/{}", target.as_str())));
                }
                cells.push(BenchCell { model: kind, feature_set: set, target, mse: value });
            }
        }
    }

    let summaries = datasets
        .iter()
        .zip(&splits)
        .map(|(d, (train, test))| DatasetSummary {
            feature_set: d.schema.feature_set,
            target: d.target_transform,
            rows: d.len(),
            train_rows: train.len(),
            test_rows: test.len(),
            split_boundary_timestamp: test.keys.iter().map(|k| k.timestamp).min().unwrap_or_default(),
        })
        .collect();

    let best = TargetTransform::ALL
        .iter()
        .map(|&target| {
            let c = cells
                .iter()
                .filter(|c| c.target == target)
                .min_by(|a, b| a.mse.total_cmp(&b.mse))
                .expect("fifteen cells per target");
            BestCell { target, model: c.model, feature_set: c.feature_set, mse: c.mse }
        })
        .collect();

    Ok(BenchmarkReport { config: config.clone(), cells, datasets: summaries, best })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn panel_caption(target: TargetTransform) -> &'static str {
    match target {
        TargetTransform::Eth => "Y = Trade price (ETH)",
        TargetTransform::LogEth => "Y = log (Trade price (ETH))",
        TargetTransform::Usd => "Y = Trade price (USD)",
    }
}

/// Two decimals for ETH and log targets; `5.01e+09` style for USD.
pub fn format_mse(value: f64, target: TargetTransform) -> String {
    match target {
        TargetTransform::Usd => format_scientific(value),
        _ => format!("{value:.2}"),
    }
}

/// Three significant digits with a signed, two-digit exponent.
pub fn format_scientific(value: f64) -> String {
    let s = format!("{value:.2e}");
    let Some((mantissa, exp)) = s.split_once('e') else {
        return s;
    };
    let Ok(exp) = exp.parse::<i32>() else {
        return s;
    };
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn render_report(report: &BenchmarkReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["target", "model", "X1", "X2", "X3"])?;
            for target in TargetTransform::ALL {
                for kind in ModelKind::BENCHMARK {
                    let mut record = vec![target.as_str().to_string(), kind.label().to_string()];
                    for set in FeatureSet::ALL {
                        record.push(lookup(report, kind, set, target)?.to_string());
                    }
                    w.write_record(&record)?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            for (i, target) in TargetTransform::ALL.into_iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let mut table = vec![["Model", "X1", "X2", "X3"].map(String::from).to_vec()];
                for kind in ModelKind::BENCHMARK {
                    let mut row = vec![kind.label().to_string()];
                    for set in FeatureSet::ALL {
                        row.push(format_mse(lookup(report, kind, set, target)?, target));
                    }
                    table.push(row);
                }
                let widths: Vec<usize> =
                    (0..4).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
                writeln!(out, "{}\n", panel_caption(target)).expect("write to string");
                for (r, row) in table.iter().enumerate() {
                    let cells: Vec<String> = row
                        .iter()
                        .enumerate()
                        .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                        .collect();
                    writeln!(out, "| {} |", cells.join(" | ")).expect("write to string");
                    if r == 0 {
                        let rule: Vec<String> = widths
                            .iter()
                            .enumerate()
                            .map(|(c, &w)| if c == 0 { "-".repeat(w) } else { format!("{}:", "-".repeat(w - 1)) })
                            .collect();
                        writeln!(out, "| {} |", rule.join(" | ")).expect("write to string");
                    }
                }
            }
            Ok(out)
        }
    }
}

fn lookup(report: &BenchmarkReport, kind: ModelKind, set: FeatureSet, target: TargetTransform) -> Result<f64> {
    report
        .cell(kind, set, target)
        .map(|c| c.mse)
        .ok_or_else(|| Error::Malformed(format!("report lacks {kind}/{set}/{}", target.as_str())))
}

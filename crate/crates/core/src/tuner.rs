//! Random-search tuning of the CNN and post-hoc hyperparameter importance.
//!
//! Categorical hyperparameters are drawn uniformly, the learning rate
//! log-uniformly. Trial `i` initializes and trains with seed `seed + i`.
//! Importance is the normalized split-gain importance of a random forest
//! regressing best validation loss on the encoded hyperparameters;
//! correlation is Pearson's r against the same encoding.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{self, CnnModel, CnnSpec, TrainConfig, TrainReport, DEFAULT_DROPOUT_RATE};
use crate::trees::{fit_random_forest, ForestParams};

pub const IMPORTANCE_METHOD: &str =
    "random forest (100 trees, bootstrap, all features per split) split-gain importance, normalized to sum to 1";

/// Report rows, in this order.
pub const HYPERPARAMETERS: [&str; 5] = ["kernel size", "learning rate", "filters", "units", "dropout"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub filters: Vec<usize>,
    pub kernel_sizes: Vec<usize>,
    pub dense_units: Vec<usize>,
    pub dropout: Vec<bool>,
    pub learning_rate_low: f64,
    pub learning_rate_high: f64,
}

impl Default for HyperSpace {
    fn default() -> Self {
        Self {
            filters: vec![16, 32, 64],
            kernel_sizes: vec![2, 3, 4],
            dense_units: vec![32, 64, 128],
            dropout: vec![true, false],
            learning_rate_low: 1e-4,
            learning_rate_high: 1e-2,
        }
    }
}

impl HyperSpace {
    fn validate(&self) -> Result<()> {
        if self.filters.is_empty() || self.kernel_sizes.is_empty() || self.dense_units.is_empty() || self.dropout.is_empty() {
            return Err(Error::InvalidParameter("every hyperparameter needs at least one choice".into()));
        }
        if !(self.learning_rate_low > 0.0 && self.learning_rate_low < self.learning_rate_high && self.learning_rate_high.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning-rate range [{}, {}] must be positive and increasing",
                self.learning_rate_low, self.learning_rate_high
            )));
        }
        Ok(())
    }

    pub fn sample_learning_rate<R: Rng>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = (self.learning_rate_low.ln(), self.learning_rate_high.ln());
        rng.random_range(lo..hi).exp().clamp(self.learning_rate_low, self.learning_rate_high)
    }

    /// Draws one spec; kernel sizes wider than the input are redrawn.
    pub fn sample<R: Rng>(&self, rng: &mut R, input_width: usize) -> Result<CnnSpec> {
        self.validate()?;
        if !self.kernel_sizes.iter().any(|&k| k <= input_width) {
            return Err(Error::InvalidParameter(format!(
                "no kernel size in {:?} fits input width {input_width}",
                self.kernel_sizes
            )));
        }
        let filters = *self.filters.choose(rng).expect("non-empty");
        let kernel_size = loop {
            let k = *self.kernel_sizes.choose(rng).expect("non-empty");
            if k <= input_width {
                break k;
            }
        };
        let dense_units = *self.dense_units.choose(rng).expect("non-empty");
        let use_dropout = *self.dropout.choose(rng).expect("non-empty");
        let learning_rate = self.sample_learning_rate(rng);
        Ok(CnnSpec {
            filters,
            kernel_size,
            dense_units,
            use_dropout,
            dropout_rate: DEFAULT_DROPOUT_RATE,
            learning_rate,
        })
    }

    pub fn contains(&self, spec: &CnnSpec) -> bool {
        self.filters.contains(&spec.filters)
            && self.kernel_sizes.contains(&spec.kernel_size)
            && self.dense_units.contains(&spec.dense_units)
            && self.dropout.contains(&spec.use_dropout)
            && spec.learning_rate >= self.learning_rate_low
            && spec.learning_rate <= self.learning_rate_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_trials: 20,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub spec: CnnSpec,
    pub report: TrainReport,
    pub best_val_loss: f64,
    #[serde(skip)]
    pub model: Option<CnnModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub index: usize,
    pub spec: CnnSpec,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Successful trials in index order.
    pub trials: Vec<Trial>,
    pub failures: Vec<TrialFailure>,
    /// Position of the best trial in `trials`.
    pub best: usize,
}

impl SearchResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    /// Running minimum of best validation loss over successful trials.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::INFINITY, |acc, t| {
                *acc = acc.min(t.best_val_loss);
                Some(*acc)
            })
            .collect()
    }
}

/// Draws the specs of `n_trials` trials without training them.
pub fn sample_specs(space: &HyperSpace, input_width: usize, n_trials: usize, seed: u64) -> Result<Vec<CnnSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_trials).map(|_| space.sample(&mut rng, input_width)).collect()
}

/// Trains `config.n_trials` sampled architectures on chronologically ordered
/// rows. Trials run in parallel; results do not depend on scheduling.
pub fn random_search(space: &HyperSpace, rows: &[Vec<f64>], targets: &[f64], config: &SearchConfig) -> Result<SearchResult> {
    if config.n_trials == 0 {
        return Err(Error::InvalidParameter("random search needs at least one trial".into()));
    }
    let width = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Empty("no training rows".into()))?;
    let specs = sample_specs(space, width, config.n_trials, config.seed)?;

    let outcomes: Vec<(usize, CnnSpec, Result<(CnnModel, TrainReport)>)> = specs
        .into_par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let trial_seed = config.seed.wrapping_add(index as u64);
            let train_cfg = TrainConfig { seed: trial_seed, ..config.train };
            let outcome = neural::init_model(spec, width, trial_seed)
                .and_then(|model| neural::train(&model, rows, targets, &train_cfg));
            (index, spec, outcome)
        })
        .collect();

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (index, spec, outcome) in outcomes {
        match outcome {
            Ok((model, report)) => match report.best_val_loss() {
                Some(best_val_loss) => trials.push(Trial {
                    index,
                    spec,
                    report,
                    best_val_loss,
                    model: Some(model),
                }),
                None => failures.push(TrialFailure { index, spec, message: "no epochs were run".into() }),
            },
            Err(e) => {
                log::warn!("trial {index} failed: {e}");
                failures.push(TrialFailure { index, spec, message: e.to_string() });
            }
        }
    }
    if trials.is_empty() {
        return Err(Error::AllTrialsFailed(
            failures.iter().map(|f| format!("trial {}: {}", f.index, f.message)).collect(),
        ));
    }
    let best = trials
        .iter()
        .enumerate()
        .fold(0, |b, (i, t)| if t.best_val_loss < trials[b].best_val_loss { i } else { b });
    Ok(SearchResult { trials, failures, best })
}

/// Hyperparameters in [`HYPERPARAMETERS`] order: kernel, ln(lr), filters,
/// units, dropout as 0/1.
pub fn encode_spec(spec: &CnnSpec) -> [f64; 5] {
    [
        spec.kernel_size as f64,
        spec.learning_rate.ln(),
        spec.filters as f64,
        spec.dense_units as f64,
        if spec.use_dropout { 1.0 } else { 0.0 },
    ]
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y).take(n) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub hyperparameter: String,
    pub importance: f64,
    pub correlation: f64,
}

pub fn importance_report(trials: &[Trial], seed: u64) -> Result<Vec<ImportanceRow>> {
    if trials.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "importance needs at least 2 trials, got {}",
            trials.len()
        )));
    }
    let encoded: Vec<Vec<f64>> = trials.iter().map(|t| encode_spec(&t.spec).to_vec()).collect();
    let losses: Vec<f64> = trials.iter().map(|t| t.best_val_loss).collect();
    let params = ForestParams {
        n_trees: 100,
        max_depth: None,
        min_samples_leaf: 1,
        max_features: Some(HYPERPARAMETERS.len()),
        bootstrap: true,
    };
    let forest = fit_random_forest(&encoded, &losses, &params, seed)?;
    let importances = forest.feature_importances();
    Ok(HYPERPARAMETERS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column: Vec<f64> = encoded.iter().map(|r| r[j]).collect();
            ImportanceRow {
                hyperparameter: name.to_string(),
                importance: importances[j],
                correlation: pearson(&column, &losses),
            }
        })
        .collect())
}

/// `trial,filters,kernel,units,dropout,lr,val_loss`
pub fn write_trials_csv<W: Write>(writer: W, trials: &[Trial]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["trial", "filters", "kernel", "units", "dropout", "lr", "val_loss"])?;
    for t in trials {
        wtr.write_record([
            t.index.to_string(),
            t.spec.filters.to_string(),
            t.spec.kernel_size.to_string(),
            t.spec.dense_units.to_string(),
            t.spec.use_dropout.to_string(),
            t.spec.learning_rate.to_string(),
            t.best_val_loss.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<trials writer>", e))?;
    Ok(())
}

/// `hyperparameter,importance,correlation`
pub fn write_importance_csv<W: Write>(writer: W, rows: &[ImportanceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["hyperparameter", "importance", "correlation"])?;
    for r in rows {
        wtr.write_record([r.hyperparameter.clone(), r.importance.to_string(), r.correlation.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<importance writer>", e))?;
    Ok(())
}

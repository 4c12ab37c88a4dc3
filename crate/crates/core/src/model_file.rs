//! Versioned JSON model files.
//!
//! A file carries the model kind and parameters, the feature schema (column
//! order included), the input standardizer and training provenance. Floats are
//! written in shortest round-trip form, so a loaded model predicts bit for bit
//! like the one that was saved.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureSchema, Standardizer, TargetTransform};
use crate::linmod::LinearModel;
use crate::neural::CnnModel;
use crate::trees::{BoostedModel, ForestModel, RegressionTree};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", content = "parameters", rename_all = "snake_case")]
pub enum FittedModel {
    Ols(LinearModel),
    Ridge(LinearModel),
    Lasso(LinearModel),
    Tree(RegressionTree),
    Forest(ForestModel),
    Boosted(BoostedModel),
    Cnn(CnnModel),
}

impl FittedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedModel::Ols(_) => "ols",
            FittedModel::Ridge(_) => "ridge",
            FittedModel::Lasso(_) => "lasso",
            FittedModel::Tree(_) => "tree",
            FittedModel::Forest(_) => "forest",
            FittedModel::Boosted(_) => "boosted",
            FittedModel::Cnn(_) => "cnn",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Ols(m) | FittedModel::Ridge(m) | FittedModel::Lasso(m) => m.coefficients.len(),
            FittedModel::Tree(t) => t.n_features,
            FittedModel::Forest(f) => f.trees.first().map_or(0, |t| t.n_features),
            FittedModel::Boosted(b) => b.n_features,
            FittedModel::Cnn(c) => c.input_width,
        }
    }

    /// Prediction on an already standardized row.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Ols(m) | FittedModel::Ridge(m) | FittedModel::Lasso(m) => m.predict(row),
            FittedModel::Tree(t) => t.predict(row),
            FittedModel::Forest(f) => f.predict(row),
            FittedModel::Boosted(b) => b.predict(row),
            FittedModel::Cnn(c) => c.predict(row),
        }
    }

    fn is_well_formed(&self) -> bool {
        match self {
            FittedModel::Forest(f) => !f.trees.is_empty(),
            FittedModel::Cnn(c) => c.params.tensors().iter().all(|t| t.is_consistent()),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// Earliest and latest trade timestamps among training rows.
    pub data_start_timestamp: Option<i64>,
    pub data_end_timestamp: Option<i64>,
    pub train_rows: usize,
    pub dataset_fingerprint: String,
}

impl TrainingMetadata {
    pub fn from_dataset(train: &Dataset, seed: u64) -> Self {
        Self {
            seed,
            data_start_timestamp: train.keys.iter().map(|k| k.timestamp).min(),
            data_end_timestamp: train.keys.iter().map(|k| k.timestamp).max(),
            train_rows: train.len(),
            dataset_fingerprint: dataset_fingerprint(train),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub model: FittedModel,
    pub schema: FeatureSchema,
    pub target_transform: TargetTransform,
    /// Applied to raw feature rows before the model; `None` when the model
    /// was trained on raw features.
    pub standardizer: Option<Standardizer>,
    pub training: TrainingMetadata,
}

impl ModelFile {
    pub fn new(
        model: FittedModel,
        schema: FeatureSchema,
        target_transform: TargetTransform,
        standardizer: Option<Standardizer>,
        training: TrainingMetadata,
    ) -> Result<Self> {
        let file = Self {
            format_version: FORMAT_VERSION,
            model,
            schema,
            target_transform,
            standardizer,
            training,
        };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        let width = self.schema.width();
        if self.model.n_features() != width {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, schema has {width}",
                self.model.n_features()
            )));
        }
        if let Some(s) = &self.standardizer {
            if s.width() != width || s.scales.len() != width {
                return Err(Error::SchemaMismatch(format!(
                    "standardizer covers {} columns, schema has {width}",
                    s.width()
                )));
            }
        }
        if !self.model.is_well_formed() {
            return Err(Error::Malformed("model parameters are inconsistent with their shapes".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Malformed("missing format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::UnsupportedVersion(version.try_into().unwrap_or(u32::MAX)));
        }
        let file: ModelFile = serde_json::from_value(value)?;
        file.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// First 16 hex digits of the SHA-256 of the serialized file.
    pub fn fingerprint(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }

    /// Standardizes a raw feature row (if configured) and predicts. The result
    /// is on the model's target scale.
    pub fn predict_raw(&self, raw_row: &[f64]) -> Result<f64> {
        if raw_row.len() != self.schema.width() {
            return Err(Error::DimensionMismatch { expected: self.schema.width(), actual: raw_row.len() });
        }
        match &self.standardizer {
            Some(s) => self.model.predict(&s.transform_row(raw_row)?),
            None => self.model.predict(raw_row),
        }
    }
}

/// SHA-256 over the schema columns, row values and targets, first 16 hex digits.
pub fn dataset_fingerprint(dataset: &Dataset) -> String {
    let mut hasher = Sha256::new();
    for c in &dataset.schema.columns {
        hasher.update(c.as_bytes());
        hasher.update([0u8]);
    }
    hasher.update(dataset.target_transform.as_str().as_bytes());
    for ((row, target), key) in dataset.rows.iter().zip(&dataset.targets).zip(&dataset.keys) {
        hasher.update(key.token_id.to_le_bytes());
        hasher.update(key.timestamp.to_le_bytes());
        for v in row {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(target.to_bits().to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

//! Per-token valuations from a saved model, a traits file and the current
//! market snapshot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assemble_row, LastTrade, MarketSnapshot, TargetTransform, TokenTable};
use crate::ingest::AssetTraits;
use crate::model_file::ModelFile;
use crate::rarity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationRequest {
    pub token_id: u64,
    /// Aggregates of the market day before `as_of`; required by X1 and X2 models.
    #[serde(default)]
    pub market: Option<MarketSnapshot>,
    /// Required by X1 and X3 models.
    #[serde(default)]
    pub last_trade: Option<LastTrade>,
    pub as_of: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valuation {
    pub token_id: u64,
    pub valuation_eth: f64,
    pub model_kind: String,
    pub schema_id: String,
    pub model_fingerprint: String,
    /// Set when the model predicts log price and the value was exponentiated.
    pub from_log_target: bool,
}

/// The raw (unstandardized) feature row the model would see for `request`,
/// assembled exactly as the offline feature pipeline does.
pub fn feature_row(model: &ModelFile, traits: &[AssetTraits], request: &ValuationRequest) -> Result<Vec<f64>> {
    let schema = &model.schema;
    if let Some(last) = &request.last_trade {
        if request.as_of <= last.timestamp {
            return Err(Error::InvalidRequest(format!(
                "as_of {} is not after the last trade at {}",
                request.as_of, last.timestamp
            )));
        }
    }
    if schema.feature_set.has_market() && request.market.is_none() {
        return Err(Error::InvalidRequest(format!(
            "{} models need a market snapshot",
            schema.feature_set
        )));
    }
    if schema.feature_set.has_last_trade() && request.last_trade.is_none() {
        return Err(Error::InvalidRequest(format!(
            "{} models need the token's last trade",
            schema.feature_set
        )));
    }
    let (stats, ranks) = rarity::rank_assets(traits)?;
    let table = TokenTable::build(traits, &stats, &ranks, &schema.trait_categories)?;
    let profile = table.get(request.token_id)?;
    assemble_row(schema, profile, request.market.as_ref(), request.last_trade.as_ref(), request.as_of)
        .ok_or_else(|| Error::InvalidRequest("request lacks a required feature group".into()))
}

pub fn predict_valuation(model: &ModelFile, traits: &[AssetTraits], request: &ValuationRequest) -> Result<Valuation> {
    let row = feature_row(model, traits, request)?;
    let raw = model.predict_raw(&row)?;
    let (valuation_eth, from_log_target) = match model.target_transform {
        TargetTransform::Eth => (raw, false),
        TargetTransform::LogEth => (raw.exp(), true),
        TargetTransform::Usd => {
            return Err(Error::InvalidRequest("model predicts USD, not ETH".into()));
        }
    };
    if !valuation_eth.is_finite() {
        return Err(Error::NonFinite(format!("valuation of token {}", request.token_id)));
    }
    Ok(Valuation {
        token_id: request.token_id,
        valuation_eth,
        model_kind: model.model.kind().to_string(),
        schema_id: model.schema.feature_set.to_string(),
        model_fingerprint: model.fingerprint()?,
        from_log_target,
    })
}

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::market::{aggregate_market_days, day_of, market_day_before, MarketDay, MarketSnapshot};
use super::schema::{FeatureSchema, TargetTransform};
use crate::error::{Error, Result};
use crate::ingest::{AssetTraits, TradeRecord};
use crate::rarity::{self, CollectionStats, RarityResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub token_id: u64,
    pub timestamp: i64,
}

/// The same token's previous sale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LastTrade {
    pub timestamp: i64,
    pub price_eth: f64,
}

/// Static per-token inputs: rarity rank and the count of the token's own value
/// in each schema category.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProfile {
    pub rarity_rank: usize,
    pub trait_counts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TokenTable {
    categories: Vec<String>,
    profiles: HashMap<u64, TokenProfile>,
}

impl TokenTable {
    pub fn build<S: AsRef<str>>(
        traits: &[AssetTraits],
        stats: &CollectionStats,
        rarity: &[RarityResult],
        categories: &[S],
    ) -> Result<Self> {
        let categories: Vec<String> = categories.iter().map(|c| c.as_ref().to_string()).collect();
        if let Some(missing) = categories.iter().find(|c| !stats.category_counts.contains_key(*c)) {
            return Err(Error::UnknownCategory(missing.clone()));
        }
        let ranks: HashMap<u64, usize> = rarity.iter().map(|r| (r.token_id, r.rarity_rank)).collect();
        let mut profiles = HashMap::with_capacity(traits.len());
        for asset in traits {
            let rarity_rank = *ranks
                .get(&asset.token_id)
                .ok_or(Error::UnknownToken(asset.token_id))?;
            let trait_counts = categories
                .iter()
                .map(|c| stats.count_for(asset, c).map(|n| n as f64))
                .collect::<Result<Vec<_>>>()?;
            profiles.insert(
                asset.token_id,
                TokenProfile {
                    rarity_rank,
                    trait_counts,
                },
            );
        }
        Ok(Self { categories, profiles })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn get(&self, token_id: u64) -> Result<&TokenProfile> {
        self.profiles.get(&token_id).ok_or(Error::UnknownToken(token_id))
    }
}

/// Builds one feature row, or `None` when a group the schema needs is
/// unavailable (no prior market day, or no previous sale).
///
/// `as_of` is the trade (or valuation) timestamp; last-trade time difference is
/// measured from it in seconds.
pub fn assemble_row(
    schema: &FeatureSchema,
    profile: &TokenProfile,
    market: Option<&MarketSnapshot>,
    last_trade: Option<&LastTrade>,
    as_of: i64,
) -> Option<Vec<f64>> {
    let mut row = Vec::with_capacity(schema.width());
    if schema.feature_set.has_market() {
        let m = market?;
        row.extend([m.volume_eth, m.price_p5_eth, m.price_max_eth, m.price_min_eth]);
    }
    row.push(profile.rarity_rank as f64);
    row.extend_from_slice(&profile.trait_counts);
    if schema.feature_set.has_last_trade() {
        let last = last_trade?;
        row.push((as_of - last.timestamp) as f64);
        row.push(last.price_eth);
    }
    Some(row)
}

/// Model target for one trade. `None` when the log of a non-positive price is
/// requested.
pub fn transform_target(price_eth: f64, price_usd: f64, transform: TargetTransform) -> Option<f64> {
    match transform {
        TargetTransform::Eth => Some(price_eth),
        TargetTransform::LogEth if price_eth > 0.0 => Some(price_eth.ln()),
        TargetTransform::LogEth => None,
        TargetTransform::Usd => Some(price_usd),
    }
}

/// Feature matrix and targets. Rows are in chronological order of the trades
/// they describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub target_transform: TargetTransform,
    pub keys: Vec<RowKey>,
}

impl Dataset {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        target_transform: TargetTransform,
        keys: Vec<RowKey>,
    ) -> Result<Self> {
        if rows.len() != targets.len() || rows.len() != keys.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: targets.len().min(keys.len()),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.width() {
                return Err(Error::DimensionMismatch {
                    expected: schema.width(),
                    actual: row.len(),
                });
            }
            if row.iter().chain(std::iter::once(&targets[i])).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("dataset row {i}")));
            }
        }
        Ok(Self {
            schema,
            rows,
            targets,
            target_transform,
            keys,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            target_transform: self.target_transform,
            keys: indices.iter().map(|&i| self.keys[i]).collect(),
        }
    }
}

/// Builds the per-trade dataset for `schema`.
///
/// Zero-price trades are ignored. Market features come from the latest market
/// day strictly before the trade's UTC day; last-trade features from the same
/// token's latest sale with an earlier timestamp. Rows missing a group the
/// schema needs are dropped.
pub fn build_dataset(
    trades: &[TradeRecord],
    traits: &[AssetTraits],
    stats: &CollectionStats,
    rarity: &[RarityResult],
    market_days: &[MarketDay],
    schema: &FeatureSchema,
    transform: TargetTransform,
) -> Result<Dataset> {
    let table = TokenTable::build(traits, stats, rarity, &schema.trait_categories)?;

    let mut days = market_days.to_vec();
    if !days.windows(2).all(|w| w[0].day < w[1].day) {
        days.sort_by_key(|d| d.day);
    }

    let mut order: Vec<&TradeRecord> = trades.iter().filter(|t| t.price_eth > 0.0).collect();
    order.sort_by_key(|t| t.timestamp);

    let mut history: HashMap<u64, Vec<LastTrade>> = HashMap::new();
    for t in &order {
        history.entry(t.token_id).or_default().push(LastTrade {
            timestamp: t.timestamp,
            price_eth: t.price_eth,
        });
    }

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut keys = Vec::new();
    let mut dropped_log = 0usize;
    for t in order {
        let profile = table.get(t.token_id)?;
        let market = market_day_before(&days, day_of(t.timestamp)).map(MarketDay::snapshot);
        let sales = &history[&t.token_id];
        let prior = sales.partition_point(|s| s.timestamp < t.timestamp);
        let last = prior.checked_sub(1).map(|i| sales[i]);

        let Some(row) = assemble_row(schema, profile, market.as_ref(), last.as_ref(), t.timestamp) else {
            continue;
        };
        let Some(target) = transform_target(t.price_eth, t.price_usd, transform) else {
            dropped_log += 1;
            continue;
        };
        rows.push(row);
        targets.push(target);
        keys.push(RowKey {
            token_id: t.token_id,
            timestamp: t.timestamp,
        });
    }
    if dropped_log > 0 {
        log::warn!("dropped {dropped_log} rows with non-positive price under log target");
    }
    Dataset::new(schema.clone(), rows, targets, transform, keys)
}

/// Rarity, stats and market days computed from the raw records, then
/// [`build_dataset`].
pub fn dataset_from_records(
    trades: &[TradeRecord],
    traits: &[AssetTraits],
    schema: &FeatureSchema,
    transform: TargetTransform,
) -> Result<Dataset> {
    let (stats, ranks) = rarity::rank_assets(traits)?;
    let days = aggregate_market_days(trades);
    build_dataset(trades, traits, &stats, &ranks, &days, schema, transform)
}

/// `[rarity_rank, <category>_count...]` per positive-price trade with its ETH
/// price, for exploratory projections.
pub fn trait_rarity_matrix(trades: &[TradeRecord], table: &TokenTable) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rows = Vec::new();
    let mut prices = Vec::new();
    for t in trades.iter().filter(|t| t.price_eth > 0.0) {
        let profile = table.get(t.token_id)?;
        let mut row = vec![profile.rarity_rank as f64];
        row.extend_from_slice(&profile.trait_counts);
        rows.push(row);
        prices.push(t.price_eth);
    }
    Ok((rows, prices))
}

/// Splits by trade time: the last `⌈test_fraction·n⌉` rows (at least one, at
/// most `n − 1`) form the test set. Equal timestamps keep input order.
pub fn chronological_split(dataset: &Dataset, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("cannot split {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| dataset.keys[i].timestamp);
    let n_test = ((test_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let (train, test) = order.split_at(n - n_test);
    Ok((dataset.subset(train), dataset.subset(test)))
}

/// Describes a dataset CSV written by [`write_dataset_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub feature_set_id: String,
    pub columns: Vec<String>,
    pub trait_categories: Vec<String>,
    pub target_transform: TargetTransform,
    pub rows: usize,
    pub test_fraction: f64,
    /// Timestamp of the first test row.
    pub split_boundary_timestamp: Option<i64>,
}

/// CSV columns: `token_id,timestamp,<schema columns>,target`.
pub fn write_dataset_csv<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["token_id".to_string(), "timestamp".to_string()];
    header.extend(dataset.schema.columns.iter().cloned());
    header.push("target".to_string());
    wtr.write_record(&header)?;
    for ((key, row), target) in dataset.keys.iter().zip(&dataset.rows).zip(&dataset.targets) {
        let mut record = vec![key.token_id.to_string(), key.timestamp.to_string()];
        record.extend(row.iter().map(f64::to_string));
        record.push(target.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<dataset writer>", e))?;
    Ok(())
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::TradeRecord;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// UTC day index (days since the epoch) of a timestamp.
pub fn day_of(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

/// The four market values of one day, as fed to a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub volume_eth: f64,
    pub price_p5_eth: f64,
    pub price_max_eth: f64,
    pub price_min_eth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketDay {
    /// UTC days since the epoch.
    pub day: i64,
    pub volume_eth: f64,
    pub price_p5_eth: f64,
    pub price_max_eth: f64,
    pub price_min_eth: f64,
    pub trade_count: usize,
}

impl MarketDay {
    pub fn snapshot(&self) -> MarketSnapshot {
        MarketSnapshot {
            volume_eth: self.volume_eth,
            price_p5_eth: self.price_p5_eth,
            price_max_eth: self.price_max_eth,
            price_min_eth: self.price_min_eth,
        }
    }
}

/// Percentile of an ascending slice by linear interpolation at rank `q·(n−1)`.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let rank = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// One row per UTC day with at least one positive-price trade, ascending.
pub fn aggregate_market_days(trades: &[TradeRecord]) -> Vec<MarketDay> {
    let mut by_day: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for t in trades.iter().filter(|t| t.price_eth > 0.0) {
        by_day.entry(day_of(t.timestamp)).or_default().push(t.price_eth);
    }
    by_day
        .into_iter()
        .map(|(day, mut prices)| {
            prices.sort_by(f64::total_cmp);
            MarketDay {
                day,
                volume_eth: prices.iter().sum(),
                price_p5_eth: percentile_linear(&prices, 0.05),
                price_max_eth: prices[prices.len() - 1],
                price_min_eth: prices[0],
                trade_count: prices.len(),
            }
        })
        .collect()
}

/// Latest day strictly before `day` in an ascending list; gap days carry the
/// previous value forward.
pub fn market_day_before(days: &[MarketDay], day: i64) -> Option<&MarketDay> {
    let idx = days.partition_point(|d| d.day < day);
    idx.checked_sub(1).map(|i| &days[i])
}

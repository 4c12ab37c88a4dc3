//! OpenRarity-style information content, rarity score and rarity rank.
//!
//! For a token `x` with one value per category, `I(x) = Σ -log2 P(value)`
//! where `P(value) = count(value) / N` over the collection. A token missing a
//! category carries the reserved value [`NONE_VALUE`] for it, so every token is
//! evaluated over the same category set. The rarity score normalizes by the
//! collection mean: `R(x) = I(x) / mean(I)`. Rank 1 is the rarest token; ties
//! go to the lower token id.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AssetTraits;

/// Value recorded for a category the token does not carry.
pub const NONE_VALUE: &str = "<none>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    pub collection_size: usize,
    /// Category names in sorted order.
    pub categories: Vec<String>,
    pub category_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl CollectionStats {
    /// Number of tokens sharing `value` in `category`, if the pair was seen.
    pub fn count(&self, category: &str, value: &str) -> Option<usize> {
        self.category_counts.get(category)?.get(value).copied()
    }

    /// Count of the token's own value for `category` (missing maps to [`NONE_VALUE`]).
    pub fn count_for(&self, asset: &AssetTraits, category: &str) -> Result<usize> {
        let counts = self
            .category_counts
            .get(category)
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))?;
        let value = asset.traits.get(category).map_or(NONE_VALUE, String::as_str);
        counts.get(value).copied().ok_or_else(|| Error::UnknownTrait {
            token_id: asset.token_id,
            category: category.to_string(),
            value: value.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RarityResult {
    pub token_id: u64,
    /// Bits.
    pub information_content: f64,
    pub rarity_score: f64,
    /// 1-based; 0 until [`rank_collection`] runs.
    pub rarity_rank: usize,
}

/// Scores for a whole collection, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCollection {
    pub results: Vec<RarityResult>,
    pub mean_information_content: f64,
    /// Every token has zero information content; scores were set to 1.
    pub degenerate: bool,
}

pub fn build_collection_stats(assets: &[AssetTraits]) -> Result<CollectionStats> {
    if assets.is_empty() {
        return Err(Error::Empty("collection has no tokens".into()));
    }
    let mut ids = HashSet::with_capacity(assets.len());
    let mut category_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for asset in assets {
        if !ids.insert(asset.token_id) {
            return Err(Error::DuplicateToken(asset.token_id));
        }
        for category in asset.traits.keys() {
            category_counts.entry(category.clone()).or_default();
        }
    }

    for (category, counts) in category_counts.iter_mut() {
        for asset in assets {
            let value = asset.traits.get(category).map_or(NONE_VALUE, String::as_str);
            *counts.entry(value.to_string()).or_insert(0) += 1;
        }
    }

    Ok(CollectionStats {
        collection_size: assets.len(),
        categories: category_counts.keys().cloned().collect(),
        category_counts,
    })
}

pub fn information_content(asset: &AssetTraits, stats: &CollectionStats) -> Result<f64> {
    if let Some(extra) = asset.traits.keys().find(|c| !stats.category_counts.contains_key(*c)) {
        return Err(Error::UnknownCategory(extra.clone()));
    }
    let n = stats.collection_size as f64;
    let mut bits = 0.0;
    for category in &stats.categories {
        let count = stats.count_for(asset, category)?;
        bits -= (count as f64 / n).log2();
    }
    // -log2(1) is -0.0
    Ok(bits.max(0.0))
}

pub fn score_collection(assets: &[AssetTraits], stats: &CollectionStats) -> Result<ScoredCollection> {
    let contents = assets
        .iter()
        .map(|a| information_content(a, stats))
        .collect::<Result<Vec<_>>>()?;
    if contents.is_empty() {
        return Err(Error::Empty("collection has no tokens".into()));
    }
    let mean = contents.iter().sum::<f64>() / contents.len() as f64;
    let degenerate = mean <= 0.0;
    if degenerate {
        log::warn!("degenerate collection: all tokens have zero information content, scores set to 1");
    }
    let results = assets
        .iter()
        .zip(&contents)
        .map(|(asset, &ic)| RarityResult {
            token_id: asset.token_id,
            information_content: ic,
            rarity_score: if degenerate { 1.0 } else { ic / mean },
            rarity_rank: 0,
        })
        .collect();
    Ok(ScoredCollection {
        results,
        mean_information_content: mean,
        degenerate,
    })
}

/// Fills `rarity_rank`; the output keeps the input order.
pub fn rank_collection(mut results: Vec<RarityResult>) -> Vec<RarityResult> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&results[a], &results[b]);
        rb.rarity_score
            .total_cmp(&ra.rarity_score)
            .then(ra.token_id.cmp(&rb.token_id))
    });
    for (rank, idx) in order.into_iter().enumerate() {
        results[idx].rarity_rank = rank + 1;
    }
    results
}

/// Stats, scores and ranks in one pass.
pub fn rank_assets(assets: &[AssetTraits]) -> Result<(CollectionStats, Vec<RarityResult>)> {
    let stats = build_collection_stats(assets)?;
    let scored = score_collection(assets, &stats)?;
    Ok((stats, rank_collection(scored.results)))
}

pub fn write_rarity_csv<W: std::io::Write>(writer: W, results: &[RarityResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["token_id", "information_content", "rarity_score", "rarity_rank"])?;
    for r in results {
        wtr.write_record([
            r.token_id.to_string(),
            r.information_content.to_string(),
            r.rarity_score.to_string(),
            r.rarity_rank.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<rarity writer>", e))?;
    Ok(())
}

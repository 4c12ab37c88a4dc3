//! Trade-history (CSV) and trait-metadata (JSON) readers and writers.
//!
//! The trades file is a CSV with the header
//! `collection,token_id,timestamp_utc,price_eth,price_usd,marketplace,buyer,seller`,
//! integer UTC seconds and `.` as decimal separator. The traits file is a JSON
//! array of `{"token_id": <int>, "traits": {"<Category>": "<Value>", ...}}`.
//!
//! Zero-price rows (transfers, mints) are accepted here; the feature builder
//! drops them.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub const TRADES_HEADER: [&str; 8] = [
    "collection",
    "token_id",
    "timestamp_utc",
    "price_eth",
    "price_usd",
    "marketplace",
    "buyer",
    "seller",
];

/// One marketplace sale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub collection_id: String,
    pub token_id: u64,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub price_eth: f64,
    pub price_usd: f64,
    pub marketplace: String,
    pub buyer: String,
    pub seller: String,
}

/// Trait assignment of a single token, keyed by category name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssetTraits {
    pub token_id: u64,
    pub traits: BTreeMap<String, String>,
}

impl AssetTraits {
    pub fn new<I, K, V>(token_id: u64, traits: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            token_id,
            traits: traits
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }
}

fn parse_price(raw: &str, line: u64, field: &str) -> Result<f64> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, field, format!("not a decimal number: `{raw}`")))?;
    if !value.is_finite() {
        return Err(Error::parse(line, field, "price must be finite"));
    }
    if value < 0.0 {
        return Err(Error::parse(line, field, format!("negative price {value}")));
    }
    Ok(value)
}

/// Parses a trades CSV stream. Records are returned in file order.
pub fn parse_trades<R: Read>(reader: R) -> Result<Vec<TradeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != TRADES_HEADER {
        return Err(Error::parse(
            1,
            "header",
            format!("expected `{}`, got `{}`", TRADES_HEADER.join(","), names.join(",")),
        ));
    }

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRADES_HEADER.len() {
            return Err(Error::parse(
                line,
                "row",
                format!("expected {} fields, got {}", TRADES_HEADER.len(), record.len()),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");

        let collection_id = field(0).to_string();
        if collection_id.is_empty() {
            return Err(Error::parse(line, "collection", "empty collection id"));
        }
        let token_id: u64 = field(1).trim().parse().map_err(|_| {
            Error::parse(line, "token_id", format!("not a non-negative integer: `{}`", field(1)))
        })?;
        let timestamp: i64 = field(2).trim().parse().map_err(|_| {
            Error::parse(line, "timestamp_utc", format!("not integer seconds: `{}`", field(2)))
        })?;
        if timestamp <= 0 {
            return Err(Error::parse(line, "timestamp_utc", "timestamp must be positive"));
        }
        let price_eth = parse_price(field(3), line, "price_eth")?;
        let price_usd = parse_price(field(4), line, "price_usd")?;

        out.push(TradeRecord {
            collection_id,
            token_id,
            timestamp,
            price_eth,
            price_usd,
            marketplace: field(5).to_string(),
            buyer: field(6).to_string(),
            seller: field(7).to_string(),
        });
    }
    Ok(out)
}

pub fn write_trades<W: Write>(writer: W, trades: &[TradeRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TRADES_HEADER)?;
    for t in trades {
        wtr.write_record([
            t.collection_id.clone(),
            t.token_id.to_string(),
            t.timestamp.to_string(),
            t.price_eth.to_string(),
            t.price_usd.to_string(),
            t.marketplace.clone(),
            t.buyer.clone(),
            t.seller.clone(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<trades writer>", e))?;
    Ok(())
}

/// Category/value pairs in document order, duplicates kept so they can be
/// reported instead of silently overwritten.
struct TraitPairs(Vec<(String, String)>);

impl<'de> Deserialize<'de> for TraitPairs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PairsVisitor;

        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = TraitPairs;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping trait category to value")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<TraitPairs, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    pairs.push((k, v));
                }
                Ok(TraitPairs(pairs))
            }
        }

        deserializer.deserialize_map(PairsVisitor)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsset {
    token_id: u64,
    traits: TraitPairs,
}

/// Parses a traits JSON document into one [`AssetTraits`] per token.
pub fn parse_traits<R: Read>(reader: R) -> Result<Vec<AssetTraits>> {
    let raw: Vec<RawAsset> = serde_json::from_reader(reader)?;
    let mut seen = HashSet::with_capacity(raw.len());
    let mut out = Vec::with_capacity(raw.len());
    for asset in raw {
        if !seen.insert(asset.token_id) {
            return Err(Error::DuplicateToken(asset.token_id));
        }
        let mut traits = BTreeMap::new();
        for (category, value) in asset.traits.0 {
            if category.is_empty() {
                return Err(Error::Malformed(format!(
                    "token {}: empty trait category name",
                    asset.token_id
                )));
            }
            if traits.contains_key(&category) {
                return Err(Error::DuplicateCategory {
                    token_id: asset.token_id,
                    category,
                });
            }
            traits.insert(category, value);
        }
        out.push(AssetTraits {
            token_id: asset.token_id,
            traits,
        });
    }
    Ok(out)
}

pub fn write_traits<W: Write>(writer: W, assets: &[AssetTraits]) -> Result<()> {
    serde_json::to_writer_pretty(writer, assets)?;
    Ok(())
}

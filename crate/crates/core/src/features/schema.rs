use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MARKET_COLUMNS: [&str; 4] = [
    "volume_eth_lag1",
    "price_p5_eth_lag1",
    "price_max_eth_lag1",
    "price_min_eth_lag1",
];

pub const LAST_TRADE_COLUMNS: [&str; 2] = ["last_trade_timediff", "last_trade_price"];

/// Default trait categories of the Bored Ape Yacht Club schema.
pub const BAYC_CATEGORIES: [&str; 6] = ["Background", "Mouth", "Eyes", "Fur", "Clothes", "Earring"];

/// Which feature groups a dataset carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    /// market, traits & rarity, last trade
    X1,
    /// market, traits & rarity
    X2,
    /// traits & rarity, last trade
    X3,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::X1, FeatureSet::X2, FeatureSet::X3];

    pub fn has_market(self) -> bool {
        matches!(self, FeatureSet::X1 | FeatureSet::X2)
    }

    pub fn has_last_trade(self) -> bool {
        matches!(self, FeatureSet::X1 | FeatureSet::X3)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "X1" => Ok(FeatureSet::X1),
            "X2" => Ok(FeatureSet::X2),
            "X3" => Ok(FeatureSet::X3),
            _ => Err(Error::InvalidParameter(format!("unknown feature set `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    Eth,
    /// Natural log of the ETH price.
    LogEth,
    Usd,
}

impl TargetTransform {
    pub const ALL: [TargetTransform; 3] = [TargetTransform::Eth, TargetTransform::LogEth, TargetTransform::Usd];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetTransform::Eth => "eth",
            TargetTransform::LogEth => "log_eth",
            TargetTransform::Usd => "usd",
        }
    }
}

impl fmt::Display for TargetTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eth" => Ok(TargetTransform::Eth),
            "log_eth" | "log" => Ok(TargetTransform::LogEth),
            "usd" => Ok(TargetTransform::Usd),
            _ => Err(Error::InvalidParameter(format!("unknown target transform `{s}`"))),
        }
    }
}

/// Column layout of a dataset. Order is market, traits & rarity, last trade,
/// restricted to the groups the feature set includes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub feature_set: FeatureSet,
    pub columns: Vec<String>,
    pub trait_categories: Vec<String>,
}

impl FeatureSchema {
    pub fn new<S: AsRef<str>>(feature_set: FeatureSet, trait_categories: &[S]) -> Self {
        let trait_categories: Vec<String> = trait_categories.iter().map(|c| c.as_ref().to_string()).collect();
        let mut columns = Vec::new();
        if feature_set.has_market() {
            columns.extend(MARKET_COLUMNS.iter().map(|c| c.to_string()));
        }
        columns.push("rarity_rank".to_string());
        columns.extend(trait_categories.iter().map(|c| format!("{c}_count")));
        if feature_set.has_last_trade() {
            columns.extend(LAST_TRADE_COLUMNS.iter().map(|c| c.to_string()));
        }
        Self {
            feature_set,
            columns,
            trait_categories,
        }
    }

    /// The standard column layout over the six BAYC categories.
    pub fn bayc(feature_set: FeatureSet) -> Self {
        Self::new(feature_set, &BAYC_CATEGORIES)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

//! Feature construction: daily market aggregates lagged by one day, static
//! trait/rarity features, last-trade features, target transforms,
//! chronological splitting, standardization and PCA.

mod dataset;
mod market;
mod pca;
mod schema;
mod standardize;

pub use dataset::{
    assemble_row, build_dataset, chronological_split, dataset_from_records, trait_rarity_matrix,
    transform_target, write_dataset_csv, Dataset, DatasetSidecar, LastTrade, RowKey, TokenProfile,
    TokenTable,
};
pub use market::{
    aggregate_market_days, day_of, market_day_before, percentile_linear, MarketDay, MarketSnapshot,
    SECONDS_PER_DAY,
};
pub use pca::{pca, PcaResult};
pub use schema::{FeatureSchema, FeatureSet, TargetTransform, BAYC_CATEGORIES, LAST_TRADE_COLUMNS, MARKET_COLUMNS};
pub use standardize::Standardizer;

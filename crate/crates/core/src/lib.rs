//! NFT valuation toolkit.
//!
//! Pipeline: trade and trait files ([`ingest`]) → rarity scores and ranks
//! ([`rarity`]) → lagged per-trade feature datasets ([`features`]) →
//! benchmark regressors ([`linmod`], [`trees`]) and a small 1-D CNN
//! ([`neural`]) tuned by random search ([`tuner`]) → the benchmark grid
//! ([`bench`]) and per-token valuations from saved models ([`model_file`],
//! [`valuation`]). [`synth`] generates seeded collections and markets with a
//! known pricing function. [`cli`] wires everything into the `nftval` binary.

pub mod bench;
pub mod cli;
pub mod error;
pub mod features;
pub mod ingest;
pub mod linmod;
pub mod model_file;
pub mod neural;
pub mod rarity;
pub mod synth;
pub mod trees;
pub mod tuner;
pub mod valuation;

pub use error::{Error, Result};

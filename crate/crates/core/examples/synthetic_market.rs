//! Generates a synthetic collection and market, writes it in the ingest
//! formats and summarizes the latent market index.
//!
//! ```text
//! cargo run --release --example synthetic_market -- [out-dir]
//! ```

use std::fs::{self, File};
use std::path::PathBuf;

use nftval::ingest::{write_trades, write_traits};
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, ground_truth, SynthConfig};
use nftval::tuner::pearson;

fn main() -> nftval::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("nftval-synth"));
    let config = SynthConfig::default();
    let collection = generate_collection(&config)?;
    let (_, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&config, &collection, &ranks)?;

    fs::create_dir_all(&out).map_err(|e| nftval::Error::io(&out, e))?;
    let trades_path = out.join("trades.csv");
    let traits_path = out.join("traits.json");
    write_trades(File::create(&trades_path).map_err(|e| nftval::Error::io(&trades_path, e))?, &trades)?;
    write_traits(File::create(&traits_path).map_err(|e| nftval::Error::io(&traits_path, e))?, &collection)?;
    println!("wrote {} tokens and {} trades to {}", collection.len(), trades.len(), out.display());

    let truth = ground_truth(&config);
    let (lo, hi) = truth.market_index.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| (lo.min(m), hi.max(m)));
    println!("market index over {} days: min {lo:.3}, max {hi:.3}", truth.market_index.len());

    let score_of = |id: u64| ranks.iter().find(|r| r.token_id == id).map_or(f64::NAN, |r| r.rarity_score);
    let scores: Vec<f64> = trades.iter().map(|t| score_of(t.token_id)).collect();
    let prices: Vec<f64> = trades.iter().map(|t| t.price_eth).collect();
    println!("price vs rarity score correlation: {:+.3}", pearson(&scores, &prices));
    Ok(())
}

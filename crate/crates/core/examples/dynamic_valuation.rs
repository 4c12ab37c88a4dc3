//! Trains a gradient boosting model on X1, saves it, reloads it and values a
//! token from the latest market day and its last sale.
//!
//! ```text
//! cargo run --release --example dynamic_valuation
//! ```

use nftval::bench::{fit_model_file, BenchConfig, ModelKind};
use nftval::features::{aggregate_market_days, dataset_from_records, FeatureSchema, FeatureSet, LastTrade, TargetTransform};
use nftval::model_file::ModelFile;
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};
use nftval::valuation::{predict_valuation, ValuationRequest};

fn main() -> nftval::Result<()> {
    let config = SynthConfig::default();
    let collection = generate_collection(&config)?;
    let (_, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&config, &collection, &ranks)?;

    let dataset = dataset_from_records(&trades, &collection, &FeatureSchema::bayc(FeatureSet::X1), TargetTransform::Eth)?;
    let model = fit_model_file(ModelKind::Boosted, &dataset, &BenchConfig::default())?;
    let path = std::env::temp_dir().join("nftval-valuation-model.json");
    model.save(&path)?;
    let model = ModelFile::load(&path)?;
    println!("model {} ({}), fingerprint {}", model.model.kind(), path.display(), model.fingerprint()?);

    let latest_day = aggregate_market_days(&trades).pop().expect("trades exist");
    let as_of = (latest_day.day + 1) * 86_400 + 3_600;
    for token_id in [0u64, 1, 2] {
        let Some(last) = trades.iter().filter(|t| t.token_id == token_id).max_by_key(|t| t.timestamp) else {
            continue;
        };
        let request = ValuationRequest {
            token_id,
            market: Some(latest_day.snapshot()),
            last_trade: Some(LastTrade { timestamp: last.timestamp, price_eth: last.price_eth }),
            as_of,
        };
        let v = predict_valuation(&model, &collection, &request)?;
        println!("token {token_id}: last sold {:.2} ETH, valued {:.2} ETH", last.price_eth, v.valuation_eth);
    }
    Ok(())
}

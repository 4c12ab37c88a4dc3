//! Daily market aggregates and the three lagged feature sets built from a
//! synthetic trade history.
//!
//! ```text
//! cargo run --release --example market_features
//! ```

use nftval::features::{aggregate_market_days, dataset_from_records, FeatureSchema, FeatureSet, TargetTransform};
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};

fn main() -> nftval::Result<()> {
    let config = SynthConfig { collection_size: 500, days: 60, ..SynthConfig::default() };
    let collection = generate_collection(&config)?;
    let (_, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&config, &collection, &ranks)?;

    let days = aggregate_market_days(&trades);
    println!("day      trades  volume     p5      max     min");
    for d in days.iter().take(5) {
        println!(
            "{:>6} {:>6} {:>8.1} {:>7.2} {:>7.2} {:>7.2}",
            d.day, d.trade_count, d.volume_eth, d.price_p5_eth, d.price_max_eth, d.price_min_eth
        );
    }

    for set in FeatureSet::ALL {
        let ds = dataset_from_records(&trades, &collection, &FeatureSchema::bayc(set), TargetTransform::Eth)?;
        println!("\n{set}: {} rows × {} columns", ds.len(), ds.width());
        println!("  {}", ds.schema.columns.join(", "));
        if let Some(row) = ds.rows.first() {
            let shown: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
            println!("  first row: [{}] → {:.3} ETH", shown.join(", "), ds.targets[0]);
        }
    }
    Ok(())
}

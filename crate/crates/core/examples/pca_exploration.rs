//! Projects standardized rarity and trait-count columns onto three principal
//! components and shows how little of the price they explain linearly.
//!
//! ```text
//! cargo run --release --example pca_exploration
//! ```

use nftval::features::{pca, trait_rarity_matrix, Standardizer, TokenTable, BAYC_CATEGORIES};
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};
use nftval::tuner::pearson;

fn main() -> nftval::Result<()> {
    let config = SynthConfig::default();
    let collection = generate_collection(&config)?;
    let (stats, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&config, &collection, &ranks)?;

    let table = TokenTable::build(&collection, &stats, &ranks, &BAYC_CATEGORIES)?;
    let (rows, prices) = trait_rarity_matrix(&trades, &table)?;
    let std = Standardizer::fit(&rows)?;
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| std.transform_row(r)).collect::<nftval::Result<_>>()?;
    let result = pca(&scaled, 3)?;

    println!("{} trades, {} input columns", scaled.len(), scaled[0].len());
    for (i, (var, ratio)) in result.explained_variance.iter().zip(&result.explained_variance_ratio).enumerate() {
        let pc: Vec<f64> = result.projections.iter().map(|p| p[i]).collect();
        println!(
            "pc{}: variance {:.3} ({:.1}%), correlation with price {:+.3}",
            i + 1,
            var,
            100.0 * ratio,
            pearson(&pc, &prices)
        );
    }
    Ok(())
}

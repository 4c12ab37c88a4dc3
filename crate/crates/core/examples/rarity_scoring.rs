//! Scores a small hand-written collection and prints each token's
//! information content, rarity score and rank.
//!
//! ```text
//! cargo run --example rarity_scoring
//! ```

use nftval::ingest::{parse_traits, AssetTraits};
use nftval::rarity::{build_collection_stats, rank_assets, score_collection};

const TRAITS: &str = r#"[
  {"token_id": 0, "traits": {"Fur": "Gold", "Eyes": "Laser", "Hat": "Crown"}},
  {"token_id": 1, "traits": {"Fur": "Brown", "Eyes": "Bored"}},
  {"token_id": 2, "traits": {"Fur": "Brown", "Eyes": "Bored", "Hat": "Beanie"}},
  {"token_id": 3, "traits": {"Fur": "Brown", "Eyes": "Sleepy"}},
  {"token_id": 4, "traits": {"Fur": "Gold", "Eyes": "Bored", "Hat": "Beanie"}}
]"#;

fn main() -> nftval::Result<()> {
    let assets: Vec<AssetTraits> = parse_traits(TRAITS.as_bytes())?;
    let stats = build_collection_stats(&assets)?;
    println!("{} tokens, categories {:?}", stats.collection_size, stats.categories);

    let scored = score_collection(&assets, &stats)?;
    println!("mean information content {:.4} bits\n", scored.mean_information_content);

    let (_, ranked) = rank_assets(&assets)?;
    println!("token  bits     score   rank");
    for r in &ranked {
        println!("{:>5} {:>6.3} {:>8.4} {:>6}", r.token_id, r.information_content, r.rarity_score, r.rarity_rank);
    }
    Ok(())
}

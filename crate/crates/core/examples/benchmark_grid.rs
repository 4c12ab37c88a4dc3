//! Runs the 45-cell benchmark grid on a synthetic market and prints the
//! three panels as markdown.
//!
//! ```text
//! cargo run --release --example benchmark_grid -- [seed]
//! ```

use std::time::Instant;

use nftval::bench::{render_report, run_benchmark, BenchConfig, ReportFormat};
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};

fn main() -> nftval::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let synth = SynthConfig { seed, ..SynthConfig::default() };
    let collection = generate_collection(&synth)?;
    let (_, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&synth, &collection, &ranks)?;
    println!("{} tokens, {} trades\n", collection.len(), trades.len());

    let started = Instant::now();
    let report = run_benchmark(&trades, &collection, &BenchConfig { seed, ..BenchConfig::default() })?;
    print!("{}", render_report(&report, ReportFormat::Markdown)?);

    println!();
    for d in &report.datasets {
        println!(
            "{}/{}: {} rows ({} train, {} test)",
            d.feature_set,
            d.target.as_str(),
            d.rows,
            d.train_rows,
            d.test_rows
        );
    }
    for b in &report.best {
        println!("best for {}: {} on {} (MSE {:.4})", b.target.as_str(), b.model.label(), b.feature_set, b.mse);
    }
    println!("\nfitted in {:.1?}", started.elapsed());
    Ok(())
}

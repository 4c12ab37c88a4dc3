//! Random search over CNN architectures on the X1 / ETH synthetic dataset,
//! followed by the hyperparameter importance report.
//!
//! ```text
//! cargo run --release --example random_search -- [trials] [seed]
//! ```

use std::time::Instant;

use nftval::features::{chronological_split, dataset_from_records, FeatureSchema, FeatureSet, Standardizer, TargetTransform};
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};
use nftval::tuner::{importance_report, random_search, HyperSpace, SearchConfig};

fn main() -> nftval::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let synth = SynthConfig { seed, ..SynthConfig::default() };
    let collection = generate_collection(&synth)?;
    let (_, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&synth, &collection, &ranks)?;
    let dataset = dataset_from_records(&trades, &collection, &FeatureSchema::bayc(FeatureSet::X1), TargetTransform::Eth)?;
    let (train, _test) = chronological_split(&dataset, 0.2)?;
    let train = Standardizer::fit_dataset(&train)?.apply(&train)?;

    let started = Instant::now();
    let config = SearchConfig { n_trials, seed, ..SearchConfig::default() };
    let result = random_search(&HyperSpace::default(), &train.rows, &train.targets, &config)?;
    println!("{} trials on {} rows in {:.1?}\n", n_trials, train.len(), started.elapsed());

    println!("trial filters kernel units dropout        lr  epoch1 loss  final loss  best val");
    for t in &result.trials {
        let s = &t.spec;
        println!(
            "{:>5} {:>7} {:>6} {:>5} {:>7} {:>9.2e} {:>12.3} {:>11.3} {:>9.3}",
            t.index,
            s.filters,
            s.kernel_size,
            s.dense_units,
            s.use_dropout,
            s.learning_rate,
            t.report.train_loss[0],
            t.report.train_loss.last().copied().unwrap_or(f64::NAN),
            t.best_val_loss
        );
    }
    let best = result.best_trial();
    println!("\nbest trial: {} (validation MSE {:.3})", best.index, best.best_val_loss);

    if result.trials.len() >= 2 {
        println!("\nhyperparameter  importance  correlation");
        for row in importance_report(&result.trials, seed)? {
            println!("{:<15} {:>10.4} {:>12.4}", row.hyperparameter, row.importance, row.correlation);
        }
    }
    Ok(())
}

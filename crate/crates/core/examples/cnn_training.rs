//! Trains one CNN on the standardized X1 / ETH synthetic dataset and prints
//! the per-epoch losses.
//!
//! ```text
//! cargo run --release --example cnn_training
//! ```

use nftval::bench::mse;
use nftval::features::{chronological_split, dataset_from_records, FeatureSchema, FeatureSet, Standardizer, TargetTransform};
use nftval::neural::{init_model, train, CnnSpec, TrainConfig};
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};

fn main() -> nftval::Result<()> {
    let config = SynthConfig::default();
    let collection = generate_collection(&config)?;
    let (_, ranks) = rank_assets(&collection)?;
    let trades = generate_trades(&config, &collection, &ranks)?;
    let dataset = dataset_from_records(&trades, &collection, &FeatureSchema::bayc(FeatureSet::X1), TargetTransform::Eth)?;
    let (train_set, test_set) = chronological_split(&dataset, 0.2)?;
    let std = Standardizer::fit_dataset(&train_set)?;
    let (train_set, test_set) = (std.apply(&train_set)?, std.apply(&test_set)?);

    let spec = CnnSpec::new(32, 3, 64, true, 2e-3);
    let model = init_model(spec, train_set.width(), 42)?;
    println!("{} parameters, conv width {}", model.params.len(), model.conv_width());

    let cfg = TrainConfig { seed: 42, ..TrainConfig::default() };
    let (trained, report) = train(&model, &train_set.rows, &train_set.targets, &cfg)?;
    println!("epoch  train loss    val loss");
    for (e, (t, v)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        println!("{:>5} {:>11.3} {:>11.3}", e + 1, t, v);
    }
    println!("restored epoch {}", report.best_epoch.map_or(0, |e| e + 1));

    let pred = test_set.rows.iter().map(|r| trained.predict(r)).collect::<nftval::Result<Vec<_>>>()?;
    println!("test MSE {:.3}", mse(&pred, &test_set.targets)?);
    Ok(())
}

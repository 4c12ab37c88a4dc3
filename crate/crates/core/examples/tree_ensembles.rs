//! A single regression tree, a random forest and gradient boosting on a
//! nonlinear target, with forest feature importances and the boosting curve.
//!
//! ```text
//! cargo run --release --example tree_ensembles
//! ```

use nftval::bench::mse;
use nftval::trees::{fit_gradient_boosting, fit_random_forest, fit_tree, BoostingParams, ForestParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let y = rows.iter().map(|r| 10.0 * r[0] * r[1] * r[1] + (6.0 * r[0]).sin() + rng.random_range(-0.2..0.2)).collect();
    (rows, y)
}

fn main() -> nftval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (train_x, train_y) = sample(&mut rng, 1_500);
    let (test_x, test_y) = sample(&mut rng, 500);

    let tree = fit_tree(&train_x, &train_y, Some(6), 5)?;
    let forest = fit_random_forest(&train_x, &train_y, &ForestParams::default(), 11)?;
    let boosted = fit_gradient_boosting(&train_x, &train_y, &BoostingParams::default(), 11)?;

    let score = |f: &dyn Fn(&[f64]) -> nftval::Result<f64>| -> nftval::Result<f64> {
        let pred = test_x.iter().map(|r| f(r)).collect::<nftval::Result<Vec<_>>>()?;
        mse(&pred, &test_y)
    };
    println!("tree (depth {}): test MSE {:.4}", tree.depth(), score(&|r| tree.predict(r))?);
    println!("forest ({} trees): test MSE {:.4}", forest.trees.len(), score(&|r| forest.predict(r))?);
    println!("boosting ({} stages): test MSE {:.4}", boosted.stages.len(), score(&|r| boosted.predict(r))?);

    println!("\nforest importances (x0, x1, x2): {:?}", forest.feature_importances());
    let curve = boosted.staged_mse(&test_x, &test_y);
    for stage in [0, 10, 25, 50, 100] {
        println!("after {stage:>3} stages: test MSE {:.4}", curve[stage]);
    }
    Ok(())
}

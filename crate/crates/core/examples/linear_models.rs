//! OLS, Ridge and Lasso on a noisy linear problem, including the Lasso
//! penalty that zeroes every slope.
//!
//! ```text
//! cargo run --example linear_models
//! ```

use nftval::linmod::{fit_lasso, fit_lasso_traced, fit_ols, fit_ridge, lasso_lambda_max};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nftval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<f64> = rows
        .iter()
        .map(|r| 3.0 + 2.0 * r[0] - 1.0 * r[1] + 0.5 * r[2] + rng.random_range(-0.1..0.1))
        .collect();

    let ols = fit_ols(&rows, &targets)?;
    println!("ols    intercept {:.4} slopes {:?}", ols.intercept, rounded(&ols.coefficients));
    for lambda in [0.1, 1.0, 10.0] {
        let ridge = fit_ridge(&rows, &targets, lambda)?;
        println!("ridge  λ={lambda:<5} slopes {:?}", rounded(&ridge.coefficients));
    }
    for lambda in [0.01, 0.1, 0.5] {
        let lasso = fit_lasso(&rows, &targets, lambda)?;
        println!(
            "lasso  λ={lambda:<5} slopes {:?} ({} sweeps)",
            rounded(&lasso.coefficients),
            lasso.diagnostics.iterations
        );
    }

    let lambda_max = lasso_lambda_max(&rows, &targets)?;
    let (null_model, trace) = fit_lasso_traced(&rows, &targets, lambda_max * 1.01)?;
    println!(
        "\nλ_max = {lambda_max:.4}; just above it every slope is zero: {:?}, objective {:.5}",
        null_model.coefficients,
        trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

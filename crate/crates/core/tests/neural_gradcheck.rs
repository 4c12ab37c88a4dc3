mod common;

use nftval::neural::{init_model, train, CnnSpec, TrainConfig};
use nftval::tuner::{sample_specs, HyperSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = rows.iter().map(|r| r.iter().sum::<f64>().sin() + rng.random_range(-0.1..0.1)).collect();
    (rows, y)
}

#[test]
fn backprop_matches_central_differences() {
    let p = 9;
    let specs = sample_specs(&HyperSpace::default(), p, 4, 21).unwrap();
    for (i, spec) in specs.into_iter().enumerate() {
        let small = CnnSpec { filters: spec.filters.min(16), dense_units: spec.dense_units.min(32), ..spec };
        let model = init_model(small, p, 100 + i as u64).unwrap();
        let (rows, y) = batch(i as u64, 6, p);
        let err = common::gradient_check(&model, &rows, &y, 1e-5);
        assert!(err < 1e-4, "spec {small:?}: max relative error {err:e}");
    }
}

#[test]
fn dropout_masks_enter_the_gradient() {
    let p = 7;
    let spec = CnnSpec::new(4, 3, 8, true, 1e-3);
    let model = init_model(spec, p, 3).unwrap();
    let (rows, y) = batch(5, 4, p);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let keep = 1.0 / (1.0 - spec.dropout_rate);
    let masks: Vec<Vec<f64>> = (0..rows.len())
        .map(|_| (0..spec.dense_units).map(|_| if rng.random_bool(0.75) { keep } else { 0.0 }).collect())
        .collect();
    let (_, grads) = model.backward_with_masks(&rows, &y, Some(&masks)).unwrap();
    let analytic = grads.flatten();
    let base = model.params.flatten();
    let mut probe = model.clone();
    let h = 1e-5;
    for i in 0..base.len() {
        let mut shifted = base.clone();
        shifted[i] += h;
        probe.params.set_flat(&shifted);
        let plus = probe.backward_with_masks(&rows, &y, Some(&masks)).unwrap().0;
        shifted[i] = base[i] - h;
        probe.params.set_flat(&shifted);
        let minus = probe.backward_with_masks(&rows, &y, Some(&masks)).unwrap().0;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        assert!((analytic[i] - numeric).abs() / denom < 1e-4, "parameter {i}");
    }
}

#[test]
fn training_is_deterministic_and_returns_best_epoch() {
    let (rows, y) = batch(1, 120, 6);
    let model = init_model(CnnSpec::new(8, 2, 16, true, 5e-3), 6, 9).unwrap();
    let cfg = TrainConfig { epochs_cap: 8, batch_size: 16, seed: 4, ..TrainConfig::default() };
    let (a, report_a) = train(&model, &rows, &y, &cfg).unwrap();
    let (b, report_b) = train(&model, &rows, &y, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(report_a, report_b);

    let best = report_a.best_epoch.unwrap();
    let min = report_a.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(report_a.val_loss[best], min);
    let split = rows.len() - (0.2 * rows.len() as f64).ceil() as usize;
    let restored = a.mse(&rows[split..], &y[split..]).unwrap();
    assert!((restored - min).abs() <= 1e-12 * min.max(1.0));
}

mod common;

use nftval::features::{
    aggregate_market_days, chronological_split, dataset_from_records, day_of, pca, percentile_linear,
    FeatureSchema, FeatureSet, Standardizer, TargetTransform, SECONDS_PER_DAY,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn percentile_matches_oracle(mut values in prop::collection::vec(0.0f64..1e4, 1..50), q in 0.0f64..=1.0) {
        let expected = common::percentile_oracle(&values, q);
        values.sort_by(f64::total_cmp);
        prop_assert!((percentile_linear(&values, q) - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn pca_components_are_orthonormal(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 6..40),
        k in 1usize..=4,
    ) {
        let result = pca(&rows, k).unwrap();
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = result.components[i].iter().zip(&result.components[j]).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() <= 1e-9, "gram[{i}][{j}] = {dot}");
            }
        }
        for w in result.explained_variance.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn standardized_columns_have_zero_mean(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30)) {
        let s = Standardizer::fit(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| s.transform_row(r).unwrap()).collect();
        for c in 0..3 {
            let mean = scaled.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
            prop_assert!(mean.abs() <= 1e-9);
        }
    }
}

#[test]
fn market_features_come_from_an_earlier_day() {
    let (collection, trades) = common::market(&common::synth_config(4, 300, 40));
    let days = aggregate_market_days(&trades);
    let ds = dataset_from_records(&trades, &collection, &FeatureSchema::bayc(FeatureSet::X2), TargetTransform::Eth).unwrap();
    for (row, key) in ds.rows.iter().zip(&ds.keys) {
        let source = days
            .iter()
            .rev()
            .find(|d| d.day < day_of(key.timestamp))
            .expect("rows only exist with a prior market day");
        assert_eq!(&row[..4], &[source.volume_eth, source.price_p5_eth, source.price_max_eth, source.price_min_eth]);
        assert!(source.day * SECONDS_PER_DAY <= key.timestamp - SECONDS_PER_DAY || source.day < day_of(key.timestamp));
    }
}

#[test]
fn x2_has_at_least_as_many_rows_as_x1() {
    for seed in 0..4 {
        let (collection, trades) = common::market(&common::synth_config(seed, 400, 30));
        let len = |set| {
            dataset_from_records(&trades, &collection, &FeatureSchema::bayc(set), TargetTransform::Eth).unwrap().len()
        };
        assert!(len(FeatureSet::X2) >= len(FeatureSet::X1));
    }
}

#[test]
fn chronological_split_keeps_time_order() {
    let (collection, trades) = common::market(&common::synth_config(9, 300, 30));
    let ds = dataset_from_records(&trades, &collection, &FeatureSchema::bayc(FeatureSet::X1), TargetTransform::LogEth).unwrap();
    let (train, test) = chronological_split(&ds, 0.2).unwrap();
    assert_eq!(test.len(), (0.2 * ds.len() as f64).ceil() as usize);
    let last_train = train.keys.iter().map(|k| k.timestamp).max().unwrap();
    assert!(test.keys.iter().all(|k| k.timestamp >= last_train));
}

#[test]
fn log_target_is_natural_log_of_eth() {
    let (collection, trades) = common::market(&common::synth_config(2, 200, 20));
    let schema = FeatureSchema::bayc(FeatureSet::X2);
    let eth = dataset_from_records(&trades, &collection, &schema, TargetTransform::Eth).unwrap();
    let log = dataset_from_records(&trades, &collection, &schema, TargetTransform::LogEth).unwrap();
    assert_eq!(eth.len(), log.len());
    for (a, b) in eth.targets.iter().zip(&log.targets) {
        assert_eq!(a.ln(), *b);
    }
}

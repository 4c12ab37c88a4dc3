#![allow(dead_code)]

use std::collections::BTreeSet;

use nftval::ingest::{AssetTraits, TradeRecord};
use nftval::neural::CnnModel;
use nftval::rarity::rank_assets;
use nftval::synth::{generate_collection, generate_trades, SynthConfig};

pub fn synth_config(seed: u64, tokens: usize, days: usize) -> SynthConfig {
    SynthConfig { seed, collection_size: tokens, days, ..SynthConfig::default() }
}

pub fn market(config: &SynthConfig) -> (Vec<AssetTraits>, Vec<TradeRecord>) {
    let collection = generate_collection(config).expect("valid config");
    let (_, ranks) = rank_assets(&collection).expect("rankable");
    let trades = generate_trades(config, &collection, &ranks).expect("trades");
    (collection, trades)
}

/// (token_id, information content, score, rank), counting matches pairwise.
pub fn brute_force_rarity(assets: &[AssetTraits]) -> Vec<(u64, f64, f64, usize)> {
    let categories: BTreeSet<&String> = assets.iter().flat_map(|a| a.traits.keys()).collect();
    let n = assets.len() as f64;
    let bits: Vec<f64> = assets
        .iter()
        .map(|a| {
            let mut total = 0.0;
            for c in &categories {
                let mine = a.traits.get(*c);
                let same = assets.iter().filter(|b| b.traits.get(*c) == mine).count();
                total += -(same as f64 / n).log2();
            }
            total
        })
        .collect();
    let mean = bits.iter().sum::<f64>() / n;
    let scores: Vec<f64> = bits.iter().map(|b| if mean > 0.0 { b / mean } else { 1.0 }).collect();
    let mut rank = vec![0usize; assets.len()];
    for i in 0..assets.len() {
        let above = (0..assets.len())
            .filter(|&j| {
                scores[j] > scores[i] || (scores[j] == scores[i] && assets[j].token_id < assets[i].token_id)
            })
            .count();
        rank[i] = above + 1;
    }
    (0..assets.len()).map(|i| (assets[i].token_id, bits[i], scores[i], rank[i])).collect()
}

/// Linear-interpolation percentile computed from the unsorted sample.
pub fn percentile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lower = pos.floor();
    let weight = pos - lower;
    let i = lower as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] * (1.0 - weight) + v[i + 1] * weight
}

/// Solves `[1 X]ᵀ[1 X] b = [1 X]ᵀ y` by Gaussian elimination with partial
/// pivoting; returns (intercept, slopes).
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let p = rows[0].len() + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &t) in rows.iter().zip(y) {
        let x: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
        for i in 0..p {
            for j in 0..p {
                a[i][j] += x[i] * x[j];
            }
            a[i][p] += x[i] * t;
        }
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let b: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    (b[0], b[1..].to_vec())
}

/// Largest relative difference between backprop and central differences
/// over every parameter, with `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &CnnModel, rows: &[Vec<f64>], targets: &[f64], h: f64) -> f64 {
    let (_, grads) = model.backward(rows, targets).expect("backward");
    let analytic = grads.flatten();
    let base = model.params.flatten();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut shifted = base.clone();
        shifted[i] = base[i] + h;
        probe.params.set_flat(&shifted);
        let plus = probe.mse(rows, targets).expect("mse");
        shifted[i] = base[i] - h;
        probe.params.set_flat(&shifted);
        let minus = probe.mse(rows, targets).expect("mse");
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

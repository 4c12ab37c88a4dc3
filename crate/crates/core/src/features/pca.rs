use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PcaResult {
    /// Unit eigenvectors of the sample covariance, one per component, in
    /// descending eigenvalue order.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// One row per input row, `k` columns.
    pub projections: Vec<Vec<f64>>,
    /// Some requested component carries (numerically) zero variance.
    pub rank_deficient: bool,
}

/// Principal components of `rows` (expected to be standardized already; the
/// data is centered again here regardless).
pub fn pca(rows: &[Vec<f64>], k: usize) -> Result<PcaResult> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    let p = rows[0].len();
    if k > p {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds column count {p}")));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, actual: bad.len() });
    }

    let mut x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    for j in 0..p {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    let mut rank_deficient = false;
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        // sign convention: largest-magnitude entry positive
        let pivot = v
            .iter()
            .cloned()
            .fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        let value = eig.eigenvalues[idx].max(0.0);
        if value <= 1e-12 * top.max(f64::MIN_POSITIVE) {
            rank_deficient = true;
        }
        explained_variance.push(value);
        components.push(v);
    }
    if rank_deficient {
        log::warn!("PCA: requested {k} components but some carry zero variance");
    }
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let projections = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| c.iter().enumerate().map(|(j, w)| w * x[(i, j)]).sum())
                .collect()
        })
        .collect();

    Ok(PcaResult {
        components,
        explained_variance,
        explained_variance_ratio,
        projections,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_single_component() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let res = pca(&rows, 2).unwrap();
        assert!((res.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        assert!(res.rank_deficient);
    }

    /// Closed-form eigenvalues of a symmetric 2x2 matrix.
    fn eig2(a: f64, b: f64, d: f64) -> (f64, f64) {
        let tr = a + d;
        let disc = ((a - d).powi(2) / 4.0 + b * b).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }

    #[test]
    fn isotropic_cloud_splits_variance() {
        // symmetric 8-point ring
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 4.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..2).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let c = |a: usize, b: usize| {
            rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0)
        };
        let (l1, l2) = eig2(c(0, 0), c(0, 1), c(1, 1));
        let res = pca(&rows, 2).unwrap();
        assert!((res.explained_variance_ratio[0] - l1 / (l1 + l2)).abs() < 1e-12);
        assert!((res.explained_variance_ratio[0] - 0.5).abs() < 1e-9);
        assert!((res.explained_variance_ratio[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn shapes_and_orthonormality() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let x = i as f64;
                vec![x.sin(), (x * 0.7).cos(), x % 3.0, (x * 1.3).sin() * x / 10.0]
            })
            .collect();
        let res = pca(&rows, 3).unwrap();
        assert_eq!(res.projections.len(), 30);
        assert!(res.projections.iter().all(|p| p.len() == 3));
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = res.components[a].iter().zip(&res.components[b]).map(|(x, y)| x * y).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9);
            }
        }
        assert!(res.explained_variance_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(pca(&rows, 5).is_err());
    }
}

//! OLS, Ridge and Lasso regression. Every fit centers the data first, so the
//! intercept is never penalized: `intercept = mean(y) − mean(x)·β`.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LASSO_TOLERANCE: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "snake_case")]
pub enum Regularization {
    None,
    Ridge(f64),
    Lasso(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// The design matrix was rank deficient; the minimum-norm solution was used.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub regularization: Regularization,
    pub diagnostics: FitDiagnostics,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                actual: row.len(),
            });
        }
        Ok(self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>())
    }
}

struct Centered {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_means: Vec<f64>,
    y_mean: f64,
}

fn center(rows: &[Vec<f64>], targets: &[f64]) -> Result<Centered> {
    if rows.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if rows.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), actual: targets.len() });
    }
    let n = rows.len();
    let p = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, actual: bad.len() });
    }
    let x_means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    Ok(Centered {
        x: DMatrix::from_fn(n, p, |i, j| rows[i][j] - x_means[j]),
        y: DVector::from_iterator(n, targets.iter().map(|t| t - y_mean)),
        x_means,
        y_mean,
    })
}

fn assemble(c: &Centered, beta: Vec<f64>, regularization: Regularization, diagnostics: FitDiagnostics) -> LinearModel {
    let shift: f64 = c.x_means.iter().zip(&beta).map(|(m, b)| m * b).sum();
    LinearModel {
        intercept: c.y_mean - shift,
        coefficients: beta,
        regularization,
        diagnostics,
    }
}

/// Minimum-norm least squares through the SVD of the centered design.
fn min_norm_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> (Vec<f64>, bool) {
    let p = x.ncols();
    if p == 0 {
        return (Vec::new(), false);
    }
    let svd = SVD::new(x.clone(), true, true);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = top * x.nrows().max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let beta = if top == 0.0 {
        DVector::zeros(p)
    } else {
        svd.solve(y, eps).expect("SVD computed with both U and V")
    };
    (beta.iter().copied().collect(), rank < p)
}

pub fn fit_ols(rows: &[Vec<f64>], targets: &[f64]) -> Result<LinearModel> {
    let c = center(rows, targets)?;
    let (beta, rank_deficient) = min_norm_solve(&c.x, &c.y);
    if rank_deficient {
        log::warn!("OLS: rank-deficient design, using minimum-norm solution");
    }
    let diagnostics = FitDiagnostics { iterations: 1, converged: true, rank_deficient };
    Ok(assemble(&c, beta, Regularization::None, diagnostics))
}

/// Solves `(XᵀX + λI) β = Xᵀy` on centered data by Cholesky, falling back to
/// the minimum-norm solution when the system is singular (only possible at λ = 0).
pub fn fit_ridge(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<LinearModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge lambda must be finite and ≥ 0, got {lambda}")));
    }
    let c = center(rows, targets)?;
    let p = c.x.ncols();
    let gram = c.x.transpose() * &c.x + DMatrix::identity(p, p) * lambda;
    let rhs = c.x.transpose() * &c.y;
    let (beta, rank_deficient) = match gram.cholesky() {
        Some(chol) => (chol.solve(&rhs).iter().copied().collect(), false),
        None => min_norm_solve(&c.x, &c.y),
    };
    let diagnostics = FitDiagnostics { iterations: 1, converged: true, rank_deficient };
    Ok(assemble(&c, beta, Regularization::Ridge(lambda), diagnostics))
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest λ at which every Lasso slope is zero: `max_j |x_jᵀ(y − ȳ)| / n`
/// over centered columns.
pub fn lasso_lambda_max(rows: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
    let c = center(rows, targets)?;
    let n = c.x.nrows() as f64;
    Ok(c.x
        .column_iter()
        .map(|col| (col.dot(&c.y) / n).abs())
        .fold(0.0, f64::max))
}

pub fn fit_lasso(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<LinearModel> {
    fit_lasso_traced(rows, targets, lambda).map(|(m, _)| m)
}

/// Cyclic coordinate descent on `(1/2n)·RSS + λ‖β‖₁`. Also returns the
/// objective after every sweep.
pub fn fit_lasso_traced(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<(LinearModel, Vec<f64>)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lasso lambda must be finite and ≥ 0, got {lambda}")));
    }
    let c = center(rows, targets)?;
    let n = c.x.nrows() as f64;
    let p = c.x.ncols();
    let columns: Vec<Vec<f64>> = c.x.column_iter().map(|col| col.iter().copied().collect()).collect();
    let norms: Vec<f64> = columns.iter().map(|col| col.iter().map(|v| v * v).sum::<f64>() / n).collect();

    let mut beta = vec![0.0; p];
    let mut residual: Vec<f64> = c.y.iter().copied().collect();
    let objective = |r: &[f64], b: &[f64]| {
        r.iter().map(|v| v * v).sum::<f64>() / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut converged = p == 0;
    let mut sweeps = 0;
    while !converged && sweeps < LASSO_MAX_SWEEPS {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let col = &columns[j];
            let old = beta[j];
            let rho = col.iter().zip(&residual).map(|(x, r)| x * r).sum::<f64>() / n + norms[j] * old;
            let new = soft_threshold(rho, lambda) / norms[j];
            let delta = new - old;
            if delta != 0.0 {
                for (r, x) in residual.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                beta[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        trace.push(objective(&residual, &beta));
        converged = max_change < LASSO_TOLERANCE;
    }
    if !converged {
        log::warn!("lasso did not converge within {LASSO_MAX_SWEEPS} sweeps");
    }
    let diagnostics = FitDiagnostics { iterations: sweeps, converged, rank_deficient: false };
    Ok((assemble(&c, beta, Regularization::Lasso(lambda), diagnostics), trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn ols_exact_line() {
        let m = fit_ols(&column(&[1.0, 2.0, 3.0]), &[2.0, 4.0, 6.0]).unwrap();
        assert!(m.intercept.abs() < 1e-10);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ols_constant_target() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, -1.0], vec![3.0, 0.5], vec![7.0, 2.0]];
        let m = fit_ols(&rows, &[4.5; 4]).unwrap();
        assert!((m.intercept - 4.5).abs() < 1e-12);
        assert!(m.coefficients.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn ols_rank_deficient_is_flagged() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let m = fit_ols(&rows, &[1.0, 2.0, 3.0]).unwrap();
        assert!(m.diagnostics.rank_deficient);
        // minimum-norm split of slope 1 across x and 2x: b = (0.2, 0.4)
        assert!((m.coefficients[0] - 0.2).abs() < 1e-10);
        assert!((m.coefficients[1] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn ols_empty_is_error() {
        assert!(matches!(fit_ols(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn ridge_huge_lambda_flattens() {
        let m = fit_ridge(&column(&[1.0, 2.0, 3.0]), &[1.0, 2.0, 3.0], 1e12).unwrap();
        // slope = Sxy / (Sxx + λ) = 2 / (2 + 1e12)
        assert!((m.coefficients[0] - 2.0 / (2.0 + 1e12)).abs() < 1e-20);
        assert!((m.intercept - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ridge_negative_lambda_rejected() {
        assert!(fit_ridge(&column(&[1.0, 2.0]), &[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn ridge_shrinks_monotonically() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let x = i as f64;
                vec![x.sin(), (x * 0.3).cos(), x / 10.0]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] + r[2] + 0.1).collect();
        let norms: Vec<f64> = [0.0, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| fit_ridge(&rows, &y, l).unwrap().coefficients.iter().map(|b| b * b).sum::<f64>().sqrt())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lasso_single_feature_threshold() {
        // standardized x; (1/n)|xᵀy| = 0.5
        let x = column(&[-1.0, 1.0, -1.0, 1.0]);
        let y = [0.0, 1.0, 0.0, 1.0];
        let cutoff = lasso_lambda_max(&x, &y).unwrap();
        assert!((cutoff - 0.5).abs() < 1e-15);
        let m = fit_lasso(&x, &y, 0.5000001).unwrap();
        assert_eq!(m.coefficients[0], 0.0);
        assert!((m.intercept - 0.5).abs() < 1e-15);
        let m = fit_lasso(&x, &y, 0.25).unwrap();
        assert!((m.coefficients[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lasso_objective_non_increasing() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let x = i as f64;
                vec![x.sin(), x.sin() + 0.1 * x.cos(), (x * 0.37).cos()]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] + 2.0 * r[1] - r[2]).collect();
        let (_, trace) = fit_lasso_traced(&rows, &y, 0.01).unwrap();
        assert!(trace.len() > 1);
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn predict_dot_product() {
        let m = LinearModel {
            intercept: 0.0,
            coefficients: vec![2.0, 3.0],
            regularization: Regularization::None,
            diagnostics: FitDiagnostics::default(),
        };
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 5.0);
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let flat = LinearModel { intercept: 5.0, coefficients: vec![0.0; 3], ..m };
        assert_eq!(flat.predict(&[9.0, -3.0, 1e6]).unwrap(), 5.0);
    }
}

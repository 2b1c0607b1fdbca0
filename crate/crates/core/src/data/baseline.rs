//! Gaussian-kernel NW baseline with a leave-one-out bandwidth search.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::regression::{loo_nw_predict, r_squared, rmse, squared_weights, RegressionDataset};

/// `exp(-gamma |a_i - b_j|^2)` for every row pair.
pub fn gaussian_kernel_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let mut k = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ai) in a.outer_iter().enumerate() {
        for (j, bj) in b.outer_iter().enumerate() {
            let d2: f64 = ai.iter().zip(bj.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
            k[[i, j]] = (-gamma * d2).exp();
        }
    }
    k
}

/// `2^-6, 2^-5, ..., 2^4`.
pub fn default_gamma_grid() -> Vec<f64> {
    (-6..=4).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub gamma: f64,
    /// LOO MSE on train for each grid point, in grid order.
    pub loo_mse: Vec<f64>,
    pub grid: Vec<f64>,
    pub train_r2: f64,
    pub train_rmse: f64,
    pub test_r2: f64,
    pub test_rmse: f64,
}

fn loo_mse(train: &RegressionDataset, gamma: f64, eps: f64) -> Result<f64> {
    let k = gaussian_kernel_matrix(train.x.view(), train.x.view(), gamma);
    let pred = loo_nw_predict(squared_weights(k.view()).view(), train.y.view(), eps)?;
    Ok((&pred - &train.y).mapv(|r| r * r).mean().expect("non-empty"))
}

fn query_predict(train: &RegressionDataset, queries: ArrayView2<f64>, gamma: f64, eps: f64) -> Array1<f64> {
    let w = squared_weights(gaussian_kernel_matrix(queries, train.x.view(), gamma).view());
    let num = w.dot(&train.y);
    let den = w.sum_axis(Axis(1));
    num / (den + eps)
}

/// Picks the grid bandwidth with the smallest train LOO MSE (first on ties)
/// and reports in-sample train and held-out test metrics at that bandwidth.
pub fn gaussian_nw_baseline(
    train: &RegressionDataset,
    test: &RegressionDataset,
    grid: &[f64],
    eps: f64,
) -> Result<BaselineReport> {
    if grid.is_empty() {
        return Err(Error::Empty("bandwidth grid"));
    }
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::Config("bandwidths must be positive and finite".into()));
    }
    check_len("test feature dimension", train.dim(), test.dim())?;
    let loo = grid
        .iter()
        .map(|&g| loo_mse(train, g, eps))
        .collect::<Result<Vec<_>>>()?;
    let best = loo
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < loo[best] { i } else { best });
    let gamma = grid[best];
    let train_pred = query_predict(train, train.x.view(), gamma, eps);
    let test_pred = query_predict(train, test.x.view(), gamma, eps);
    Ok(BaselineReport {
        gamma,
        loo_mse: loo,
        grid: grid.to_vec(),
        train_r2: r_squared(train.y.view(), train_pred.view())?,
        train_rmse: rmse(train.y.view(), train_pred.view())?,
        test_r2: r_squared(test.y.view(), test_pred.view())?,
        test_rmse: rmse(test.y.view(), test_pred.view())?,
    })
}

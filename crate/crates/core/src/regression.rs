//! Nadaraya-Watson prediction with squared-kernel weights, local linear
//! endpoint correction, and evaluation metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rff::{cross_kernel, feature_matrix, FrequencySet};

/// Stabilizer added to every NW denominator.
pub const DEFAULT_NW_EPS: f64 = 1e-8;
/// Ridge added to the slope block when the plain LLR normal equations are ill-conditioned.
pub const LLR_RIDGE: f64 = 1e-8;
/// LLR falls back to NW above this condition number.
pub const LLR_MAX_CONDITION: f64 = 1e12;
pub const ENDPOINT_LOWER_ALPHA: f64 = 0.01;
pub const ENDPOINT_UPPER_ALPHA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Standardized features with raw-scale targets and the training statistics
/// used to standardize them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub feature_means: Array1<f64>,
    pub feature_stds: Array1<f64>,
    pub split: Split,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// `w_ij = k_ij^2`.
pub fn squared_weights(k: ArrayView2<f64>) -> Array2<f64> {
    k.mapv(|v| v * v)
}

/// Leave-one-out NW predictions `sum_(j!=i) w_ij y_j / (sum_(j!=i) w_ij + eps)`.
pub fn loo_nw_predict(weights: ArrayView2<f64>, y: ArrayView1<f64>, eps: f64) -> Result<Array1<f64>> {
    let n = y.len();
    check_len("weight matrix rows", n, weights.nrows())?;
    check_len("weight matrix columns", n, weights.ncols())?;
    if n < 2 {
        return Err(Error::InsufficientData {
            context: "leave-one-out prediction",
            required: 2,
            actual: n,
        });
    }
    Ok(Array1::from_shape_fn(n, |i| {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            if j != i {
                num += weights[[i, j]] * y[j];
                den += weights[[i, j]];
            }
        }
        num / (den + eps)
    }))
}

fn nw_from_weights(w: ArrayView1<f64>, y: ArrayView1<f64>, eps: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (wj, yj) in w.iter().zip(y.iter()) {
        num += wj * yj;
        den += wj;
    }
    num / (den + eps)
}

/// Intercept of the weighted least-squares fit of `y` on `(1, x_j - x_star)`,
/// or `None` when the normal equations stay singular after the slope ridge.
pub fn weighted_llr(
    weights: ArrayView1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    x_star: ArrayView1<f64>,
) -> Option<f64> {
    let d = x.ncols();
    let p = d + 1;
    let mut m = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut z = vec![0.0; p];
    for (j, row) in x.outer_iter().enumerate() {
        let wj = weights[j];
        z[0] = 1.0;
        for k in 0..d {
            z[k + 1] = row[k] - x_star[k];
        }
        for a in 0..p {
            rhs[a] += wj * z[a] * y[j];
            for b in 0..p {
                m[(a, b)] += wj * z[a] * z[b];
            }
        }
    }
    if !well_conditioned(&m) {
        for k in 1..p {
            m[(k, k)] += LLR_RIDGE;
        }
        if !well_conditioned(&m) {
            return None;
        }
    }
    let beta = m.cholesky()?.solve(&rhs);
    beta[0].is_finite().then_some(beta[0])
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    lo > 0.0 && hi / lo <= LLR_MAX_CONDITION
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrPrediction {
    pub value: f64,
    /// LLR was singular and the NW prediction was returned instead.
    pub fell_back: bool,
}

/// Training set with its feature maps precomputed for one frequency set.
#[derive(Debug, Clone)]
pub struct KernelRegressor<'a> {
    train: &'a RegressionDataset,
    freqs: &'a FrequencySet,
    features: Array2<f64>,
    eps: f64,
}

impl<'a> KernelRegressor<'a> {
    pub fn new(train: &'a RegressionDataset, freqs: &'a FrequencySet, eps: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let features = feature_matrix(train.x.view(), freqs)?;
        Ok(Self {
            train,
            freqs,
            features,
            eps,
        })
    }

    /// Squared-kernel weights of each query row against every training point.
    pub fn query_weights(&self, queries: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(squared_weights(
            cross_kernel(queries, self.features.view(), self.freqs)?.view(),
        ))
    }

    pub fn nw(&self, queries: ArrayView2<f64>) -> Result<Array1<f64>> {
        let w = self.query_weights(queries)?;
        Ok(w.outer_iter()
            .map(|row| nw_from_weights(row, self.train.y.view(), self.eps))
            .collect())
    }

    pub fn llr(&self, queries: ArrayView2<f64>) -> Result<Vec<LlrPrediction>> {
        let w = self.query_weights(queries)?;
        Ok(w.outer_iter()
            .zip(queries.outer_iter())
            .map(|(row, q)| self.llr_with_weights(row, q))
            .collect())
    }

    fn llr_with_weights(&self, w: ArrayView1<f64>, q: ArrayView1<f64>) -> LlrPrediction {
        match weighted_llr(w, self.train.x.view(), self.train.y.view(), q) {
            Some(value) => LlrPrediction {
                value,
                fell_back: false,
            },
            None => LlrPrediction {
                value: nw_from_weights(w, self.train.y.view(), self.eps),
                fell_back: true,
            },
        }
    }

    /// LLR on rows flagged by `rule`, NW elsewhere.
    pub fn predict_with_endpoint_correction(
        &self,
        queries: ArrayView2<f64>,
        rule: &EndpointRule,
    ) -> Result<CorrectedPredictions> {
        let mask = endpoint_mask(queries, rule)?;
        let w = self.query_weights(queries)?;
        let mut values = Array1::zeros(queries.nrows());
        let mut fallbacks = 0;
        for (i, (row, q)) in w.outer_iter().zip(queries.outer_iter()).enumerate() {
            values[i] = if mask[i] {
                let p = self.llr_with_weights(row, q);
                fallbacks += usize::from(p.fell_back);
                p.value
            } else {
                nw_from_weights(row, self.train.y.view(), self.eps)
            };
        }
        Ok(CorrectedPredictions {
            values,
            n_endpoint: mask.iter().filter(|&&m| m).count(),
            n_fallback: fallbacks,
            endpoint: mask,
        })
    }
}

fn single_row(x: ArrayView1<f64>) -> Array2<f64> {
    x.to_owned().insert_axis(Axis(0))
}

/// NW prediction at one query with squared-kernel weights.
pub fn nw_predict(x_star: ArrayView1<f64>, train: &RegressionDataset, freqs: &FrequencySet, eps: f64) -> Result<f64> {
    check_len("query dimension", train.dim(), x_star.len())?;
    Ok(KernelRegressor::new(train, freqs, eps)?.nw(single_row(x_star).view())?[0])
}

/// Local linear prediction at one query; `eps` only matters for the NW fallback.
pub fn llr_predict(
    x_star: ArrayView1<f64>,
    train: &RegressionDataset,
    freqs: &FrequencySet,
    eps: f64,
) -> Result<LlrPrediction> {
    check_len("query dimension", train.dim(), x_star.len())?;
    Ok(KernelRegressor::new(train, freqs, eps)?.llr(single_row(x_star).view())?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedPredictions {
    pub values: Array1<f64>,
    pub endpoint: Vec<bool>,
    pub n_endpoint: usize,
    pub n_fallback: usize,
}

pub fn predict_with_endpoint_correction(
    queries: ArrayView2<f64>,
    train: &RegressionDataset,
    freqs: &FrequencySet,
    eps: f64,
    rule: &EndpointRule,
) -> Result<CorrectedPredictions> {
    KernelRegressor::new(train, freqs, eps)?.predict_with_endpoint_correction(queries, rule)
}

/// Per-feature thresholds beyond which a query counts as an endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointRule {
    pub lower_q: Vec<f64>,
    pub upper_q: Vec<f64>,
}

impl EndpointRule {
    /// Training quantiles at 1% and 99%.
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        Self::fit_with(x, ENDPOINT_LOWER_ALPHA, ENDPOINT_UPPER_ALPHA)
    }

    pub fn fit_with(x: ArrayView2<f64>, lower_alpha: f64, upper_alpha: f64) -> Result<Self> {
        let mut lower_q = Vec::with_capacity(x.ncols());
        let mut upper_q = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let col = col.to_vec();
            lower_q.push(quantile(&col, lower_alpha)?);
            upper_q.push(quantile(&col, upper_alpha)?);
        }
        Ok(Self { lower_q, upper_q })
    }

    /// Flags nothing.
    pub fn never(d: usize) -> Self {
        Self {
            lower_q: vec![f64::NEG_INFINITY; d],
            upper_q: vec![f64::INFINITY; d],
        }
    }

    /// Flags every finite query.
    pub fn always(d: usize) -> Self {
        Self {
            lower_q: vec![f64::INFINITY; d],
            upper_q: vec![f64::NEG_INFINITY; d],
        }
    }
}

/// `true` where some coordinate is `<= lower_q` or `>= upper_q`.
pub fn endpoint_mask(queries: ArrayView2<f64>, rule: &EndpointRule) -> Result<Vec<bool>> {
    check_len("endpoint rule lower thresholds", queries.ncols(), rule.lower_q.len())?;
    check_len("endpoint rule upper thresholds", queries.ncols(), rule.upper_q.len())?;
    Ok(queries
        .outer_iter()
        .map(|q| {
            q.iter()
                .zip(rule.lower_q.iter().zip(&rule.upper_q))
                .any(|(x, (lo, hi))| x <= lo || x >= hi)
        })
        .collect())
}

/// Linear interpolation between order statistics at position `alpha (n - 1)`.
pub fn quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile input"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("quantile level {alpha} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = alpha * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn check_pair(y: ArrayView1<f64>, y_hat: ArrayView1<f64>) -> Result<()> {
    check_len("prediction vector", y.len(), y_hat.len())?;
    if y.len() < 2 {
        return Err(Error::InsufficientData {
            context: "metric",
            required: 2,
            actual: y.len(),
        });
    }
    Ok(())
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(y: ArrayView1<f64>, y_hat: ArrayView1<f64>) -> Result<f64> {
    check_pair(y, y_hat)?;
    let mean = y.mean().expect("non-empty");
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = y.iter().zip(y_hat.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(y: ArrayView1<f64>, y_hat: ArrayView1<f64>) -> Result<f64> {
    check_pair(y, y_hat)?;
    let mse = y.iter().zip(y_hat.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// One row of a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub split: Split,
    #[serde(rename = "S")]
    pub s: usize,
    pub r2: f64,
    pub rmse: f64,
    pub n_endpoint_queries: usize,
    pub n_llr_fallbacks: usize,
}

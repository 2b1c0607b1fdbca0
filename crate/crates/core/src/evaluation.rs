//! Inference-time evaluation of a spectral model at a given number of
//! random features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{r_squared, rmse, EndpointRule, KernelRegressor, RegressionDataset, Split};
use crate::rff::FrequencySet;
use crate::spectral::{sample_frequencies, visibles_of, Sampler, SpectralModelParams};

pub const DEFAULT_S_LIST: [usize; 5] = [100, 200, 500, 1000, 2000];

/// Draws `s` joint states and one frequency per state.
pub fn draw_frequencies<R: Rng + ?Sized>(
    params: &SpectralModelParams,
    s: usize,
    sampler: &mut Sampler,
    rng: &mut R,
) -> Result<FrequencySet> {
    let states = sampler.sample(params, s, rng)?;
    sample_frequencies(params, &visibles_of(&states), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain squared-kernel NW.
    Klnw,
    /// NW with LLR at endpoint queries.
    KlnwLlr,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Klnw => "klnw",
            Method::KlnwLlr => "klnw_llr",
        })
    }
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub dataset: String,
    pub method: Method,
    pub split: Split,
    #[serde(rename = "S")]
    pub s: usize,
    pub seed: u64,
    pub r2: f64,
    pub rmse: f64,
    pub n_endpoint_queries: usize,
    pub n_llr_fallbacks: usize,
}

/// Metrics of both methods on both splits for one frequency set.
///
/// Train predictions are query-form (the training point is its own neighbour);
/// the endpoint rule is fit on the training features.
pub fn evaluate_frequencies(
    dataset: &str,
    train: &RegressionDataset,
    test: &RegressionDataset,
    freqs: &FrequencySet,
    eps: f64,
    seed: u64,
) -> Result<Vec<EvaluationRow>> {
    let reg = KernelRegressor::new(train, freqs, eps)?;
    let rule = EndpointRule::fit(train.x.view())?;
    let mut rows = Vec::with_capacity(4);
    for ds in [train, test] {
        let nw = reg.nw(ds.x.view())?;
        let corrected = reg.predict_with_endpoint_correction(ds.x.view(), &rule)?;
        for (method, pred, n_end, n_fb) in [
            (Method::Klnw, &nw, 0, 0),
            (
                Method::KlnwLlr,
                &corrected.values,
                corrected.n_endpoint,
                corrected.n_fallback,
            ),
        ] {
            if pred.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("predictions"));
            }
            rows.push(EvaluationRow {
                dataset: dataset.to_string(),
                method,
                split: ds.split,
                s: freqs.len(),
                seed,
                r2: r_squared(ds.y.view(), pred.view())?,
                rmse: rmse(ds.y.view(), pred.view())?,
                n_endpoint_queries: n_end,
                n_llr_fallbacks: n_fb,
            });
        }
    }
    Ok(rows)
}

/// Samples `s` fresh frequencies on stream `s` of `seed` and evaluates.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_at(
    dataset: &str,
    params: &SpectralModelParams,
    train: &RegressionDataset,
    test: &RegressionDataset,
    s: usize,
    sampler: &mut Sampler,
    eps: f64,
    seed: u64,
) -> Result<Vec<EvaluationRow>> {
    if params.n_omega() != train.dim() {
        return Err(Error::Shape {
            context: "parameter frequency dimension vs dataset features",
            expected: train.dim(),
            actual: params.n_omega(),
        });
    }
    let mut rng = crate::derived_rng(seed, s as u64);
    let freqs = draw_frequencies(params, s, sampler, &mut rng)?;
    evaluate_frequencies(dataset, train, test, &freqs, eps, seed)
}

/// Mean and population standard deviation of a metric across rows that share
/// method, split and `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub method: Method,
    pub split: Split,
    #[serde(rename = "S")]
    pub s: usize,
    pub n_seeds: usize,
    pub r2_mean: f64,
    pub r2_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

pub fn summarize(rows: &[EvaluationRow]) -> Vec<SeedSummary> {
    let mut keys: Vec<(Method, Split, usize)> = Vec::new();
    for r in rows {
        let k = (r.method, r.split, r.s);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, split, s)| {
            let group: Vec<&EvaluationRow> = rows
                .iter()
                .filter(|r| (r.method, r.split, r.s) == (method, split, s))
                .collect();
            let (r2_mean, r2_std) = mean_std(group.iter().map(|r| r.r2));
            let (rmse_mean, rmse_std) = mean_std(group.iter().map(|r| r.rmse));
            SeedSummary {
                method,
                split,
                s,
                n_seeds: group.len(),
                r2_mean,
                r2_std,
                rmse_mean,
                rmse_std,
            }
        })
        .collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

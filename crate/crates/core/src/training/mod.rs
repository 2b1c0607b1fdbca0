//! Kernel learning by minimizing the leave-one-out NW error with a
//! score-function gradient through the spectral sampler.

mod history;
mod optim;

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::regression::{loo_nw_predict, squared_weights, RegressionDataset, DEFAULT_NW_EPS};
use crate::rff::{kernel_matrix, FrequencySet};
use crate::spectral::{
    sample_frequencies, visibles_of, ParamGradient, Sampler, SamplerBackend, SpectralModelParams, SpinState,
    SufficientStats,
};

pub use history::{IterationRecord, KernelSnapshot, TrainHistory, HISTORY_HEADER};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Reads per iteration; `None` means `ceil(N_train / 2)`.
    pub samples_per_iteration: Option<usize>,
    pub eps_nw: f64,
    pub seed: u64,
    pub backend: SamplerBackend,
    pub baseline_subtraction: bool,
    pub n_visible: usize,
    pub n_hidden: usize,
    /// Store the training kernel every this many iterations (and at the last one).
    pub kernel_snapshot_every: Option<usize>,
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.01,
            optimizer: OptimizerKind::default(),
            samples_per_iteration: None,
            eps_nw: DEFAULT_NW_EPS,
            seed: 0,
            backend: SamplerBackend::Exact,
            baseline_subtraction: false,
            n_visible: 4,
            n_hidden: 4,
            kernel_snapshot_every: None,
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn reads_for(&self, n_train: usize) -> usize {
        self.samples_per_iteration.unwrap_or(n_train.div_ceil(2))
    }

    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.eps_nw.is_nan() || self.eps_nw <= 0.0 {
            return Err(Error::Config("NW epsilon must be positive".into()));
        }
        if self.reads_for(n_train) < 2 {
            return Err(Error::Config("at least 2 samples per iteration are required".into()));
        }
        Ok(())
    }
}

/// `(1/N) sum_i (y_i - yhat_i^(-i))^2` under squared-kernel weights.
pub fn loo_mse_loss(k: ArrayView2<f64>, y: ArrayView1<f64>, eps: f64) -> Result<f64> {
    let yhat = loo_nw_predict(squared_weights(k).view(), y, eps)?;
    Ok(y.iter().zip(yhat.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// `dL/dk_ij` with every ordered entry treated as its own variable.
///
/// Entry `(i, j)` only enters the held-out prediction of row `i`, giving
/// `-(2/N) (y_i - yhat_i) (y_j - yhat_i) / (B_i + eps) * 2 k_ij`. The diagonal is zero.
pub fn loss_kernel_gradient(k: ArrayView2<f64>, y: ArrayView1<f64>, eps: f64) -> Result<Array2<f64>> {
    let n = y.len();
    let w = squared_weights(k);
    let yhat = loo_nw_predict(w.view(), y, eps)?;
    let mut grad = Array2::zeros((n, n));
    for i in 0..n {
        let denom: f64 = (0..n).filter(|&j| j != i).map(|j| w[[i, j]]).sum::<f64>() + eps;
        let outer = -2.0 / n as f64 * (y[i] - yhat[i]) / denom;
        for j in 0..n {
            if j != i {
                grad[[i, j]] = outer * (y[j] - yhat[i]) * 2.0 * k[[i, j]];
            }
        }
    }
    Ok(grad)
}

/// Gradient of `log N(omega | a + U v, diag(exp(z)))` for the Gaussian blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScore {
    pub a: Array1<f64>,
    pub u: Array2<f64>,
    pub z: Array1<f64>,
}

/// Full Gaussian log-density including its normalizer.
pub fn gaussian_log_density(omega: ArrayView1<f64>, v: &[i8], params: &SpectralModelParams) -> Result<f64> {
    check_len("frequency dimension", params.n_omega(), omega.len())?;
    check_len("visible spins", params.n_visible(), v.len())?;
    let mu = params.frequency_mean(v);
    Ok(omega
        .iter()
        .zip(mu.iter().zip(params.z.iter()))
        .map(|(w, (m, z))| -0.5 * (z + (2.0 * std::f64::consts::PI).ln()) - (w - m).powi(2) / (2.0 * z.exp()))
        .sum())
}

pub fn gaussian_score(omega: ArrayView1<f64>, v: &[i8], params: &SpectralModelParams) -> Result<GaussianScore> {
    check_len("frequency dimension", params.n_omega(), omega.len())?;
    check_len("visible spins", params.n_visible(), v.len())?;
    let mu = params.frequency_mean(v);
    let d = params.n_omega();
    let mut score = GaussianScore {
        a: Array1::zeros(d),
        u: Array2::zeros((d, v.len())),
        z: Array1::zeros(d),
    };
    for i in 0..d {
        let resid = omega[i] - mu[i];
        let inv_var = (-params.z[i]).exp();
        score.a[i] = resid * inv_var;
        for (j, &vj) in v.iter().enumerate() {
            score.u[[i, j]] = resid * f64::from(vj) * inv_var;
        }
        score.z[i] = 0.5 * (resid * resid * inv_var - 1.0);
    }
    Ok(score)
}

/// Gradient of `log P(v, h)` for the RBM blocks: sufficient statistics minus
/// their model expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScore {
    pub b: Array1<f64>,
    pub c: Array1<f64>,
    pub w: Array2<f64>,
}

/// Discrete score with the model expectation replaced by the batch average.
pub fn discrete_score(state: &SpinState, params: &SpectralModelParams, batch: &[SpinState]) -> Result<DiscreteScore> {
    let expectation = SufficientStats::batch_mean(batch)?;
    discrete_score_against(state, params, &expectation)
}

/// Discrete score against an arbitrary expectation of the sufficient statistics.
pub fn discrete_score_against(
    state: &SpinState,
    params: &SpectralModelParams,
    expectation: &SufficientStats,
) -> Result<DiscreteScore> {
    check_len("visible spins", params.n_visible(), state.v.len())?;
    check_len("hidden spins", params.n_hidden(), state.h.len())?;
    check_len("expectation visible length", params.n_visible(), expectation.v.len())?;
    check_len("expectation hidden length", params.n_hidden(), expectation.h.len())?;
    let own = SufficientStats::of_state(state);
    Ok(DiscreteScore {
        b: &own.v - &expectation.v,
        c: &own.h - &expectation.h,
        w: &own.vh - &expectation.vh,
    })
}

/// Per-sample contraction `c_s = sum_(i,j) G_ij cos(omega_s . (x_i - x_j))`.
pub fn kernel_contractions(loss_grad: ArrayView2<f64>, freqs: &FrequencySet, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    let n = x.nrows();
    check_len("loss gradient rows", n, loss_grad.nrows())?;
    check_len("loss gradient columns", n, loss_grad.ncols())?;
    check_len("input dimension", freqs.dim(), x.ncols())?;
    let mut cos = vec![0.0; n];
    let mut sin = vec![0.0; n];
    let mut out = Vec::with_capacity(freqs.len());
    for omega in freqs.omegas().outer_iter() {
        for (i, row) in x.outer_iter().enumerate() {
            let proj: f64 = omega.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
            (sin[i], cos[i]) = proj.sin_cos();
        }
        // cos(a - b) = cos a cos b + sin a sin b
        let mut total = 0.0;
        for i in 0..n {
            let (mut gc, mut gs) = (0.0, 0.0);
            for j in 0..n {
                gc += loss_grad[[i, j]] * cos[j];
                gs += loss_grad[[i, j]] * sin[j];
            }
            total += cos[i] * gc + sin[i] * gs;
        }
        out.push(total);
    }
    Ok(out)
}

/// Score-function estimate of `dL/dtheta` for aligned frequencies and joint states.
///
/// With `baseline_subtraction`, each sample's cosine is offset by the mean of
/// the other samples' cosines for the same pair, which leaves the expectation
/// unchanged.
#[allow(clippy::too_many_arguments)]
pub fn parameter_gradient(
    k: ArrayView2<f64>,
    y: ArrayView1<f64>,
    eps: f64,
    freqs: &FrequencySet,
    states: &[SpinState],
    x: ArrayView2<f64>,
    params: &SpectralModelParams,
    baseline_subtraction: bool,
) -> Result<ParamGradient> {
    check_len("states per frequency", freqs.len(), states.len())?;
    let loss_grad = loss_kernel_gradient(k, y, eps)?;
    let contractions = kernel_contractions(loss_grad.view(), freqs, x)?;
    score_weighted_gradient(&contractions, freqs, states, params, baseline_subtraction)
}

/// `(1/S) sum_s c_s score_s`, with the batch-centred discrete score.
pub fn score_weighted_gradient(
    contractions: &[f64],
    freqs: &FrequencySet,
    states: &[SpinState],
    params: &SpectralModelParams,
    baseline_subtraction: bool,
) -> Result<ParamGradient> {
    let s = states.len();
    check_len("contractions per state", s, contractions.len())?;
    check_len("frequencies per state", s, freqs.len())?;
    let weights: Vec<f64> = if baseline_subtraction {
        if s < 2 {
            return Err(Error::InsufficientData {
                context: "leave-one-out baseline",
                required: 2,
                actual: s,
            });
        }
        let mean = contractions.iter().sum::<f64>() / s as f64;
        let scale = s as f64 / (s - 1) as f64;
        contractions.iter().map(|c| scale * (c - mean)).collect()
    } else {
        contractions.to_vec()
    };
    let expectation = SufficientStats::batch_mean(states)?;
    let mut grad = SpectralModelParams::zeros(params.n_omega(), params.n_visible(), params.n_hidden());
    let inv_s = 1.0 / s as f64;
    for ((state, omega), &c) in states.iter().zip(freqs.omegas().outer_iter()).zip(&weights) {
        let g = gaussian_score(omega, &state.v, params)?;
        let d = discrete_score_against(state, params, &expectation)?;
        let f = c * inv_s;
        grad.a.scaled_add(f, &g.a);
        grad.u.scaled_add(f, &g.u);
        grad.z.scaled_add(f, &g.z);
        grad.b.scaled_add(f, &d.b);
        grad.c.scaled_add(f, &d.c);
        grad.w.scaled_add(f, &d.w);
    }
    Ok(grad)
}

/// Random stream for iteration `t` of a run seeded with `seed`.
fn iteration_rng(seed: u64, iteration: usize) -> rand_chacha::ChaCha8Rng {
    crate::derived_rng(seed, iteration as u64 + 1)
}

/// Initial parameters for `config` and a `d`-dimensional dataset.
pub fn initial_params(config: &TrainConfig, d: usize) -> SpectralModelParams {
    let mut rng = crate::derived_rng(config.seed, 0);
    SpectralModelParams::init_random(d, config.n_visible, config.n_hidden, &mut rng)
}

/// Trains from the seeded initialization with a sampler built from `config.backend`.
pub fn train(dataset: &RegressionDataset, config: &TrainConfig) -> Result<(SpectralModelParams, TrainHistory)> {
    let mut sampler = Sampler::new(config.backend.clone())?;
    train_with(dataset, config, initial_params(config, dataset.dim()), &mut sampler)
}

pub fn train_with(
    dataset: &RegressionDataset,
    config: &TrainConfig,
    init: SpectralModelParams,
    sampler: &mut Sampler,
) -> Result<(SpectralModelParams, TrainHistory)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            context: "training",
            required: 2,
            actual: n,
        });
    }
    config.validate(n)?;
    init.validate()?;
    check_len("model frequency dimension", dataset.dim(), init.n_omega())?;
    let reads = config.reads_for(n);
    let mut params = init.clone();
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, params.num_parameters());
    let mut records = Vec::with_capacity(config.iterations);
    let mut snapshots = Vec::new();

    for t in 0..config.iterations {
        let started = Instant::now();
        let mut rng = iteration_rng(config.seed, t);
        let states = sampler.sample(&params, reads, &mut rng)?;
        let freqs = sample_frequencies(&params, &visibles_of(&states), &mut rng)?;
        let k = kernel_matrix(dataset.x.view(), &freqs)?;
        let loss = loo_mse_loss(k.values(), dataset.y.view(), config.eps_nw)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        let grad = parameter_gradient(
            k.values(),
            dataset.y.view(),
            config.eps_nw,
            &freqs,
            &states,
            dataset.x.view(),
            &params,
            config.baseline_subtraction,
        )?;
        if !grad.is_finite() {
            return Err(Error::NonFinite("parameter gradient"));
        }
        params = optimizer_step(&params, &grad, &mut opt)?;
        if !params.is_finite() {
            return Err(Error::NonFinite("updated parameters"));
        }
        if let Some(every) = config.kernel_snapshot_every {
            if every > 0 && (t % every == 0 || t + 1 == config.iterations) {
                snapshots.push(KernelSnapshot {
                    iteration: t,
                    kernel: k.into_inner(),
                });
            }
        }
        records.push(IterationRecord {
            iteration: t,
            loss,
            grad_norms: grad.block_norms(),
            millis: if config.record_timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
    }

    let history = TrainHistory {
        records,
        initial_params: init,
        final_params: params.clone(),
        kernel_snapshots: snapshots,
    };
    Ok((params, history))
}

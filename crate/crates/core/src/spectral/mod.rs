//! RBM spectral distribution: parameters, Ising energies, exact enumeration,
//! and the Gaussian map from visible spins to continuous frequencies.
//!
//! All spins are Ising valued (`-1` / `+1`). When a state is addressed by an
//! integer index, unit `k` (visibles first, then hiddens) is `+1` iff bit `k`
//! of the index is set.

mod backend;
pub mod external;
mod gibbs;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rff::FrequencySet;

pub use backend::{Sampler, SamplerBackend};
pub use gibbs::{block_gibbs_sample, GibbsSchedule};

/// Largest `N_v + N_h` accepted by [`exact_joint_distribution`].
pub const MAX_JOINT_SPINS: usize = 24;
/// Largest `N_v` accepted by [`visible_marginal`].
pub const MAX_VISIBLE_SPINS: usize = 20;

/// Standard deviation of the Normal used by [`SpectralModelParams::init_random`].
pub const INIT_STD: f64 = 0.1;

/// Learnable parameters of the RBM and its Gaussian frequency head.
///
/// `u` is `n_omega x n_visible`, `w` is `n_visible x n_hidden`, and the
/// per-coordinate frequency variance is `exp(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModelParams {
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub c: Array1<f64>,
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub z: Array1<f64>,
}

/// Gradients share the parameter layout.
pub type ParamGradient = SpectralModelParams;

impl SpectralModelParams {
    pub fn zeros(n_omega: usize, n_visible: usize, n_hidden: usize) -> Self {
        Self {
            a: Array1::zeros(n_omega),
            b: Array1::zeros(n_visible),
            c: Array1::zeros(n_hidden),
            u: Array2::zeros((n_omega, n_visible)),
            w: Array2::zeros((n_visible, n_hidden)),
            z: Array1::zeros(n_omega),
        }
    }

    /// `a, b, c, U, W` i.i.d. Normal(0, 0.1^2); `z = 0` so every frequency
    /// coordinate starts with unit variance.
    pub fn init_random<R: Rng + ?Sized>(n_omega: usize, n_visible: usize, n_hidden: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut p = Self::zeros(n_omega, n_visible, n_hidden);
        p.a.mapv_inplace(|_| normal.sample(rng));
        p.b.mapv_inplace(|_| normal.sample(rng));
        p.c.mapv_inplace(|_| normal.sample(rng));
        p.u.mapv_inplace(|_| normal.sample(rng));
        p.w.mapv_inplace(|_| normal.sample(rng));
        p
    }

    pub fn n_omega(&self) -> usize {
        self.a.len()
    }

    pub fn n_visible(&self) -> usize {
        self.b.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.c.len()
    }

    /// Checks block shapes against `(a, b, c)` and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        let (no, nv, nh) = (self.n_omega(), self.n_visible(), self.n_hidden());
        check_len("z length", no, self.z.len())?;
        check_len("U rows", no, self.u.nrows())?;
        check_len("U columns", nv, self.u.ncols())?;
        check_len("W rows", nv, self.w.nrows())?;
        check_len("W columns", nh, self.w.ncols())?;
        if !self.is_finite() {
            return Err(Error::NonFinite("spectral model parameters"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|blk| blk.iter().all(|x| x.is_finite()))
    }

    /// Frequency variances `sigma_i^2 = exp(z_i)`.
    pub fn variances(&self) -> Array1<f64> {
        self.z.mapv(f64::exp)
    }

    /// Gaussian mean `a + U v` for a visible configuration.
    pub fn frequency_mean(&self, v: &[i8]) -> Array1<f64> {
        let mut mu = self.a.clone();
        for (i, m) in mu.iter_mut().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                *m += self.u[[i, j]] * f64::from(vj);
            }
        }
        mu
    }

    /// Flattens in block order `a, b, c, U, W, z` (row-major matrices).
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().iter().flat_map(|blk| blk.iter().copied()).collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat), reusing `self`'s shapes.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        check_len("flat parameter vector", self.num_parameters(), flat.len())?;
        let mut out = self.clone();
        let mut it = flat.iter().copied();
        for x in out.a.iter_mut().chain(out.b.iter_mut()).chain(out.c.iter_mut()) {
            *x = it.next().expect("length checked");
        }
        for x in out.u.iter_mut().chain(out.w.iter_mut()).chain(out.z.iter_mut()) {
            *x = it.next().expect("length checked");
        }
        Ok(out)
    }

    pub fn num_parameters(&self) -> usize {
        self.a.len() + self.b.len() + self.c.len() + self.u.len() + self.w.len() + self.z.len()
    }

    /// Euclidean norm of each block, in the order `a, b, c, U, W, z`.
    pub fn block_norms(&self) -> BlockNorms {
        let n = self.blocks().map(|blk| blk.iter().map(|x| x * x).sum::<f64>().sqrt());
        BlockNorms {
            a: n[0],
            b: n[1],
            c: n[2],
            u: n[3],
            w: n[4],
            z: n[5],
        }
    }

    fn blocks(&self) -> [Vec<f64>; 6] {
        [
            self.a.to_vec(),
            self.b.to_vec(),
            self.c.to_vec(),
            self.u.iter().copied().collect(),
            self.w.iter().copied().collect(),
            self.z.to_vec(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockNorms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub u: f64,
    pub w: f64,
    pub z: f64,
}

/// On-disk parameter snapshot with explicit shape metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub n_omega: usize,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

impl From<&SpectralModelParams> for ParamsFile {
    fn from(p: &SpectralModelParams) -> Self {
        let rows = |m: &Array2<f64>| m.outer_iter().map(|r| r.to_vec()).collect();
        Self {
            n_omega: p.n_omega(),
            n_visible: p.n_visible(),
            n_hidden: p.n_hidden(),
            a: p.a.to_vec(),
            b: p.b.to_vec(),
            c: p.c.to_vec(),
            u: rows(&p.u),
            w: rows(&p.w),
            z: p.z.to_vec(),
        }
    }
}

impl TryFrom<ParamsFile> for SpectralModelParams {
    type Error = Error;

    fn try_from(f: ParamsFile) -> Result<Self> {
        fn matrix(rows: Vec<Vec<f64>>, nrows: usize, ncols: usize, ctx: &'static str) -> Result<Array2<f64>> {
            check_len(ctx, nrows, rows.len())?;
            for r in &rows {
                check_len(ctx, ncols, r.len())?;
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            Ok(Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked"))
        }
        check_len("a length", f.n_omega, f.a.len())?;
        check_len("b length", f.n_visible, f.b.len())?;
        check_len("c length", f.n_hidden, f.c.len())?;
        let p = Self {
            u: matrix(f.u, f.n_omega, f.n_visible, "U shape")?,
            w: matrix(f.w, f.n_visible, f.n_hidden, "W shape")?,
            a: Array1::from(f.a),
            b: Array1::from(f.b),
            c: Array1::from(f.c),
            z: Array1::from(f.z),
        };
        p.validate()?;
        Ok(p)
    }
}

/// One joint Ising configuration of the RBM.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinState {
    pub v: Vec<i8>,
    pub h: Vec<i8>,
}

impl SpinState {
    pub fn new(v: Vec<i8>, h: Vec<i8>) -> Result<Self> {
        if v.iter().chain(h.iter()).any(|&s| s != 1 && s != -1) {
            return Err(Error::Config("spin values must be -1 or +1".into()));
        }
        Ok(Self { v, h })
    }

    pub fn from_index(index: usize, n_visible: usize, n_hidden: usize) -> Self {
        let spin = |k: usize| if index >> k & 1 == 1 { 1 } else { -1 };
        Self {
            v: (0..n_visible).map(spin).collect(),
            h: (n_visible..n_visible + n_hidden).map(spin).collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.v
            .iter()
            .chain(self.h.iter())
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .fold(0, |acc, (k, _)| acc | 1 << k)
    }

    /// Visibles followed by hiddens.
    pub fn concat(&self) -> Vec<i8> {
        self.v.iter().chain(self.h.iter()).copied().collect()
    }
}

fn check_state(state: &SpinState, params: &SpectralModelParams) -> Result<()> {
    check_len("visible spins", params.n_visible(), state.v.len())?;
    check_len("hidden spins", params.n_hidden(), state.h.len())
}

/// `E(v, h) = -b.v - c.h - v^T W h`.
pub fn rbm_energy(state: &SpinState, params: &SpectralModelParams) -> Result<f64> {
    check_state(state, params)?;
    Ok(energy_unchecked(&state.v, &state.h, params))
}

fn energy_unchecked(v: &[i8], h: &[i8], params: &SpectralModelParams) -> f64 {
    let mut e = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        let vi = f64::from(vi);
        e -= params.b[i] * vi;
        for (j, &hj) in h.iter().enumerate() {
            e -= params.w[[i, j]] * vi * f64::from(hj);
        }
    }
    for (j, &hj) in h.iter().enumerate() {
        e -= params.c[j] * f64::from(hj);
    }
    e
}

/// Normalizes log-weights into probabilities, returning them with `log Z`.
fn normalize_log_weights(mut logw: Vec<f64>) -> (Vec<f64>, f64) {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for lw in logw.iter_mut() {
        *lw = (*lw - max).exp();
        total += *lw;
    }
    for p in logw.iter_mut() {
        *p /= total;
    }
    (logw, max + total.ln())
}

/// Exact Boltzmann probabilities over all joint states, indexed as in [`SpinState::from_index`].
#[derive(Debug, Clone)]
pub struct JointTable {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub probs: Vec<f64>,
    pub log_partition: f64,
}

impl JointTable {
    pub fn prob(&self, state: &SpinState) -> f64 {
        self.probs[state.index()]
    }

    pub fn state(&self, index: usize) -> SpinState {
        SpinState::from_index(index, self.n_visible, self.n_hidden)
    }

    /// Sums out the hiddens; indexed by the low `n_visible` bits.
    pub fn visible_marginal(&self) -> Vec<f64> {
        let mask = (1usize << self.n_visible) - 1;
        let mut out = vec![0.0; 1 << self.n_visible];
        for (idx, p) in self.probs.iter().enumerate() {
            out[idx & mask] += p;
        }
        out
    }

    /// Exact expectations of the RBM sufficient statistics `(v, h, v h^T)`.
    pub fn sufficient_statistics(&self) -> SufficientStats {
        let mut stats = SufficientStats::zeros(self.n_visible, self.n_hidden);
        for (idx, &p) in self.probs.iter().enumerate() {
            stats.accumulate(&self.state(idx), p);
        }
        stats
    }

    /// Draws `n` i.i.d. states by inverting the cumulative table.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<SpinState> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let last = self.probs.len() - 1;
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                let idx = cdf.partition_point(|&c| c <= u).min(last);
                self.state(idx)
            })
            .collect()
    }
}

/// Mean values of `v`, `h` and `v h^T` under some distribution or batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub v: Array1<f64>,
    pub h: Array1<f64>,
    pub vh: Array2<f64>,
}

impl SufficientStats {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            v: Array1::zeros(n_visible),
            h: Array1::zeros(n_hidden),
            vh: Array2::zeros((n_visible, n_hidden)),
        }
    }

    pub fn of_state(state: &SpinState) -> Self {
        let mut s = Self::zeros(state.v.len(), state.h.len());
        s.accumulate(state, 1.0);
        s
    }

    /// Sample average over `batch`.
    pub fn batch_mean(batch: &[SpinState]) -> Result<Self> {
        let first = batch.first().ok_or(Error::Empty("state batch"))?;
        let mut s = Self::zeros(first.v.len(), first.h.len());
        let weight = 1.0 / batch.len() as f64;
        for state in batch {
            check_len("batch visible spins", first.v.len(), state.v.len())?;
            check_len("batch hidden spins", first.h.len(), state.h.len())?;
            s.accumulate(state, weight);
        }
        Ok(s)
    }

    fn accumulate(&mut self, state: &SpinState, weight: f64) {
        for (i, &vi) in state.v.iter().enumerate() {
            self.v[i] += weight * f64::from(vi);
            for (j, &hj) in state.h.iter().enumerate() {
                self.vh[[i, j]] += weight * f64::from(vi) * f64::from(hj);
            }
        }
        for (j, &hj) in state.h.iter().enumerate() {
            self.h[j] += weight * f64::from(hj);
        }
    }
}

/// Boltzmann distribution `exp(-E) / Z` over all `2^(N_v + N_h)` joint states.
pub fn exact_joint_distribution(params: &SpectralModelParams) -> Result<JointTable> {
    params.validate()?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    if nv + nh > MAX_JOINT_SPINS {
        return Err(Error::Capacity {
            what: "exact joint distribution",
            required: nv + nh,
            limit: MAX_JOINT_SPINS,
        });
    }
    let logw = (0..1usize << (nv + nh))
        .map(|idx| {
            let s = SpinState::from_index(idx, nv, nh);
            -energy_unchecked(&s.v, &s.h, params)
        })
        .collect();
    let (probs, log_partition) = normalize_log_weights(logw);
    Ok(JointTable {
        n_visible: nv,
        n_hidden: nh,
        probs,
        log_partition,
    })
}

/// `log(2 cosh x)` without overflow.
fn log_two_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p()
}

/// Visible marginal `P(v) ∝ exp(b.v) prod_j 2 cosh(c_j + sum_i W_ij v_i)`,
/// indexed by the visible bits.
pub fn visible_marginal(params: &SpectralModelParams) -> Result<Vec<f64>> {
    params.validate()?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    if nv > MAX_VISIBLE_SPINS {
        return Err(Error::Capacity {
            what: "visible marginal",
            required: nv,
            limit: MAX_VISIBLE_SPINS,
        });
    }
    let logw = (0..1usize << nv)
        .map(|idx| {
            let v = SpinState::from_index(idx, nv, 0).v;
            let mut lw: f64 = v.iter().zip(params.b.iter()).map(|(&s, b)| b * f64::from(s)).sum();
            for j in 0..nh {
                let field = params.c[j]
                    + v.iter()
                        .enumerate()
                        .map(|(i, &s)| params.w[[i, j]] * f64::from(s))
                        .sum::<f64>();
                lw += log_two_cosh(field);
            }
            lw
        })
        .collect();
    Ok(normalize_log_weights(logw).0)
}

/// Draws one frequency per visible configuration from
/// `Normal(a + U v, diag(exp(z)))`.
pub fn sample_frequencies<V, R>(params: &SpectralModelParams, visibles: &[V], rng: &mut R) -> Result<FrequencySet>
where
    V: AsRef<[i8]>,
    R: Rng + ?Sized,
{
    let d = params.n_omega();
    let std = params.z.mapv(|z| (0.5 * z).exp());
    let mut omegas = Array2::zeros((visibles.len(), d));
    for (s, v) in visibles.iter().enumerate() {
        let v = v.as_ref();
        check_len("visible spins", params.n_visible(), v.len())?;
        let mu = params.frequency_mean(v);
        for i in 0..d {
            let eps: f64 = StandardNormal.sample(rng);
            omegas[[s, i]] = mu[i] + std[i] * eps;
        }
    }
    FrequencySet::new(omegas)
}

/// Visible vectors of a batch of joint states.
pub fn visibles_of(states: &[SpinState]) -> Vec<&[i8]> {
    states.iter().map(|s| s.v.as_slice()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(seed: u64, nv: usize, nh: usize, scale: f64) -> SpectralModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, scale).unwrap();
        let mut p = SpectralModelParams::zeros(2, nv, nh);
        for x in p.b.iter_mut().chain(p.c.iter_mut()).chain(p.w.iter_mut()) {
            *x = n.sample(&mut rng);
        }
        p
    }

    #[test]
    fn energy_of_zero_params_is_zero() {
        let p = SpectralModelParams::zeros(3, 4, 4);
        for idx in [0, 17, 255] {
            assert_eq!(rbm_energy(&SpinState::from_index(idx, 4, 4), &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn energy_single_pair() {
        let mut p = SpectralModelParams::zeros(1, 1, 1);
        p.b[0] = 0.5;
        p.c[0] = -0.3;
        p.w[[0, 0]] = 0.2;
        let s = SpinState::new(vec![1], vec![1]).unwrap();
        assert!((rbm_energy(&s, &p).unwrap() + 0.4).abs() < 1e-15);
    }

    #[test]
    fn energy_shape_error() {
        let p = SpectralModelParams::zeros(1, 2, 2);
        let s = SpinState::new(vec![1], vec![1, 1]).unwrap();
        assert!(matches!(rbm_energy(&s, &p), Err(Error::Shape { .. })));
    }

    #[test]
    fn energy_matches_naive_triple_loop() {
        let p = random_params(3, 4, 3, 1.0);
        for idx in 0..128 {
            let s = SpinState::from_index(idx, 4, 3);
            let mut naive = 0.0;
            for i in 0..4 {
                naive -= p.b[i] * s.v[i] as f64;
            }
            for j in 0..3 {
                naive -= p.c[j] * s.h[j] as f64;
            }
            for i in 0..4 {
                for j in 0..3 {
                    naive -= p.w[[i, j]] * (s.v[i] * s.h[j]) as f64;
                }
            }
            assert!((rbm_energy(&s, &p).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn index_roundtrip() {
        for idx in 0..256 {
            assert_eq!(SpinState::from_index(idx, 4, 4).index(), idx);
        }
    }

    #[test]
    fn invalid_spin_rejected() {
        assert!(SpinState::new(vec![0], vec![1]).is_err());
    }

    #[test]
    fn zero_params_uniform_joint() {
        let t = exact_joint_distribution(&SpectralModelParams::zeros(1, 4, 4)).unwrap();
        assert_eq!(t.probs.len(), 256);
        assert!(t.probs.iter().all(|&p| (p - 1.0 / 256.0).abs() < 1e-15));
    }

    #[test]
    fn strong_coupling_aligns() {
        let mut p = SpectralModelParams::zeros(1, 1, 1);
        p.w[[0, 0]] = 10.0;
        let t = exact_joint_distribution(&p).unwrap();
        let aligned = t.prob(&SpinState::new(vec![1], vec![1]).unwrap());
        let anti = t.prob(&SpinState::new(vec![1], vec![-1]).unwrap());
        assert!((aligned - 0.5).abs() < 1e-8);
        assert!((anti / aligned - (-20.0f64).exp()).abs() < 1e-20);
    }

    #[test]
    fn joint_matches_brute_force_partition_sum() {
        let p = random_params(11, 4, 4, 0.7);
        let t = exact_joint_distribution(&p).unwrap();
        let weights: Vec<f64> = (0..256)
            .map(|idx| (-rbm_energy(&SpinState::from_index(idx, 4, 4), &p).unwrap()).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        for (pt, w) in t.probs.iter().zip(&weights) {
            assert!((pt - w / z).abs() < 1e-14);
        }
        assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t.log_partition - z.ln()).abs() < 1e-12);
    }

    #[test]
    fn capacity_errors() {
        let p = SpectralModelParams::zeros(1, 13, 12);
        assert!(matches!(exact_joint_distribution(&p), Err(Error::Capacity { .. })));
        let p = SpectralModelParams::zeros(1, 21, 0);
        assert!(matches!(visible_marginal(&p), Err(Error::Capacity { .. })));
    }

    #[test]
    fn marginal_matches_joint_row_sums() {
        for seed in 0..5 {
            let p = random_params(seed, 4, 4, 1.0);
            let from_joint = exact_joint_distribution(&p).unwrap().visible_marginal();
            let analytic = visible_marginal(&p).unwrap();
            for (x, y) in from_joint.iter().zip(&analytic) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn marginal_without_hiddens_is_product_of_biases() {
        let mut p = SpectralModelParams::zeros(1, 2, 0);
        p.b[0] = 0.3;
        p.b[1] = -1.1;
        let m = visible_marginal(&p).unwrap();
        let single = |b: f64, s: f64| (b * s).exp() / (2.0 * b.cosh());
        for (idx, prob) in m.iter().enumerate() {
            let v = SpinState::from_index(idx, 2, 0).v;
            let expect = single(0.3, v[0] as f64) * single(-1.1, v[1] as f64);
            assert!((prob - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_params_uniform_marginal() {
        let m = visible_marginal(&SpectralModelParams::zeros(1, 4, 4)).unwrap();
        assert!(m.iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn negating_biases_flips_distribution() {
        let p = random_params(5, 4, 4, 0.8);
        let mut q = p.clone();
        q.b.mapv_inplace(|x| -x);
        q.c.mapv_inplace(|x| -x);
        let tp = exact_joint_distribution(&p).unwrap();
        let tq = exact_joint_distribution(&q).unwrap();
        for idx in 0..256 {
            assert!((tp.probs[idx] - tq.probs[255 - idx]).abs() < 1e-14);
        }
    }

    #[test]
    fn vanishing_variance_gives_mean() {
        let mut p = SpectralModelParams::zeros(3, 2, 2);
        p.a = ndarray::arr1(&[0.5, -1.0, 2.0]);
        p.z.fill(-40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vis = vec![vec![1i8, -1], vec![-1, -1]];
        let f = sample_frequencies(&p, &vis, &mut rng).unwrap();
        for row in f.omegas().outer_iter() {
            for (x, y) in row.iter().zip(p.a.iter()) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn standard_normal_frequencies() {
        let p = SpectralModelParams::zeros(2, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vis = vec![vec![1i8, 1]; 100_000];
        let f = sample_frequencies(&p, &vis, &mut rng).unwrap();
        for col in f.omegas().columns() {
            let mean = col.mean().unwrap();
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 0.02);
            assert!((var - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn flat_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = SpectralModelParams::init_random(3, 4, 2, &mut rng);
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.num_parameters());
        assert_eq!(p.with_flat(&flat).unwrap(), p);
    }

    #[test]
    fn params_file_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SpectralModelParams::init_random(2, 4, 4, &mut rng);
        let text = serde_json::to_string(&ParamsFile::from(&p)).unwrap();
        let back: ParamsFile = serde_json::from_str(&text).unwrap();
        assert_eq!(SpectralModelParams::try_from(back).unwrap(), p);
    }

    #[test]
    fn params_file_shape_mismatch() {
        let mut f = ParamsFile::from(&SpectralModelParams::zeros(2, 2, 2));
        f.u.pop();
        assert!(SpectralModelParams::try_from(f).is_err());
    }
}

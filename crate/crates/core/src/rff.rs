//! Random Fourier features and kernel matrices built from a frequency set.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{check_len, Error, Result};
use crate::spectral::{visible_marginal, SpectralModelParams, SpinState};

/// `S` frequency vectors stored as the rows of an `S x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    omegas: Array2<f64>,
}

impl FrequencySet {
    pub fn new(omegas: Array2<f64>) -> Result<Self> {
        if omegas.nrows() == 0 {
            return Err(Error::Empty("frequency set"));
        }
        if omegas.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("frequency set"));
        }
        Ok(Self { omegas })
    }

    pub fn omegas(&self) -> ArrayView2<'_, f64> {
        self.omegas.view()
    }

    /// Number of frequencies `S`.
    pub fn len(&self) -> usize {
        self.omegas.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.omegas.ncols()
    }

    /// Writes `S` rows of `d` comma-separated values, no header.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.omegas.outer_iter() {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut flat = Vec::new();
        let mut width = None;
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            let w = *width.get_or_insert(rec.len());
            check_len("frequency CSV width", w, rec.len())?;
            for field in rec.iter() {
                flat.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad frequency value: {e}")))?,
                );
            }
            rows += 1;
        }
        let omegas = Array2::from_shape_vec((rows, width.unwrap_or(0)), flat).expect("widths checked");
        Self::new(omegas)
    }

    fn projections(&self, x: ArrayView1<f64>) -> impl Iterator<Item = f64> + '_ {
        let x = x.to_owned();
        self.omegas
            .outer_iter()
            .map(move |w| w.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
    }
}

/// `(1/sqrt(S)) (cos(w_1.x), ..., cos(w_S.x), sin(w_1.x), ..., sin(w_S.x))`.
pub fn feature_map(x: ArrayView1<f64>, freqs: &FrequencySet) -> Result<Array1<f64>> {
    check_len("feature_map input", freqs.dim(), x.len())?;
    let s = freqs.len();
    let scale = 1.0 / (s as f64).sqrt();
    let mut phi = Array1::zeros(2 * s);
    for (k, proj) in freqs.projections(x).enumerate() {
        let (sin, cos) = proj.sin_cos();
        phi[k] = scale * cos;
        phi[s + k] = scale * sin;
    }
    Ok(phi)
}

/// Feature maps of every row of `x`, as an `N x 2S` matrix.
pub fn feature_matrix(x: ArrayView2<f64>, freqs: &FrequencySet) -> Result<Array2<f64>> {
    check_len("feature_matrix input width", freqs.dim(), x.ncols())?;
    let mut out = Array2::zeros((x.nrows(), 2 * freqs.len()));
    for (i, row) in x.outer_iter().enumerate() {
        out.row_mut(i).assign(&feature_map(row, freqs)?);
    }
    Ok(out)
}

fn dot_clamped(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc.clamp(-1.0, 1.0)
}

/// `phi(x) . phi(x')`, clamped to `[-1, 1]` against rounding.
pub fn kernel_estimate(x: ArrayView1<f64>, x_prime: ArrayView1<f64>, freqs: &FrequencySet) -> Result<f64> {
    check_len("kernel_estimate second input", x.len(), x_prime.len())?;
    let (p, q) = (feature_map(x, freqs)?, feature_map(x_prime, freqs)?);
    Ok(dot_clamped(p.view(), q.view()))
}

/// `(1/S) sum_s cos(w_s . (x - x'))`; equal to [`kernel_estimate`] up to rounding.
pub fn kernel_estimate_cosine(x: ArrayView1<f64>, x_prime: ArrayView1<f64>, freqs: &FrequencySet) -> Result<f64> {
    check_len("kernel_estimate_cosine first input", freqs.dim(), x.len())?;
    check_len("kernel_estimate_cosine second input", x.len(), x_prime.len())?;
    let delta = &x - &x_prime;
    let total: f64 = freqs.projections(delta.view()).map(f64::cos).sum();
    Ok(total / freqs.len() as f64)
}

/// Dense symmetric kernel matrix over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(Array2<f64>);

impl KernelMatrix {
    /// Wraps a matrix after checking it is square, symmetric within `1e-12`,
    /// unit-diagonal within `1e-12` and bounded by one.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        check_len("kernel matrix columns", n, values.ncols())?;
        for i in 0..n {
            if (values[[i, i]] - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "kernel diagonal entry {i} is {}",
                    values[[i, i]]
                )));
            }
            for j in 0..i {
                if (values[[i, j]] - values[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Config(format!("kernel matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if values.iter().any(|x| !x.is_finite() || x.abs() > 1.0 + 1e-12) {
            return Err(Error::Config("kernel entries must lie in [-1, 1]".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        write_matrix_csv(self.0.view(), writer)
    }
}

pub(crate) fn write_matrix_csv<W: std::io::Write>(m: ArrayView2<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in m.outer_iter() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// `K_ij = phi(x_i) . phi(x_j)` for every pair of rows of `x`.
pub fn kernel_matrix(x: ArrayView2<f64>, freqs: &FrequencySet) -> Result<KernelMatrix> {
    if x.nrows() == 0 {
        return Err(Error::Empty("kernel input matrix"));
    }
    let phi = feature_matrix(x, freqs)?;
    let mut k = phi.dot(&phi.t());
    let n = k.nrows();
    for i in 0..n {
        k[[i, i]] = k[[i, i]].clamp(-1.0, 1.0);
        for j in i + 1..n {
            let v = k[[i, j]].clamp(-1.0, 1.0);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(KernelMatrix(k))
}

/// `K_qj = phi(q) . phi(x_j)` between query rows and reference rows.
pub fn cross_kernel(
    queries: ArrayView2<f64>,
    reference_features: ArrayView2<f64>,
    freqs: &FrequencySet,
) -> Result<Array2<f64>> {
    check_len(
        "cross_kernel feature width",
        2 * freqs.len(),
        reference_features.ncols(),
    )?;
    let phi_q = feature_matrix(queries, freqs)?;
    Ok(phi_q.dot(&reference_features.t()).mapv(|v| v.clamp(-1.0, 1.0)))
}

/// Exact kernel of the RBM spectral mixture,
/// `k(delta) = sum_v P(v) exp(-1/2 sum_i exp(z_i) delta_i^2) cos((a + U v) . delta)`.
///
/// The visible marginal is computed once at construction.
#[derive(Debug, Clone)]
pub struct ClosedFormKernel {
    components: Vec<(f64, Array1<f64>)>,
    variances: Array1<f64>,
}

impl ClosedFormKernel {
    pub fn new(params: &SpectralModelParams) -> Result<Self> {
        let marginal = visible_marginal(params)?;
        let nv = params.n_visible();
        let components = marginal
            .into_iter()
            .enumerate()
            .map(|(idx, p)| (p, params.frequency_mean(&SpinState::from_index(idx, nv, 0).v)))
            .collect();
        Ok(Self {
            components,
            variances: params.variances(),
        })
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn eval(&self, delta: ArrayView1<f64>) -> Result<f64> {
        check_len("closed_form_kernel delta", self.dim(), delta.len())?;
        let quad: f64 = self.variances.iter().zip(delta.iter()).map(|(s2, d)| s2 * d * d).sum();
        let envelope = (-0.5 * quad).exp();
        let mix: f64 = self
            .components
            .iter()
            .map(|(p, mu)| p * mu.iter().zip(delta.iter()).map(|(m, d)| m * d).sum::<f64>().cos())
            .sum();
        Ok((envelope * mix).clamp(-1.0, 1.0))
    }

    pub fn matrix(&self, x: ArrayView2<f64>) -> Result<KernelMatrix> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Empty("kernel input matrix"));
        }
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            k[[i, i]] = 1.0;
            for j in i + 1..n {
                let delta = &x.row(i) - &x.row(j);
                let v = self.eval(delta.view())?;
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        Ok(KernelMatrix(k))
    }
}

/// Single evaluation of the exact mixture kernel at `delta`.
pub fn closed_form_kernel(delta: ArrayView1<f64>, params: &SpectralModelParams) -> Result<f64> {
    ClosedFormKernel::new(params)?.eval(delta)
}

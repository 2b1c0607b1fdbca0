//! Kernel learning for Nadaraya-Watson regression with a spectral
//! distribution parameterized by a restricted Boltzmann machine.
//!
//! The pipeline: sample spins from the RBM, draw one frequency per visible
//! configuration from a Gaussian head, build a random-Fourier-feature kernel,
//! and train all parameters on the leave-one-out NW error with a
//! score-function gradient.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod regression;
pub mod rff;
pub mod spectral;
pub mod training;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use error::{Error, Result};
pub use regression::{EndpointRule, KernelRegressor, MetricsReport, RegressionDataset, Split};
pub use rff::{FrequencySet, KernelMatrix};
pub use spectral::{Sampler, SamplerBackend, SpectralModelParams, SpinState};
pub use training::{train, TrainConfig, TrainHistory};

/// Independent generator for `(seed, stream)`.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

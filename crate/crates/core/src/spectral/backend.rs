use rand::Rng;
use serde::{Deserialize, Serialize};

use super::external::{ExternalClient, ExternalEndpoint};
use super::gibbs::{block_gibbs_sample, GibbsSchedule};
use super::{exact_joint_distribution, SpectralModelParams, SpinState, MAX_JOINT_SPINS};
use crate::error::{Error, Result};

/// Source of Boltzmann-distributed RBM states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerBackend {
    /// Inverse-CDF draws from the enumerated joint table.
    #[default]
    Exact,
    BlockGibbs(GibbsSchedule),
    External(ExternalEndpoint),
}

impl SamplerBackend {
    pub fn gibbs() -> Self {
        Self::BlockGibbs(GibbsSchedule::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::BlockGibbs(_) => "gibbs",
            Self::External(_) => "external",
        }
    }
}

/// A connected backend. External backends hold their transport open
/// across calls.
#[derive(Debug)]
pub struct Sampler {
    backend: SamplerBackend,
    client: Option<ExternalClient>,
}

impl Sampler {
    pub fn new(backend: SamplerBackend) -> Result<Self> {
        let client = match &backend {
            SamplerBackend::External(endpoint) => Some(ExternalClient::connect(endpoint)?),
            SamplerBackend::BlockGibbs(schedule) => {
                schedule.validate()?;
                None
            }
            SamplerBackend::Exact => None,
        };
        Ok(Self { backend, client })
    }

    pub fn from_client(client: ExternalClient, endpoint: ExternalEndpoint) -> Self {
        Self {
            backend: SamplerBackend::External(endpoint),
            client: Some(client),
        }
    }

    pub fn backend(&self) -> &SamplerBackend {
        &self.backend
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        params: &SpectralModelParams,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<SpinState>> {
        if n == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        match &self.backend {
            SamplerBackend::Exact => {
                let spins = params.n_visible() + params.n_hidden();
                if spins > MAX_JOINT_SPINS {
                    return Err(Error::Capacity {
                        what: "exact sampler",
                        required: spins,
                        limit: MAX_JOINT_SPINS,
                    });
                }
                Ok(exact_joint_distribution(params)?.sample(n, rng))
            }
            SamplerBackend::BlockGibbs(schedule) => block_gibbs_sample(params, n, *schedule, rng),
            SamplerBackend::External(_) => {
                params.validate()?;
                self.client.as_mut().expect("connected in new").sample(params, n)
            }
        }
    }
}

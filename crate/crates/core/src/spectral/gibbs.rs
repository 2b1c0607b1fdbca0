use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_state, SpectralModelParams, SpinState};
use crate::error::{Error, Result};

/// Burn-in and thinning, both counted in full sweeps (hiddens then visibles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsSchedule {
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for GibbsSchedule {
    fn default() -> Self {
        Self {
            burn_in: 100,
            thinning: 5,
        }
    }
}

impl GibbsSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.thinning == 0 {
            return Err(Error::Config("Gibbs burn_in and thinning must be at least 1".into()));
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn draw_spin<R: Rng + ?Sized>(field: f64, rng: &mut R) -> i8 {
    // P(s = +1 | field) = logistic(2 * field)
    if rng.random::<f64>() < logistic(2.0 * field) {
        1
    } else {
        -1
    }
}

fn sweep<R: Rng + ?Sized>(state: &mut SpinState, params: &SpectralModelParams, rng: &mut R) {
    for j in 0..state.h.len() {
        let field = params.c[j]
            + state
                .v
                .iter()
                .enumerate()
                .map(|(i, &vi)| params.w[[i, j]] * f64::from(vi))
                .sum::<f64>();
        state.h[j] = draw_spin(field, rng);
    }
    for i in 0..state.v.len() {
        let field = params.b[i]
            + state
                .h
                .iter()
                .enumerate()
                .map(|(j, &hj)| params.w[[i, j]] * f64::from(hj))
                .sum::<f64>();
        state.v[i] = draw_spin(field, rng);
    }
}

/// Runs one persistent block-Gibbs chain and returns `n` thinned states.
pub fn block_gibbs_sample<R: Rng + ?Sized>(
    params: &SpectralModelParams,
    n: usize,
    schedule: GibbsSchedule,
    rng: &mut R,
) -> Result<Vec<SpinState>> {
    params.validate()?;
    schedule.validate()?;
    let mut state = SpinState {
        v: (0..params.n_visible())
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect(),
        h: (0..params.n_hidden())
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect(),
    };
    check_state(&state, params)?;
    for _ in 0..schedule.burn_in {
        sweep(&mut state, params, rng);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..schedule.thinning {
            sweep(&mut state, params, rng);
        }
        out.push(state.clone());
    }
    Ok(out)
}

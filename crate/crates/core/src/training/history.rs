use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::{BlockNorms, SpectralModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norms: BlockNorms,
    /// Wall time of the iteration; zero unless timing was requested.
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSnapshot {
    pub iteration: usize,
    pub kernel: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
    pub initial_params: SpectralModelParams,
    pub final_params: SpectralModelParams,
    /// Training kernel matrices as used at the recorded iterations.
    pub kernel_snapshots: Vec<KernelSnapshot>,
}

pub const HISTORY_HEADER: [&str; 9] = [
    "iteration",
    "loss",
    "grad_norm_a",
    "grad_norm_b",
    "grad_norm_c",
    "grad_norm_U",
    "grad_norm_W",
    "grad_norm_z",
    "millis",
];

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(HISTORY_HEADER)?;
        for r in &self.records {
            let g = &r.grad_norms;
            w.write_record([
                r.iteration.to_string(),
                r.loss.to_string(),
                g.a.to_string(),
                g.b.to_string(),
                g.c.to_string(),
                g.u.to_string(),
                g.w.to_string(),
                g.z.to_string(),
                r.millis.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

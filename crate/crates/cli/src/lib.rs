//! Command-line front end: training, evaluation sweeps, baselines and
//! figure-ready dumps. Each command writes `manifest.json` into its output
//! directory before doing any work.

pub mod args;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod output;

pub use args::Cli;
pub use error::{CliError, CliResult};

use args::Command;

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::SampleSpectrum(a) => commands::sample_spectrum(a),
        Command::KernelDump(a) => commands::kernel_dump(a),
        Command::ServeSampler(a) => commands::serve_sampler(a),
    }
}

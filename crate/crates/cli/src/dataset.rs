use std::path::{Path, PathBuf};

use boltzkern::data::{
    generate_sinc, known_dataset, load_csv, load_libsvm, prepare, DataSource, DatasetSidecar, RawTable, SplitIndices,
    SplitSpec, TargetColumn, CAP_SHUFFLE_SEED,
};
use boltzkern::RegressionDataset;
use serde::Serialize;

use crate::args::{DataArgs, DataFormat};
use crate::error::{CliError, CliResult};
use crate::output::{create, write_json};

/// Everything needed to rebuild a train/test pair.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub source: DataSource,
    pub split: SplitSpec,
    /// Rows kept after the capping shuffle, when one was applied.
    pub capped_to: Option<usize>,
    pub n: usize,
    pub d: usize,
}

pub struct Prepared {
    pub descriptor: DatasetDescriptor,
    pub train: RegressionDataset,
    pub test: RegressionDataset,
    pub indices: SplitIndices,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string()
}

/// Resolves the source without reading it; fails early on a missing path.
pub fn resolve_source(args: &DataArgs, seed: u64) -> CliResult<DataSource> {
    let split_seed = args.split_seed.unwrap_or(seed);
    if args.data == "sinc" {
        return Ok(DataSource::Sinc {
            n: args.sinc_n,
            d: args.sinc_d,
            noise_std: args.sinc_noise,
            seed: split_seed,
        });
    }
    let path = PathBuf::from(&args.data);
    if !path.is_file() {
        return Err(CliError::MissingData(path));
    }
    let format = args.format.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            DataFormat::Csv
        } else {
            DataFormat::Libsvm
        }
    });
    Ok(match format {
        DataFormat::Csv => DataSource::Csv {
            path,
            target: args.target_col.map_or(TargetColumn::Last, TargetColumn::Index),
            has_header: args.header,
        },
        DataFormat::Libsvm => DataSource::Libsvm { path },
    })
}

pub fn split_spec(args: &DataArgs, seed: u64) -> SplitSpec {
    SplitSpec {
        train_fraction: args.train_fraction,
        seed: args.split_seed.unwrap_or(seed),
        shuffle: true,
    }
}

pub fn load(source: &DataSource, split: SplitSpec) -> CliResult<Prepared> {
    let (name, mut table): (String, RawTable) = match source {
        DataSource::Sinc { n, d, noise_std, seed } => ("sinc".into(), generate_sinc(*n, *d, *noise_std, *seed)?),
        DataSource::Csv {
            path,
            target,
            has_header,
        } => (dataset_name(path), load_csv(path, *target, *has_header)?),
        DataSource::Libsvm { path } => (dataset_name(path), load_libsvm(path)?),
    };
    let mut capped_to = None;
    if let DataSource::Csv { path, .. } | DataSource::Libsvm { path } = source {
        if let Some(known) = known_dataset(path) {
            if let Some(cap) = known.cap.filter(|&c| table.len() > c) {
                log::info!(
                    "{}: keeping {cap} of {} rows (shuffle seed {CAP_SHUFFLE_SEED})",
                    known.name,
                    table.len()
                );
                table = table.truncate_shuffled(cap, CAP_SHUFFLE_SEED);
                capped_to = Some(cap);
            }
            if (table.len(), table.dim()) != (known.n, known.d) {
                log::warn!(
                    "{}: expected N={} d={}, found N={} d={}",
                    known.name,
                    known.n,
                    known.d,
                    table.len(),
                    table.dim()
                );
            }
        }
    }
    let (train, test, indices) = prepare(&table, &split)?;
    Ok(Prepared {
        descriptor: DatasetDescriptor {
            name,
            source: source.clone(),
            split,
            capped_to,
            n: table.len(),
            d: table.dim(),
        },
        train,
        test,
        indices,
    })
}

/// Standardized rows as `dataset.csv` plus `dataset.json` with the statistics and split.
pub fn write_cache(dir: &Path, data: &Prepared) -> CliResult<()> {
    let path = dir.join("dataset.csv");
    boltzkern::data::write_dataset_cache(&data.train, &data.test, create(&path)?)?;
    let sidecar = DatasetSidecar {
        source: data.descriptor.name.clone(),
        feature_means: data.train.feature_means.to_vec(),
        feature_stds: data.train.feature_stds.to_vec(),
        split: data.indices.clone(),
    };
    write_json(&dir.join("dataset.json"), &sidecar)
}

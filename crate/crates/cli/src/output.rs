use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use boltzkern::spectral::ParamsFile;
use boltzkern::SpectralModelParams;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::BadJson {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| CliError::BadJson {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_params(path: &Path, params: &SpectralModelParams) -> CliResult<()> {
    write_json(path, &ParamsFile::from(params))
}

pub fn read_params(path: &Path) -> CliResult<SpectralModelParams> {
    let file: ParamsFile = read_json(path)?;
    Ok(SpectralModelParams::try_from(file)?)
}

/// Written before any computation starts.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub argv: Vec<String>,
    pub out_dir: PathBuf,
    pub started_unix_secs: u64,
    pub seed: u64,
    #[serde(flatten)]
    pub details: &'a C,
}

pub fn write_manifest<C: Serialize>(dir: &Path, command: &'static str, seed: u64, details: &C) -> CliResult<()> {
    ensure_dir(dir)?;
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        argv: std::env::args().collect(),
        out_dir: dir.to_path_buf(),
        started_unix_secs: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        seed,
        details,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Rows to CSV with a header from the serialized field names.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(boltzkern::Error::from)?;
    }
    w.flush().map_err(io_err(path))
}

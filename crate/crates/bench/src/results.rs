//! Result rows and the `results.csv` / `config.json` pair.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const RESULTS_FILE: &str = "results.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const HEADER: [&str; 6] = [
    "experiment",
    "params",
    "metric",
    "value",
    "runtime_s",
    "seed",
];

/// One metric of one grid cell. `params` is a `;`-separated list of
/// `name=value` pairs in grid order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub params: String,
    pub metric: String,
    pub value: f64,
    pub runtime_s: f64,
    pub seed: u64,
}

/// Formats `name=value` pairs into a `params` field.
pub fn params(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Append-only CSV sink.
pub struct ResultWriter<W: Write> {
    inner: csv::Writer<W>,
    rows: usize,
}

impl ResultWriter<File> {
    /// Creates `dir` if needed, writes the config sidecar and opens
    /// `results.csv` with its header.
    pub fn create(dir: &Path, config: &ExperimentConfig) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(config).map_err(io::Error::other)?;
        fs::write(dir.join(CONFIG_FILE), json + "\n")?;
        ResultWriter::new(File::create(dir.join(RESULTS_FILE))?)
    }
}

impl<W: Write> ResultWriter<W> {
    pub fn new(sink: W) -> io::Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(sink);
        inner.write_record(HEADER).map_err(io::Error::other)?;
        Ok(ResultWriter { inner, rows: 0 })
    }

    pub fn push(&mut self, row: &ResultRow) -> io::Result<()> {
        self.inner.serialize(row).map_err(io::Error::other)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

/// Reads a results file back, checking the header.
pub fn read_results(path: &Path) -> io::Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let header = rdr.headers().map_err(io::Error::other)?;
    if header.iter().ne(HEADER) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "unexpected header",
        ));
    }
    rdr.deserialize()
        .map(|r| r.map_err(io::Error::other))
        .collect()
}

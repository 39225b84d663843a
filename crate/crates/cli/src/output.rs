//! CSV tables, the run manifest and the long-format plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{write_config, ExperimentConfig, OutputConfig};
use crate::error::CliError;

/// How volatility is computed, recorded in every manifest.
pub const VOLATILITY_DEFINITION: &str =
    "per-path sample standard deviation (n-1) of per-period realized returns, averaged over paths; standard errors across paths";
pub const RETURN_DEFINITION: &str =
    "(W[t+1] - s[t] - forced[t]) / W[t] - 1, with W = L + sum(I) + sum(K); outside cash is not return";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    /// Numbers keep 17 significant digits so that reruns compare exactly.
    pub fn render(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Num(v) if v.is_finite() => format!("{v:.16e}"),
            Self::Num(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `metrics`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| CliError::Csv(e.to_string()))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(path.display().to_string(), e.to_string())
}

pub fn write_table(dir: &Path, prefix: &str, table: &Table) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{prefix}{}.csv", table.name));
    std::fs::write(&path, table.to_csv()?).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// SHA-256 of the canonical config text, in hex. The `[output]` section is
/// left out: where results are written does not change them.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = OutputConfig { dir: String::new(), prefix: String::new() };
    let digest = Sha256::digest(write_config(&c).as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn manifest(cfg: &ExperimentConfig, files: &[PathBuf], failures: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tool = pacer {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "experiment = {}", cfg.experiment.kind.name());
    let _ = writeln!(s, "config_sha256 = {}", config_hash(cfg));
    let _ = writeln!(s, "master_seed = {}", cfg.experiment.seed);
    let _ = writeln!(s, "paths = {}", cfg.experiment.paths);
    let _ = writeln!(s, "mean_matrix_samples = {}", cfg.model.mean_samples);
    let _ = writeln!(s, "mean_matrix_seed = {}", cfg.model.mean_seed);
    let _ = writeln!(s, "volatility = {VOLATILITY_DEFINITION}");
    let _ = writeln!(s, "realized_return = {RETURN_DEFINITION}");
    for f in files {
        let name = f.file_name().map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
        let _ = writeln!(s, "file = {name}");
    }
    let _ = writeln!(s, "failures = {}", failures.len());
    for f in failures {
        let _ = writeln!(s, "failure = {f}");
    }
    s
}

// ---------------------------------------------------------------------------
// Plot data

/// Columns a metrics file must provide to be merged into plot data.
pub const PLOT_INPUT: [&str; 7] = ["experiment", "policy", "periods", "sigma", "realized_vol", "realized_ret", "se_ret"];
pub const PLOT_OUTPUT: [&str; 7] = ["experiment", "policy", "horizon", "sigma_config", "realized_vol", "realized_ret", "se_ret"];

/// Merges metrics CSVs into one tidy table with one row per
/// (experiment, policy, horizon, σ). Values are copied verbatim.
pub fn plot_data(files: &[PathBuf]) -> Result<Table, CliError> {
    let mut out = Table::new("plot_data", &PLOT_OUTPUT);
    for path in files {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let missing: Vec<String> = PLOT_INPUT
            .iter()
            .filter(|c| !header.iter().any(|h| h == *c))
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Schema { file: path.display().to_string(), missing });
        }
        let idx: Vec<usize> = PLOT_INPUT.iter().map(|c| header.iter().position(|h| h == c).unwrap()).collect();
        for rec in r.records() {
            let rec = rec?;
            out.push(idx.iter().map(|i| Cell::Text(rec[*i].to_string())).collect());
        }
    }
    Ok(out)
}

//! File formats.
//!
//! * snapshot CSV: `x[,y[,z]],rho,phi`, one row per node in storage order;
//! * walker CSV: `id,x[,y[,z]]`, one row per walker;
//! * NDJSON series: one JSON object per line, each with a `schema` field;
//! * manifest and reports: pretty-printed JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use entropic::field::{Field, Grid};
use entropic::madelung::State;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_SCHEMA: &str = "entropic.manifest.v1";
pub const EVOLVE_LOG_SCHEMA: &str = "entropic.evolve-log.v1";
pub const DISTANCE_SCHEMA: &str = "entropic.distance.v1";
pub const SHIFT_SCHEMA: &str = "entropic.shift.v1";
pub const REPORT_SCHEMA: &str = "entropic.report.v1";

const AXES: [&str; 3] = ["x", "y", "z"];

/// Everything needed to reproduce an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Canonical configuration text.
    pub config: String,
    pub snapshots: Vec<SnapshotEntry>,
    pub files: Vec<String>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: usize,
    pub time: f64,
    pub file: String,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str, seed: u64, config: String) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            seed,
            config,
            snapshots: Vec::new(),
            files: Vec::new(),
            summary: serde_json::Map::new(),
        }
    }

    pub fn summary(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{} is not a valid manifest: {e}", path.display())))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(CliError::Config(format!("unsupported manifest schema {}", m.schema)));
        }
        Ok(m)
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Line-per-record JSON writer.
pub struct Ndjson {
    out: BufWriter<File>,
}

impl Ndjson {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        Ok(Ndjson {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn record(&mut self, value: &impl Serialize) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.out, value).expect("record serializes");
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_snapshot(path: &Path, state: &State) -> Result<(), CliError> {
    let grid = *state.grid();
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<&str> = AXES[..grid.dim()].iter().copied().chain(["rho", "phi"]).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..grid.len() {
        let x = grid.node(i);
        for xa in &x[..grid.dim()] {
            write!(out, "{xa:?},")?;
        }
        writeln!(out, "{:?},{:?}", state.rho.values()[i], state.phi.values()[i])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a snapshot CSV laid out on `grid`; node coordinates must match.
pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<State, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let dim = grid.dim();
    let expected: Vec<&str> = AXES[..dim].iter().copied().chain(["rho", "phi"]).collect();
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(format!("{}: header must be {}", path.display(), expected.join(",")));
    }
    let mut rho = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len());
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("{}: {e}", path.display()))?;
        if i >= grid.len() {
            return Err(format!("{}: more rows than grid nodes", path.display()));
        }
        let values: Vec<f64> = row
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}: row {}: {e}", path.display(), i + 1))?;
        let node = grid.node(i);
        let tol = 1e-9 * grid.extents().iter().fold(1.0f64, |m, l| m.max(*l));
        if (0..dim).any(|a| (values[a] - node[a]).abs() > tol) {
            return Err(format!("{}: row {} is not at grid node {i}", path.display(), i + 1));
        }
        rho.push(values[dim]);
        phi.push(values[dim + 1]);
    }
    if rho.len() != grid.len() {
        return Err(format!("{}: {} rows for {} grid nodes", path.display(), rho.len(), grid.len()));
    }
    let rho = Field::new(*grid, rho).map_err(|e| e.to_string())?;
    let phi = Field::new(*grid, phi).map_err(|e| e.to_string())?;
    State::new(rho, phi, 0.0).map_err(|e| e.to_string())
}

/// Reads a `t,x[,y[,z]]` trajectory table; returns the times and one
/// sample vector per axis.
pub fn read_trajectory(path: &Path, dim: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut times = Vec::new();
    let mut samples = vec![Vec::new(); dim];
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("{}: {e}", path.display()))?;
        if row.len() != dim + 1 {
            return Err(format!("{}: row {} needs {} columns", path.display(), i + 1, dim + 1));
        }
        let values: Vec<f64> = row
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}: row {}: {e}", path.display(), i + 1))?;
        times.push(values[0]);
        for a in 0..dim {
            samples[a].push(values[a + 1]);
        }
    }
    Ok((times, samples))
}

pub fn snapshot_name(index: usize) -> PathBuf {
    PathBuf::from("snapshots").join(format!("snapshot_{index:04}.csv"))
}

/// Forward-slash relative path for manifests.
pub fn rel(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

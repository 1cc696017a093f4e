//! CSV writers for the fixed schemas and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! depends only on the values and not on the platform or thread count.

use std::fs::File;
use std::path::{Path, PathBuf};

use mscale::estimators::Estimate;
use mscale::measure::{MeasureSample, TestFunction};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const MEASURES_HEADER: [&str; 4] = ["replication_id", "t_index", "t", "indicator"];
pub const PAIRINGS_HEADER: [&str; 3] = ["replication_id", "g_name", "value"];
pub const ESTIMATES_HEADER: [&str; 4] = ["name", "value", "std_error", "n"];
pub const DISTANCES_HEADER: [&str; 5] = ["g_name", "n_a", "n_b", "ks", "w1"];

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Output directory plus the list of files written into it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes a CSV with the given header; `rows` yields string records.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| io(&path, e))?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        w.write_record(header).map_err(|e| io(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn measures(&mut self, samples: &[MeasureSample]) -> Result<(), CliError> {
        let rows = samples.iter().enumerate().flat_map(|(rep, m)| {
            m.indicators.iter().enumerate().map(move |(i, &b)| {
                vec![rep.to_string(), i.to_string(), num(m.grid.time(i)), b.to_string()]
            })
        });
        self.csv("measures.csv", &MEASURES_HEADER, rows)
    }

    /// `(replication_id, g_name, value)` for each row of `values`, one value
    /// per test function.
    pub fn pairings(&mut self, tests: &[TestFunction], values: &[Vec<f64>]) -> Result<(), CliError> {
        let rows = values.iter().enumerate().flat_map(|(rep, row)| {
            tests
                .iter()
                .zip(row)
                .map(move |(g, &v)| vec![rep.to_string(), g.name().to_string(), num(v)])
        });
        self.csv("pairings.csv", &PAIRINGS_HEADER, rows)
    }

    pub fn estimates(&mut self, rows: &[(String, Estimate)]) -> Result<(), CliError> {
        let rows = rows.iter().map(|(name, e)| {
            vec![name.clone(), num(e.value), num(e.std_error), e.n_samples.to_string()]
        });
        self.csv("estimates.csv", &ESTIMATES_HEADER, rows)
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// A pairings CSV read back as `g_name → values` in replication order.
pub fn read_pairings(path: &Path) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    let header = r.headers().map_err(|e| io(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != PAIRINGS_HEADER {
        return Err(CliError::Schema(format!(
            "{}: expected header {}",
            path.display(),
            PAIRINGS_HEADER.join(",")
        )));
    }
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| io(path, e))?;
        let value: f64 = record[2]
            .parse()
            .map_err(|_| CliError::Schema(format!("{}: row {}: bad value `{}`", path.display(), line + 2, &record[2])))?;
        match out.iter_mut().find(|(g, _)| g == &record[1]) {
            Some((_, v)) => v.push(value),
            None => out.push((record[1].to_string(), vec![value])),
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub derived: Map<String, Value>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        std::fs::write(&path, body).map_err(|e| io(&path, e))
    }
}

//! Result rows and their CSV and JSON renderings.

use std::io;
use std::path::{Path, PathBuf};

use insider_core::Estimate;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// How a row's pass flag is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Check {
    /// `|value - target| <= threshold`.
    Within { target: f64, threshold: f64 },
    /// `value < threshold`.
    Below { threshold: f64 },
}

impl Check {
    fn threshold(&self) -> f64 {
        match *self {
            Check::Within { threshold, .. } | Check::Below { threshold } => threshold,
        }
    }

    fn passes(&self, value: f64) -> bool {
        match *self {
            Check::Within { target, threshold } => (value - target).abs() <= threshold,
            Check::Below { threshold } => value < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub quantity: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n_reps: usize,
    pub check: Option<Check>,
}

impl Row {
    pub fn estimate(experiment: &str, quantity: &str, e: &Estimate) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            value: e.mean,
            std_error: Some(e.std_error),
            n_reps: e.n_reps,
            check: None,
        }
    }

    pub fn scalar(experiment: &str, quantity: &str, value: f64, n_reps: usize) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            value,
            std_error: None,
            n_reps,
            check: None,
        }
    }

    pub fn with_check(mut self, check: Check) -> Self {
        self.check = Some(check);
        self
    }

    pub fn pass(&self) -> Option<bool> {
        self.check.map(|c| c.passes(self.value))
    }
}

/// One CSV record: experiment, quantity, value, std_error, n_reps, threshold, pass.
#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    quantity: &'a str,
    value: f64,
    std_error: Option<f64>,
    n_reps: usize,
    threshold: Option<f64>,
    pass: Option<bool>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    quantity: &'a str,
    value: f64,
    std_error: Option<f64>,
    n_reps: usize,
    threshold: Option<f64>,
    pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<Check>,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config_hash: String,
    timestamp: u64,
    config: &'a ExperimentConfig,
    rows: Vec<JsonRow<'a>>,
    all_pass: bool,
}

/// SHA-256 of the resolved config in its canonical JSON form.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn all_pass(rows: &[Row]) -> bool {
    rows.iter().all(|r| r.pass() != Some(false))
}

pub fn to_csv(rows: &[Row]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            experiment: &r.experiment,
            quantity: &r.quantity,
            value: r.value,
            std_error: r.std_error,
            n_reps: r.n_reps,
            threshold: r.check.map(|c| c.threshold()),
            pass: r.pass(),
        })
        .expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn to_json(command: &str, config: &ExperimentConfig, rows: &[Row], timestamp: u64) -> Vec<u8> {
    let summary = Summary {
        command,
        config_hash: config_hash(config),
        timestamp,
        config,
        rows: rows
            .iter()
            .map(|r| JsonRow {
                experiment: &r.experiment,
                quantity: &r.quantity,
                value: r.value,
                std_error: r.std_error,
                n_reps: r.n_reps,
                threshold: r.check.map(|c| c.threshold()),
                pass: r.pass(),
                check: r.check,
            })
            .collect(),
        all_pass: all_pass(rows),
    };
    let mut out = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    out.push(b'\n');
    out
}

/// Writes `<command>.csv` and `<command>.json` into `dir`.
pub fn write(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    rows: &[Row],
    timestamp: u64,
) -> io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{command}.csv"));
    let json_path = dir.join(format!("{command}.json"));
    std::fs::write(&csv_path, to_csv(rows))?;
    std::fs::write(&json_path, to_json(command, config, rows, timestamp))?;
    Ok((csv_path, json_path))
}

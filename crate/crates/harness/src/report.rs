//! Report types and their CSV/JSON files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::fit::RateFit;

/// Acceptance region of a check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Le(f64),
    Lt(f64),
    Ge(f64),
    Within([f64; 2]),
}

impl Threshold {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Threshold::Le(x) => v <= x,
            Threshold::Lt(x) => v < x,
            Threshold::Ge(x) => v >= x,
            Threshold::Within([lo, hi]) => lo <= v && v <= hi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the quantity could not be measured.
    pub value: Option<f64>,
    pub threshold: Threshold,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: Threshold) -> Self {
        let ok = value.is_finite();
        Self {
            name: name.into(),
            value: ok.then_some(value),
            pass: ok && threshold.admits(value),
            threshold,
        }
    }

    pub fn failed(name: impl Into<String>, threshold: Threshold) -> Self {
        Self {
            name: name.into(),
            value: None,
            threshold,
            pass: false,
        }
    }

    pub fn line(&self) -> String {
        let value = self.value.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        let status = if self.pass { "PASS" } else { "FAIL" };
        format!("{status} {:<28} value={value} threshold={:?}", self.name, self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n_modes: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInfo {
    pub w0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// Time step shared by every run of the sweep.
    pub dt: f64,
}

/// One `eps` of a sweep. The first nine fields are the CSV columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Row {
    pub epsilon: f64,
    pub err_phi_leading: f64,
    pub err_a_leading: f64,
    pub err_phi_corrected: f64,
    pub err_a_corrected: f64,
    pub err_wf_L2: f64,
    pub err_wf_Linf: f64,
    pub err_rho_L1: f64,
    pub err_J_L1: f64,
    pub err_rho_Linf: f64,
    pub err_J_Linf: f64,
    /// Largest relative change of `int |u|^2` along the run.
    pub mass_drift: f64,
    /// `|||a|||^2 / (2 ||a0||^2)`.
    pub apriori_amplitude: f64,
    /// `|||phi|||^2 / (4 ||phi0||^2 + ||a0||^{4 sigma})`.
    pub apriori_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
struct CsvRow {
    epsilon: f64,
    err_phi_leading: f64,
    err_a_leading: f64,
    err_phi_corrected: f64,
    err_a_corrected: f64,
    err_wf_L2: f64,
    err_wf_Linf: f64,
    err_rho_L1: f64,
    err_J_L1: f64,
}

impl From<&Row> for CsvRow {
    fn from(r: &Row) -> Self {
        Self {
            epsilon: r.epsilon,
            err_phi_leading: r.err_phi_leading,
            err_a_leading: r.err_a_leading,
            err_phi_corrected: r.err_phi_corrected,
            err_a_corrected: r.err_a_corrected,
            err_wf_L2: r.err_wf_L2,
            err_wf_Linf: r.err_wf_Linf,
            err_rho_L1: r.err_rho_L1,
            err_J_L1: r.err_J_L1,
        }
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "epsilon",
    "err_phi_leading",
    "err_a_leading",
    "err_phi_corrected",
    "err_a_corrected",
    "err_wf_L2",
    "err_wf_Linf",
    "err_rho_L1",
    "err_J_L1",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slope {
    Fit(RateFit),
    Insufficient(String),
}

impl Slope {
    pub fn fit(&self) -> Option<&RateFit> {
        match self {
            Slope::Fit(f) => Some(f),
            Slope::Insufficient(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub leading: Slope,
    pub corrected: Slope,
    pub wavefunction: Slope,
}

/// A solver abort for one `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub epsilon: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub grid: GridInfo,
    pub schedule: ScheduleInfo,
    pub rows: Vec<Row>,
    pub slopes: Slopes,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
    /// Non-fatal observations, such as errors that fail to decrease with eps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn write_csv(report: &Report, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    if report.rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for row in &report.rows {
        w.serialize(CsvRow::from(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(report: &Report, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `report.csv` and `report.json` into `dir`, creating it if needed.
pub fn emit_report(report: &Report, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let csv_path = dir.join("report.csv");
    let json_path = dir.join("report.json");
    write_csv(report, &csv_path)?;
    write_json(report, &json_path)?;
    Ok((csv_path, json_path))
}

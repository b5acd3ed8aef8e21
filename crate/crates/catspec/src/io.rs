//! CSV and JSON files.

use std::fs;
use std::path::{Path, PathBuf};

use catspec_core::filter::{FilterCurve, FilterMatrix};
use catspec_core::reconstruct::SpectrumEstimate;
use catspec_core::simulate::MeasurementRecord;
use catspec_core::thermometry::FlopPoint;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One row of the measurement table, shared by simulated and lab data.
/// `seed` may be left empty for measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub label: String,
    pub tau_s: f64,
    #[serde(rename = "S")]
    pub num_phase_shifts: usize,
    pub shape: String,
    pub omega_max_rad_s: f64,
    pub p1_mean: f64,
    pub p1_std: f64,
    #[serde(rename = "M")]
    pub blocks: usize,
    pub r: usize,
    pub seed: Option<u64>,
}

pub const MEASUREMENT_COLUMNS: [&str; 10] = [
    "label",
    "tau_s",
    "S",
    "shape",
    "omega_max_rad_s",
    "p1_mean",
    "p1_std",
    "M",
    "r",
    "seed",
];

pub const THERMOMETRY_COLUMNS: [&str; 3] = ["t_s", "p1", "sigma"];

impl From<&MeasurementRecord> for MeasurementRow {
    fn from(r: &MeasurementRecord) -> Self {
        MeasurementRow {
            label: r.label.clone(),
            tau_s: r.duration_s,
            num_phase_shifts: r.num_phase_shifts,
            shape: r.shape.clone(),
            omega_max_rad_s: r.max_rabi,
            p1_mean: r.p1_mean,
            p1_std: r.p1_std,
            blocks: r.blocks,
            r: r.reps_per_block,
            seed: Some(r.seed),
        }
    }
}

#[derive(Deserialize)]
struct FlopRow {
    t_s: f64,
    p1: f64,
    sigma: f64,
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let message = format!("{}: {e}", path.display());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        _ => CliError::Validation(message),
    }
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a table with exactly the given columns (in any order), reporting the
/// row, line and column of the first bad field.
fn read_table<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> CliResult<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    for c in columns {
        if !header.iter().any(|h| h == c) {
            return Err(CliError::Validation(format!(
                "{}: missing column `{c}` (expected {})",
                path.display(),
                columns.join(", ")
            )));
        }
    }
    if let Some(extra) = header.iter().find(|h| !columns.contains(&h.as_str())) {
        return Err(CliError::Validation(format!(
            "{}: unexpected column `{extra}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let row: T = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field().and_then(|f| header.get(f as usize)).cloned(),
                _ => None,
            };
            let detail = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.kind().to_string(),
                _ => e.to_string(),
            };
            match column {
                Some(c) => CliError::Validation(format!(
                    "{}: row {} (line {line}), column `{c}`: {detail}",
                    path.display(),
                    i + 1
                )),
                None => CliError::Validation(format!("{}: row {} (line {line}): {detail}", path.display(), i + 1)),
            }
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_measurements(path: &Path) -> CliResult<Vec<MeasurementRow>> {
    read_table(path, &MEASUREMENT_COLUMNS)
}

pub fn write_measurements(path: &Path, rows: &[MeasurementRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_flops(path: &Path) -> CliResult<Vec<FlopPoint>> {
    let rows: Vec<FlopRow> = read_table(path, &THERMOMETRY_COLUMNS)?;
    Ok(rows.into_iter().map(|r| (r.t_s, r.p1, r.sigma)).collect())
}

pub fn write_flops(path: &Path, data: &[FlopPoint]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(THERMOMETRY_COLUMNS).map_err(|e| csv_err(path, e))?;
    for (t, p, s) in data {
        w.write_record([t.to_string(), p.to_string(), s.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// `omega_rad_s, value_per_hz2`, plus `omega_tau_over_2pi` when `tau` is given.
pub fn write_curve(path: &Path, curve: &FilterCurve, tau: Option<f64>) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["omega_rad_s", "value_per_hz2"];
    if tau.is_some() {
        header.push("omega_tau_over_2pi");
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (omega, value) in curve.omegas.iter().zip(&curve.values) {
        let mut rec = vec![omega.to_string(), value.to_string()];
        if let Some(tau) = tau {
            rec.push((omega * tau / (2.0 * std::f64::consts::PI)).to_string());
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Header `label, omega_0, ..., omega_{n-1}`, then one row per sequence.
pub fn write_matrix(path: &Path, f: &FilterMatrix) -> CliResult<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain(f.omegas.iter().map(f64::to_string))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for q in 0..f.rows() {
        let rec: Vec<String> = std::iter::once(f.labels[q].clone())
            .chain(f.row(q).iter().map(f64::to_string))
            .collect();
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_spectrum(path: &Path, est: &SpectrumEstimate) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["omega_rad_s", "psd_hz2_per_hz", "band_low", "band_high"])
        .map_err(|e| csv_err(path, e))?;
    for i in 0..est.omegas.len() {
        w.write_record([
            est.omegas[i].to_string(),
            est.s[i].to_string(),
            est.band_low[i].to_string(),
            est.band_high[i].to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Generic table writer for rows that serialise flat.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// File name for a sequence label: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn label_file(dir: &Path, label: &str, suffix: &str) -> PathBuf {
    let stem: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{stem}{suffix}"))
}

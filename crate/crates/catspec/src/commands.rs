//! The six workflows. Each writes its files under the output directory and
//! returns the lines to print.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use catspec_core::analysis::sensitivity_report;
use catspec_core::filter::{
    bandwidth_fwhm, default_band, filter_curve, filter_matrix, filter_value, peak_frequency, uniform_grid,
    DEFAULT_SAMPLES_PER_SEGMENT,
};
use catspec_core::noise::{NoiseModel, Tone};
use catspec_core::reconstruct::{default_lambda_grid, reconstruct, MeasurementSet, ReconstructionConfig};
use catspec_core::rng::derive_seed;
use catspec_core::sequence::{sample_waveform, SequenceSpec};
use catspec_core::simulate::{expected_p1, measurement_campaign};
use catspec_core::thermometry::thermometry_fit;
use catspec_core::{Kernel, ModeConfig};
use serde::Serialize;

use crate::config::CampaignConfig;
use crate::error::{CliError, CliResult};
use crate::io;

/// Frequency-grid overrides from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Grid {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub n: Option<usize>,
}

/// Where a command reads its config from and writes to.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: CampaignConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Session {
    pub fn new(config: CampaignConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let out = out
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let seed = seed.or(config.seed);
        Session { config, seed, out }
    }

    fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::Validation(
                "this command is stochastic: a seed is required (--seed or `seed` in the config)".into(),
            )
        })
    }

    fn out_dir(&self) -> CliResult<&Path> {
        io::create_dir(&self.out)?;
        Ok(&self.out)
    }

    /// Reconstruction band and size: command line, then config, then the
    /// default band over the sequences.
    fn band(&self, specs: &[SequenceSpec], grid: &Grid) -> (f64, f64, usize) {
        let (lo, hi) = default_band(specs);
        let r = &self.config.reconstruction;
        (
            grid.omega_min.or(r.omega_min_rad_s).unwrap_or(lo),
            grid.omega_max.or(r.omega_max_rad_s).unwrap_or(hi),
            grid.n.unwrap_or(r.n),
        )
    }
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn fmt_hz(omega: f64) -> String {
    format!("{:.1} Hz", omega / (2.0 * PI))
}

pub fn filters(session: &Session, grid: &Grid, kernel: Option<&str>, dimensionless: bool) -> CliResult<Vec<String>> {
    let specs = session.config.sequence_specs()?;
    let modes = session.config.mode_config()?;
    let kernel = session.config.kernel(kernel)?;
    let (lo, hi, n) = session.band(&specs, grid);
    let matrix = filter_matrix(&specs, &modes, lo, hi, n, kernel)?;
    let dir = session.out_dir()?;
    let mut paths = HashSet::new();
    for spec in &specs {
        let path = io::label_file(dir, &spec.label, ".filter.csv");
        if !paths.insert(path.clone()) {
            return Err(validation(format!(
                "sequence `{}` maps to an existing file name {}",
                spec.label,
                path.display()
            )));
        }
        let waveform = sample_waveform(spec, DEFAULT_SAMPLES_PER_SEGMENT)?;
        let curve = filter_curve(&waveform, &modes, &matrix.omegas, kernel)?;
        io::write_curve(&path, &curve, dimensionless.then_some(spec.duration_s))?;
    }
    io::write_matrix(&dir.join("filter_matrix.csv"), &matrix)?;
    Ok(vec![format!(
        "wrote {} filter curves and a {}x{} filter matrix over [{}, {}] ({} kernel) to {}",
        specs.len(),
        matrix.rows(),
        matrix.cols(),
        fmt_hz(lo),
        fmt_hz(hi),
        kernel.name(),
        dir.display()
    )])
}

#[derive(Serialize)]
struct IdentifyRow<'a> {
    label: &'a str,
    omega_mod_rad_s: f64,
    beta_hz: f64,
    predicted_p1: f64,
    measured_p1: f64,
    measured_sem: f64,
}

/// Main-band peak and FWHM of one sequence, located on a local grid.
fn main_band(spec: &SequenceSpec, modes: &ModeConfig, kernel: Kernel) -> CliResult<(f64, f64)> {
    let ws = spec.band_frequency();
    let half = 6.0 * 2.0 * PI / spec.duration_s;
    let grid = uniform_grid((ws - half).max(0.25 * ws), ws + half, 1201)?;
    let waveform = sample_waveform(spec, DEFAULT_SAMPLES_PER_SEGMENT)?;
    let curve = filter_curve(&waveform, modes, &grid, kernel)?;
    let peak = peak_frequency(&curve)?;
    let fwhm = bandwidth_fwhm(&curve).unwrap_or(2.0 * PI / spec.duration_s);
    Ok((peak, fwhm))
}

/// Scans a single tone about each filter peak (or, with `sweep_beta`, its
/// amplitude at the peak) and compares simulated and predicted `P1`.
pub fn identify(session: &Session, kernel: Option<&str>, sweep_beta: bool) -> CliResult<Vec<String>> {
    let specs = session.config.sequence_specs()?;
    let modes = session.config.mode_config()?;
    let kernel = session.config.kernel(kernel)?;
    let seed = session.seed()?;
    let id = &session.config.identify;
    if id.phase_samples < 2 {
        return Err(validation("identify.phase_samples must be >= 2"));
    }
    if !sweep_beta {
        if id.points < 2 {
            return Err(validation("identify.points must be >= 2"));
        }
        if !(id.span_fwhm.is_finite() && id.span_fwhm > 0.0) {
            return Err(validation("identify.span_fwhm must be > 0"));
        }
        if !(id.amplitude_hz.is_finite() && id.amplitude_hz >= 0.0) {
            return Err(validation("identify.amplitude_hz must be >= 0"));
        }
    } else if id.beta_values_hz.is_none() && id.target_p1.iter().any(|p| !(*p > 0.0 && *p < 0.5)) {
        return Err(validation("identify.target_p1 values must lie in (0, 0.5)"));
    }
    let mut rows = Vec::new();
    for (q, spec) in specs.iter().enumerate() {
        let waveform = sample_waveform(spec, DEFAULT_SAMPLES_PER_SEGMENT)?;
        let (peak, fwhm) = main_band(spec, &modes, kernel)?;
        let points: Vec<(f64, f64)> = if sweep_beta {
            let f_peak = filter_value(&waveform, &modes, peak, kernel);
            match &id.beta_values_hz {
                Some(betas) => betas.iter().map(|&b| (peak, b)).collect(),
                None => id
                    .target_p1
                    .iter()
                    .map(|&p| (peak, (2.0 * p / f_peak).sqrt()))
                    .collect(),
            }
        } else {
            (0..id.points)
                .map(|k| {
                    let u = 2.0 * k as f64 / (id.points - 1) as f64 - 1.0;
                    (peak + u * id.span_fwhm * fwhm, id.amplitude_hz)
                })
                .filter(|(w, _)| *w >= 0.0)
                .collect()
        };
        for (k, &(omega, beta)) in points.iter().enumerate() {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(validation(format!("tone amplitude {beta} Hz must be finite and >= 0")));
            }
            let predicted_p1 = 0.5 * beta * beta * filter_value(&waveform, &modes, omega, kernel);
            let noise = NoiseModel::SingleTone(Tone::randomized(beta, omega));
            let (measured_p1, measured_sem) = expected_p1(
                spec,
                &modes,
                &noise,
                id.phase_samples,
                derive_seed(seed, &[q as u64, k as u64]),
                kernel,
            )?;
            rows.push(IdentifyRow {
                label: &spec.label,
                omega_mod_rad_s: omega,
                beta_hz: beta,
                predicted_p1,
                measured_p1,
                measured_sem,
            });
        }
    }
    let dir = session.out_dir()?;
    let name = if sweep_beta {
        "identify_beta.csv"
    } else {
        "identify.csv"
    };
    let path = dir.join(name);
    io::write_rows(&path, &rows)?;
    Ok(vec![format!(
        "wrote {} sweep points for {} sequences to {}",
        rows.len(),
        specs.len(),
        path.display()
    )])
}

pub fn simulate(session: &Session, kernel: Option<&str>) -> CliResult<Vec<String>> {
    let specs = session.config.sequence_specs()?;
    let modes = session.config.mode_config()?;
    let kernel = session.config.kernel(kernel)?;
    let noise = session.config.noise.resolve()?;
    let seed = session.seed()?;
    let records = measurement_campaign(
        &specs,
        &modes,
        &noise,
        &session.config.campaign_settings(),
        seed,
        kernel,
    )?;
    let rows: Vec<io::MeasurementRow> = records.iter().map(io::MeasurementRow::from).collect();
    let path = session.out_dir()?.join("measurements.csv");
    io::write_measurements(&path, &rows)?;
    Ok(vec![format!(
        "wrote {} measurement records to {}",
        rows.len(),
        path.display()
    )])
}

/// Shot-noise floor for a reported uncertainty of exactly zero.
pub fn sigma_floor(p: f64, blocks: usize, reps: usize) -> f64 {
    let shots = (blocks * reps).max(1) as f64;
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / shots).sqrt().max(1e-4)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Checks the measurement table against the configured sequences and builds
/// the measurement set in config order. Returns the labels whose zero
/// uncertainty was floored.
fn measurement_set(rows: &[io::MeasurementRow], specs: &[SequenceSpec]) -> CliResult<(MeasurementSet, Vec<String>)> {
    let mut by_label: HashMap<&str, &io::MeasurementRow> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        let Some(spec) = specs.iter().find(|s| s.label == row.label) else {
            return Err(validation(format!(
                "measurement row {}: label `{}` does not match any configured sequence",
                i + 1,
                row.label
            )));
        };
        if by_label.insert(&row.label, row).is_some() {
            return Err(validation(format!(
                "measurement row {}: duplicate label `{}`",
                i + 1,
                row.label
            )));
        }
        let mismatch = |column: &str, got: String, want: String| {
            validation(format!(
                "measurement `{}`: column `{column}` is {got} but the configured sequence has {want}",
                row.label
            ))
        };
        if !close(row.tau_s, spec.duration_s, 1e-9) {
            return Err(mismatch("tau_s", row.tau_s.to_string(), spec.duration_s.to_string()));
        }
        if row.num_phase_shifts != spec.num_phase_shifts {
            return Err(mismatch(
                "S",
                row.num_phase_shifts.to_string(),
                spec.num_phase_shifts.to_string(),
            ));
        }
        if row.shape != spec.envelope.name() {
            return Err(mismatch("shape", row.shape.clone(), spec.envelope.name().into()));
        }
        if !close(row.omega_max_rad_s, spec.max_rabi, 1e-6) {
            return Err(mismatch(
                "omega_max_rad_s",
                row.omega_max_rad_s.to_string(),
                spec.max_rabi.to_string(),
            ));
        }
    }
    let mut floored = Vec::new();
    let mut p = Vec::with_capacity(specs.len());
    let mut sigma = Vec::with_capacity(specs.len());
    for spec in specs {
        let row = by_label
            .get(spec.label.as_str())
            .ok_or_else(|| validation(format!("sequence `{}` has no measurement", spec.label)))?;
        p.push(row.p1_mean);
        if row.p1_std == 0.0 {
            floored.push(spec.label.clone());
            sigma.push(sigma_floor(row.p1_mean, row.blocks, row.r));
        } else {
            sigma.push(row.p1_std);
        }
    }
    let labels = specs.iter().map(|s| s.label.clone()).collect();
    Ok((MeasurementSet::new(labels, p, sigma)?, floored))
}

#[derive(Serialize)]
struct CvEntry {
    lambda: f64,
    error_1: f64,
    error_2: f64,
    mean: f64,
}

#[derive(Serialize)]
struct Residual<'a> {
    label: &'a str,
    measured: f64,
    fitted: f64,
    sigma: f64,
    residual: f64,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    kernel: &'static str,
    omega_min_rad_s: f64,
    omega_max_rad_s: f64,
    n: usize,
    step_rad_s: f64,
    chosen_lambda: f64,
    objective: f64,
    residual_norm: f64,
    resamples: usize,
    seed: u64,
    sigma_floored: Vec<String>,
    cv_table: Vec<CvEntry>,
    residuals: Vec<Residual<'a>>,
}

pub fn reconstruct_cmd(
    session: &Session,
    measurements: &Path,
    grid: &Grid,
    kernel: Option<&str>,
) -> CliResult<Vec<String>> {
    let specs = session.config.sequence_specs()?;
    let modes = session.config.mode_config()?;
    let kernel = session.config.kernel(kernel)?;
    let seed = session.seed()?;
    let rows = io::read_measurements(measurements)?;
    let (set, floored) = measurement_set(&rows, &specs)?;
    let (lo, hi, n) = session.band(&specs, grid);
    let f = filter_matrix(&specs, &modes, lo, hi, n, kernel)?;
    let rc = &session.config.reconstruction;
    if rc.lambda_count == 0 {
        return Err(validation("reconstruction.lambda_count must be >= 1"));
    }
    let config = ReconstructionConfig {
        lambda_candidates: Some(
            rc.lambda_candidates
                .clone()
                .unwrap_or_else(|| default_lambda_grid(&f.matrix, rc.lambda_count)),
        ),
        fixed_lambda: rc.fixed_lambda,
        resamples: rc.resamples,
        seed,
        ..ReconstructionConfig::default()
    };
    let est = reconstruct(&f, &set, &config)?;
    let fitted = f.matrix.mul_vec(&est.s);
    let dir = session.out_dir()?;
    let spectrum = dir.join("spectrum.csv");
    io::write_spectrum(&spectrum, &est)?;
    let diagnostics = Diagnostics {
        kernel: kernel.name(),
        omega_min_rad_s: f.omega_min,
        omega_max_rad_s: f.omega_max,
        n: f.cols(),
        step_rad_s: f.step,
        chosen_lambda: est.chosen_lambda,
        objective: est.objective,
        residual_norm: est.residual_norm,
        resamples: config.resamples,
        seed,
        sigma_floored: floored,
        cv_table: est
            .cv_table
            .iter()
            .map(|r| CvEntry {
                lambda: r.lambda,
                error_1: r.error_1,
                error_2: r.error_2,
                mean: r.mean(),
            })
            .collect(),
        residuals: (0..set.len())
            .map(|q| Residual {
                label: &set.labels[q],
                measured: set.p[q],
                fitted: fitted[q],
                sigma: set.sigma[q],
                residual: set.p[q] - fitted[q],
            })
            .collect(),
    };
    io::write_json(&dir.join("diagnostics.json"), &diagnostics)?;
    let (peak_i, peak_s) =
        est.s.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        );
    Ok(vec![
        format!("wrote {} and diagnostics.json", spectrum.display()),
        format!("chosen_lambda = {}", est.chosen_lambda),
        format!("peak_omega_rad_s = {}", est.omegas[peak_i]),
        format!("peak_psd_hz2_per_hz = {peak_s}"),
    ])
}

#[derive(Serialize)]
struct SequenceSensitivity {
    label: String,
    beta_min_hz: f64,
    beta_min_c_hz: f64,
    omega_peak_rad_s: f64,
    delta_omega_rad_s: Option<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SensitivityFile {
    p_min: f64,
    kernel: &'static str,
    lamb_dicke: Vec<f64>,
    mean_phonons: Vec<f64>,
    note: &'static str,
    set_beta_min_hz: f64,
    set_beta_min_label: String,
    set_beta_min_c_hz: f64,
    set_beta_min_c_label: String,
    sequences: Vec<SequenceSensitivity>,
}

const ETA_NOTE: &str = "absolute sensitivities scale as 1/eta; eta is a configuration input";

pub fn sensitivity(session: &Session, p_min: f64, grid: &Grid, kernel: Option<&str>) -> CliResult<Vec<String>> {
    if !(p_min > 0.0 && p_min < 0.5) {
        return Err(validation(format!("--p-min must lie in (0, 0.5), got {p_min}")));
    }
    let specs = session.config.sequence_specs()?;
    let modes = session.config.mode_config()?;
    let kernel = session.config.kernel(kernel)?;
    let mut sequences = Vec::with_capacity(specs.len());
    for spec in &specs {
        let resolution = 2.0 * PI / spec.duration_s;
        let lo = grid.omega_min.unwrap_or(0.0);
        let hi = grid.omega_max.unwrap_or(5.0 * spec.band_frequency().max(resolution));
        let n = grid.n.unwrap_or(((hi - lo) / (resolution / 40.0)).ceil() as usize + 1);
        let waveform = sample_waveform(spec, DEFAULT_SAMPLES_PER_SEGMENT)?;
        let curve = filter_curve(&waveform, &modes, &uniform_grid(lo, hi, n)?, kernel)?;
        let r = sensitivity_report(&curve, p_min)?;
        sequences.push(SequenceSensitivity {
            label: r.label,
            beta_min_hz: r.beta_min_hz,
            beta_min_c_hz: r.beta_min_c_hz,
            omega_peak_rad_s: r.omega_peak,
            delta_omega_rad_s: r.delta_omega,
            warnings: r.warnings,
        });
    }
    let best = |key: fn(&SequenceSensitivity) -> f64| {
        sequences
            .iter()
            .min_by(|a, b| key(a).total_cmp(&key(b)))
            .map(|s| (key(s), s.label.clone()))
            .expect("at least one sequence")
    };
    let (set_beta_min_hz, set_beta_min_label) = best(|s| s.beta_min_hz);
    let (set_beta_min_c_hz, set_beta_min_c_label) = best(|s| s.beta_min_c_hz);
    let mut lines = vec![
        format!("p_min = {p_min}"),
        format!("kernel = {}", kernel.name()),
        format!("note = {ETA_NOTE}"),
    ];
    for s in &sequences {
        lines.push(format!("{}.beta_min_hz = {}", s.label, s.beta_min_hz));
        lines.push(format!("{}.beta_min_c_hz = {}", s.label, s.beta_min_c_hz));
        for w in &s.warnings {
            lines.push(format!("{}.warning = {w}", s.label));
        }
    }
    lines.push(format!("set.beta_min_hz = {set_beta_min_hz} ({set_beta_min_label})"));
    lines.push(format!(
        "set.beta_min_c_hz = {set_beta_min_c_hz} ({set_beta_min_c_label})"
    ));
    let report = SensitivityFile {
        p_min,
        kernel: kernel.name(),
        lamb_dicke: modes.modes.iter().map(|m| m.lamb_dicke).collect(),
        mean_phonons: modes.modes.iter().map(|m| m.mean_phonons).collect(),
        note: ETA_NOTE,
        set_beta_min_hz,
        set_beta_min_label,
        set_beta_min_c_hz,
        set_beta_min_c_label,
        sequences,
    };
    io::write_json(&session.out_dir()?.join("sensitivity.json"), &report)?;
    Ok(lines)
}

#[derive(Serialize)]
struct ThermometryFile {
    eta: f64,
    points: usize,
    nbar: f64,
    nbar_std: f64,
    base_rabi_rad_s: f64,
    decay_per_s: f64,
    covariance: [[f64; 3]; 3],
    chi2: f64,
    dof: usize,
    truncation: usize,
}

/// `eta` falls back to the first configured mode.
pub fn thermometry(session: &Session, data: &Path, eta: Option<f64>, truncation: usize) -> CliResult<Vec<String>> {
    let eta = match eta {
        Some(e) => e,
        None => session
            .config
            .modes
            .first()
            .map(|m| m.lamb_dicke)
            .ok_or_else(|| validation("give --eta or a mode in the config"))?,
    };
    let points = io::read_flops(data)?;
    let fit = thermometry_fit(&points, eta, truncation)?;
    let report = ThermometryFile {
        eta,
        points: points.len(),
        nbar: fit.nbar,
        nbar_std: fit.nbar_std(),
        base_rabi_rad_s: fit.base_rabi,
        decay_per_s: fit.decay,
        covariance: fit.covariance,
        chi2: fit.chi2,
        dof: fit.dof,
        truncation: fit.truncation,
    };
    io::write_json(&session.out_dir()?.join("thermometry.json"), &report)?;
    Ok(vec![
        format!("nbar = {}", fit.nbar),
        format!("nbar_std = {}", fit.nbar_std()),
        format!("base_rabi_rad_s = {}", fit.base_rabi),
        format!("decay_per_s = {}", fit.decay),
        format!("chi2 = {}", fit.chi2),
        format!("dof = {}", fit.dof),
    ])
}

//! Spectrum reconstruction with cross-validated smoothing.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::filter::FilterMatrix;
use crate::linalg::{norm2, Matrix};
use crate::nnls::{NnlsOptions, NnlsSolution, RegularizedProblem};
use crate::par::map_indexed;
use crate::rng::stream;
use crate::simulate::MeasurementRecord;

pub const DEFAULT_RESAMPLES: usize = 50;
pub const DEFAULT_LAMBDA_COUNT: usize = 25;
/// Percentiles of the resampled ensemble reported as the uncertainty band.
pub const BAND_PERCENTILES: (f64, f64) = (16.0, 84.0);

/// Measured `E[P1]` values with uncertainties, one per sequence label.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub labels: Vec<String>,
    pub p: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(labels: Vec<String>, p: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if labels.len() != p.len() || p.len() != sigma.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} labels, {} values, {} uncertainties",
                labels.len(),
                p.len(),
                sigma.len()
            )));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("p", "measurements must be finite and >= 0"));
        }
        if sigma.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("sigma", "uncertainties must be finite and >= 0"));
        }
        Ok(MeasurementSet { labels, p, sigma })
    }

    pub fn from_records(records: &[MeasurementRecord]) -> Result<Self> {
        Self::new(
            records.iter().map(|r| r.label.clone()).collect(),
            records.iter().map(|r| r.p1_mean).collect(),
            records.iter().map(|r| r.p1_std).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Reorders the measurements to follow the rows of `f`.
    pub fn aligned_to(&self, f: &FilterMatrix) -> Result<MeasurementSet> {
        if self.len() != f.rows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} measurements for {} filter rows",
                self.len(),
                f.rows()
            )));
        }
        let mut p = Vec::with_capacity(self.len());
        let mut sigma = Vec::with_capacity(self.len());
        for label in &f.labels {
            let i = self
                .labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Error::invalid("labels", alloc::format!("no measurement for sequence `{label}`")))?;
            p.push(self.p[i]);
            sigma.push(self.sigma[i]);
        }
        Ok(MeasurementSet {
            labels: f.labels.clone(),
            p,
            sigma,
        })
    }

    fn select(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        (
            idx.iter().map(|&i| self.p[i]).collect(),
            idx.iter().map(|&i| self.sigma[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    /// Candidate smoothing weights; `None` uses [`default_lambda_grid`].
    pub lambda_candidates: Option<Vec<f64>>,
    /// Skip cross-validation and use this weight (may be 0).
    pub fixed_lambda: Option<f64>,
    /// Gaussian resamples per fit (`l`).
    pub resamples: usize,
    pub solver: NnlsOptions,
    pub seed: u64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            lambda_candidates: None,
            fixed_lambda: None,
            resamples: DEFAULT_RESAMPLES,
            solver: NnlsOptions::default(),
            seed: 0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < 1 {
            return Err(Error::invalid("resamples", "must be >= 1"));
        }
        if let Some(c) = &self.lambda_candidates {
            if c.is_empty() || c.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(Error::invalid(
                    "lambda_candidates",
                    "need at least one finite lambda > 0",
                ));
            }
        }
        if let Some(l) = self.fixed_lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid("fixed_lambda", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// `count` log-spaced values over `[1e-6, 1e2] tr(F^T F) / tr(D^T D)`.
pub fn default_lambda_grid(f: &Matrix, count: usize) -> Vec<f64> {
    let n = f.cols();
    let tr_f: f64 = f.as_slice().iter().map(|v| v * v).sum();
    let tr_d = (2 * n.saturating_sub(1)).max(1) as f64;
    let scale = if tr_f > 0.0 { tr_f / tr_d } else { 1.0 };
    if count == 1 {
        return alloc::vec![scale];
    }
    (0..count)
        .map(|k| scale * 10f64.powf(-6.0 + 8.0 * k as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvRow {
    pub lambda: f64,
    /// Mean test error training on set 1, testing on set 2.
    pub error_1: f64,
    /// And with the halves swapped.
    pub error_2: f64,
}

impl CvRow {
    pub fn mean(&self) -> f64 {
        0.5 * (self.error_1 + self.error_2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub chosen_lambda: f64,
    /// Rows in the candidate order given.
    pub table: Vec<CvRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub omegas: Vec<f64>,
    /// Hz^2/Hz.
    pub s: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    pub chosen_lambda: f64,
    pub objective: f64,
    pub residual_norm: f64,
    pub cv_table: Vec<CvRow>,
}

/// Row split: set 1 holds the even rows counted from one (indices 1, 3, ...),
/// set 2 the rest.
pub fn split_rows(m: usize) -> (Vec<usize>, Vec<usize>) {
    ((1..m).step_by(2).collect(), (0..m).step_by(2).collect())
}

fn resample<R: Rng + ?Sized>(p: &[f64], sigma: &[f64], rng: &mut R) -> Vec<f64> {
    p.iter()
        .zip(sigma)
        .map(|(&v, &s)| {
            if s == 0.0 {
                v
            } else {
                let z: f64 = rng.sample(StandardNormal);
                (v + s * z).max(0.0)
            }
        })
        .collect()
}

/// Solves the `l` resampled problems in order, warm-starting each from the last.
fn solve_ensemble(
    problem: &RegularizedProblem<'_>,
    p: &[f64],
    sigma: &[f64],
    resamples: usize,
    seed: u64,
    path: &[u64],
    opts: &NnlsOptions,
) -> Result<Vec<NnlsSolution>> {
    let mut out: Vec<NnlsSolution> = Vec::with_capacity(resamples);
    for k in 0..resamples {
        let mut full = path.to_vec();
        full.push(k as u64);
        let pk = resample(p, sigma, &mut stream(seed, &full));
        let warm = out.last().map(|s| s.s.as_slice());
        out.push(problem.solve(&pk, warm, opts)?);
    }
    Ok(out)
}

pub fn cross_validate(
    f: &FilterMatrix,
    measurements: &MeasurementSet,
    config: &ReconstructionConfig,
) -> Result<CvResult> {
    config.validate()?;
    let data = measurements.aligned_to(f)?;
    let m = data.len();
    if m < 4 {
        return Err(Error::TooFewMeasurements(m));
    }
    let candidates = match &config.lambda_candidates {
        Some(c) => c.clone(),
        None => default_lambda_grid(&f.matrix, DEFAULT_LAMBDA_COUNT),
    };
    let (set1, set2) = split_rows(m);
    let halves = [(&set1, &set2), (&set2, &set1)];
    let mats: Vec<(Matrix, Matrix)> = halves
        .iter()
        .map(|(train, test)| (f.matrix.select_rows(train), f.matrix.select_rows(test)))
        .collect();

    let rows = map_indexed(candidates.len(), |j| -> Result<CvRow> {
        let lambda = candidates[j];
        let mut errors = [0.0; 2];
        for (h, (train, test)) in halves.iter().enumerate() {
            let (f_train, f_test) = &mats[h];
            let (p_train, s_train) = data.select(train);
            let (p_test, _) = data.select(test);
            let problem = RegularizedProblem::new(f_train, lambda)?;
            // Same resamples for every candidate (common random numbers).
            let sols = solve_ensemble(
                &problem,
                &p_train,
                &s_train,
                config.resamples,
                config.seed,
                &[h as u64],
                &config.solver,
            )?;
            let total: f64 = sols
                .iter()
                .map(|sol| {
                    let pred = f_test.mul_vec(&sol.s);
                    let r: Vec<f64> = pred.iter().zip(&p_test).map(|(a, b)| a - b).collect();
                    norm2(&r)
                })
                .sum();
            errors[h] = total / sols.len() as f64;
        }
        Ok(CvRow {
            lambda,
            error_1: errors[0],
            error_2: errors[1],
        })
    });
    let table = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (j, row) in table.iter().enumerate() {
        let (b, r) = (table[best].mean(), row.mean());
        if r < b || (r == b && row.lambda > table[best].lambda) {
            best = j;
        }
    }
    Ok(CvResult {
        chosen_lambda: table[best].lambda,
        table,
    })
}

/// Linear-interpolated percentile `q` (0–100) of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Cross-validates the smoothing weight, solves on the full data and derives
/// percentile bands from `l` resampled full-data fits.
pub fn reconstruct(
    f: &FilterMatrix,
    measurements: &MeasurementSet,
    config: &ReconstructionConfig,
) -> Result<SpectrumEstimate> {
    config.validate()?;
    let data = measurements.aligned_to(f)?;
    let (lambda, cv_table) = match config.fixed_lambda {
        Some(l) => (l, Vec::new()),
        None => {
            let cv = cross_validate(f, &data, config)?;
            (cv.chosen_lambda, cv.table)
        }
    };
    let problem = RegularizedProblem::new(&f.matrix, lambda)?;
    let point = problem.solve(&data.p, None, &config.solver)?;
    let ensemble = solve_ensemble(
        &problem,
        &data.p,
        &data.sigma,
        config.resamples,
        config.seed,
        &[u64::MAX],
        &config.solver,
    )?;
    let n = f.cols();
    let mut band_low = Vec::with_capacity(n);
    let mut band_high = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(ensemble.len());
    for i in 0..n {
        column.clear();
        column.extend(ensemble.iter().map(|sol| sol.s[i]));
        column.sort_by(f64::total_cmp);
        band_low.push(percentile(&column, BAND_PERCENTILES.0));
        band_high.push(percentile(&column, BAND_PERCENTILES.1));
    }
    Ok(SpectrumEstimate {
        omegas: f.omegas.clone(),
        s: point.s,
        band_low,
        band_high,
        chosen_lambda: lambda,
        objective: point.objective,
        residual_norm: point.residual_norm,
        cv_table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{filter_matrix, Kernel, Mode, ModeConfig};
    use crate::sequence::SequenceSpec;
    use core::f64::consts::PI;

    fn synthetic(m: usize, n: usize) -> FilterMatrix {
        // Gaussian bumps marching across the grid.
        let omegas: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut data = Vec::new();
        for q in 0..m {
            let c = (q as f64 + 0.5) * n as f64 / m as f64;
            for i in 0..n {
                data.push((-((i as f64 - c) / 2.0).powi(2)).exp());
            }
        }
        FilterMatrix {
            labels: (0..m).map(|q| alloc::format!("q{q}")).collect(),
            omegas,
            omega_min: 0.0,
            omega_max: (n - 1) as f64,
            step: 1.0,
            matrix: Matrix::from_row_major(m, n, data).unwrap(),
        }
    }

    fn exact_measurements(f: &FilterMatrix, s: &[f64]) -> MeasurementSet {
        let p = f.matrix.mul_vec(s);
        MeasurementSet::new(f.labels.clone(), p, alloc::vec![0.0; f.rows()]).unwrap()
    }

    #[test]
    fn split_is_alternating() {
        assert_eq!(split_rows(5), (alloc::vec![1, 3], alloc::vec![0, 2, 4]));
    }

    #[test]
    fn single_candidate_is_returned() {
        let f = synthetic(6, 12);
        let meas = exact_measurements(&f, &[1.0; 12]);
        let config = ReconstructionConfig {
            lambda_candidates: Some(alloc::vec![0.3]),
            resamples: 1,
            ..Default::default()
        };
        assert_eq!(cross_validate(&f, &meas, &config).unwrap().chosen_lambda, 0.3);
    }

    #[test]
    fn exact_data_prefers_weak_smoothing() {
        let f = synthetic(12, 24);
        let s: Vec<f64> = (0..24).map(|i| 1.0 + (i as f64 / 4.0).sin()).collect();
        let meas = exact_measurements(&f, &s);
        let config = ReconstructionConfig {
            lambda_candidates: Some(alloc::vec![1e-6, 1e6]),
            resamples: 1,
            ..Default::default()
        };
        let cv = cross_validate(&f, &meas, &config).unwrap();
        assert_eq!(cv.chosen_lambda, 1e-6);
        assert!(cv.table[0].mean() < cv.table[1].mean());
    }

    #[test]
    fn too_few_rows() {
        let f = synthetic(3, 5);
        let meas = exact_measurements(&f, &[1.0; 5]);
        assert_eq!(
            cross_validate(&f, &meas, &ReconstructionConfig::default()),
            Err(Error::TooFewMeasurements(3))
        );
    }

    #[test]
    fn zero_data_zero_spectrum() {
        let f = synthetic(8, 16);
        let meas = exact_measurements(&f, &[0.0; 16]);
        let est = reconstruct(&f, &meas, &ReconstructionConfig::default()).unwrap();
        assert!(est.s.iter().all(|&v| v == 0.0));
        assert!(est.band_low.iter().zip(&est.band_high).all(|(a, b)| a == b));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let f = synthetic(8, 16);
        let mut meas = exact_measurements(&f, &[1.0; 16]);
        meas.sigma = alloc::vec![0.05; 8];
        let config = ReconstructionConfig {
            resamples: 8,
            seed: 42,
            ..Default::default()
        };
        let a = reconstruct(&f, &meas, &config).unwrap();
        let b = reconstruct(&f, &meas, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.band_low.iter().zip(&a.band_high).all(|(l, h)| l <= h));
    }

    #[test]
    fn mismatched_label_is_named() {
        let f = synthetic(4, 6);
        let mut meas = exact_measurements(&f, &[1.0; 6]);
        meas.labels[2] = String::from("bogus");
        match reconstruct(&f, &meas, &ReconstructionConfig::default()) {
            Err(Error::Invalid { reason, .. }) => assert!(reason.contains("q2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn broadband_recovery_through_slepian_filters() {
        // 1/omega spectrum (floored at low frequency) through 30 Slepian filters.
        let tau = 2e-3;
        let specs: Vec<SequenceSpec> = (1..=30)
            .map(|s| SequenceSpec::slepian(alloc::format!("S{s}"), tau, s, 2.0 * PI * 5e3))
            .collect();
        let modes = ModeConfig::single(Mode::new(0.1, 0.2));
        let (lo, hi) = (2.0 * PI * 250.0, 2.0 * PI * 7.5e3);
        let f = filter_matrix(&specs, &modes, lo, hi, 60, Kernel::default()).unwrap();
        let truth: Vec<f64> = f.omegas.iter().map(|w| 2.0 * PI * 1e3 / w).collect();
        let p = f.matrix.mul_vec(&truth);
        let mut rng = stream(77, &[]);
        let noisy: Vec<f64> = p
            .iter()
            .map(|v| {
                let z: f64 = rng.sample(StandardNormal);
                (v * (1.0 + 0.01 * z)).max(0.0)
            })
            .collect();
        let sigma: Vec<f64> = p.iter().map(|v| 0.01 * v).collect();
        let meas = MeasurementSet::new(f.labels.clone(), noisy, sigma).unwrap();
        let config = ReconstructionConfig {
            resamples: 10,
            seed: 5,
            ..Default::default()
        };
        let est = reconstruct(&f, &meas, &config).unwrap();
        // inside the sensed band: centres of sequences 2..29
        let (band_lo, band_hi) = (2.0 * PI * 1e3, 2.0 * PI * 7e3);
        for (i, &w) in est.omegas.iter().enumerate() {
            if w >= band_lo && w <= band_hi {
                let rel = (est.s[i] - truth[i]).abs() / truth[i];
                assert!(rel < 0.25, "omega/2pi={} rel={rel}", w / (2.0 * PI));
            }
        }
    }
}

//! Frequency-noise filter functions.
//!
//! For a detuning noise `nu(t)` in Hz with two-sided PSD `S(omega)` in
//! Hz^2/Hz, the expected signal is `E[P1] = (1/2pi) \int S(omega) F(omega) domega`
//! and a tone `beta sin(omega t + phi)` gives `E[P1] = beta^2/2 F(omega)`.
//!
//! `F(omega) = sum_k T_k (pi eta_k)^2 |G_k(omega)|^2` with one of two kernels:
//!
//! - [`Kernel::LiteralQuasiStatic`]: `G = \int Omega e^{-i[(delta - omega) t + phi]} t dt`.
//!   First-order transfer when the noise enters as `delta -> delta + 2 pi nu(t)`
//!   multiplying `t` in the exponent.
//! - [`Kernel::FirstOrder`]: `G = \int Omega e^{-i[delta t + phi]} (e^{i omega t} - 1)/(i omega) dt`.
//!   First-order transfer when the noise phase is `2 pi \int_0^t nu`.
//!
//! The two coincide at `omega = 0`.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use num_complex::Complex64;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::integrate::{binomial, oscillatory_moments};
use crate::linalg::Matrix;
use crate::par::map_indexed;
use crate::sequence::{sample_waveform, DrivePiece, SampledWaveform, SequenceSpec};

/// Waveform sampling used when only a [`SequenceSpec`] is given.
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 16;

/// Below this `|omega tau|` the first-order kernel is evaluated by series.
const SERIES_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub lamb_dicke: f64,
    /// Detuning from the sideband, rad/s.
    pub detuning: f64,
    pub mean_phonons: f64,
}

impl Mode {
    pub fn new(lamb_dicke: f64, mean_phonons: f64) -> Self {
        Mode {
            lamb_dicke,
            detuning: 0.0,
            mean_phonons,
        }
    }

    /// `T = 2 (n + 1/2)`.
    pub fn thermal_factor(&self) -> f64 {
        2.0 * (self.mean_phonons + 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lamb_dicke.is_finite() && self.lamb_dicke > 0.0) {
            return Err(Error::invalid("lamb_dicke", "must be finite and > 0"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if !(self.mean_phonons.is_finite() && self.mean_phonons >= 0.0) {
            return Err(Error::invalid("mean_phonons", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeConfig {
    pub modes: Vec<Mode>,
}

impl ModeConfig {
    pub fn single(mode: Mode) -> Self {
        ModeConfig {
            modes: alloc::vec![mode],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::invalid("modes", "at least one mode is required"));
        }
        self.modes.iter().try_for_each(Mode::validate)
    }
}

impl From<Mode> for ModeConfig {
    fn from(mode: Mode) -> Self {
        ModeConfig::single(mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    FirstOrder,
    #[default]
    LiteralQuasiStatic,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::FirstOrder => "first-order",
            Kernel::LiteralQuasiStatic => "literal",
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-order" | "first_order" | "FirstOrder" => Ok(Kernel::FirstOrder),
            "literal" | "literal-quasi-static" | "LiteralQuasiStatic" => Ok(Kernel::LiteralQuasiStatic),
            other => Err(Error::invalid(
                "kernel",
                alloc::format!("unknown kernel `{other}` (expected `literal` or `first-order`)"),
            )),
        }
    }
}

/// `\sum_p \int (c0 + c1 u) t^n e^{i (kappa_p + nu) t} dt` for `n = 0..N`,
/// with `K = N + 1`.
fn drive_moments<const N: usize, const K: usize>(pieces: &[DrivePiece], nu: f64) -> [Complex64; N] {
    let mut out = [Complex64::new(0.0, 0.0); N];
    // pieces repeat a handful of (kappa, len) pairs
    let mut cache: [(f64, f64, [Complex64; K]); 4] = [(f64::NAN, f64::NAN, [Complex64::new(0.0, 0.0); K]); 4];
    let mut next = 0;
    for p in pieces {
        let kappa = p.kappa + nu;
        let m = match cache.iter().find(|c| c.0 == kappa && c.1 == p.len) {
            Some(c) => c.2,
            None => {
                let m = oscillatory_moments::<K>(kappa, p.len);
                cache[next] = (kappa, p.len, m);
                next = (next + 1) % cache.len();
                m
            }
        };
        let phase = Complex64::new(0.0, kappa * p.start).exp();
        let a = p.start;
        for (n, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=n {
                let coeff = binomial(n, j) * a.powi((n - j) as i32);
                acc += (m[j] * p.c0 + m[j + 1] * p.c1) * coeff;
            }
            *o += phase * acc;
        }
    }
    out
}

fn transfer(pieces: &[DrivePiece], duration: f64, mode: &Mode, omega: f64, kernel: Kernel) -> Complex64 {
    let delta = mode.detuning;
    match kernel {
        Kernel::LiteralQuasiStatic => drive_moments::<2, 3>(pieces, omega - delta)[1],
        Kernel::FirstOrder => {
            if (omega * duration).abs() < SERIES_THRESHOLD {
                let j = drive_moments::<4, 5>(pieces, -delta);
                let iw = Complex64::new(0.0, omega);
                j[1] + iw * j[2] / 2.0 + iw * iw * j[3] / 6.0
            } else {
                let shifted = drive_moments::<1, 2>(pieces, omega - delta)[0];
                let base = drive_moments::<1, 2>(pieces, -delta)[0];
                (shifted - base) / Complex64::new(0.0, omega)
            }
        }
    }
}

fn prefactor(mode: &Mode) -> f64 {
    let c = PI * mode.lamb_dicke;
    mode.thermal_factor() * c * c
}

/// `F(omega)` in Hz^-2, integrated exactly over the piecewise drive.
pub fn filter_value(waveform: &SampledWaveform, modes: &ModeConfig, omega: f64, kernel: Kernel) -> f64 {
    let pieces = waveform.drive_pieces();
    filter_value_pieces(&pieces, waveform.spec.duration_s, modes, omega, kernel)
}

fn filter_value_pieces(pieces: &[DrivePiece], duration: f64, modes: &ModeConfig, omega: f64, kernel: Kernel) -> f64 {
    modes
        .modes
        .iter()
        .map(|m| prefactor(m) * transfer(pieces, duration, m, omega, kernel).norm_sqr())
        .sum()
}

/// `F(omega)` by composite Simpson quadrature on the waveform samples.
///
/// Independent of the exact piecewise route used by [`filter_value`]; it
/// converges to the same value as the sampling is refined.
pub fn filter_value_quadrature(waveform: &SampledWaveform, modes: &ModeConfig, omega: f64, kernel: Kernel) -> f64 {
    let times = &waveform.times;
    modes
        .modes
        .iter()
        .map(|m| {
            let delta = m.detuning;
            let g = waveform.integrate_drive(|i| {
                let t = times[i];
                let carrier = Complex64::new(0.0, -delta * t).exp();
                let k = match kernel {
                    Kernel::LiteralQuasiStatic => Complex64::new(0.0, omega * t).exp() * t,
                    Kernel::FirstOrder => first_order_kernel(omega, t),
                };
                carrier * k
            });
            prefactor(m) * g.norm_sqr()
        })
        .sum()
}

/// `(e^{i omega t} - 1)/(i omega)`, with its series near `omega t = 0`.
pub(crate) fn first_order_kernel(omega: f64, t: f64) -> Complex64 {
    let x = omega * t;
    if x.abs() < 1e-3 {
        let ix = Complex64::new(0.0, x);
        t * (Complex64::new(1.0, 0.0) + ix / 2.0 + ix * ix / 6.0 + ix * ix * ix / 24.0)
    } else {
        (Complex64::new(0.0, x).exp() - 1.0) / Complex64::new(0.0, omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterCurve {
    pub label: String,
    pub omegas: Vec<f64>,
    /// Hz^-2.
    pub values: Vec<f64>,
}

impl FilterCurve {
    pub fn new(label: impl Into<String>, omegas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omegas.len() != values.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} frequencies but {} values",
                omegas.len(),
                values.len()
            )));
        }
        if omegas.is_empty() {
            return Err(Error::invalid("omegas", "empty grid"));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("omegas", "grid must be strictly increasing"));
        }
        Ok(FilterCurve {
            label: label.into(),
            omegas,
            values,
        })
    }

    /// Linear interpolation of the curve at `omega`.
    pub fn interpolate(&self, omega: f64) -> Result<f64> {
        let (lo, hi) = (self.omegas[0], *self.omegas.last().unwrap());
        if !(omega >= lo && omega <= hi) {
            return Err(Error::OutsideGrid {
                omega,
                min: lo,
                max: hi,
            });
        }
        let j = self.omegas.partition_point(|&w| w <= omega);
        if j == 0 {
            return Ok(self.values[0]);
        }
        if j >= self.omegas.len() {
            return Ok(*self.values.last().unwrap());
        }
        let (w0, w1) = (self.omegas[j - 1], self.omegas[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        Ok(v0 + (v1 - v0) * (omega - w0) / (w1 - w0))
    }

    fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Elementwise [`filter_value`] over a frequency grid.
pub fn filter_curve(
    waveform: &SampledWaveform,
    modes: &ModeConfig,
    omegas: &[f64],
    kernel: Kernel,
) -> Result<FilterCurve> {
    modes.validate()?;
    let pieces = waveform.drive_pieces();
    let tau = waveform.spec.duration_s;
    let values = map_indexed(omegas.len(), |i| {
        filter_value_pieces(&pieces, tau, modes, omegas[i], kernel)
    });
    FilterCurve::new(waveform.spec.label.clone(), omegas.to_vec(), values)
}

/// Location of the curve maximum, refined by a parabola through the grid
/// maximum and its two neighbours.
pub fn peak_frequency(curve: &FilterCurve) -> Result<f64> {
    Ok(refined_peak(curve)?.0)
}

/// `(omega_peak, parabola vertex value)`.
fn refined_peak(curve: &FilterCurve) -> Result<(f64, f64)> {
    let i = curve.argmax();
    let n = curve.values.len();
    if i == 0 || i + 1 == n {
        return Err(Error::PeakAtGridEdge);
    }
    if curve.values[i] <= 0.0 {
        return Err(Error::ZeroResponse);
    }
    let (x0, x1, x2) = (curve.omegas[i - 1], curve.omegas[i], curve.omegas[i + 1]);
    let (y0, y1, y2) = (curve.values[i - 1], curve.values[i], curve.values[i + 1]);
    // Vertex of the interpolating parabola (Newton divided differences).
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return Ok((x1, y1));
    }
    let x = 0.5 * (x0 + x1) - d01 / (2.0 * a);
    let x = x.clamp(x0, x2);
    let y = y0 + d01 * (x - x0) + a * (x - x0) * (x - x1);
    Ok((x, y.max(y1)))
}

/// Full width at half maximum around the peak, each crossing located by
/// linear interpolation between adjacent grid points.
pub fn bandwidth_fwhm(curve: &FilterCurve) -> Result<f64> {
    let (_, peak) = refined_peak(curve)?;
    let half = 0.5 * peak;
    let i = curve.argmax();
    let (w, v) = (&curve.omegas, &curve.values);
    let mut left = None;
    for j in (0..i).rev() {
        if v[j] < half {
            left = Some(w[j] + (w[j + 1] - w[j]) * (half - v[j]) / (v[j + 1] - v[j]));
            break;
        }
    }
    let mut right = None;
    for j in i + 1..v.len() {
        if v[j] < half {
            right = Some(w[j - 1] + (w[j] - w[j - 1]) * (v[j - 1] - half) / (v[j - 1] - v[j]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::HalfMaximumNotBracketed),
    }
}

/// Filter curves of several sequences on a shared uniform grid, scaled by
/// `Delta omega / 2 pi` so that `E[P1] = F s` for a PSD vector `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMatrix {
    pub labels: Vec<String>,
    pub omegas: Vec<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub step: f64,
    pub matrix: Matrix,
}

impl FilterMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, q: usize) -> &[f64] {
        self.matrix.row(q)
    }

    pub fn row_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Keeps the rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> FilterMatrix {
        FilterMatrix {
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            omegas: self.omegas.clone(),
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            step: self.step,
            matrix: self.matrix.select_rows(idx),
        }
    }
}

pub fn uniform_grid(omega_min: f64, omega_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("n", "need at least 2 grid points"));
    }
    if !(omega_min.is_finite() && omega_max.is_finite() && omega_min < omega_max) {
        return Err(Error::invalid("omega_max", "must exceed omega_min"));
    }
    let step = (omega_max - omega_min) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                omega_max
            } else {
                omega_min + step * i as f64
            }
        })
        .collect())
}

pub fn filter_matrix(
    specs: &[SequenceSpec],
    modes: &ModeConfig,
    omega_min: f64,
    omega_max: f64,
    n: usize,
    kernel: Kernel,
) -> Result<FilterMatrix> {
    if specs.is_empty() {
        return Err(Error::invalid("specs", "no sequences"));
    }
    modes.validate()?;
    let omegas = uniform_grid(omega_min, omega_max, n)?;
    let step = (omega_max - omega_min) / (n - 1) as f64;
    let scale = step / (2.0 * PI);
    let waveforms = specs
        .iter()
        .map(|s| sample_waveform(s, DEFAULT_SAMPLES_PER_SEGMENT))
        .collect::<Result<Vec<_>>>()?;
    let pieces: Vec<Vec<DrivePiece>> = waveforms.iter().map(|w| w.drive_pieces()).collect();
    let cols = omegas.len();
    let data = map_indexed(specs.len() * cols, |k| {
        let (q, i) = (k / cols, k % cols);
        scale * filter_value_pieces(&pieces[q], specs[q].duration_s, modes, omegas[i], kernel)
    });
    Ok(FilterMatrix {
        labels: specs.iter().map(|s| s.label.clone()).collect(),
        omegas,
        omega_min,
        omega_max,
        step,
        matrix: Matrix::from_row_major(specs.len(), cols, data)?,
    })
}

/// Default reconstruction band `[0, 1.2 max_q omega_S]` for a set of sequences.
pub fn default_band(specs: &[SequenceSpec]) -> (f64, f64) {
    let top = specs.iter().map(SequenceSpec::band_frequency).fold(0.0, f64::max);
    (0.0, 1.2 * top)
}

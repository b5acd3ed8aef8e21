//! Sensitivity limits and feature-height conversion.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::filter::{bandwidth_fwhm, peak_frequency, FilterCurve};

const HBAR: f64 = 1.054_571_817e-34;
const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Lamb–Dicke parameter for two Raman beams of `wavelength_m` crossing at
/// `angle_rad`, on a mode of frequency `mode_hz` of an ion of `mass_amu`.
pub fn lamb_dicke_raman(wavelength_m: f64, angle_rad: f64, mass_amu: f64, mode_hz: f64) -> f64 {
    let k = 2.0 * PI / wavelength_m;
    let dk = 2.0 * k * (0.5 * angle_rad).sin();
    let omega = 2.0 * PI * mode_hz;
    dk * (HBAR / (2.0 * mass_amu * ATOMIC_MASS * omega)).sqrt()
}

/// `beta^2 / 2 F(omega)` with `F` linearly interpolated on the curve.
pub fn expected_p1_single_tone(curve: &FilterCurve, beta_hz: f64, omega: f64) -> Result<f64> {
    Ok(0.5 * beta_hz * beta_hz * curve.interpolate(omega)?)
}

fn check_p_min(p_min: f64) -> Result<()> {
    if !(p_min > 0.0 && p_min < 0.5) {
        return Err(Error::invalid("p_min", "must lie in (0, 0.5)"));
    }
    Ok(())
}

/// `sqrt(2 P_min / F(omega_peak))`, with `F` interpolated at the refined peak.
pub fn sensitivity_single_tone(curve: &FilterCurve, p_min: f64) -> Result<f64> {
    check_p_min(p_min)?;
    let peak = peak_frequency(curve)?;
    let f = curve.interpolate(peak)?;
    if !(f > 0.0) {
        return Err(Error::ZeroResponse);
    }
    Ok((2.0 * p_min / f).sqrt())
}

/// Trapezoid integral of `F` over the whole symmetric axis. A grid that
/// starts at `omega >= 0` is mirrored (`F` is even).
pub fn filter_integral(curve: &FilterCurve) -> f64 {
    let mut total = 0.0;
    for (w, v) in curve.omegas.windows(2).zip(curve.values.windows(2)) {
        total += 0.5 * (w[1] - w[0]) * (v[0] + v[1]);
    }
    if curve.omegas[0] >= 0.0 {
        total *= 2.0;
    }
    total
}

/// `sqrt(4 P_min / \int F domega)`.
pub fn sensitivity_broadband(curve: &FilterCurve, p_min: f64) -> Result<f64> {
    check_p_min(p_min)?;
    let integral = filter_integral(curve);
    if !(integral > 0.0) {
        return Err(Error::ZeroResponse);
    }
    Ok((4.0 * p_min / integral).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub label: String,
    pub beta_min_hz: f64,
    pub beta_min_c_hz: f64,
    pub p_min: f64,
    pub omega_peak: f64,
    /// FWHM in rad/s, `None` if the half maximum is not bracketed.
    pub delta_omega: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn sensitivity_report(curve: &FilterCurve, p_min: f64) -> Result<SensitivityReport> {
    let beta_min_hz = sensitivity_single_tone(curve, p_min)?;
    let beta_min_c_hz = sensitivity_broadband(curve, p_min)?;
    let omega_peak = peak_frequency(curve)?;
    let mut warnings = Vec::new();
    let reach = curve.omegas.iter().map(|w| w.abs()).fold(0.0, f64::max);
    if reach < 5.0 * omega_peak.abs() {
        warnings.push(alloc::format!(
            "grid reaches {:.1} rad/s, less than 5x the peak ({:.1} rad/s); filter tails are truncated",
            reach,
            5.0 * omega_peak.abs()
        ));
    }
    Ok(SensitivityReport {
        label: curve.label.clone(),
        beta_min_hz,
        beta_min_c_hz,
        p_min,
        omega_peak,
        delta_omega: bandwidth_fwhm(curve).ok(),
        warnings,
    })
}

/// Deviation of a discrete feature from its reconstructed peak height:
/// `sqrt(2 S_peak (Delta omega / 2 pi))`.
pub fn feature_height_to_deviation(psd_peak: f64, delta_omega: f64) -> Result<f64> {
    if !(psd_peak.is_finite() && psd_peak >= 0.0) {
        return Err(Error::invalid("psd_peak", "must be finite and >= 0"));
    }
    if !(delta_omega.is_finite() && delta_omega > 0.0) {
        return Err(Error::invalid("delta_omega", "must be finite and > 0"));
    }
    Ok((2.0 * psd_peak * delta_omega / (2.0 * PI)).sqrt())
}

//! Exact phase-space simulation of the state-dependent displacement.
//!
//! `alpha(tau) = -i (eta/2) \int Omega(t) e^{-i[delta t + phi(t) + Theta(t)]} dt`,
//! with the noise phase `Theta` set by the coupling paired with each
//! [`Kernel`]: `2 pi nu(t) t` for [`Kernel::LiteralQuasiStatic`] and
//! `2 pi \int_0^t nu` for [`Kernel::FirstOrder`]. To first order in `nu` each
//! pairing reproduces its filter function exactly.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::filter::{Kernel, Mode, ModeConfig};
use crate::integrate::cumulative_integral;
use crate::noise::{check_uniform, NoiseModel};
use crate::par::map_indexed;
use crate::rng::stream;
use crate::sequence::{sample_waveform, SampledWaveform, SequenceSpec};

/// Threshold shared by both validity flags.
pub const VALIDITY_THRESHOLD: f64 = 0.1;
pub const DEFAULT_PHASE_SAMPLES: usize = 64;

/// Advisory flags for the regime where the filter-function picture holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    /// `|alpha(tau)|^2 < 0.1`.
    pub small_displacement: bool,
    /// `E[eps^2] tau^2 < 0.1` with `eps = 2 pi nu`.
    pub weak_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub alpha_final: Complex64,
    /// `alpha(t)` on the waveform grid (segment-wise trapezoid), when requested.
    pub trajectory: Option<Vec<Complex64>>,
    pub p1: f64,
    pub validity: Validity,
}

/// `1/2 (1 - exp(-2 |alpha|^2 (2n + 1)))`.
pub fn p1_from_alpha(alpha: Complex64, mean_phonons: f64) -> f64 {
    p1_from_exponent(alpha.norm_sqr() * (2.0 * mean_phonons + 1.0))
}

/// `1/2 (1 - exp(-2 x))` for `x = sum_k |alpha_k|^2 T_k`.
fn p1_from_exponent(x: f64) -> f64 {
    -0.5 * (-2.0 * x).exp_m1()
}

fn noise_phase(waveform: &SampledWaveform, trace: &[f64], kernel: Kernel) -> Vec<f64> {
    match kernel {
        Kernel::LiteralQuasiStatic => trace
            .iter()
            .zip(&waveform.times)
            .map(|(nu, t)| 2.0 * PI * nu * t)
            .collect(),
        Kernel::FirstOrder => cumulative_integral(trace, waveform.dt())
            .into_iter()
            .map(|x| 2.0 * PI * x)
            .collect(),
    }
}

fn weak_noise(waveform: &SampledWaveform, trace: &[f64]) -> bool {
    let n = trace.len().max(1) as f64;
    let mean_sq = trace.iter().map(|nu| (2.0 * PI * nu).powi(2)).sum::<f64>() / n;
    mean_sq * waveform.spec.duration_s.powi(2) < VALIDITY_THRESHOLD
}

fn check_trace(waveform: &SampledWaveform, trace: &[f64]) -> Result<()> {
    if trace.len() != waveform.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "trace has {} samples, waveform {}",
            trace.len(),
            waveform.len()
        )));
    }
    check_uniform(&waveform.times)
}

fn final_alpha(waveform: &SampledWaveform, mode: &Mode, theta: &[f64]) -> Complex64 {
    let times = &waveform.times;
    let area = waveform.integrate_drive(|i| Complex64::new(0.0, -(mode.detuning * times[i] + theta[i])).exp());
    Complex64::new(0.0, -0.5 * mode.lamb_dicke) * area
}

/// Displacement of a single mode under the detuning trace `nu` (Hz) sampled on
/// the waveform grid.
pub fn integrate_displacement(
    waveform: &SampledWaveform,
    mode: &Mode,
    trace: &[f64],
    kernel: Kernel,
) -> Result<TrajectoryResult> {
    displacement(waveform, mode, trace, kernel, false)
}

/// As [`integrate_displacement`], also recording `alpha(t)`.
pub fn integrate_displacement_with_trajectory(
    waveform: &SampledWaveform,
    mode: &Mode,
    trace: &[f64],
    kernel: Kernel,
) -> Result<TrajectoryResult> {
    displacement(waveform, mode, trace, kernel, true)
}

fn displacement(
    waveform: &SampledWaveform,
    mode: &Mode,
    trace: &[f64],
    kernel: Kernel,
    record: bool,
) -> Result<TrajectoryResult> {
    mode.validate()?;
    check_trace(waveform, trace)?;
    let theta = noise_phase(waveform, trace, kernel);
    let alpha = final_alpha(waveform, mode, &theta);
    let trajectory = record.then(|| {
        let dt = waveform.dt();
        let pre = Complex64::new(0.0, -0.5 * mode.lamb_dicke);
        let f = |i: usize, sign: f64| {
            let t = waveform.times[i];
            pre * sign * waveform.rabi[i] * Complex64::new(0.0, -(mode.detuning * t + theta[i])).exp()
        };
        let mut out = Vec::with_capacity(waveform.len());
        out.push(Complex64::new(0.0, 0.0));
        for (seg, w) in waveform.boundaries().windows(2).enumerate() {
            let sign = if seg % 2 == 0 { 1.0 } else { -1.0 };
            for i in w[0]..w[1] {
                let last = out[out.len() - 1];
                out.push(last + (f(i, sign) + f(i + 1, sign)) * (0.5 * dt));
            }
        }
        out
    });
    let p1 = p1_from_alpha(alpha, mode.mean_phonons);
    Ok(TrajectoryResult {
        alpha_final: alpha,
        trajectory,
        p1,
        validity: Validity {
            small_displacement: alpha.norm_sqr() < VALIDITY_THRESHOLD,
            weak_noise: weak_noise(waveform, trace),
        },
    })
}

/// `P1` for all modes jointly: `1/2 (1 - exp(-2 sum_k |alpha_k|^2 T_k))`.
pub fn simulate_p1(waveform: &SampledWaveform, modes: &ModeConfig, trace: &[f64], kernel: Kernel) -> Result<f64> {
    modes.validate()?;
    check_trace(waveform, trace)?;
    let theta = noise_phase(waveform, trace, kernel);
    let exponent = modes
        .modes
        .iter()
        .map(|m| final_alpha(waveform, m, &theta).norm_sqr() * m.thermal_factor())
        .sum();
    Ok(p1_from_exponent(exponent))
}

/// Waveform sampled finely enough for simulation:
/// `dt <= min(tau_seg/64, 2 pi / (32 omega_max))` with `omega_max` the largest
/// of `omega_S` and the noise frequencies.
pub fn simulation_waveform(spec: &SequenceSpec, noise: &NoiseModel) -> Result<SampledWaveform> {
    spec.validate()?;
    let omega_max = spec.band_frequency().max(noise.max_frequency());
    // End segments hold K intervals of tau/(2 S K); interior ones 2K.
    let s = spec.num_phase_shifts as f64;
    let from_content = (32.0 * omega_max * spec.duration_s / (4.0 * PI * s)).ceil();
    let k = (from_content as usize).max(32);
    sample_waveform(spec, k)
}

fn realization_p1<R: Rng + ?Sized>(
    waveform: &SampledWaveform,
    modes: &ModeConfig,
    noise: &NoiseModel,
    kernel: Kernel,
    rng: &mut R,
) -> f64 {
    let r = noise.realize(rng);
    let trace: Vec<f64> = waveform.times.iter().map(|&t| r.value(t)).collect();
    simulate_p1(waveform, modes, &trace, kernel).expect("trace built on the waveform grid")
}

fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn expected_p1_on(
    waveform: &SampledWaveform,
    modes: &ModeConfig,
    noise: &NoiseModel,
    samples: usize,
    seed: u64,
    path: &[u64],
    kernel: Kernel,
) -> (f64, f64) {
    let values = map_indexed(samples, |j| {
        let mut full = Vec::with_capacity(path.len() + 1);
        full.extend_from_slice(path);
        full.push(j as u64);
        realization_p1(waveform, modes, noise, kernel, &mut stream(seed, &full))
    });
    mean_and_sem(&values)
}

/// Mean and standard error of `P1` over independent noise realisations.
pub fn expected_p1(
    spec: &SequenceSpec,
    modes: &ModeConfig,
    noise: &NoiseModel,
    num_phase_samples: usize,
    seed: u64,
    kernel: Kernel,
) -> Result<(f64, f64)> {
    if num_phase_samples < 2 {
        return Err(Error::invalid("num_phase_samples", "must be >= 2"));
    }
    modes.validate()?;
    noise.validate()?;
    let waveform = simulation_waveform(spec, noise)?;
    Ok(expected_p1_on(
        &waveform,
        modes,
        noise,
        num_phase_samples,
        seed,
        &[],
        kernel,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub label: String,
    pub duration_s: f64,
    pub num_phase_shifts: usize,
    /// `square` or `slepian`.
    pub shape: String,
    pub max_rabi: f64,
    pub p1_mean: f64,
    /// Standard deviation over the block means.
    pub p1_std: f64,
    pub blocks: usize,
    pub reps_per_block: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignSettings {
    /// `M`.
    pub blocks: usize,
    /// `r`.
    pub reps_per_block: usize,
    /// Noise realisations averaged into each block's probability.
    pub phase_samples: usize,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        CampaignSettings {
            blocks: 10,
            reps_per_block: 200,
            phase_samples: DEFAULT_PHASE_SAMPLES,
        }
    }
}

/// Synthetic measurement campaign with projection noise.
///
/// Each block evaluates its own `P1` from fresh noise realisations, then draws
/// `Bin(r, P1) / r`; a record holds the mean and standard deviation of the `M`
/// block means.
pub fn measurement_campaign(
    specs: &[SequenceSpec],
    modes: &ModeConfig,
    noise: &NoiseModel,
    settings: &CampaignSettings,
    seed: u64,
    kernel: Kernel,
) -> Result<Vec<MeasurementRecord>> {
    if settings.blocks < 2 {
        return Err(Error::invalid("blocks", "must be >= 2"));
    }
    if settings.reps_per_block < 1 {
        return Err(Error::invalid("reps_per_block", "must be >= 1"));
    }
    if settings.phase_samples < 1 {
        return Err(Error::invalid("phase_samples", "must be >= 1"));
    }
    if specs.is_empty() {
        return Err(Error::invalid("specs", "no sequences"));
    }
    modes.validate()?;
    noise.validate()?;
    let mut records = Vec::with_capacity(specs.len());
    for (q, spec) in specs.iter().enumerate() {
        let waveform = simulation_waveform(spec, noise)?;
        let deterministic = noise.is_deterministic();
        let shared = deterministic.then(|| expected_p1_on(&waveform, modes, noise, 1, seed, &[q as u64], kernel).0);
        let r = settings.reps_per_block;
        let block_means: Vec<f64> = map_indexed(settings.blocks, |b| {
            let p = shared.unwrap_or_else(|| {
                expected_p1_on(
                    &waveform,
                    modes,
                    noise,
                    settings.phase_samples,
                    seed,
                    &[q as u64, b as u64],
                    kernel,
                )
                .0
            });
            let mut rng = stream(seed, &[q as u64, b as u64, u64::MAX]);
            let count = Binomial::new(r as u64, p.clamp(0.0, 1.0))
                .expect("probability clamped to [0, 1]")
                .sample(&mut rng);
            count as f64 / r as f64
        });
        let (mean, sem) = mean_and_sem(&block_means);
        records.push(MeasurementRecord {
            label: spec.label.clone(),
            duration_s: spec.duration_s,
            num_phase_shifts: spec.num_phase_shifts,
            shape: String::from(spec.envelope.name()),
            max_rabi: spec.max_rabi,
            p1_mean: mean,
            p1_std: sem * (settings.blocks as f64).sqrt(),
            blocks: settings.blocks,
            reps_per_block: r,
            seed,
        });
    }
    Ok(records)
}

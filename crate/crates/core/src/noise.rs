//! Mode-frequency noise processes `nu(t)` in Hz.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Default number of bins when a PSD table is built from a function.
pub const DEFAULT_PSD_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TonePhase {
    Fixed(f64),
    /// Drawn uniformly from `[0, 2 pi)` for every realisation.
    Randomized,
}

/// `amplitude_hz * sin(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub amplitude_hz: f64,
    /// rad/s.
    pub omega: f64,
    pub phase: TonePhase,
}

impl Tone {
    pub fn randomized(amplitude_hz: f64, omega: f64) -> Self {
        Tone {
            amplitude_hz,
            omega,
            phase: TonePhase::Randomized,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude_hz.is_finite() && self.amplitude_hz >= 0.0) {
            return Err(Error::invalid("amplitude_hz", "must be finite and >= 0"));
        }
        if !self.omega.is_finite() {
            return Err(Error::invalid("omega", "must be finite"));
        }
        if let TonePhase::Fixed(p) = self.phase {
            if !p.is_finite() {
                return Err(Error::invalid("phase", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Two-sided PSD `S(omega)` in Hz^2/Hz tabulated on the uniform positive grid
/// `omega_j = omega_start + j omega_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdTable {
    pub omega_start: f64,
    pub omega_step: f64,
    pub values: Vec<f64>,
}

impl PsdTable {
    /// Tabulates `f` at the centres of `bins` equal bins spanning `[0, omega_max]`.
    pub fn from_fn<F: Fn(f64) -> f64>(omega_max: f64, bins: usize, f: F) -> Result<Self> {
        if bins == 0 || !(omega_max > 0.0) {
            return Err(Error::invalid("psd", "need bins >= 1 and omega_max > 0"));
        }
        let step = omega_max / bins as f64;
        let table = PsdTable {
            omega_start: 0.5 * step,
            omega_step: step,
            values: (0..bins).map(|j| f((j as f64 + 0.5) * step)).collect(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn omega(&self, j: usize) -> f64 {
        self.omega_start + self.omega_step * j as f64
    }

    /// Variance of the synthesised process, `(1/2pi) \int S` over both signs.
    pub fn variance(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.omega_step / PI
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("psd", "empty table"));
        }
        if !(self.omega_start >= 0.0 && self.omega_step > 0.0 && self.omega_step.is_finite()) {
            return Err(Error::invalid("psd", "grid must be positive and uniform"));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("psd", "values must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum NoiseModel {
    #[default]
    None,
    SingleTone(Tone),
    MultiTone(Vec<Tone>),
    SampledPsd(PsdTable),
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::SingleTone(t) => t.validate(),
            NoiseModel::MultiTone(ts) => ts.iter().try_for_each(Tone::validate),
            NoiseModel::SampledPsd(p) => p.validate(),
        }
    }

    /// True when every realisation is identical.
    pub fn is_deterministic(&self) -> bool {
        match self {
            NoiseModel::None => true,
            NoiseModel::SingleTone(t) => matches!(t.phase, TonePhase::Fixed(_)),
            NoiseModel::MultiTone(ts) => ts.iter().all(|t| matches!(t.phase, TonePhase::Fixed(_))),
            NoiseModel::SampledPsd(_) => false,
        }
    }

    /// Highest angular frequency present, rad/s.
    pub fn max_frequency(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::SingleTone(t) => t.omega.abs(),
            NoiseModel::MultiTone(ts) => ts.iter().map(|t| t.omega.abs()).fold(0.0, f64::max),
            NoiseModel::SampledPsd(p) => p.omega(p.values.len() - 1),
        }
    }

    /// Draws one realisation as a sum of sinusoids.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Realization {
        let mut draw = |phase: TonePhase| match phase {
            TonePhase::Fixed(p) => p,
            TonePhase::Randomized => rng.random::<f64>() * 2.0 * PI,
        };
        let components = match self {
            NoiseModel::None => Vec::new(),
            NoiseModel::SingleTone(t) => alloc::vec![(t.amplitude_hz, t.omega, draw(t.phase))],
            NoiseModel::MultiTone(ts) => ts.iter().map(|t| (t.amplitude_hz, t.omega, draw(t.phase))).collect(),
            NoiseModel::SampledPsd(p) => p
                .values
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let a = (2.0 * s * p.omega_step / PI).sqrt();
                    // cos(x) = sin(x + pi/2)
                    (a, p.omega(j), draw(TonePhase::Randomized) + 0.5 * PI)
                })
                .collect(),
        };
        Realization { components }
    }
}

/// One drawn noise realisation: `nu(t) = sum A sin(omega t + phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub components: Vec<(f64, f64, f64)>,
}

impl Realization {
    pub fn value(&self, t: f64) -> f64 {
        self.components.iter().map(|&(a, w, p)| a * (w * t + p).sin()).sum()
    }
}

/// Checks that `times` is uniform to a relative tolerance of `1e-9`.
pub(crate) fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid);
    }
    for (i, &t) in times.iter().enumerate() {
        if (t - times[0] - dt * i as f64).abs() > 1e-9 * dt * times.len() as f64 {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(())
}

/// Samples one realisation of `nu(t)` (Hz) on a uniform time grid.
pub fn detuning_trace<R: Rng + ?Sized>(noise: &NoiseModel, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    noise.validate()?;
    check_uniform(times)?;
    let r = noise.realize(rng);
    Ok(times.iter().map(|&t| r.value(t)).collect())
}

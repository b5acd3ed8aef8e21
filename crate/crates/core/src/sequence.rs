//! Phase-inversion sensing sequences: segment layout, envelopes and sampled
//! waveforms.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::dpss::dpss_zeroth;
use crate::error::{Error, Result};
use crate::integrate::simpson;

/// Smallest accepted `min_samples_per_segment`.
pub const MIN_SAMPLES_PER_SEGMENT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Square,
    /// Zeroth-order DPSS envelope modulated by `|cos(omega_S t)|`. Missing
    /// parameters are resolved by [`SequenceSpec::slepian_parameters`].
    Slepian {
        num_points: Option<usize>,
        half_bandwidth: Option<f64>,
    },
}

impl Envelope {
    pub fn slepian() -> Self {
        Envelope::Slepian {
            num_points: None,
            half_bandwidth: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Envelope::Square => "square",
            Envelope::Slepian { .. } => "slepian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub label: String,
    /// Total duration `tau` in seconds.
    pub duration_s: f64,
    /// Number of phase inversions `S`.
    pub num_phase_shifts: usize,
    /// Peak Rabi frequency in rad/s.
    pub max_rabi: f64,
    pub envelope: Envelope,
}

impl SequenceSpec {
    pub fn square(label: impl Into<String>, duration_s: f64, num_phase_shifts: usize, max_rabi: f64) -> Self {
        SequenceSpec {
            label: label.into(),
            duration_s,
            num_phase_shifts,
            max_rabi,
            envelope: Envelope::Square,
        }
    }

    pub fn slepian(label: impl Into<String>, duration_s: f64, num_phase_shifts: usize, max_rabi: f64) -> Self {
        SequenceSpec {
            label: label.into(),
            duration_s,
            num_phase_shifts,
            max_rabi,
            envelope: Envelope::slepian(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s", "must be finite and > 0"));
        }
        if self.num_phase_shifts < 1 {
            return Err(Error::invalid("num_phase_shifts", "must be >= 1"));
        }
        if !(self.max_rabi.is_finite() && self.max_rabi > 0.0) {
            return Err(Error::invalid("max_rabi", "must be finite and > 0"));
        }
        if let Envelope::Slepian {
            num_points,
            half_bandwidth,
        } = self.envelope
        {
            if let Some(w) = half_bandwidth {
                if !(w > 0.0 && w < 0.5) {
                    return Err(Error::invalid("half_bandwidth", "must lie in (0, 1/2)"));
                }
            }
            if let Some(n) = num_points {
                if n < 2 || n < self.num_phase_shifts {
                    return Err(Error::invalid("num_points", "must be >= 2 and >= num_phase_shifts"));
                }
            }
        }
        Ok(())
    }

    /// Interior segment duration `tau / S`.
    pub fn segment_duration(&self) -> f64 {
        self.duration_s / self.num_phase_shifts as f64
    }

    /// Modulation frequency `omega_S = 2 pi S / (2 tau)` of the Slepian carrier,
    /// which is also the nominal filter peak.
    pub fn band_frequency(&self) -> f64 {
        PI * self.num_phase_shifts as f64 / self.duration_s
    }

    /// Resolved `(N, W)` for a Slepian envelope, `None` for a square one.
    ///
    /// The default `N` is the smallest value of at least 512 with `N - 1` a
    /// multiple of `2S` (and at least 16 knot intervals per segment), so every
    /// phase boundary sits on a DPSS knot. The default `W` follows `NW = 1`.
    pub fn slepian_parameters(&self) -> Option<(usize, f64)> {
        match self.envelope {
            Envelope::Square => None,
            Envelope::Slepian {
                num_points,
                half_bandwidth,
            } => {
                let n = num_points.unwrap_or_else(|| default_slepian_points(self.num_phase_shifts));
                let w = half_bandwidth.unwrap_or(1.0 / n as f64);
                Some((n, w))
            }
        }
    }
}

pub fn default_slepian_points(num_phase_shifts: usize) -> usize {
    let two_s = 2 * num_phase_shifts;
    let q = core::cmp::max(8, 511usize.div_ceil(two_s));
    two_s * q + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSegment {
    pub start_s: f64,
    pub duration_s: f64,
    /// Exactly `0.0` or `PI`.
    pub phase: f64,
}

impl PhaseSegment {
    /// `e^{-i phase}`, which is exactly +1 or -1.
    pub fn sign(&self) -> f64 {
        if self.phase == 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn build_segments(spec: &SequenceSpec) -> Result<Vec<PhaseSegment>> {
    spec.validate()?;
    let s = spec.num_phase_shifts;
    let tau = spec.duration_s;
    let half = tau / (2 * s) as f64;
    let full = tau / s as f64;
    let segments = (0..=s)
        .map(|k| {
            let start_s = if k == 0 {
                0.0
            } else {
                tau * (2 * k - 1) as f64 / (2 * s) as f64
            };
            let duration_s = if k == 0 || k == s { half } else { full };
            let phase = if k % 2 == 0 { 0.0 } else { PI };
            PhaseSegment {
                start_s,
                duration_s,
                phase,
            }
        })
        .collect();
    Ok(segments)
}

/// One polynomial-times-exponential piece of the drive `Omega(t) e^{-i phi(t)}`:
/// `weight * (c0 + c1 (t - start)) * e^{i kappa t}` on `[start, start + len]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DrivePiece {
    pub start: f64,
    pub len: f64,
    pub c0: f64,
    pub c1: f64,
    pub kappa: f64,
}

/// Time-gridded realisation of a [`SequenceSpec`].
///
/// The grid has `2 S K` uniform intervals with `K` even and at least the
/// requested samples per segment, so each end segment spans `K` intervals and
/// each interior segment `2K`; every phase boundary is a grid knot.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub spec: SequenceSpec,
    pub times: Vec<f64>,
    pub rabi: Vec<f64>,
    pub phase: Vec<f64>,
    boundaries: Vec<usize>,
    envelope_knots: Option<Vec<f64>>,
}

pub fn sample_waveform(spec: &SequenceSpec, min_samples_per_segment: usize) -> Result<SampledWaveform> {
    spec.validate()?;
    if min_samples_per_segment < MIN_SAMPLES_PER_SEGMENT {
        return Err(Error::invalid(
            "min_samples_per_segment",
            alloc::format!("must be >= {MIN_SAMPLES_PER_SEGMENT}"),
        ));
    }
    let s = spec.num_phase_shifts;
    let tau = spec.duration_s;
    let mut k = min_samples_per_segment + min_samples_per_segment % 2;

    let knots = match spec.slepian_parameters() {
        None => None,
        Some((n, w)) => {
            // Put every DPSS knot on an even grid index so Simpson panels never
            // straddle an interpolation kink.
            if (n - 1) % (2 * s) == 0 {
                let step = 2 * ((n - 1) / (2 * s));
                k = k.div_ceil(step) * step;
            }
            Some(dpss_zeroth(n, w)?)
        }
    };

    let intervals = 2 * s * k;
    let times: Vec<f64> = (0..=intervals).map(|i| tau * i as f64 / intervals as f64).collect();
    let mut boundaries = Vec::with_capacity(s + 2);
    boundaries.push(0);
    for j in 0..s {
        boundaries.push((2 * j + 1) * k);
    }
    boundaries.push(intervals);

    let mut phase = Vec::with_capacity(intervals + 1);
    for seg in 0..=s {
        let lo = boundaries[seg];
        let hi = if seg == s { intervals + 1 } else { boundaries[seg + 1] };
        let p = if seg % 2 == 0 { 0.0 } else { PI };
        phase.extend(core::iter::repeat_n(p, hi - lo));
    }

    let rabi = match &knots {
        None => alloc::vec![spec.max_rabi; intervals + 1],
        Some(v) => (0..=intervals)
            .map(|i| {
                if i % (2 * k) == k {
                    // phase-inversion instant: cos(omega_S t) vanishes exactly
                    return 0.0;
                }
                let carrier = (PI * i as f64 / (2 * k) as f64).cos().abs();
                spec.max_rabi * interpolate_knots(v, i, intervals) * carrier
            })
            .collect(),
    };

    Ok(SampledWaveform {
        spec: spec.clone(),
        times,
        rabi,
        phase,
        boundaries,
        envelope_knots: knots,
    })
}

/// Linear interpolation of knots spread evenly over `[0, tau]` at grid point
/// `i` of `intervals`.
fn interpolate_knots(v: &[f64], i: usize, intervals: usize) -> f64 {
    let last = v.len() - 1;
    let num = i * last;
    let m = num / intervals;
    let rem = num % intervals;
    if rem == 0 || m >= last {
        return v[m.min(last)];
    }
    let frac = rem as f64 / intervals as f64;
    v[m] + (v[m + 1] - v[m]) * frac
}

impl SampledWaveform {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.spec.duration_s / (self.times.len() - 1) as f64
    }

    /// Grid indices of the segment boundaries, `0` and the last index included.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Grid intervals in the shortest (end) segment.
    pub fn samples_per_segment(&self) -> usize {
        self.boundaries[1]
    }

    /// Resolved DPSS knot values, when the envelope is Slepian.
    pub fn envelope_knots(&self) -> Option<&[f64]> {
        self.envelope_knots.as_deref()
    }

    /// `\int_0^tau Omega(t) e^{-i phi(t)} g(t) dt` by composite Simpson on each
    /// segment, where `g` is given per grid index.
    pub fn integrate_drive<G>(&self, g: G) -> Complex64
    where
        G: Fn(usize) -> Complex64,
    {
        let dt = self.dt();
        let mut acc = Complex64::new(0.0, 0.0);
        for (seg, w) in self.boundaries.windows(2).enumerate() {
            let sign = if seg % 2 == 0 { 1.0 } else { -1.0 };
            acc += simpson(w[0], w[1], dt, |i| g(i) * (sign * self.rabi[i]));
        }
        acc
    }

    /// Exact piecewise description of `Omega(t) e^{-i phi(t)}`.
    ///
    /// Square: one constant piece per segment. Slepian: the envelope is linear
    /// between knots and `|cos| e^{-i phi} = cos(omega_S t)`, so each knot
    /// interval gives two pieces with `kappa = +-omega_S`.
    pub(crate) fn drive_pieces(&self) -> Vec<DrivePiece> {
        let spec = &self.spec;
        match &self.envelope_knots {
            None => build_segments(spec)
                .expect("validated at construction")
                .iter()
                .map(|seg| DrivePiece {
                    start: seg.start_s,
                    len: seg.duration_s,
                    c0: seg.sign() * spec.max_rabi,
                    c1: 0.0,
                    kappa: 0.0,
                })
                .collect(),
            Some(v) => {
                let last = v.len() - 1;
                let h = spec.duration_s / last as f64;
                let ws = spec.band_frequency();
                let half = 0.5 * spec.max_rabi;
                let mut out = Vec::with_capacity(2 * last);
                for m in 0..last {
                    let start = spec.duration_s * m as f64 / last as f64;
                    let c0 = half * v[m];
                    let c1 = half * (v[m + 1] - v[m]) / h;
                    for kappa in [ws, -ws] {
                        out.push(DrivePiece {
                            start,
                            len: h,
                            c0,
                            c1,
                            kappa,
                        });
                    }
                }
                out
            }
        }
    }
}

/// Nominal residual displacement `-i (eta/2) \int Omega e^{-i phi} dt` with no
/// detuning and no noise.
pub fn nominal_closure(waveform: &SampledWaveform, lamb_dicke: f64) -> Complex64 {
    let area = waveform.integrate_drive(|_| Complex64::new(1.0, 0.0));
    Complex64::new(0.0, -0.5 * lamb_dicke) * area
}

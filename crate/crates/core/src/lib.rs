//! Oscillator frequency-noise spectroscopy with displaced cat states.
//!
//! The crate covers the whole numerical pipeline:
//!
//! - [`sequence`]: square and Slepian-modulated phase-inversion sequences,
//!   including the zeroth-order DPSS envelope ([`dpss`]).
//! - [`filter`]: frequency-noise filter functions, peak/bandwidth extraction and
//!   the discretised filter matrix.
//! - [`noise`] and [`simulate`]: noise realisations and the exact phase-space
//!   simulation of the state-dependent displacement, up to synthetic measurement
//!   campaigns with projection noise.
//! - [`nnls`] and [`reconstruct`]: smoothness-regularised nonnegative least
//!   squares and cross-validated spectrum reconstruction.
//! - [`analysis`] and [`thermometry`]: sensitivity limits, feature-height
//!   conversion and blue-sideband thermometry fits.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature spreads independent realisations, filter
//! rows and cross-validation work items over a rayon pool; results are
//! identical with and without it.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod dpss;
pub mod error;
pub mod filter;
mod integrate;
pub mod linalg;
pub mod nnls;
pub mod noise;
mod par;
pub mod reconstruct;
pub mod rng;
pub mod sequence;
pub mod simulate;
pub mod thermometry;

pub use error::{Error, Result};
pub use filter::{FilterCurve, FilterMatrix, Kernel, Mode, ModeConfig};
pub use noise::{NoiseModel, PsdTable, Tone, TonePhase};
pub use reconstruct::{MeasurementSet, ReconstructionConfig, SpectrumEstimate};
pub use sequence::{Envelope, PhaseSegment, SampledWaveform, SequenceSpec};
pub use simulate::{MeasurementRecord, TrajectoryResult};

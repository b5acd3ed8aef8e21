//! Campaign configuration files.
//!
//! A config is a JSON tree. Angular frequencies carry a `_rad_s` suffix;
//! any value given in Hz carries `_hz` and is converted here with a factor 2π.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use catspec_core::filter::{Kernel, Mode, ModeConfig};
use catspec_core::noise::{NoiseModel, PsdTable, Tone, TonePhase};
use catspec_core::reconstruct::{DEFAULT_LAMBDA_COUNT, DEFAULT_RESAMPLES};
use catspec_core::sequence::{Envelope, SequenceSpec};
use catspec_core::simulate::{CampaignSettings, DEFAULT_PHASE_SAMPLES};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeName {
    Square,
    Slepian,
}

/// One sequence. Exactly one of `max_rabi` (rad/s) and `rabi_hz` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub label: String,
    pub duration_s: f64,
    pub num_phase_shifts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rabi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    pub envelope: EnvelopeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_bandwidth: Option<f64>,
}

/// A family of sequences sharing everything but `S`, which runs over
/// `s_min..=s_max` in steps of `s_step`. Labels are `{label_prefix}{S}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_prefix: Option<String>,
    pub envelope: EnvelopeName,
    pub duration_s: f64,
    pub s_min: usize,
    pub s_max: usize,
    #[serde(default = "one")]
    pub s_step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rabi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_bandwidth: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub lamb_dicke: f64,
    pub mean_phonons: f64,
    #[serde(default)]
    pub detuning_rad_s: f64,
}

/// A tone `amplitude_hz sin(omega t + phase)`. Frequency as `omega_rad_s` or
/// `frequency_hz`; a missing `phase_rad` is redrawn for every realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneEntry {
    pub amplitude_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseConfig {
    #[default]
    None,
    SingleTone(ToneEntry),
    MultiTone {
        tones: Vec<ToneEntry>,
    },
    /// Two-sided PSD in Hz^2/Hz on `omega_start_rad_s + j omega_step_rad_s`.
    Psd {
        omega_start_rad_s: f64,
        omega_step_rad_s: f64,
        values_hz2_per_hz: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignEntry {
    /// `M`.
    pub blocks: usize,
    /// `r`.
    pub reps_per_block: usize,
    pub phase_samples: usize,
}

impl Default for CampaignEntry {
    fn default() -> Self {
        let d = CampaignSettings::default();
        CampaignEntry {
            blocks: d.blocks,
            reps_per_block: d.reps_per_block,
            phase_samples: d.phase_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionEntry {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_min_rad_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max_rad_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_candidates: Option<Vec<f64>>,
    pub lambda_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_lambda: Option<f64>,
    pub resamples: usize,
}

impl Default for ReconstructionEntry {
    fn default() -> Self {
        ReconstructionEntry {
            n: 200,
            omega_min_rad_s: None,
            omega_max_rad_s: None,
            lambda_candidates: None,
            lambda_count: DEFAULT_LAMBDA_COUNT,
            fixed_lambda: None,
            resamples: DEFAULT_RESAMPLES,
        }
    }
}

/// System-identification sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyEntry {
    pub amplitude_hz: f64,
    pub points: usize,
    /// Half-width of the frequency sweep in units of the filter FWHM.
    pub span_fwhm: f64,
    pub phase_samples: usize,
    /// Tone amplitudes for the fixed-frequency sweep. When absent, amplitudes
    /// are chosen so the predicted `P1` runs over `target_p1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_values_hz: Option<Vec<f64>>,
    pub target_p1: Vec<f64>,
}

impl Default for IdentifyEntry {
    fn default() -> Self {
        IdentifyEntry {
            amplitude_hz: 40.0,
            points: 21,
            span_fwhm: 1.0,
            phase_samples: DEFAULT_PHASE_SAMPLES,
            beta_values_hz: None,
            target_p1: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequenceConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence_sets: Vec<SequenceSetConfig>,
    #[serde(default)]
    pub modes: Vec<ModeEntry>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub campaign: CampaignEntry,
    #[serde(default)]
    pub reconstruction: ReconstructionEntry,
    #[serde(default)]
    pub identify: IdentifyEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn rabi(max_rabi: Option<f64>, rabi_hz: Option<f64>, what: &str) -> CliResult<f64> {
    match (max_rabi, rabi_hz) {
        (Some(w), None) => Ok(w),
        (None, Some(f)) => Ok(2.0 * PI * f),
        (None, None) => Err(invalid(format!("{what}: one of `max_rabi` or `rabi_hz` is required"))),
        (Some(_), Some(_)) => Err(invalid(format!("{what}: give only one of `max_rabi` and `rabi_hz`"))),
    }
}

fn envelope(
    name: EnvelopeName,
    num_points: Option<usize>,
    half_bandwidth: Option<f64>,
    what: &str,
) -> CliResult<Envelope> {
    match name {
        EnvelopeName::Square if num_points.is_some() || half_bandwidth.is_some() => Err(invalid(format!(
            "{what}: `num_points` and `half_bandwidth` apply to slepian envelopes only"
        ))),
        EnvelopeName::Square => Ok(Envelope::Square),
        EnvelopeName::Slepian => Ok(Envelope::Slepian {
            num_points,
            half_bandwidth,
        }),
    }
}

impl SequenceConfig {
    pub fn resolve(&self) -> CliResult<SequenceSpec> {
        let what = format!("sequence `{}`", self.label);
        let spec = SequenceSpec {
            label: self.label.clone(),
            duration_s: self.duration_s,
            num_phase_shifts: self.num_phase_shifts,
            max_rabi: rabi(self.max_rabi, self.rabi_hz, &what)?,
            envelope: envelope(self.envelope, self.num_points, self.half_bandwidth, &what)?,
        };
        spec.validate().map_err(|e| invalid(format!("{what}: {e}")))?;
        Ok(spec)
    }
}

impl SequenceSetConfig {
    pub fn resolve(&self) -> CliResult<Vec<SequenceSpec>> {
        let prefix = self.label_prefix.clone().unwrap_or_else(|| match self.envelope {
            EnvelopeName::Square => "square-S".into(),
            EnvelopeName::Slepian => "slepian-S".into(),
        });
        let what = format!("sequence set `{prefix}`");
        if self.s_step == 0 || self.s_min == 0 || self.s_min > self.s_max {
            return Err(invalid(format!("{what}: need 1 <= s_min <= s_max and s_step >= 1")));
        }
        let max_rabi = rabi(self.max_rabi, self.rabi_hz, &what)?;
        let env = envelope(self.envelope, self.num_points, self.half_bandwidth, &what)?;
        (self.s_min..=self.s_max)
            .step_by(self.s_step)
            .map(|s| {
                let spec = SequenceSpec {
                    label: format!("{prefix}{s}"),
                    duration_s: self.duration_s,
                    num_phase_shifts: s,
                    max_rabi,
                    envelope: env,
                };
                spec.validate()
                    .map_err(|e| invalid(format!("sequence `{}`: {e}", spec.label)))?;
                Ok(spec)
            })
            .collect()
    }
}

impl ToneEntry {
    fn resolve(&self) -> CliResult<Tone> {
        let omega = match (self.omega_rad_s, self.frequency_hz) {
            (Some(w), None) => w,
            (None, Some(f)) => 2.0 * PI * f,
            _ => return Err(invalid("tone: give exactly one of `omega_rad_s` and `frequency_hz`")),
        };
        Ok(Tone {
            amplitude_hz: self.amplitude_hz,
            omega,
            phase: self.phase_rad.map_or(TonePhase::Randomized, TonePhase::Fixed),
        })
    }
}

impl NoiseConfig {
    pub fn resolve(&self) -> CliResult<NoiseModel> {
        let model = match self {
            NoiseConfig::None => NoiseModel::None,
            NoiseConfig::SingleTone(t) => NoiseModel::SingleTone(t.resolve()?),
            NoiseConfig::MultiTone { tones } => {
                NoiseModel::MultiTone(tones.iter().map(ToneEntry::resolve).collect::<CliResult<_>>()?)
            }
            NoiseConfig::Psd {
                omega_start_rad_s,
                omega_step_rad_s,
                values_hz2_per_hz,
            } => NoiseModel::SampledPsd(PsdTable {
                omega_start: *omega_start_rad_s,
                omega_step: *omega_step_rad_s,
                values: values_hz2_per_hz.clone(),
            }),
        };
        model.validate().map_err(|e| invalid(format!("noise: {e}")))?;
        Ok(model)
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// All sequences: the explicit list followed by each expanded set.
    /// Labels must be unique.
    pub fn sequence_specs(&self) -> CliResult<Vec<SequenceSpec>> {
        let mut specs = self
            .sequences
            .iter()
            .map(SequenceConfig::resolve)
            .collect::<CliResult<Vec<_>>>()?;
        for set in &self.sequence_sets {
            specs.extend(set.resolve()?);
        }
        if specs.is_empty() {
            return Err(invalid("no sequences"));
        }
        let mut seen = HashSet::new();
        for s in &specs {
            if s.label.is_empty() {
                return Err(invalid("sequence labels must be non-empty"));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(invalid(format!("duplicate sequence label `{}`", s.label)));
            }
        }
        Ok(specs)
    }

    pub fn mode_config(&self) -> CliResult<ModeConfig> {
        if self.modes.is_empty() {
            return Err(invalid("no modes: give at least one {lamb_dicke, mean_phonons}"));
        }
        let modes = ModeConfig {
            modes: self
                .modes
                .iter()
                .map(|m| Mode {
                    lamb_dicke: m.lamb_dicke,
                    detuning: m.detuning_rad_s,
                    mean_phonons: m.mean_phonons,
                })
                .collect(),
        };
        modes.validate().map_err(|e| invalid(format!("modes: {e}")))?;
        Ok(modes)
    }

    pub fn kernel(&self, overridden: Option<&str>) -> CliResult<Kernel> {
        match overridden.or(self.kernel.as_deref()) {
            None => Ok(Kernel::default()),
            Some(name) => name.parse().map_err(|e: catspec_core::Error| invalid(e.to_string())),
        }
    }

    pub fn campaign_settings(&self) -> CampaignSettings {
        CampaignSettings {
            blocks: self.campaign.blocks,
            reps_per_block: self.campaign.reps_per_block,
            phase_samples: self.campaign.phase_samples,
        }
    }
}

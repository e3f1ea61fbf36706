//! JSON schema of an experiment: scenario, processing mode, compression,
//! SNR sweep, and recovery knobs.
//!
//! A config file is a single JSON object.  Only `scenario` and `mode` are
//! mandatory; everything else has defaults geared toward a noiseless
//! single-trial run.  SNR entries accept the string `"inf"` for the
//! noiseless point, since JSON has no literal for it.

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::PathBuf;

use subrad_core::focusing::{RecoverOptions, SolverBackend};
use subrad_core::mimo::{make_array, ArrayKind, MimoTarget};
use subrad_core::model::{RadarParams, Target};
use subrad_core::synth::{ArrayGeometry, BandSelection};
use subrad_core::{Error, Result};

/// Processing pipeline applied to every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Matched filter and Doppler DFT on zero-filled reconstructed frames.
    Classic,
    /// Doppler focusing over a uniform pulse train.
    Focused,
    /// Doppler focusing over a random subset of transmit slots.
    Nonuniform,
    /// Joint delay/Doppler/fold recovery of a phase-coded train.
    PhaseCoded,
    /// Stepped-frequency train with DFT-grid recovery.
    Sfr,
    /// Multi-channel array recovery with azimuth.
    Mimo,
}

/// Radar constants of the scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub pri_s: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub num_pulses: usize,
    #[serde(default)]
    pub aperture_wavelengths: Option<f64>,
}

impl ParamsConfig {
    pub fn build(&self) -> Result<RadarParams> {
        let p = RadarParams::new(self.pri_s, self.bandwidth_hz, self.carrier_hz, self.num_pulses)?;
        Ok(match self.aperture_wavelengths {
            Some(a) => p.with_aperture(a),
            None => p,
        })
    }
}

/// Draws a fresh scene per trial instead of replaying fixed targets:
/// distinct grid cells, unit-modulus amplitudes with random phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_targets: usize,
}

/// Stepped-frequency train constants for [`Mode::Sfr`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SfrConfig {
    pub f0_hz: f64,
    pub step_hz: f64,
    /// Doppler cells of the recovery grid; the natural grid has one.
    #[serde(default)]
    pub doppler_bins: Option<usize>,
}

/// Array layout for [`Mode::Mimo`], realized through the seeded factory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub virtual_tx: usize,
    pub virtual_rx: usize,
    pub num_tx: usize,
    pub num_rx: usize,
    pub kind: ArrayKind,
}

impl ArrayConfig {
    pub fn build(&self, seed: u64) -> Result<ArrayGeometry> {
        make_array(
            self.virtual_tx,
            self.virtual_rx,
            self.num_tx,
            self.num_rx,
            self.kind,
            seed,
        )
    }
}

/// What is in front of the radar and which waveform-independent knobs the
/// mode needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub params: ParamsConfig,
    /// Fixed single-channel targets, replayed in every trial.
    #[serde(default)]
    pub targets: Option<Vec<Target>>,
    /// Fixed array targets for [`Mode::Mimo`].
    #[serde(default)]
    pub mimo_targets: Option<Vec<MimoTarget>>,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    /// Delay ambiguity factor `Q` for [`Mode::PhaseCoded`].
    #[serde(default)]
    pub ambiguity_factor: Option<usize>,
    #[serde(default)]
    pub sfr: Option<SfrConfig>,
    #[serde(default)]
    pub array: Option<ArrayConfig>,
}

/// Which Fourier coefficients the receiver keeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum KappaConfig {
    Full,
    Random { k: usize },
    Consecutive { k: usize },
    Multiband { groups: usize, group_size: usize },
}

impl Default for KappaConfig {
    fn default() -> KappaConfig {
        KappaConfig::Full
    }
}

impl KappaConfig {
    pub fn resolve(&self, num_bins: usize, seed: u64) -> Result<BandSelection> {
        match *self {
            KappaConfig::Full => Ok(BandSelection::full(num_bins)),
            KappaConfig::Random { k } => {
                if k == 0 || k > num_bins {
                    return Err(Error::InvalidParam(format!(
                        "random band size {k} outside 1..={num_bins}"
                    )));
                }
                Ok(BandSelection::random(k, num_bins, seed))
            }
            KappaConfig::Consecutive { k } => BandSelection::consecutive(k, num_bins),
            KappaConfig::Multiband { groups, group_size } => {
                BandSelection::multiband(groups, group_size, num_bins)
            }
        }
    }
}

/// Sub-Nyquist budget: spectral selection plus, for non-uniform trains,
/// the number of transmitted pulses.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompressionConfig {
    #[serde(default)]
    pub kappa: KappaConfig,
    /// Transmitted pulses `M` out of the `num_pulses` grid slots.
    #[serde(default)]
    pub num_tx_pulses: Option<usize>,
}

/// Solver knobs passed through to the recovery entry points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverConfig {
    #[serde(default = "default_backend")]
    pub backend: SolverBackend,
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub whiten_eps: Option<f64>,
}

fn default_backend() -> SolverBackend {
    SolverBackend::MatchingPursuit
}

impl Default for RecoverConfig {
    fn default() -> RecoverConfig {
        RecoverConfig {
            backend: default_backend(),
            refine: false,
            whiten_eps: None,
        }
    }
}

impl RecoverConfig {
    pub fn options(&self) -> RecoverOptions {
        let mut opts = RecoverOptions::default();
        opts.backend = self.backend;
        opts.refine = self.refine;
        if let Some(eps) = self.whiten_eps {
            opts.whiten_eps = eps;
        }
        opts
    }
}

/// One SNR point in dB; serializes as a number, or as `"inf"` / `"-inf"`
/// for the values JSON cannot hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrDb(pub f64);

impl SnrDb {
    /// Stable text form used in CSV columns.
    pub fn label(&self) -> String {
        if self.0 == f64::INFINITY {
            "inf".to_string()
        } else if self.0 == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            format!("{}", self.0)
        }
    }
}

impl Serialize for SnrDb {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0)
        } else {
            serializer.serialize_str(&self.label())
        }
    }
}

impl<'de> Deserialize<'de> for SnrDb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<SnrDb, D::Error> {
        struct SnrVisitor;
        impl<'de> Visitor<'de> for SnrVisitor {
            type Value = SnrDb;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<SnrDb, E> {
                Ok(SnrDb(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<SnrDb, E> {
                Ok(SnrDb(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<SnrDb, E> {
                Ok(SnrDb(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<SnrDb, E> {
                v.trim()
                    .parse::<f64>()
                    .map(SnrDb)
                    .map_err(|_| E::custom(format!("bad SNR value {v:?}")))
            }
        }
        deserializer.deserialize_any(SnrVisitor)
    }
}

fn default_trials() -> usize {
    1
}

fn default_snr_sweep() -> Vec<SnrDb> {
    vec![SnrDb(f64::INFINITY)]
}

/// Root object of a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub mode: Mode,
    #[serde(default)]
    pub compression: CompressionConfig,
    #[serde(default = "default_snr_sweep")]
    pub snr_sweep_db: Vec<SnrDb>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Targets requested from the solver; defaults to the scene size.
    #[serde(default)]
    pub num_targets_recover: Option<usize>,
    #[serde(default)]
    pub recover: RecoverConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Checks the structural invariants that do not need a scene: trial
    /// and sweep counts, and the mode-specific knobs.  Scene presence is
    /// checked where a scene is actually drawn, so a recovery-only config
    /// can omit it.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParam("trials must be at least 1".into()));
        }
        if self.snr_sweep_db.is_empty() {
            return Err(Error::InvalidParam("snr_sweep_db must not be empty".into()));
        }
        if self.mode != Mode::Mimo && self.scenario.mimo_targets.is_some() {
            return Err(Error::InvalidParam(
                "mimo_targets only apply to mode \"mimo\"; use targets".into(),
            ));
        }
        match self.mode {
            Mode::Nonuniform => {
                let m = self.compression.num_tx_pulses.ok_or_else(|| {
                    Error::InvalidParam("mode \"nonuniform\" needs compression.num_tx_pulses".into())
                })?;
                if m == 0 || m > self.scenario.params.num_pulses {
                    return Err(Error::InvalidParam(format!(
                        "num_tx_pulses {m} outside 1..={}",
                        self.scenario.params.num_pulses
                    )));
                }
            }
            Mode::PhaseCoded => {
                let q = self.scenario.ambiguity_factor.ok_or_else(|| {
                    Error::InvalidParam(
                        "mode \"phase_coded\" needs scenario.ambiguity_factor".into(),
                    )
                })?;
                if q == 0 {
                    return Err(Error::InvalidParam("ambiguity_factor must be at least 1".into()));
                }
            }
            Mode::Sfr => {
                if self.scenario.sfr.is_none() {
                    return Err(Error::InvalidParam("mode \"sfr\" needs scenario.sfr".into()));
                }
            }
            Mode::Mimo => {
                if self.scenario.array.is_none() {
                    return Err(Error::InvalidParam("mode \"mimo\" needs scenario.array".into()));
                }
                if self.scenario.targets.is_some() {
                    return Err(Error::InvalidParam(
                        "mode \"mimo\" takes mimo_targets, not targets".into(),
                    ));
                }
            }
            Mode::Classic | Mode::Focused => {}
        }
        if let Some(g) = &self.scenario.generator {
            if g.num_targets == 0 {
                return Err(Error::InvalidParam("generator.num_targets must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Number of targets handed to the solver.
    pub fn num_recover(&self) -> Result<usize> {
        if let Some(l) = self.num_targets_recover {
            if l == 0 {
                return Err(Error::InvalidParam("num_targets_recover must be at least 1".into()));
            }
            return Ok(l);
        }
        if let Some(t) = &self.scenario.targets {
            return Ok(t.len());
        }
        if let Some(t) = &self.scenario.mimo_targets {
            return Ok(t.len());
        }
        if let Some(g) = &self.scenario.generator {
            return Ok(g.num_targets);
        }
        Err(Error::InvalidParam(
            "set num_targets_recover or give the config a scene".into(),
        ))
    }
}

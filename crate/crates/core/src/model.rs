//! Radar parameters, target scenes, grid quantization, and model-validity
//! checks.
//!
//! Delay is stored in seconds, Doppler in rad/s (the slow-time phase of a
//! target is `exp(-j nu p tau)` for pulse index `p` and PRI `tau`), and
//! azimuth as the sine of the bearing angle.  Conversion helpers to range
//! and radial velocity are at the bottom of the module.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::synth::ArrayGeometry;
use crate::{Error, Result};

/// Propagation speed used by every range/delay conversion, in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Default threshold for the "much smaller than" checks in
/// [`validate_assumptions`]: a ratio above this value is a violation.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.1;

/// Pulse-train parameters shared by simulation and recovery.
///
/// `num_nyquist_bins` is always `pri_s * bandwidth_hz` rounded to the nearest
/// integer; the constructor rejects parameter sets where that product is not
/// integral to within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Pulse repetition interval in seconds.
    pub pri_s: f64,
    /// Two-sided bandwidth of the transmitted pulse in Hz.
    pub bandwidth_hz: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Number of pulses in one coherent processing interval.
    pub num_pulses: usize,
    /// Nyquist-rate samples per PRI; equals `round(pri_s * bandwidth_hz)`.
    pub num_nyquist_bins: usize,
    /// Physical array aperture in wavelengths, for multi-channel scenes.
    #[serde(default)]
    pub aperture_wavelengths: Option<f64>,
}

impl RadarParams {
    /// Builds a parameter set, deriving the Nyquist bin count from
    /// `pri_s * bandwidth_hz`.
    pub fn new(
        pri_s: f64,
        bandwidth_hz: f64,
        carrier_hz: f64,
        num_pulses: usize,
    ) -> Result<RadarParams> {
        if !(pri_s > 0.0) || !pri_s.is_finite() {
            return Err(Error::InvalidParam(format!("pri_s must be positive, got {pri_s}")));
        }
        if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
            return Err(Error::InvalidParam(format!(
                "bandwidth_hz must be positive, got {bandwidth_hz}"
            )));
        }
        if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
            return Err(Error::InvalidParam(format!(
                "carrier_hz must be positive, got {carrier_hz}"
            )));
        }
        if num_pulses == 0 {
            return Err(Error::InvalidParam("num_pulses must be at least 1".into()));
        }
        let product = pri_s * bandwidth_hz;
        let bins = product.round();
        if (product - bins).abs() > 1e-9 * product.max(1.0) {
            return Err(Error::InvalidParam(format!(
                "pri_s * bandwidth_hz = {product} is not an integer sample count"
            )));
        }
        if bins < 1.0 {
            return Err(Error::InvalidParam(
                "pri_s * bandwidth_hz must be at least 1".into(),
            ));
        }
        Ok(RadarParams {
            pri_s,
            bandwidth_hz,
            carrier_hz,
            num_pulses,
            num_nyquist_bins: bins as usize,
            aperture_wavelengths: None,
        })
    }

    /// Same as [`RadarParams::new`] with an array aperture attached.
    pub fn with_aperture(mut self, aperture_wavelengths: f64) -> RadarParams {
        self.aperture_wavelengths = Some(aperture_wavelengths);
        self
    }

    /// Length of the coherent processing interval in seconds.
    pub fn cpi_s(&self) -> f64 {
        self.pri_s * self.num_pulses as f64
    }

    /// Carrier wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// One point scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Round-trip delay in seconds, within the unambiguous interval of the
    /// processing mode (one PRI for single-PRF modes).
    pub delay_s: f64,
    /// Doppler radial frequency in rad/s; slow-time phase is
    /// `exp(-j doppler_rad_s * p * pri_s)`.
    pub doppler_rad_s: f64,
    /// Sine of the azimuth bearing, in [-1, 1]; `None` for single-channel
    /// scenes.
    #[serde(default)]
    pub azimuth_sine: Option<f64>,
    /// Complex reflectivity; must be nonzero.
    pub amplitude: Complex64,
}

impl Target {
    /// Builds a single-channel target from physical parameters.
    pub fn new(delay_s: f64, doppler_rad_s: f64, amplitude: Complex64) -> Target {
        Target {
            delay_s,
            doppler_rad_s,
            azimuth_sine: None,
            amplitude,
        }
    }

    /// Places a target exactly on grid cell `(delay_bin, doppler_bin)` of the
    /// canonical grid for `params`.
    pub fn on_grid(
        delay_bin: usize,
        doppler_bin: usize,
        params: &RadarParams,
        amplitude: Complex64,
    ) -> Target {
        let grid = GridSpec::from_params(params);
        Target {
            delay_s: delay_bin as f64 * grid.delay_step_s(params),
            doppler_rad_s: doppler_bin as f64 * grid.doppler_step_rad_s(params),
            azimuth_sine: None,
            amplitude,
        }
    }

    /// Returns the target with an azimuth bearing attached.
    pub fn with_azimuth(mut self, azimuth_sine: f64) -> Target {
        self.azimuth_sine = Some(azimuth_sine);
        self
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.amplitude.norm() == 0.0 {
            return Err(Error::InvalidParam(format!("target {index} has zero amplitude")));
        }
        if !self.delay_s.is_finite() || self.delay_s < 0.0 {
            return Err(Error::InvalidParam(format!(
                "target {index} delay {} is not a finite nonnegative time",
                self.delay_s
            )));
        }
        if !self.doppler_rad_s.is_finite() {
            return Err(Error::InvalidParam(format!("target {index} doppler is not finite")));
        }
        if let Some(a) = self.azimuth_sine {
            if !(-1.0..=1.0).contains(&a) {
                return Err(Error::InvalidParam(format!(
                    "target {index} azimuth sine {a} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// A sparse set of point targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScene {
    pub targets: Vec<Target>,
}

impl TargetScene {
    /// Validates every target (nonzero amplitude, finite parameters,
    /// azimuth sine within [-1, 1]).
    pub fn new(targets: Vec<Target>) -> Result<TargetScene> {
        for (i, t) in targets.iter().enumerate() {
            t.validate(i)?;
        }
        Ok(TargetScene { targets })
    }

    /// Number of targets (the sparsity level of the scene).
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Discretization of the delay/Doppler/azimuth space.
///
/// The canonical grid covers one PRI with `num_nyquist_bins` delay cells
/// (step `pri_s / N`, the inverse bandwidth) and one Doppler ambiguity
/// interval with `num_pulses` cells (step `2 pi / (P * pri_s)`).  The
/// azimuth grid, when present, spans sine space [-1, 1) uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delay_bins: usize,
    pub doppler_bins: usize,
    #[serde(default)]
    pub azimuth_bins: Option<usize>,
}

impl GridSpec {
    /// Canonical grid: `N` delay bins by `P` Doppler bins, no azimuth axis.
    pub fn from_params(params: &RadarParams) -> GridSpec {
        GridSpec {
            delay_bins: params.num_nyquist_bins,
            doppler_bins: params.num_pulses,
            azimuth_bins: None,
        }
    }

    /// Adds an azimuth axis of `bins` cells over sine space.
    pub fn with_azimuth(mut self, bins: usize) -> GridSpec {
        self.azimuth_bins = Some(bins);
        self
    }

    /// Delay cell width in seconds.
    pub fn delay_step_s(&self, params: &RadarParams) -> f64 {
        params.pri_s / self.delay_bins as f64
    }

    /// Doppler cell width in rad/s.
    pub fn doppler_step_rad_s(&self, params: &RadarParams) -> f64 {
        2.0 * std::f64::consts::PI / (self.doppler_bins as f64 * params.pri_s)
    }

    /// Azimuth cell width in sine units, if the grid has an azimuth axis.
    pub fn azimuth_step(&self) -> Option<f64> {
        self.azimuth_bins.map(|b| 2.0 / b as f64)
    }
}

/// A target snapped onto grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedTarget {
    pub delay_bin: usize,
    pub doppler_bin: usize,
    pub azimuth_bin: Option<usize>,
    pub amplitude: Complex64,
}

/// Rounds half up, then wraps into `[0, bins)`.
fn quantize_value(value: f64, step: f64, bins: usize, what: &str, index: usize) -> usize {
    let cells = value / step;
    let nearest = (cells + 0.5).floor();
    let residual = (cells - nearest).abs();
    if residual > 1e-6 {
        log::warn!(
            "target {index} {what} is off-grid by {residual:.3e} cells; quantizing"
        );
    }
    (nearest as i64).rem_euclid(bins as i64) as usize
}

/// Snaps every scene target to the grid, wrapping delay and Doppler into
/// their unambiguous intervals.
///
/// Quantization rounds half up and warns (via `log`) when a coordinate is
/// off-grid by more than 1e-6 of a cell.  Two targets landing on the same
/// (delay, Doppler) cell is an error because they would be indistinguishable
/// from a single scatterer.
pub fn quantize_scene(
    scene: &TargetScene,
    grid: &GridSpec,
    params: &RadarParams,
) -> Result<Vec<QuantizedTarget>> {
    let mut out = Vec::with_capacity(scene.len());
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(scene.len());
    let delay_step = grid.delay_step_s(params);
    let doppler_step = grid.doppler_step_rad_s(params);
    for (i, t) in scene.targets.iter().enumerate() {
        let delay_bin = quantize_value(t.delay_s, delay_step, grid.delay_bins, "delay", i);
        let doppler_bin =
            quantize_value(t.doppler_rad_s, doppler_step, grid.doppler_bins, "doppler", i);
        // Azimuth bin 0 sits at sine 0; negative sines wrap into the upper
        // half of the grid, mirroring the slow-time Doppler convention.
        let azimuth_bin = match (t.azimuth_sine, grid.azimuth_bins) {
            (Some(sine), Some(bins)) => {
                let step = 2.0 / bins as f64;
                Some(quantize_value(sine, step, bins, "azimuth", i))
            }
            _ => None,
        };
        let cell = (delay_bin, doppler_bin);
        if let Some(first) = cells.iter().position(|&c| c == cell) {
            return Err(Error::GridCollision {
                first,
                second: i,
                cell,
            });
        }
        cells.push(cell);
        out.push(QuantizedTarget {
            delay_bin,
            doppler_bin,
            azimuth_bin,
            amplitude: t.amplitude,
        });
    }
    Ok(out)
}

/// Scene-level context for [`validate_assumptions`].
#[derive(Debug, Clone, Copy)]
pub struct AssumptionInputs {
    /// Transmitted pulse width in seconds.
    pub pulse_width_s: f64,
    /// Worst-case radial acceleration over the CPI, in m/s^2.
    pub accel_m_s2: f64,
    /// Ratio above which a "much smaller than" check fails.
    pub ratio_threshold: f64,
}

impl AssumptionInputs {
    pub fn new(pulse_width_s: f64, accel_m_s2: f64) -> AssumptionInputs {
        AssumptionInputs {
            pulse_width_s,
            accel_m_s2,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
        }
    }
}

/// The narrowband model conditions checked by [`validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelCheck {
    /// Target delay must not migrate across range cells during the CPI:
    /// `nu << carrier * delay / cpi`.
    RangeMigration,
    /// Doppler phase rotation within one pulse must be negligible:
    /// `nu * pulse_width << 1`.
    IntraPulsePhase,
    /// Doppler shift must be small against the spectral cell of the pulse:
    /// `nu << carrier / (cpi * bandwidth)`.
    DopplerBandwidth,
    /// Doppler must stay in one cell over the CPI despite acceleration:
    /// `accel << c / (2 * carrier * cpi^2)`.
    AccelerationDrift,
    /// Aperture traversal time must be small against the inverse bandwidth:
    /// `2 * Z * lambda / c << 1 / bandwidth`.
    ApertureNarrowband,
}

/// One failed model condition, with the two sides of the inequality and
/// their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionViolation {
    pub check: ModelCheck,
    /// Index of the offending target, or `None` for scene-wide checks.
    pub target: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn check_ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Evaluates every narrowband model condition and returns the violations.
///
/// Checks are reported, never enforced: a static target very close to the
/// radar trivially keeps the range-migration ratio at zero, while a slow
/// target at near-zero delay can exceed it without the simulation becoming
/// meaningless.  Callers decide what to do with the report.
pub fn validate_assumptions(
    scene: &TargetScene,
    params: &RadarParams,
    inputs: &AssumptionInputs,
    array: Option<&ArrayGeometry>,
) -> Vec<AssumptionViolation> {
    let mut out = Vec::new();
    let cpi = params.cpi_s();
    let threshold = inputs.ratio_threshold;
    let mut push = |check, target, lhs, rhs| {
        let ratio = check_ratio(lhs, rhs);
        if ratio > threshold {
            out.push(AssumptionViolation {
                check,
                target,
                lhs,
                rhs,
                ratio,
            });
        }
    };

    for (i, t) in scene.targets.iter().enumerate() {
        let nu = t.doppler_rad_s.abs();
        push(
            ModelCheck::RangeMigration,
            Some(i),
            nu,
            params.carrier_hz * t.delay_s / cpi,
        );
        push(ModelCheck::IntraPulsePhase, Some(i), nu * inputs.pulse_width_s, 1.0);
        push(
            ModelCheck::DopplerBandwidth,
            Some(i),
            nu,
            params.carrier_hz / (cpi * params.bandwidth_hz),
        );
    }

    push(
        ModelCheck::AccelerationDrift,
        None,
        inputs.accel_m_s2,
        SPEED_OF_LIGHT / (2.0 * params.carrier_hz * cpi * cpi),
    );

    let aperture = array
        .map(|a| a.aperture_wavelengths())
        .or(params.aperture_wavelengths);
    if let Some(z) = aperture {
        push(
            ModelCheck::ApertureNarrowband,
            None,
            2.0 * z * params.wavelength_m() / SPEED_OF_LIGHT,
            1.0 / params.bandwidth_hz,
        );
    }
    out
}

/// Doppler radial frequency (rad/s) of a radial velocity in m/s.
pub fn doppler_from_velocity(velocity_m_s: f64, carrier_hz: f64) -> f64 {
    2.0 * velocity_m_s * carrier_hz / SPEED_OF_LIGHT
}

/// Radial velocity in m/s of a Doppler radial frequency in rad/s.
pub fn velocity_from_doppler(doppler_rad_s: f64, carrier_hz: f64) -> f64 {
    doppler_rad_s * SPEED_OF_LIGHT / (2.0 * carrier_hz)
}

/// Round-trip delay of a one-way range in meters.
pub fn delay_from_range(range_m: f64) -> f64 {
    2.0 * range_m / SPEED_OF_LIGHT
}

/// One-way range of a round-trip delay in seconds.
pub fn range_from_delay(delay_s: f64) -> f64 {
    delay_s * SPEED_OF_LIGHT / 2.0
}

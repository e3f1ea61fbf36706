//! Collocated-array scenes and joint delay-Doppler-azimuth recovery.
//!
//! A thinned array of `M` transmitters and `Q` receivers stands in for a
//! dense virtual design of `T * R` elements.  Orthogonal waveforms keep
//! the `M * Q` channels separable at each receiver, so one coherent
//! processing interval yields a channel-by-frame-by-band coefficient cube;
//! recovery focuses every channel, sums them against azimuth steering, and
//! peels targets greedily.  Element positions are in wavelengths and
//! bearing enters as the sine of the azimuth angle.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dft::{inverse_from_sparse, DftPlan};
use crate::focusing::{
    sort_detections, whiten, Detection, RecoverOptions, RecoveryResult, Whitened,
};
use crate::model::RadarParams;
use crate::synth::{ArrayGeometry, BandSelection, ScheduleKind, XampleSet};
use crate::waveforms::PulseSpectrum;
use crate::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn phasor(ph: f64) -> Complex64 {
    Complex64::new(ph.cos(), ph.sin())
}

/// One scatterer of an array scene.
///
/// Doppler is a frequency in Hz here, and the slow-time phase advances as
/// `exp(+j 2 pi doppler_hz p pri)`; the single-channel model uses the
/// opposite sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MimoTarget {
    /// Round-trip delay in seconds, within one PRI.
    pub delay_s: f64,
    /// Sine of the azimuth bearing, in [-1, 1].
    pub azimuth_sine: f64,
    /// Doppler frequency in Hz, within the slow-time Nyquist interval.
    pub doppler_hz: f64,
    /// Complex reflectivity; must be nonzero.
    pub amplitude: Complex64,
}

/// A set of [`MimoTarget`]s sharing one coherent processing interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoScene {
    pub targets: Vec<MimoTarget>,
}

impl MimoScene {
    pub fn new(targets: Vec<MimoTarget>) -> Result<MimoScene> {
        if targets.is_empty() {
            return Err(Error::InvalidParam("scene has no targets".into()));
        }
        Ok(MimoScene { targets })
    }

    /// Checks every target against the unambiguous intervals of `params`.
    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        let nyq = 0.5 / params.pri_s;
        for (i, t) in self.targets.iter().enumerate() {
            if t.amplitude.norm() == 0.0 {
                return Err(Error::InvalidParam(format!("target {i} has zero amplitude")));
            }
            if !t.delay_s.is_finite() || t.delay_s < 0.0 || t.delay_s >= params.pri_s {
                return Err(Error::InvalidParam(format!(
                    "target {i} delay {} is outside [0, {})",
                    t.delay_s, params.pri_s
                )));
            }
            if !t.doppler_hz.is_finite() || t.doppler_hz.abs() > nyq {
                return Err(Error::InvalidParam(format!(
                    "target {i} Doppler {} Hz exceeds the slow-time Nyquist limit {nyq} Hz",
                    t.doppler_hz
                )));
            }
            if !t.azimuth_sine.is_finite() || t.azimuth_sine.abs() > 1.0 {
                return Err(Error::InvalidParam(format!(
                    "target {i} azimuth sine {} is outside [-1, 1]",
                    t.azimuth_sine
                )));
            }
        }
        Ok(())
    }
}

/// Effective virtual positions of each transmit/receive pair.
///
/// Channel `(m, q)` steers by `exp(j 2 pi beta_mq theta)` with
/// `beta_mq = (zeta_q + xi_m) (f_m lambda / c + 1)`, where `f_m` is the
/// transmitter's carrier offset; with all offsets zero this is the plain
/// element-position sum.
#[derive(Debug, Clone)]
pub struct ChannelSeparation {
    betas: Array2<f64>,
}

impl ChannelSeparation {
    pub fn new(array: &ArrayGeometry, params: &RadarParams) -> ChannelSeparation {
        let m_count = array.num_tx();
        let q_count = array.num_rx();
        let mut betas = Array2::zeros((m_count, q_count));
        for m in 0..m_count {
            let carrier_ratio = array.tx_carrier_offsets_hz[m] / params.carrier_hz;
            for q in 0..q_count {
                betas[(m, q)] =
                    (array.rx_positions[q] + array.tx_positions[m]) * (carrier_ratio + 1.0);
            }
        }
        ChannelSeparation { betas }
    }

    pub fn beta(&self, m: usize, q: usize) -> f64 {
        self.betas[(m, q)]
    }
}

/// How [`make_array`] places the physical elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    /// Dense half-wavelength design: receivers at `q / 2`, transmitters at
    /// `R m / 2`, so the virtual sums tile `{0, 1/2, ..., (TR - 1) / 2}`.
    Ula,
    /// Elements drawn uniformly over the virtual aperture `[0, TR / 2]`
    /// and sorted; transmitters are drawn before receivers.
    Random,
}

/// Builds an `M x Q` physical array for a `T x R` virtual design.
///
/// `seed` feeds the position draw for [`ArrayKind::Random`] and is ignored
/// for the dense layout.  Carrier offsets start at zero; overwrite
/// `tx_carrier_offsets_hz` (for instance with [`fdma_carriers`]) to
/// separate channels in frequency.
pub fn make_array(
    virtual_tx: usize,
    virtual_rx: usize,
    num_tx: usize,
    num_rx: usize,
    kind: ArrayKind,
    seed: u64,
) -> Result<ArrayGeometry> {
    if virtual_tx == 0 || virtual_rx == 0 {
        return Err(Error::InvalidParam("virtual design must be nonempty".into()));
    }
    if num_tx == 0 || num_rx == 0 {
        return Err(Error::InvalidParam("array needs transmitters and receivers".into()));
    }
    if num_tx > virtual_tx || num_rx > virtual_rx {
        return Err(Error::InvalidParam(format!(
            "{num_tx} x {num_rx} physical elements exceed the {virtual_tx} x {virtual_rx} design"
        )));
    }
    let (tx_positions, rx_positions) = match kind {
        ArrayKind::Ula => (
            (0..num_tx).map(|m| virtual_rx as f64 * m as f64 / 2.0).collect(),
            (0..num_rx).map(|q| q as f64 / 2.0).collect(),
        ),
        ArrayKind::Random => {
            let aperture = virtual_tx as f64 * virtual_rx as f64 / 2.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |count: usize| -> Vec<f64> {
                let mut v: Vec<f64> =
                    (0..count).map(|_| rand::Rng::gen::<f64>(&mut rng) * aperture).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            };
            let tx = draw(num_tx);
            let rx = draw(num_rx);
            (tx, rx)
        }
    };
    let geometry = ArrayGeometry {
        tx_positions,
        rx_positions,
        virtual_tx,
        virtual_rx,
        tx_carrier_offsets_hz: vec![0.0; num_tx],
    };
    geometry.validate()?;
    Ok(geometry)
}

/// Evenly spaced carrier offsets `base_hz + m * spacing_hz` for `num_tx`
/// transmitters; the spacing must cover each waveform's bandwidth or the
/// channels overlap in frequency.
pub fn fdma_carriers(
    num_tx: usize,
    base_hz: f64,
    spacing_hz: f64,
    bandwidth_hz: f64,
) -> Result<Vec<f64>> {
    if num_tx == 0 {
        return Err(Error::InvalidParam("need at least one transmitter".into()));
    }
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(Error::InvalidParam(format!(
            "bandwidth_hz must be positive, got {bandwidth_hz}"
        )));
    }
    if num_tx > 1 && (!spacing_hz.is_finite() || spacing_hz < bandwidth_hz) {
        return Err(Error::InvalidParam(format!(
            "carrier spacing {spacing_hz} Hz is below the waveform bandwidth {bandwidth_hz} Hz"
        )));
    }
    Ok((0..num_tx).map(|m| base_hz + m as f64 * spacing_hz).collect())
}

/// Sine of azimuth cell `bin` on the `T * R`-point grid.
///
/// Cells step by `2 / (T R)` starting from broadside; the upper half of
/// the grid wraps to negative sines, so bin 0 always means broadside.
pub fn azimuth_sine_of_bin(bin: usize, azimuth_bins: usize) -> f64 {
    let mut sine = 2.0 * bin as f64 / azimuth_bins as f64;
    if sine >= 1.0 {
        sine -= 2.0;
    }
    sine
}

/// Dense atom matrix for a list of `(delay_bin, doppler_bin, azimuth_bin)`
/// cells, one column per cell over every channel, frame, and band
/// position.
///
/// Columns are spectrum-free (whitened) atoms; their pairwise geometry
/// decides whether a planted scene is identifiable, so the condition
/// number of this matrix makes a cheap well-posedness check for a given
/// array draw.
pub fn atom_matrix(
    cells: &[(usize, usize, usize)],
    array: &ArrayGeometry,
    params: &RadarParams,
    kappa: &BandSelection,
) -> Array2<Complex64> {
    let sep = ChannelSeparation::new(array, params);
    let m_count = array.num_tx();
    let q_count = array.num_rx();
    let kap = kappa.indices();
    let k = kap.len();
    let p_count = params.num_pulses;
    let n = params.num_nyquist_bins as f64;
    let bins = array.azimuth_bins();
    let mut out = Array2::zeros((m_count * q_count * p_count * k, cells.len()));
    for (col, &(s, r, u)) in cells.iter().enumerate() {
        let sine = azimuth_sine_of_bin(u, bins);
        let mut row = 0;
        for m in 0..m_count {
            for q in 0..q_count {
                let steer = phasor(TAU * sep.beta(m, q) * sine);
                for p in 0..p_count {
                    let slow = steer * phasor(TAU * r as f64 * p as f64 / p_count as f64);
                    for &kk in kap {
                        let ph = -TAU * kk as f64 * s as f64 / n;
                        out[(row, col)] = slow * phasor(ph) / params.pri_s;
                        row += 1;
                    }
                }
            }
        }
    }
    out
}

struct MimoPeak {
    mag2: f64,
    delay: usize,
    doppler: usize,
    azimuth: usize,
    value: Complex64,
}

/// Joint delay-Doppler-azimuth recovery from an array coefficient cube.
///
/// Each channel is whitened against its transmitter's spectrum and focused
/// with a forward DFT along pulses (matching the positive slow-time phase
/// of the array model); the per-channel delay maps are then combined
/// coherently against every azimuth steering vector, and the strongest
/// cell is peeled from all channels at once.  Ties prefer the lower delay,
/// Doppler, then azimuth bin.  `opts.refine` and `opts.backend` have no
/// effect here; only the whitening threshold is consulted.
pub fn recover_mimo(
    x: &XampleSet,
    array: &ArrayGeometry,
    spectra: &[PulseSpectrum],
    num_targets: usize,
    opts: &RecoverOptions,
) -> Result<RecoveryResult> {
    array.validate()?;
    x.validate()?;
    if num_targets == 0 {
        return Err(Error::InvalidParam("need at least one target".into()));
    }
    if x.schedule.kind() != ScheduleKind::Uniform {
        return Err(Error::InvalidParam(
            "array recovery expects a uniform pulse schedule".into(),
        ));
    }
    let m_count = array.num_tx();
    let q_count = array.num_rx();
    let channels = m_count * q_count;
    if x.channels() != channels {
        return Err(Error::ShapeMismatch(format!(
            "{} channels for an {m_count} x {q_count} array",
            x.channels()
        )));
    }
    if spectra.len() != m_count {
        return Err(Error::ShapeMismatch(format!(
            "{} spectra for {m_count} transmitters",
            spectra.len()
        )));
    }
    let params = &x.params;
    let p_count = params.num_pulses;
    let n = params.num_nyquist_bins;
    let kap = x.kappa.indices().to_vec();
    let k = kap.len();
    let bins = array.azimuth_bins();
    let sep = ChannelSeparation::new(array, params);

    let mut whitened: Vec<Whitened> = Vec::with_capacity(channels);
    for m in 0..m_count {
        for q in 0..q_count {
            whitened.push(whiten(x, m * q_count + q, &spectra[m], opts.whiten_eps)?);
        }
    }
    let total_divisor: f64 = whitened.iter().map(|w| w.divisor).sum();

    let mut steering: Vec<Vec<Complex64>> = Vec::with_capacity(bins);
    for u in 0..bins {
        let sine = azimuth_sine_of_bin(u, bins);
        let mut row = Vec::with_capacity(channels);
        for m in 0..m_count {
            for q in 0..q_count {
                row.push(phasor(TAU * sep.beta(m, q) * sine));
            }
        }
        steering.push(row);
    }
    let steering = steering;

    let plan_p = DftPlan::new(p_count);
    let plan_n = DftPlan::new(n);
    let energy = |wh: &[Whitened]| -> f64 {
        wh.iter()
            .map(|w| w.rows.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    };
    let initial = energy(&whitened);
    let stop = crate::cs::DEFAULT_TOL_FACTOR * initial.sqrt();

    let mut detections = Vec::new();
    let mut residual_energy = initial;
    for _ in 0..num_targets {
        if residual_energy.sqrt() <= stop {
            break;
        }
        let mut psi: Vec<Array2<Complex64>> = Vec::with_capacity(channels);
        for wh in &whitened {
            let mut block = Array2::zeros((p_count, k));
            let mut buf = vec![Complex64::new(0.0, 0.0); p_count];
            for i in 0..k {
                for (p, b) in buf.iter_mut().enumerate() {
                    *b = wh.rows[(p, i)];
                }
                plan_p.forward(&mut buf);
                for r in 0..p_count {
                    block[(r, i)] = buf[r];
                }
            }
            psi.push(block);
        }
        let mut best: Option<MimoPeak> = None;
        let mut maps = vec![vec![Complex64::new(0.0, 0.0); n]; channels];
        let mut vals = vec![Complex64::new(0.0, 0.0); k];
        let mut combined = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..p_count {
            for (ch, block) in psi.iter().enumerate() {
                for (i, v) in vals.iter_mut().enumerate() {
                    *v = whitened[ch].weight[i] * block[(r, i)];
                }
                inverse_from_sparse(&plan_n, &kap, &vals, &mut maps[ch]);
            }
            for (u, steer) in steering.iter().enumerate() {
                for c in combined.iter_mut() {
                    *c = Complex64::new(0.0, 0.0);
                }
                for (ch, map) in maps.iter().enumerate() {
                    let w = steer[ch].conj();
                    for (c, &d) in combined.iter_mut().zip(map.iter()) {
                        *c += w * d;
                    }
                }
                for (s, &c) in combined.iter().enumerate() {
                    let mag2 = c.norm_sqr();
                    let better = match &best {
                        None => mag2 > 0.0,
                        Some(b) => {
                            mag2 > b.mag2
                                || (mag2 == b.mag2
                                    && mag2 > 0.0
                                    && (s, r, u) < (b.delay, b.doppler, b.azimuth))
                        }
                    };
                    if better {
                        best = Some(MimoPeak {
                            mag2,
                            delay: s,
                            doppler: r,
                            azimuth: u,
                            value: c,
                        });
                    }
                }
            }
        }
        let peak = match best {
            Some(p) => p,
            None => break,
        };
        let amp = peak.value * params.pri_s / (p_count as f64 * total_divisor);
        for (ch, wh) in whitened.iter_mut().enumerate() {
            let steer = steering[peak.azimuth][ch];
            let delay_phasors: Vec<Complex64> = kap
                .iter()
                .enumerate()
                .map(|(i, &kk)| {
                    wh.atom_h[i] * phasor(-TAU * kk as f64 * peak.delay as f64 / n as f64)
                })
                .collect();
            let scale = amp * steer / params.pri_s;
            for p in 0..p_count {
                let slow =
                    scale * phasor(TAU * peak.doppler as f64 * p as f64 / p_count as f64);
                for (i, d) in delay_phasors.iter().enumerate() {
                    wh.rows[(p, i)] -= slow * d;
                }
            }
        }
        detections.push(Detection {
            delay_bin: peak.delay,
            doppler_bin: peak.doppler,
            azimuth_bin: Some(peak.azimuth),
            ambiguity_order: None,
            amplitude: amp,
        });
        residual_energy = energy(&whitened);
    }
    sort_detections(&mut detections);
    Ok(RecoveryResult {
        detections,
        residual_energy,
    })
}

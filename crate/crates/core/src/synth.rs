//! Echo synthesis at the Fourier-coefficient level.
//!
//! A receiver that samples below the Nyquist rate is modeled as having
//! ideal access to a subset `kappa` of the Fourier series coefficients of
//! each pulse return.  [`fourier_coeffs`] generates exactly those
//! coefficients for a scene, [`nyquist_time_samples`] expands the full-band
//! coefficients to baseband time samples for the classic pipeline, and
//! [`add_noise`] applies seeded circular complex Gaussian noise at a target
//! SNR.  Multi-channel synthesis for array scenes is in
//! [`mimo_fourier_coeffs`].

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dft::DftPlan;
use crate::mimo::{ChannelSeparation, MimoScene};
use crate::model::{RadarParams, TargetScene};
use crate::waveforms::PulseSpectrum;
use crate::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Pulse timing disciplines supported by the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// One pulse per PRI, slots `0..P`.
    Uniform,
    /// `M < P` pulses at distinct slots of the length-`P` slow-time grid.
    NonUniform,
    /// Uniform pulses carrying known random transmit phases, which extend
    /// the unambiguous delay range to `Q` PRIs.
    PhaseCoded,
}

/// When and how pulses are transmitted within one CPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    kind: ScheduleKind,
    /// Slow-time slot of each transmitted pulse, strictly ascending.
    pulse_slots: Vec<usize>,
    /// Transmit phase of each pulse in radians; empty unless phase-coded.
    phases: Vec<f64>,
    /// Delay ambiguity factor `Q`; 1 unless phase-coded.
    ambiguity_factor: usize,
}

impl PulseSchedule {
    /// One pulse per PRI for `num_pulses` PRIs.
    pub fn uniform(num_pulses: usize) -> PulseSchedule {
        PulseSchedule {
            kind: ScheduleKind::Uniform,
            pulse_slots: (0..num_pulses).collect(),
            phases: Vec::new(),
            ambiguity_factor: 1,
        }
    }

    /// Pulses at the given slow-time slots, which must be strictly
    /// ascending.
    pub fn non_uniform(pulse_slots: Vec<usize>) -> Result<PulseSchedule> {
        if pulse_slots.is_empty() {
            return Err(Error::InvalidParam("schedule needs at least one pulse".into()));
        }
        if pulse_slots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(
                "pulse slots must be strictly ascending".into(),
            ));
        }
        Ok(PulseSchedule {
            kind: ScheduleKind::NonUniform,
            pulse_slots,
            phases: Vec::new(),
            ambiguity_factor: 1,
        })
    }

    /// `num_tx` slots drawn without replacement from `0..grid_pulses`,
    /// sorted, reproducible from `seed`.
    pub fn non_uniform_random(num_tx: usize, grid_pulses: usize, seed: u64) -> Result<PulseSchedule> {
        if num_tx == 0 || num_tx > grid_pulses {
            return Err(Error::InvalidParam(format!(
                "cannot place {num_tx} pulses on a {grid_pulses}-slot grid"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut slots: Vec<usize> = sample(&mut rng, grid_pulses, num_tx).into_vec();
        slots.sort_unstable();
        Self::non_uniform(slots)
    }

    /// Uniform train of `num_pulses` pulses with i.i.d. transmit phases
    /// drawn from `U[0, 2 pi)`, reproducible from `seed`.  `ambiguity_factor`
    /// is the number of PRIs the unambiguous delay range spans.
    pub fn phase_coded(num_pulses: usize, ambiguity_factor: usize, seed: u64) -> Result<PulseSchedule> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..num_pulses).map(|_| rng.gen::<f64>() * TAU).collect();
        Self::phase_coded_with(phases, ambiguity_factor)
    }

    /// Phase-coded schedule with explicit phases (one per pulse).
    pub fn phase_coded_with(phases: Vec<f64>, ambiguity_factor: usize) -> Result<PulseSchedule> {
        let p = phases.len();
        if p == 0 {
            return Err(Error::InvalidParam("schedule needs at least one pulse".into()));
        }
        if ambiguity_factor == 0 || ambiguity_factor >= p {
            return Err(Error::InvalidParam(format!(
                "ambiguity factor {ambiguity_factor} must be in 1..{p}"
            )));
        }
        Ok(PulseSchedule {
            kind: ScheduleKind::PhaseCoded,
            pulse_slots: (0..p).collect(),
            phases,
            ambiguity_factor,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Slow-time slots of the transmitted pulses.
    pub fn pulse_slots(&self) -> &[usize] {
        &self.pulse_slots
    }

    /// Number of transmitted pulses.
    pub fn num_tx(&self) -> usize {
        self.pulse_slots.len()
    }

    /// Transmit phases in radians (empty unless phase-coded).
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Delay ambiguity factor `Q`.
    pub fn ambiguity_factor(&self) -> usize {
        self.ambiguity_factor
    }

    /// Number of slow-time frames the receiver observes: `P` for uniform,
    /// `M` for non-uniform, `P + Q - 1` for phase-coded (late echoes of the
    /// last pulses arrive after the last transmission).
    pub fn num_rx_frames(&self) -> usize {
        match self.kind {
            ScheduleKind::Uniform | ScheduleKind::NonUniform => self.pulse_slots.len(),
            ScheduleKind::PhaseCoded => self.pulse_slots.len() + self.ambiguity_factor - 1,
        }
    }

    /// Checks the schedule against a parameter set: slots must fit the
    /// slow-time grid, and uniform/phase-coded trains must fill it.
    pub fn validate_against(&self, params: &RadarParams) -> Result<()> {
        let p = params.num_pulses;
        match self.kind {
            ScheduleKind::Uniform | ScheduleKind::PhaseCoded => {
                if self.pulse_slots.len() != p {
                    return Err(Error::ShapeMismatch(format!(
                        "schedule has {} pulses but params expect {p}",
                        self.pulse_slots.len()
                    )));
                }
            }
            ScheduleKind::NonUniform => {
                if let Some(&last) = self.pulse_slots.last() {
                    if last >= p {
                        return Err(Error::InvalidParam(format!(
                            "pulse slot {last} outside the {p}-slot grid"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest delay (in seconds) a scene target may have under this
    /// schedule.
    pub fn max_delay_s(&self, params: &RadarParams) -> f64 {
        self.ambiguity_factor as f64 * params.pri_s
    }
}

/// The subset of Fourier coefficient indices the receiver observes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSelection {
    indices: Vec<usize>,
    num_bins: usize,
}

impl BandSelection {
    /// All `n` coefficients (Nyquist-rate observation).
    pub fn full(n: usize) -> BandSelection {
        BandSelection {
            indices: (0..n).collect(),
            num_bins: n,
        }
    }

    /// The `k` lowest coefficients, a narrow contiguous band.
    pub fn consecutive(k: usize, n: usize) -> Result<BandSelection> {
        if k == 0 || k > n {
            return Err(Error::InvalidParam(format!("cannot select {k} of {n} coefficients")));
        }
        Ok(BandSelection {
            indices: (0..k).collect(),
            num_bins: n,
        })
    }

    /// `k` distinct coefficients drawn uniformly, sorted, reproducible from
    /// `seed`.
    pub fn random(k: usize, n: usize, seed: u64) -> BandSelection {
        assert!(k > 0 && k <= n, "cannot select {k} of {n} coefficients");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut indices: Vec<usize> = sample(&mut rng, n, k).into_vec();
        indices.sort_unstable();
        BandSelection {
            indices,
            num_bins: n,
        }
    }

    /// `groups` bands of `group_size` consecutive coefficients, spread
    /// evenly across the spectrum.
    pub fn multiband(groups: usize, group_size: usize, n: usize) -> Result<BandSelection> {
        if groups == 0 || group_size == 0 {
            return Err(Error::InvalidParam("multiband selection must be nonempty".into()));
        }
        if groups * group_size > n {
            return Err(Error::InvalidParam(format!(
                "{groups} groups of {group_size} do not fit {n} coefficients"
            )));
        }
        let mut indices = Vec::with_capacity(groups * group_size);
        for g in 0..groups {
            let start = g * n / groups;
            indices.extend(start..start + group_size);
        }
        let mut checked = indices.clone();
        checked.dedup();
        if checked.len() != indices.len() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("multiband groups overlap".into()));
        }
        Ok(BandSelection {
            indices,
            num_bins: n,
        })
    }

    /// Explicit index list; must be strictly ascending and within `0..n`.
    pub fn from_indices(indices: Vec<usize>, n: usize) -> Result<BandSelection> {
        if indices.is_empty() {
            return Err(Error::InvalidParam("band selection must be nonempty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || *indices.last().unwrap() >= n {
            return Err(Error::InvalidParam(
                "band indices must be strictly ascending and in range".into(),
            ));
        }
        Ok(BandSelection {
            indices,
            num_bins: n,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of selected coefficients `K`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Total coefficient bins `N` the selection was drawn from.
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.num_bins
    }
}

/// A set of compressed-domain measurements: Fourier coefficients indexed
/// `[channel, slow-time frame, kappa position]`, together with everything
/// needed to interpret them.
#[derive(Debug, Clone)]
pub struct XampleSet {
    pub coeffs: Array3<Complex64>,
    pub kappa: BandSelection,
    pub schedule: PulseSchedule,
    pub params: RadarParams,
}

impl XampleSet {
    /// Validates internal consistency of the tensor dimensions against the
    /// schedule and band selection.
    pub fn validate(&self) -> Result<()> {
        let (_, frames, k) = self.coeffs.dim();
        if frames != self.schedule.num_rx_frames() {
            return Err(Error::ShapeMismatch(format!(
                "tensor has {frames} frames, schedule implies {}",
                self.schedule.num_rx_frames()
            )));
        }
        if k != self.kappa.len() {
            return Err(Error::ShapeMismatch(format!(
                "tensor has {k} coefficients per frame, selection has {}",
                self.kappa.len()
            )));
        }
        if self.kappa.num_bins() != self.params.num_nyquist_bins {
            return Err(Error::ShapeMismatch(format!(
                "selection drawn from {} bins, params have {}",
                self.kappa.num_bins(),
                self.params.num_nyquist_bins
            )));
        }
        self.schedule.validate_against(&self.params)
    }

    pub fn channels(&self) -> usize {
        self.coeffs.dim().0
    }

    pub fn frames(&self) -> usize {
        self.coeffs.dim().1
    }

    /// Coefficients per frame `K`.
    pub fn k(&self) -> usize {
        self.coeffs.dim().2
    }
}

struct TargetTerms {
    /// Delay phasor per kappa position.
    delay: Vec<Complex64>,
    /// Folded ambiguity order (phase-coded only).
    fold: usize,
    doppler_rad_s: f64,
    amplitude: Complex64,
}

fn target_terms(
    scene: &TargetScene,
    params: &RadarParams,
    schedule: &PulseSchedule,
    kappa: &BandSelection,
) -> Result<Vec<TargetTerms>> {
    let pri = params.pri_s;
    let max_delay = schedule.max_delay_s(params);
    scene
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.delay_s >= max_delay {
                return Err(Error::InvalidParam(format!(
                    "target {i} delay {} outside the unambiguous range {max_delay}",
                    t.delay_s
                )));
            }
            let fold = (t.delay_s / pri).floor() as usize;
            let folded_delay = t.delay_s - fold as f64 * pri;
            let delay = kappa
                .indices()
                .iter()
                .map(|&k| {
                    let ph = -TAU * k as f64 * folded_delay / pri;
                    Complex64::new(ph.cos(), ph.sin())
                })
                .collect();
            Ok(TargetTerms {
                delay,
                fold,
                doppler_rad_s: t.doppler_rad_s,
                amplitude: t.amplitude,
            })
        })
        .collect()
}

/// Fourier coefficients of every received frame.
///
/// For uniform and non-uniform schedules, pulse `p` at slot `m_p`
/// contributes `c_p[k] = (1/pri) H[k] sum_l alpha_l exp(-j 2 pi k tau_l /
/// pri) exp(-j nu_l m_p pri)`.  A phase-coded schedule folds each target
/// delay into `tau_l + q_l * pri`; frame `n` then collects the echoes of
/// pulse `n - q_l` with the transmit phase `exp(j c[n - q_l])` attached and
/// the Doppler phase indexed by the frame: `exp(-j nu_l n pri)`.
pub fn fourier_coeffs(
    scene: &TargetScene,
    params: &RadarParams,
    spectrum: &PulseSpectrum,
    schedule: &PulseSchedule,
    kappa: &BandSelection,
) -> Result<XampleSet> {
    schedule.validate_against(params)?;
    if spectrum.len() != params.num_nyquist_bins {
        return Err(Error::ShapeMismatch(format!(
            "spectrum has {} bins, params have {}",
            spectrum.len(),
            params.num_nyquist_bins
        )));
    }
    if kappa.num_bins() != params.num_nyquist_bins {
        return Err(Error::ShapeMismatch(format!(
            "selection drawn from {} bins, params have {}",
            kappa.num_bins(),
            params.num_nyquist_bins
        )));
    }
    let terms = target_terms(scene, params, schedule, kappa)?;
    let pri = params.pri_s;
    let frames = schedule.num_rx_frames();
    let kap = kappa.indices();
    let mut coeffs = Array3::zeros((1, frames, kap.len()));
    match schedule.kind() {
        ScheduleKind::Uniform | ScheduleKind::NonUniform => {
            for (row, &slot) in schedule.pulse_slots().iter().enumerate() {
                for t in &terms {
                    let ph = -t.doppler_rad_s * slot as f64 * pri;
                    let slow = t.amplitude * Complex64::new(ph.cos(), ph.sin());
                    for (i, d) in t.delay.iter().enumerate() {
                        coeffs[(0, row, i)] += slow * d;
                    }
                }
            }
        }
        ScheduleKind::PhaseCoded => {
            let p = schedule.num_tx();
            let phases = schedule.phases();
            for frame in 0..frames {
                for t in &terms {
                    if frame < t.fold || frame - t.fold >= p {
                        continue;
                    }
                    let code = phases[frame - t.fold];
                    let ph = -t.doppler_rad_s * frame as f64 * pri;
                    let mut slow = t.amplitude * Complex64::new(ph.cos(), ph.sin());
                    if code != 0.0 {
                        slow *= Complex64::new(code.cos(), code.sin());
                    }
                    for (i, d) in t.delay.iter().enumerate() {
                        coeffs[(0, frame, i)] += slow * d;
                    }
                }
            }
        }
    }
    let inv_pri = 1.0 / pri;
    for (i, &k) in kap.iter().enumerate() {
        let h = spectrum.coeff(k) * inv_pri;
        for frame in 0..frames {
            coeffs[(0, frame, i)] *= h;
        }
    }
    Ok(XampleSet {
        coeffs,
        kappa: kappa.clone(),
        schedule: schedule.clone(),
        params: params.clone(),
    })
}

/// Baseband Nyquist-rate samples of every received frame:
/// `x_p[n] = sum_k c_p[k] exp(j 2 pi k n / N)` over the full band.
pub fn nyquist_time_samples(
    scene: &TargetScene,
    params: &RadarParams,
    spectrum: &PulseSpectrum,
    schedule: &PulseSchedule,
) -> Result<Array2<Complex64>> {
    let n = params.num_nyquist_bins;
    let set = fourier_coeffs(scene, params, spectrum, schedule, &BandSelection::full(n))?;
    let frames = set.frames();
    let plan = DftPlan::new(n);
    let mut out = Array2::zeros((frames, n));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for frame in 0..frames {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = set.coeffs[(0, frame, i)];
        }
        plan.inverse(&mut buf);
        for (i, &b) in buf.iter().enumerate() {
            out[(frame, i)] = b;
        }
    }
    Ok(out)
}

/// Draws one unit-variance circular complex Gaussian sample.
fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller on (0, 1] uniforms; each part has variance 1/2.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    let ph = TAU * u2;
    Complex64::new(r * ph.cos(), r * ph.sin())
}

/// Adds i.i.d. circular complex Gaussian noise in the coefficient domain.
///
/// The per-coefficient noise variance is `mean signal power *
/// 10^(-snr_db/10)`, measured over every channel and frame.  Each channel
/// draws from its own counter-mode stream of the seeded generator, so the
/// result is identical no matter how generation is ordered or parallelized.
/// `snr_db = +inf` returns the input unchanged; a zero-power signal with
/// finite SNR is an error.
pub fn add_noise(x: &XampleSet, snr_db: f64, seed: u64) -> Result<XampleSet> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParam(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    let total: f64 = x.coeffs.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mean_power = total / x.coeffs.len() as f64;
    let sigma = (mean_power * 10f64.powf(-snr_db / 10.0)).sqrt();
    let (channels, frames, k) = x.coeffs.dim();
    let mut out = x.clone();
    for ch in 0..channels {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ch as u64 + 1);
        for frame in 0..frames {
            for i in 0..k {
                out.coeffs[(ch, frame, i)] += sigma * complex_gaussian(&mut rng);
            }
        }
    }
    Ok(out)
}

/// Phase-detector output of a stepped-frequency train: pulse `p` at carrier
/// `f0 + p * step_hz` yields `y_p = sum_l alpha_l exp(j 2 pi f_p tau_l)
/// exp(j nu_l p pri)`.
///
/// Note the positive sign on both exponents, which recovery must mirror.
pub fn sfr_phase_detector(
    scene: &TargetScene,
    f0_hz: f64,
    step_hz: f64,
    num_pulses: usize,
    pri_s: f64,
) -> Result<Vec<Complex64>> {
    if num_pulses == 0 {
        return Err(Error::InvalidParam("need at least one pulse".into()));
    }
    if !(step_hz > 0.0) {
        return Err(Error::InvalidParam("frequency step must be positive".into()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); num_pulses];
    for t in &scene.targets {
        for (p, y) in out.iter_mut().enumerate() {
            let f_p = f0_hz + p as f64 * step_hz;
            let ph = TAU * f_p * t.delay_s + t.doppler_rad_s * p as f64 * pri_s;
            *y += t.amplitude * Complex64::new(ph.cos(), ph.sin());
        }
    }
    Ok(out)
}

/// Antenna positions and per-transmitter carriers of a collocated array.
///
/// Positions are in wavelength units.  `virtual_tx`/`virtual_rx` describe
/// the virtual design (T, R) whose aperture the physical elements occupy;
/// the azimuth grid has `virtual_tx * virtual_rx` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Transmitter positions `xi_m` in wavelengths.
    pub tx_positions: Vec<f64>,
    /// Receiver positions `zeta_q` in wavelengths.
    pub rx_positions: Vec<f64>,
    /// Virtual design transmitter count `T`.
    pub virtual_tx: usize,
    /// Virtual design receiver count `R`.
    pub virtual_rx: usize,
    /// Carrier offset of each transmitter from the base carrier, in Hz.
    pub tx_carrier_offsets_hz: Vec<f64>,
}

impl ArrayGeometry {
    /// Number of physical transmitters `M`.
    pub fn num_tx(&self) -> usize {
        self.tx_positions.len()
    }

    /// Number of physical receivers `Q`.
    pub fn num_rx(&self) -> usize {
        self.rx_positions.len()
    }

    /// Number of azimuth grid cells `T * R`.
    pub fn azimuth_bins(&self) -> usize {
        self.virtual_tx * self.virtual_rx
    }

    /// Span of the virtual array in wavelengths: the largest transmit
    /// position plus the largest receive position.
    pub fn aperture_wavelengths(&self) -> f64 {
        let tx = self.tx_positions.iter().cloned().fold(0.0f64, f64::max);
        let rx = self.rx_positions.iter().cloned().fold(0.0f64, f64::max);
        tx + rx
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_positions.is_empty() || self.rx_positions.is_empty() {
            return Err(Error::InvalidParam("array needs transmitters and receivers".into()));
        }
        if self.tx_carrier_offsets_hz.len() != self.tx_positions.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} carriers for {} transmitters",
                self.tx_carrier_offsets_hz.len(),
                self.tx_positions.len()
            )));
        }
        if self
            .tx_positions
            .iter()
            .chain(self.rx_positions.iter())
            .any(|p| !p.is_finite() || *p < 0.0)
        {
            return Err(Error::InvalidParam("element positions must be finite and nonnegative".into()));
        }
        if self.virtual_tx == 0 || self.virtual_rx == 0 {
            return Err(Error::InvalidParam("virtual design must be nonempty".into()));
        }
        Ok(())
    }
}

/// Fourier coefficients of every transmit/receive channel of an array
/// scene.
///
/// Channel `(m, q)` is stored at row-major index `m * Q + q` and carries
/// `c_p[k] = (1/pri) H_m[k] sum_l alpha_l exp(-j 2 pi k tau_l / pri)
/// exp(j 2 pi beta_mq theta_l) exp(+j 2 pi fd_l p pri)`, where `beta` is the
/// carrier-scaled virtual position from [`ChannelSeparation`] and `fd_l` is
/// the target Doppler in Hz.  Note the positive Doppler sign, opposite to
/// the single-channel convention; the matching recovery conjugates it.
pub fn mimo_fourier_coeffs(
    scene: &MimoScene,
    params: &RadarParams,
    array: &ArrayGeometry,
    spectra: &[PulseSpectrum],
    kappa: &BandSelection,
) -> Result<XampleSet> {
    array.validate()?;
    if spectra.len() != array.num_tx() {
        return Err(Error::ShapeMismatch(format!(
            "{} spectra for {} transmitters",
            spectra.len(),
            array.num_tx()
        )));
    }
    for s in spectra {
        if s.len() != params.num_nyquist_bins {
            return Err(Error::ShapeMismatch(format!(
                "spectrum has {} bins, params have {}",
                s.len(),
                params.num_nyquist_bins
            )));
        }
    }
    if kappa.num_bins() != params.num_nyquist_bins {
        return Err(Error::ShapeMismatch(format!(
            "selection drawn from {} bins, params have {}",
            kappa.num_bins(),
            params.num_nyquist_bins
        )));
    }
    scene.validate(params)?;
    let sep = ChannelSeparation::new(array, params);
    let pri = params.pri_s;
    let p_count = params.num_pulses;
    let kap = kappa.indices();
    let m_count = array.num_tx();
    let q_count = array.num_rx();
    let mut coeffs = Array3::zeros((m_count * q_count, p_count, kap.len()));
    for t in &scene.targets {
        let delay: Vec<Complex64> = kap
            .iter()
            .map(|&k| {
                let ph = -TAU * k as f64 * t.delay_s / pri;
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        let slow: Vec<Complex64> = (0..p_count)
            .map(|p| {
                let ph = TAU * t.doppler_hz * p as f64 * pri;
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        for m in 0..m_count {
            for q in 0..q_count {
                let ch = m * q_count + q;
                let ph = TAU * sep.beta(m, q) * t.azimuth_sine;
                let gain = t.amplitude * Complex64::new(ph.cos(), ph.sin());
                for (p, s) in slow.iter().enumerate() {
                    let fac = gain * s;
                    for (i, d) in delay.iter().enumerate() {
                        coeffs[(ch, p, i)] += fac * d;
                    }
                }
            }
        }
    }
    let inv_pri = 1.0 / pri;
    for m in 0..m_count {
        for q in 0..q_count {
            let ch = m * q_count + q;
            for (i, &k) in kap.iter().enumerate() {
                let h = spectra[m].coeff(k) * inv_pri;
                for p in 0..p_count {
                    coeffs[(ch, p, i)] *= h;
                }
            }
        }
    }
    Ok(XampleSet {
        coeffs,
        kappa: kappa.clone(),
        schedule: PulseSchedule::uniform(p_count),
        params: params.clone(),
    })
}

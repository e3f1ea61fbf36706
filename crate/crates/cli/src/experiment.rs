//! Seeded Monte-Carlo engine: per-trial scenes, synthesis, recovery, and
//! elliptic hit scoring.
//!
//! Every random draw comes from a seed derived with [`derive_seed`] from
//! the config seed, a purpose label, and the global trial index, so a
//! sweep produces byte-identical tables no matter how many worker
//! threads split it.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

use subrad_core::classic::{
    detect_peaks, doppler_dft, map_doppler_bin, matched_filter, sfr_dft_recover, DelayDopplerMap,
    SfrGrid,
};
use subrad_core::focusing::{
    recover_focused, recover_phase_coded, Detection, RecoverOptions, RecoveryResult,
};
use subrad_core::mimo::{azimuth_sine_of_bin, recover_mimo, MimoScene, MimoTarget};
use subrad_core::model::{RadarParams, Target, TargetScene};
use subrad_core::synth::{
    add_noise, fourier_coeffs, mimo_fourier_coeffs, nyquist_time_samples, sfr_phase_detector,
    ArrayGeometry, BandSelection, PulseSchedule, ScheduleKind, XampleSet,
};
use subrad_core::waveforms::PulseSpectrum;
use subrad_core::{Error, Result};

use crate::config::{ExperimentConfig, Mode};
use crate::report::{binomial_stderr, HitRateReport, ReportRow};

/// Hit ellipse semi-axis, in grid bins, along both delay and Doppler.
pub const HIT_RADIUS_BINS: f64 = 3.0;

pub const LABEL_SCENE: u64 = 1;
pub const LABEL_NOISE: u64 = 2;
pub const LABEL_SCHEDULE: u64 = 3;
pub const LABEL_KAPPA: u64 = 4;
pub const LABEL_ARRAY: u64 = 5;

/// Mixes a master seed, a purpose label, and an index into an
/// independent stream seed (splitmix finalizer).
pub fn derive_seed(master: u64, label: u64, index: u64) -> u64 {
    let mut z = master
        ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn wrapped_distance(a: usize, b: usize, modulus: usize) -> usize {
    let d = a.abs_diff(b) % modulus;
    d.min(modulus - d)
}

/// Matches detections to planted cells, nearest pair first, one-to-one.
///
/// A pair qualifies when `(ds/3)^2 + (dr/3)^2 <= 1` with both distances
/// wrapped on their grids; the boundary counts as a hit.  Returns
/// `(hits, false_alarms)`, where every unmatched detection is a false
/// alarm.
pub fn score_detections(
    truth: &[(usize, usize)],
    found: &[(usize, usize)],
    delay_wrap: usize,
    doppler_wrap: usize,
) -> (usize, usize) {
    let mut pairs = Vec::new();
    for (i, &(ts, tr)) in truth.iter().enumerate() {
        for (j, &(fs, fr)) in found.iter().enumerate() {
            let ds = wrapped_distance(ts, fs, delay_wrap) as f64 / HIT_RADIUS_BINS;
            let dr = wrapped_distance(tr, fr, doppler_wrap) as f64 / HIT_RADIUS_BINS;
            let d2 = ds * ds + dr * dr;
            if d2 <= 1.0 {
                pairs.push((d2, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut truth_used = vec![false; truth.len()];
    let mut found_used = vec![false; found.len()];
    let mut hits = 0;
    for (_, i, j) in pairs {
        if !truth_used[i] && !found_used[j] {
            truth_used[i] = true;
            found_used[j] = true;
            hits += 1;
        }
    }
    (hits, found.len() - hits)
}

/// Config resolved once per experiment and shared across trials.
pub struct Prepared {
    pub params: RadarParams,
    pub spectrum: PulseSpectrum,
    pub kappa: BandSelection,
    pub array: Option<ArrayGeometry>,
    pub num_recover: usize,
    pub opts: RecoverOptions,
    /// Delay folds `Q`; 1 outside phase-coded mode.
    pub folds: usize,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Prepared> {
        cfg.validate()?;
        let params = cfg.scenario.params.build()?;
        let kappa = cfg
            .compression
            .kappa
            .resolve(params.num_nyquist_bins, derive_seed(cfg.seed, LABEL_KAPPA, 0))?;
        let array = match (&cfg.scenario.array, cfg.mode) {
            (Some(a), Mode::Mimo) => Some(a.build(derive_seed(cfg.seed, LABEL_ARRAY, 0))?),
            _ => None,
        };
        let folds = match cfg.mode {
            Mode::PhaseCoded => cfg.scenario.ambiguity_factor.unwrap_or(1),
            _ => 1,
        };
        let spectrum = PulseSpectrum::flat(params.num_nyquist_bins);
        Ok(Prepared {
            params,
            spectrum,
            kappa,
            array,
            num_recover: cfg.num_recover()?,
            opts: cfg.recover.options(),
            folds,
        })
    }
}

/// Outcome of one trial; `detections` keeps solver order.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub snr_index: usize,
    pub trial: usize,
    pub truth_count: usize,
    pub hits: usize,
    pub false_alarms: usize,
    pub detections: Vec<Detection>,
}

fn phasor(phase: f64) -> Complex64 {
    Complex64::new(phase.cos(), phase.sin())
}

fn quantize(value: f64, step: f64, wrap: usize) -> usize {
    ((value / step).round() as i64).rem_euclid(wrap as i64) as usize
}

/// Rounds a fixed single-channel target to the scoring grid.
fn quantize_target(t: &Target, params: &RadarParams, delay_wrap: usize) -> (usize, usize) {
    let delay_step = params.pri_s / params.num_nyquist_bins as f64;
    let doppler_step = TAU / (params.num_pulses as f64 * params.pri_s);
    (
        quantize(t.delay_s, delay_step, delay_wrap),
        quantize(t.doppler_rad_s, doppler_step, params.num_pulses),
    )
}

/// Draws `num_targets` distinct on-grid cells with unit-modulus random
/// phases.  `folds` extends the delay axis to `folds * N` bins.
pub fn random_scene(
    num_targets: usize,
    params: &RadarParams,
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(TargetScene, Vec<(usize, usize)>)> {
    let n = params.num_nyquist_bins * folds;
    let p = params.num_pulses;
    if num_targets > n * p {
        return Err(Error::InvalidParam(format!(
            "{num_targets} targets do not fit a {n}x{p} grid"
        )));
    }
    let cells = rand::seq::index::sample(rng, n * p, num_targets);
    let mut targets = Vec::with_capacity(num_targets);
    let mut truth = Vec::with_capacity(num_targets);
    for idx in cells.iter() {
        let s = idx % n;
        let r = idx / n;
        let amp = phasor(TAU * rng.gen::<f64>());
        targets.push(Target::on_grid(s, r, params, amp));
        truth.push((s, r));
    }
    Ok((TargetScene::new(targets)?, truth))
}

fn scene_for_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    global: u64,
) -> Result<(TargetScene, Vec<(usize, usize)>)> {
    let delay_wrap = prep.params.num_nyquist_bins * prep.folds;
    if let Some(targets) = &cfg.scenario.targets {
        let truth = targets
            .iter()
            .map(|t| quantize_target(t, &prep.params, delay_wrap))
            .collect();
        return Ok((TargetScene::new(targets.clone())?, truth));
    }
    if let Some(gen) = &cfg.scenario.generator {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, LABEL_SCENE, global));
        return random_scene(gen.num_targets, &prep.params, prep.folds, &mut rng);
    }
    Err(Error::InvalidParam(
        "config has neither targets nor a scene generator".into(),
    ))
}

fn schedule_for_trial(cfg: &ExperimentConfig, global: u64) -> Result<PulseSchedule> {
    let p = cfg.scenario.params.num_pulses;
    match cfg.mode {
        Mode::Classic | Mode::Focused => Ok(PulseSchedule::uniform(p)),
        Mode::Nonuniform => {
            let m = cfg.compression.num_tx_pulses.unwrap();
            PulseSchedule::non_uniform_random(m, p, derive_seed(cfg.seed, LABEL_SCHEDULE, global))
        }
        Mode::PhaseCoded => {
            let q = cfg.scenario.ambiguity_factor.unwrap();
            PulseSchedule::phase_coded(p, q, derive_seed(cfg.seed, LABEL_SCHEDULE, global))
        }
        Mode::Sfr | Mode::Mimo => Err(Error::InvalidParam(
            "no single-channel pulse schedule in this mode".into(),
        )),
    }
}

fn maybe_noise(x: &XampleSet, snr_db: f64, seed: u64) -> Result<XampleSet> {
    if snr_db == f64::INFINITY {
        Ok(x.clone())
    } else {
        add_noise(x, snr_db, seed)
    }
}

/// Rebuilds time-domain frames from a compressed set by zero-filling the
/// unobserved spectrum, the input a classic pipeline would see.
pub fn reconstruct_frames(x: &XampleSet) -> Array2<Complex64> {
    let n = x.params.num_nyquist_bins;
    let frames = x.frames();
    let indices = x.kappa.indices();
    let mut out = Array2::zeros((frames, n));
    for f in 0..frames {
        for t in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &k) in indices.iter().enumerate() {
                acc += x.coeffs[(0, f, i)] * phasor(TAU * (k * t % n) as f64 / n as f64);
            }
            out[(f, t)] = acc;
        }
    }
    out
}

/// Classic pipeline on a stored coefficient set: reconstruct, matched
/// filter, Doppler DFT, peak picking.  Doppler bins are re-signed to the
/// model convention so they score against the same truth as focusing.
pub fn classic_recover(
    x: &XampleSet,
    spectrum: &PulseSpectrum,
    num_targets: usize,
) -> Result<RecoveryResult> {
    let frames = reconstruct_frames(x);
    let mf = matched_filter(&frames, &spectrum.time_samples())?;
    let map = doppler_dft(&mf, &x.params, spectrum)?;
    let mut result = detect_peaks(&map, num_targets)?;
    for d in &mut result.detections {
        d.doppler_bin = map_doppler_bin(d.doppler_bin, x.params.num_pulses);
    }
    Ok(result)
}

fn run_single_channel_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    snr_db: f64,
    global: u64,
) -> Result<(Vec<(usize, usize)>, RecoveryResult, usize)> {
    let schedule = schedule_for_trial(cfg, global)?;
    let (scene, truth) = scene_for_trial(cfg, prep, global)?;
    let x = fourier_coeffs(&scene, &prep.params, &prep.spectrum, &schedule, &prep.kappa)?;
    let x = maybe_noise(&x, snr_db, derive_seed(cfg.seed, LABEL_NOISE, global))?;
    let result = match cfg.mode {
        Mode::Classic => classic_recover(&x, &prep.spectrum, prep.num_recover)?,
        Mode::PhaseCoded => recover_phase_coded(&x, &prep.spectrum, prep.num_recover, &prep.opts)?,
        _ => recover_focused(&x, &prep.spectrum, prep.num_recover, &prep.opts)?,
    };
    let delay_wrap = prep.params.num_nyquist_bins * prep.folds;
    Ok((truth, result, delay_wrap))
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    phasor(TAU * u2) * r
}

fn noisy_samples(y: &[Complex64], snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
    if snr_db == f64::INFINITY {
        return Ok(y.to_vec());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParam(format!(
            "snr_db must be finite or +inf, got {snr_db}"
        )));
    }
    let total: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = (total / y.len() as f64 * 10f64.powf(-snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Ok(y.iter().map(|&v| v + sigma * complex_gaussian(&mut rng)).collect())
}

fn sfr_grid(cfg: &ExperimentConfig) -> Result<SfrGrid> {
    let sfr = cfg.scenario.sfr.as_ref().unwrap();
    let grid = SfrGrid::natural(
        sfr.f0_hz,
        sfr.step_hz,
        cfg.scenario.params.num_pulses,
        cfg.scenario.params.pri_s,
    )?;
    Ok(match sfr.doppler_bins {
        Some(bins) => grid.with_doppler_bins(bins),
        None => grid,
    })
}

fn sfr_scene_for_trial(
    cfg: &ExperimentConfig,
    grid: &SfrGrid,
    global: u64,
) -> Result<(TargetScene, Vec<(usize, usize)>)> {
    if let Some(targets) = &cfg.scenario.targets {
        let doppler_step = TAU / (grid.doppler_bins as f64 * grid.pri_s);
        let truth = targets
            .iter()
            .map(|t| {
                (
                    (t.delay_s / grid.delay_step_s).round() as usize,
                    quantize(t.doppler_rad_s, doppler_step, grid.doppler_bins),
                )
            })
            .collect();
        return Ok((TargetScene::new(targets.clone())?, truth));
    }
    let gen = cfg.scenario.generator.as_ref().ok_or_else(|| {
        Error::InvalidParam("config has neither targets nor a scene generator".into())
    })?;
    if gen.num_targets > grid.delay_bins {
        return Err(Error::InvalidParam(format!(
            "{} targets do not fit {} delay cells",
            gen.num_targets, grid.delay_bins
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, LABEL_SCENE, global));
    let cells = rand::seq::index::sample(&mut rng, grid.delay_bins, gen.num_targets);
    let mut targets = Vec::new();
    let mut truth = Vec::new();
    for i in cells.iter() {
        let amp = phasor(TAU * rng.gen::<f64>());
        targets.push(Target::new(i as f64 * grid.delay_step_s, 0.0, amp));
        truth.push((i, 0));
    }
    Ok((TargetScene::new(targets)?, truth))
}

fn run_sfr_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    snr_db: f64,
    global: u64,
) -> Result<(Vec<(usize, usize)>, RecoveryResult, usize, usize)> {
    let grid = sfr_grid(cfg)?;
    let (scene, truth) = sfr_scene_for_trial(cfg, &grid, global)?;
    let y = sfr_phase_detector(
        &scene,
        grid.f0_hz,
        grid.step_hz,
        grid.num_pulses,
        grid.pri_s,
    )?;
    let y = noisy_samples(&y, snr_db, derive_seed(cfg.seed, LABEL_NOISE, global))?;
    let result = sfr_dft_recover(&y, &grid, prep.num_recover, None)?;
    // The stepped grid is not delay-periodic, so score with no wrap.
    Ok((truth, result, usize::MAX, grid.doppler_bins))
}

/// Rounds a fixed array target to the scoring grid.
fn quantize_mimo_target(t: &MimoTarget, params: &RadarParams) -> (usize, usize) {
    let delay_step = params.pri_s / params.num_nyquist_bins as f64;
    let doppler_step = 1.0 / (params.num_pulses as f64 * params.pri_s);
    (
        quantize(t.delay_s, delay_step, params.num_nyquist_bins),
        quantize(t.doppler_hz, doppler_step, params.num_pulses),
    )
}

/// Draws distinct (delay, Doppler, azimuth) cells for an array scene.
pub fn random_mimo_scene(
    num_targets: usize,
    params: &RadarParams,
    azimuth_bins: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(MimoScene, Vec<(usize, usize)>)> {
    let n = params.num_nyquist_bins;
    let p = params.num_pulses;
    if num_targets > n * p * azimuth_bins {
        return Err(Error::InvalidParam(format!(
            "{num_targets} targets do not fit a {n}x{p}x{azimuth_bins} grid"
        )));
    }
    let cells = rand::seq::index::sample(rng, n * p * azimuth_bins, num_targets);
    let mut targets = Vec::new();
    let mut truth = Vec::new();
    for idx in cells.iter() {
        let s = idx % n;
        let r = (idx / n) % p;
        let u = idx / (n * p);
        // Map the upper half of the Doppler grid to negative frequencies
        // so every target stays inside the ambiguity interval.
        let signed_r = if r <= p / 2 { r as f64 } else { r as f64 - p as f64 };
        let amp = phasor(TAU * rng.gen::<f64>());
        targets.push(MimoTarget {
            delay_s: s as f64 * params.pri_s / n as f64,
            azimuth_sine: azimuth_sine_of_bin(u, azimuth_bins),
            doppler_hz: signed_r / (p as f64 * params.pri_s),
            amplitude: amp,
        });
        truth.push((s, r));
    }
    Ok((MimoScene::new(targets)?, truth))
}

fn mimo_scene_for_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    global: u64,
) -> Result<(MimoScene, Vec<(usize, usize)>)> {
    if let Some(targets) = &cfg.scenario.mimo_targets {
        let truth = targets
            .iter()
            .map(|t| quantize_mimo_target(t, &prep.params))
            .collect();
        return Ok((MimoScene::new(targets.clone())?, truth));
    }
    let gen = cfg.scenario.generator.as_ref().ok_or_else(|| {
        Error::InvalidParam("config has neither mimo_targets nor a scene generator".into())
    })?;
    let azimuth_bins = prep.array.as_ref().unwrap().azimuth_bins();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, LABEL_SCENE, global));
    random_mimo_scene(gen.num_targets, &prep.params, azimuth_bins, &mut rng)
}

fn run_mimo_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    snr_db: f64,
    global: u64,
) -> Result<(Vec<(usize, usize)>, RecoveryResult)> {
    let array = prep.array.as_ref().unwrap();
    let (scene, truth) = mimo_scene_for_trial(cfg, prep, global)?;
    let spectra = vec![prep.spectrum.clone(); array.num_tx()];
    let x = mimo_fourier_coeffs(&scene, &prep.params, array, &spectra, &prep.kappa)?;
    let x = maybe_noise(&x, snr_db, derive_seed(cfg.seed, LABEL_NOISE, global))?;
    let result = recover_mimo(&x, array, &spectra, prep.num_recover, &prep.opts)?;
    Ok((truth, result))
}

fn run_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    snr_index: usize,
    trial: usize,
) -> Result<TrialRecord> {
    let global = (snr_index * cfg.trials + trial) as u64;
    let snr_db = cfg.snr_sweep_db[snr_index].0;
    let (truth, result, delay_wrap, doppler_wrap) = match cfg.mode {
        Mode::Sfr => {
            let (truth, result, dw, rw) = run_sfr_trial(cfg, prep, snr_db, global)?;
            (truth, result, dw, rw)
        }
        Mode::Mimo => {
            let (truth, result) = run_mimo_trial(cfg, prep, snr_db, global)?;
            (
                truth,
                result,
                prep.params.num_nyquist_bins,
                prep.params.num_pulses,
            )
        }
        _ => {
            let (truth, result, dw) = run_single_channel_trial(cfg, prep, snr_db, global)?;
            (truth, result, dw, prep.params.num_pulses)
        }
    };
    let n = prep.params.num_nyquist_bins;
    let found: Vec<(usize, usize)> = result
        .detections
        .iter()
        .map(|d| {
            let fold = d.ambiguity_order.unwrap_or(0);
            (d.delay_bin + fold * n, d.doppler_bin)
        })
        .collect();
    let (hits, false_alarms) = score_detections(&truth, &found, delay_wrap, doppler_wrap);
    Ok(TrialRecord {
        snr_index,
        trial,
        truth_count: truth.len(),
        hits,
        false_alarms,
        detections: result.detections,
    })
}

/// Runs the full sweep and aggregates per-SNR rates.
///
/// `threads = 0` uses the machine default; any positive count builds a
/// dedicated pool.  Results are identical either way because trials are
/// seeded by index and aggregated in index order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(HitRateReport, Vec<TrialRecord>)> {
    let prep = Prepared::new(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_sweep_db.len())
        .flat_map(|si| (0..cfg.trials).map(move |t| (si, t)))
        .collect();
    let records: Vec<TrialRecord> = if threads == 1 {
        jobs.iter()
            .map(|&(si, t)| run_trial(cfg, &prep, si, t))
            .collect::<Result<_>>()?
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if threads > 0 {
            builder = builder.num_threads(threads);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
        pool.install(|| {
            jobs.par_iter()
                .map(|&(si, t)| run_trial(cfg, &prep, si, t))
                .collect::<Result<_>>()
        })?
    };
    let mut rows = Vec::new();
    for (si, snr) in cfg.snr_sweep_db.iter().enumerate() {
        let slice: Vec<&TrialRecord> = records.iter().filter(|r| r.snr_index == si).collect();
        let truth_total: usize = slice.iter().map(|r| r.truth_count).sum();
        let hits: usize = slice.iter().map(|r| r.hits).sum();
        let fas: usize = slice.iter().map(|r| r.false_alarms).sum();
        let hit_rate = hits as f64 / truth_total as f64;
        rows.push(ReportRow {
            snr_db: *snr,
            hit_rate,
            fa_rate: fas as f64 / truth_total as f64,
            trials: cfg.trials,
            stderr: binomial_stderr(hit_rate, cfg.trials),
        });
    }
    Ok((HitRateReport { rows }, records))
}

/// Per-trial detection table for a finished sweep.
pub fn detections_csv(records: &[TrialRecord], trials_per_point: usize) -> String {
    let mut out = String::from("trial,delay_bin,doppler_bin,azimuth_bin,q,re_amp,im_amp\n");
    for rec in records {
        let trial = rec.snr_index * trials_per_point + rec.trial;
        for d in &rec.detections {
            let az = d.azimuth_bin.map(|u| u.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                trial,
                d.delay_bin,
                d.doppler_bin,
                az,
                d.ambiguity_order.unwrap_or(0),
                d.amplitude.re,
                d.amplitude.im
            ));
        }
    }
    out
}

/// Synthesizes the trial-zero coefficient set of a single-channel config.
pub fn synthesize_single(cfg: &ExperimentConfig) -> Result<XampleSet> {
    let prep = Prepared::new(cfg)?;
    if matches!(cfg.mode, Mode::Sfr | Mode::Mimo) {
        return Err(Error::InvalidParam(
            "simulate covers single-channel modes; use the mimo subcommand for arrays".into(),
        ));
    }
    let schedule = schedule_for_trial(cfg, 0)?;
    let (scene, _) = scene_for_trial(cfg, &prep, 0)?;
    fourier_coeffs(&scene, &prep.params, &prep.spectrum, &schedule, &prep.kappa)
}

/// Synthesizes the trial-zero array set of a mimo config.
pub fn synthesize_mimo(
    cfg: &ExperimentConfig,
) -> Result<(XampleSet, ArrayGeometry, Vec<PulseSpectrum>)> {
    let prep = Prepared::new(cfg)?;
    let array = prep.array.clone().ok_or_else(|| {
        Error::InvalidParam("mimo synthesis needs mode \"mimo\" and scenario.array".into())
    })?;
    let (scene, _) = mimo_scene_for_trial(cfg, &prep, 0)?;
    let spectra = vec![prep.spectrum.clone(); array.num_tx()];
    let x = mimo_fourier_coeffs(&scene, &prep.params, &array, &spectra, &prep.kappa)?;
    Ok((x, array, spectra))
}

/// Recovery entry point for a stored set: dispatches on the channel
/// count and schedule kind.  Returns the result plus the azimuth grid
/// size when the set went through array recovery.
pub fn recover_set(
    cfg: &ExperimentConfig,
    x: &XampleSet,
) -> Result<(RecoveryResult, Option<usize>)> {
    cfg.validate()?;
    let num_recover = cfg.num_recover()?;
    let opts = cfg.recover.options();
    let spectrum = PulseSpectrum::flat(x.params.num_nyquist_bins);
    if x.channels() > 1 {
        let array_cfg = cfg.scenario.array.as_ref().ok_or_else(|| {
            Error::InvalidParam("multi-channel input needs scenario.array in the config".into())
        })?;
        let array = array_cfg.build(derive_seed(cfg.seed, LABEL_ARRAY, 0))?;
        let spectra = vec![spectrum; array.num_tx()];
        let result = recover_mimo(x, &array, &spectra, num_recover, &opts)?;
        let bins = array.azimuth_bins();
        Ok((result, Some(bins)))
    } else if x.schedule.kind() == ScheduleKind::PhaseCoded {
        Ok((recover_phase_coded(x, &spectrum, num_recover, &opts)?, None))
    } else {
        Ok((recover_focused(x, &spectrum, num_recover, &opts)?, None))
    }
}

/// Classic delay-Doppler map of the configured scene at Nyquist rate.
pub fn classic_map(cfg: &ExperimentConfig) -> Result<DelayDopplerMap> {
    let prep = Prepared::new(cfg)?;
    if matches!(cfg.mode, Mode::Sfr | Mode::Mimo) {
        return Err(Error::InvalidParam(
            "the delay-Doppler map covers single-channel modes".into(),
        ));
    }
    let (scene, _) = scene_for_trial(cfg, &prep, 0)?;
    let schedule = PulseSchedule::uniform(prep.params.num_pulses);
    let frames = nyquist_time_samples(&scene, &prep.params, &prep.spectrum, &schedule)?;
    let mf = matched_filter(&frames, &prep.spectrum.time_samples())?;
    doppler_dft(&mf, &prep.params, &prep.spectrum)
}

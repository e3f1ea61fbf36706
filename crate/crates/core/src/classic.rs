//! Nyquist-rate reference pipelines.
//!
//! The pulse-Doppler baseline runs a circular matched filter on each
//! frame's time samples, a P-point DFT along pulses, and a top-L peak
//! search on the resulting delay-Doppler map.  Stepped-frequency trains
//! get a DFT-dictionary correlation recovery.  Every compressed method in
//! this crate is benchmarked against these.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dft::DftPlan;
use crate::focusing::{Detection, RecoveryResult};
use crate::model::RadarParams;
use crate::waveforms::PulseSpectrum;
use crate::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn phasor(ph: f64) -> Complex64 {
    Complex64::new(ph.cos(), ph.sin())
}

/// The classic pipeline's output surface: complex map values and their
/// magnitudes, indexed `[doppler map bin, delay bin]`.
///
/// A target whose slow-time phase is `exp(-j nu p pri)` with Doppler grid
/// bin `r` peaks at map bin `(P - r) mod P`, because the map applies a
/// forward DFT along pulses.  [`map_doppler_bin`] converts between the two
/// conventions (it is its own inverse).
#[derive(Debug, Clone)]
pub struct DelayDopplerMap {
    pub values: Array2<Complex64>,
    pub magnitudes: Array2<f64>,
    pub delay_step_s: f64,
    pub doppler_step_rad_s: f64,
    /// Processing gain `P * sum_k |H[k]|^2 / pri`; dividing a peak value by
    /// it recovers the target amplitude.
    pub amp_divisor: f64,
}

impl DelayDopplerMap {
    /// Number of Doppler rows.
    pub fn doppler_bins(&self) -> usize {
        self.values.nrows()
    }

    /// Number of delay columns.
    pub fn delay_bins(&self) -> usize {
        self.values.ncols()
    }
}

/// Converts a model Doppler bin to its map bin and back.
pub fn map_doppler_bin(bin: usize, num_pulses: usize) -> usize {
    (num_pulses - bin % num_pulses) % num_pulses
}

/// Circular matched filter per frame:
/// `y_p[n] = sum_m x_p[m] conj(h[(m - n) mod N])`.
///
/// The coefficient signal model is periodic per PRI, so the circular
/// convention is exact rather than an approximation of a linear filter.
pub fn matched_filter(
    frames: &Array2<Complex64>,
    pulse_samples: &[Complex64],
) -> Result<Array2<Complex64>> {
    let n = frames.ncols();
    if pulse_samples.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "pulse has {} samples, frames have {n}",
            pulse_samples.len()
        )));
    }
    if n == 0 || frames.nrows() == 0 {
        return Err(Error::ShapeMismatch("empty frame matrix".into()));
    }
    let plan = DftPlan::new(n);
    let mut h_fft = pulse_samples.to_vec();
    plan.forward(&mut h_fft);
    let mut out = Array2::zeros(frames.dim());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for p in 0..frames.nrows() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = frames[(p, i)];
        }
        plan.forward(&mut buf);
        for (b, h) in buf.iter_mut().zip(h_fft.iter()) {
            *b *= h.conj();
        }
        plan.inverse(&mut buf);
        for (i, &b) in buf.iter().enumerate() {
            out[(p, i)] = b * scale;
        }
    }
    Ok(out)
}

/// Slow-time DFT of the matched-filter output:
/// `z_n[q] = sum_p y_p[n] exp(-j 2 pi p q / P)`, stacked into a map.
pub fn doppler_dft(
    mf_out: &Array2<Complex64>,
    params: &RadarParams,
    spectrum: &PulseSpectrum,
) -> Result<DelayDopplerMap> {
    let p = mf_out.nrows();
    let n = mf_out.ncols();
    if p != params.num_pulses || n != params.num_nyquist_bins {
        return Err(Error::ShapeMismatch(format!(
            "matched-filter output is {p} x {n}, params expect {} x {}",
            params.num_pulses, params.num_nyquist_bins
        )));
    }
    if spectrum.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "spectrum has {} bins, params have {n}",
            spectrum.len()
        )));
    }
    let plan = DftPlan::new(p);
    let mut values = Array2::zeros((p, n));
    let mut buf = vec![Complex64::new(0.0, 0.0); p];
    for col in 0..n {
        for (row, b) in buf.iter_mut().enumerate() {
            *b = mf_out[(row, col)];
        }
        plan.forward(&mut buf);
        for row in 0..p {
            values[(row, col)] = buf[row];
        }
    }
    let magnitudes = values.mapv(|c| c.norm());
    Ok(DelayDopplerMap {
        values,
        magnitudes,
        delay_step_s: params.pri_s / n as f64,
        doppler_step_rad_s: TAU / (p as f64 * params.pri_s),
        amp_divisor: p as f64 * spectrum.energy() / params.pri_s,
    })
}

/// Top-L cells of the map, strongest first; exact ties prefer the lower
/// delay bin, then the lower Doppler bin.
///
/// Reported Doppler bins are map bins; convert with [`map_doppler_bin`] to
/// compare against the slow-time phase convention.
pub fn detect_peaks(map: &DelayDopplerMap, num_targets: usize) -> Result<RecoveryResult> {
    let cells = map.values.len();
    if num_targets == 0 || num_targets > cells {
        return Err(Error::InvalidParam(format!(
            "cannot pick {num_targets} peaks from {cells} cells"
        )));
    }
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(cells);
    for q in 0..map.doppler_bins() {
        for s in 0..map.delay_bins() {
            order.push((s, q));
        }
    }
    order.sort_by(|&(sa, qa), &(sb, qb)| {
        map.magnitudes[(qb, sb)]
            .partial_cmp(&map.magnitudes[(qa, sa)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (sa, qa).cmp(&(sb, qb)))
    });
    let mut total: f64 = map.values.iter().map(|c| c.norm_sqr()).sum();
    let detections: Vec<Detection> = order[..num_targets]
        .iter()
        .map(|&(s, q)| {
            total -= map.values[(q, s)].norm_sqr();
            Detection {
                delay_bin: s,
                doppler_bin: q,
                azimuth_bin: None,
                ambiguity_order: None,
                amplitude: map.values[(q, s)] / map.amp_divisor,
            }
        })
        .collect();
    Ok(RecoveryResult {
        detections,
        residual_energy: total.max(0.0),
    })
}

/// Grid the stepped-frequency dictionary is built on.
///
/// The natural grid spaces delays by `1 / (P * step_hz)` so that the
/// per-pulse phase increments of adjacent delay cells differ by exactly
/// one DFT bin.  On that spacing a delay cell and a Doppler cell produce
/// identical per-pulse increments, so the natural grid keeps a single
/// static Doppler cell; widen it only for scenes where the coupling is
/// acceptable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfrGrid {
    pub f0_hz: f64,
    pub step_hz: f64,
    pub pri_s: f64,
    pub num_pulses: usize,
    pub delay_bins: usize,
    pub delay_step_s: f64,
    pub doppler_bins: usize,
}

impl SfrGrid {
    /// Delay-only grid matched to the train: `P` delay cells of width
    /// `1 / (P * step_hz)`, one static Doppler cell.
    pub fn natural(f0_hz: f64, step_hz: f64, num_pulses: usize, pri_s: f64) -> Result<SfrGrid> {
        if num_pulses == 0 {
            return Err(Error::InvalidParam("need at least one pulse".into()));
        }
        if !(step_hz > 0.0) || !(pri_s > 0.0) {
            return Err(Error::InvalidParam(
                "frequency step and PRI must be positive".into(),
            ));
        }
        Ok(SfrGrid {
            f0_hz,
            step_hz,
            pri_s,
            num_pulses,
            delay_bins: num_pulses,
            delay_step_s: 1.0 / (num_pulses as f64 * step_hz),
            doppler_bins: 1,
        })
    }

    /// Returns the grid with `bins` Doppler cells spanning the slow-time
    /// ambiguity interval.
    pub fn with_doppler_bins(mut self, bins: usize) -> SfrGrid {
        self.doppler_bins = bins.max(1);
        self
    }

    fn atom(&self, delay_bin: usize, doppler_bin: usize) -> Vec<Complex64> {
        let tau_i = delay_bin as f64 * self.delay_step_s;
        let nu_k = TAU * doppler_bin as f64 / (self.doppler_bins as f64 * self.pri_s);
        (0..self.num_pulses)
            .map(|p| {
                let f_p = self.f0_hz + p as f64 * self.step_hz;
                phasor(TAU * f_p * tau_i + nu_k * p as f64 * self.pri_s)
            })
            .collect()
    }
}

/// Greedy dictionary recovery for a stepped-frequency train.
///
/// Correlates the residual against atoms
/// `exp(j 2 pi f_p tau_i) exp(j nu_k p pri)` (both exponents positive,
/// mirroring the phase-detector model), picks the strongest, subtracts,
/// and repeats up to `num_targets` times.  With a threshold set, stops as
/// soon as the best candidate amplitude falls below it.
pub fn sfr_dft_recover(
    y: &[Complex64],
    grid: &SfrGrid,
    num_targets: usize,
    threshold: Option<f64>,
) -> Result<RecoveryResult> {
    if y.len() != grid.num_pulses {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for a {}-pulse grid",
            y.len(),
            grid.num_pulses
        )));
    }
    if num_targets == 0 {
        return Err(Error::InvalidParam("need at least one target".into()));
    }
    let p = grid.num_pulses as f64;
    let mut residual = y.to_vec();
    let mut detections = Vec::new();
    for _ in 0..num_targets {
        let mut best: Option<(f64, usize, usize, Complex64)> = None;
        for i in 0..grid.delay_bins {
            for k in 0..grid.doppler_bins {
                let atom = grid.atom(i, k);
                let corr: Complex64 = atom
                    .iter()
                    .zip(residual.iter())
                    .map(|(a, r)| a.conj() * r)
                    .sum();
                let mag2 = corr.norm_sqr();
                let better = match best {
                    None => mag2 > 0.0,
                    Some((b, bi, bk, _)) => {
                        mag2 > b || (mag2 == b && mag2 > 0.0 && (i, k) < (bi, bk))
                    }
                };
                if better {
                    best = Some((mag2, i, k, corr));
                }
            }
        }
        let (_, i, k, corr) = match best {
            Some(b) => b,
            None => break,
        };
        let amp = corr / p;
        if let Some(t) = threshold {
            if amp.norm() < t {
                break;
            }
        }
        let atom = grid.atom(i, k);
        for (r, a) in residual.iter_mut().zip(atom.iter()) {
            *r -= amp * a;
        }
        detections.push(Detection {
            delay_bin: i,
            doppler_bin: k,
            azimuth_bin: None,
            ambiguity_order: None,
            amplitude: amp,
        });
    }
    detections.sort_by(|a, b| {
        b.magnitude()
            .partial_cmp(&a.magnitude())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (a.delay_bin, a.doppler_bin).cmp(&(b.delay_bin, b.doppler_bin)))
    });
    let residual_energy = residual.iter().map(|c| c.norm_sqr()).sum();
    Ok(RecoveryResult {
        detections,
        residual_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focusing::{delay_transform, doppler_focus, recover_focused, RecoverOptions};
    use crate::model::{Target, TargetScene};
    use crate::synth::{
        fourier_coeffs, nyquist_time_samples, sfr_phase_detector, BandSelection, PulseSchedule,
    };

    fn params(n: usize, p: usize) -> RadarParams {
        RadarParams::new(1.0, n as f64, 1.0e10, p).unwrap()
    }

    fn lcg_complex(state: &mut u64) -> Complex64 {
        let mut next = || {
            *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (*state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        Complex64::new(next(), next())
    }

    #[test]
    fn matched_filter_peaks_at_the_pulse_shift() {
        let n = 16;
        let spectrum = PulseSpectrum::flat(n);
        let h = spectrum.time_samples();
        let mut frames = Array2::zeros((2, n));
        for (i, &v) in h.iter().enumerate() {
            frames[(0, i)] = v;
            frames[(1, (i + 5) % n)] = v;
        }
        let y = matched_filter(&frames, &h).unwrap();
        let energy: f64 = h.iter().map(|c| c.norm_sqr()).sum();
        assert!((y[(0, 0)] - Complex64::new(energy, 0.0)).norm() < 1e-12);
        for i in 1..n {
            assert!(y[(0, i)].norm() < 1e-12);
        }
        let peak: usize = (0..n)
            .max_by(|&a, &b| y[(1, a)].norm().partial_cmp(&y[(1, b)].norm()).unwrap())
            .unwrap();
        assert_eq!(peak, 5);
    }

    #[test]
    fn matched_filter_matches_the_direct_correlation() {
        let n = 24;
        let mut state = 0x1234_5678u64;
        let pulse: Vec<Complex64> = (0..n).map(|_| lcg_complex(&mut state)).collect();
        let mut frames = Array2::zeros((3, n));
        for p in 0..3 {
            for i in 0..n {
                frames[(p, i)] = lcg_complex(&mut state);
            }
        }
        let y = matched_filter(&frames, &pulse).unwrap();
        for p in 0..3 {
            for shift in 0..n {
                let mut want = Complex64::new(0.0, 0.0);
                for m in 0..n {
                    want += frames[(p, m)] * pulse[(m + n - shift) % n].conj();
                }
                assert!(
                    (y[(p, shift)] - want).norm() <= 1e-9 * want.norm().max(1.0),
                    "row {p} shift {shift}"
                );
            }
        }
        assert!(matched_filter(&frames, &pulse[..n - 1]).is_err());
    }

    #[test]
    fn doppler_dft_places_tones_at_the_negated_bin() {
        let params = params(4, 8);
        let spectrum = PulseSpectrum::flat(4);
        let mut constant = Array2::zeros((8, 4));
        let mut tone = Array2::zeros((8, 4));
        for p in 0..8 {
            constant[(p, 1)] = Complex64::new(1.0, 0.0);
            tone[(p, 2)] = phasor(-TAU * p as f64 * 3.0 / 8.0);
        }
        let map = doppler_dft(&constant, &params, &spectrum).unwrap();
        assert!((map.values[(0, 1)] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        for q in 1..8 {
            assert!(map.magnitudes[(q, 1)] < 1e-12);
        }
        let map = doppler_dft(&tone, &params, &spectrum).unwrap();
        assert_eq!(map_doppler_bin(3, 8), 5);
        assert!((map.values[(5, 2)] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        assert!(map.magnitudes[(3, 2)] < 1e-12);
    }

    #[test]
    fn single_target_peak_carries_the_processing_gain() {
        let n = 32;
        let p = 8;
        let params = params(n, p);
        let spectrum = PulseSpectrum::from_coeffs(
            (0..n)
                .map(|k| Complex64::new(1.0 + 0.3 * (k as f64 * 0.7).cos(), 0.2 * (k as f64).sin()))
                .collect(),
        )
        .unwrap();
        let amp = Complex64::new(0.8, -0.6);
        let scene = TargetScene::new(vec![Target::on_grid(11, 3, &params, amp)]).unwrap();
        let frames = nyquist_time_samples(
            &scene,
            &params,
            &spectrum,
            &PulseSchedule::uniform(p),
        )
        .unwrap();
        let mf = matched_filter(&frames, &spectrum.time_samples()).unwrap();
        let map = doppler_dft(&mf, &params, &spectrum).unwrap();
        let expect_bin = map_doppler_bin(3, p);
        let mut max_cell = (0, 0);
        let mut max_val = -1.0;
        for q in 0..p {
            for s in 0..n {
                if map.magnitudes[(q, s)] > max_val {
                    max_val = map.magnitudes[(q, s)];
                    max_cell = (q, s);
                }
            }
        }
        assert_eq!(max_cell, (expect_bin, 11));
        let want = amp * p as f64 * spectrum.energy() / params.pri_s;
        assert!((map.values[(expect_bin, 11)] - want).norm() <= 1e-9 * want.norm());
        let peaks = detect_peaks(&map, 1).unwrap();
        assert_eq!(peaks.detections[0].delay_bin, 11);
        assert_eq!(peaks.detections[0].doppler_bin, expect_bin);
        assert!((peaks.detections[0].amplitude - amp).norm() < 1e-9);
    }

    #[test]
    fn peak_ties_prefer_lower_delay_then_doppler() {
        let params = params(10, 8);
        let spectrum = PulseSpectrum::flat(10);
        let mut mf = Array2::zeros((8, 10));
        mf[(0, 0)] = Complex64::new(0.0, 0.0);
        let mut map = doppler_dft(&mf, &params, &spectrum).unwrap();
        map.values[(5, 2)] = Complex64::new(3.0, 0.0);
        map.values[(1, 7)] = Complex64::new(0.0, 3.0);
        map.magnitudes = map.values.mapv(|c| c.norm());
        let got = detect_peaks(&map, 1).unwrap();
        assert_eq!(got.detections[0].delay_bin, 2);
        assert_eq!(got.detections[0].doppler_bin, 5);
        assert!(detect_peaks(&map, 0).is_err());
        assert!(detect_peaks(&map, 81).is_err());
    }

    #[test]
    fn classic_pipeline_finds_every_planted_cell() {
        let n = 64;
        let p = 16;
        let params = params(n, p);
        let spectrum = PulseSpectrum::flat(n);
        let planted = [(5usize, 2usize), (20, 9), (51, 14)];
        let scene = TargetScene::new(
            planted
                .iter()
                .enumerate()
                .map(|(i, &(s, r))| {
                    Target::on_grid(s, r, &params, Complex64::new(1.0 + i as f64 * 0.2, -0.3))
                })
                .collect(),
        )
        .unwrap();
        let frames =
            nyquist_time_samples(&scene, &params, &spectrum, &PulseSchedule::uniform(p)).unwrap();
        let mf = matched_filter(&frames, &spectrum.time_samples()).unwrap();
        let map = doppler_dft(&mf, &params, &spectrum).unwrap();
        let got = detect_peaks(&map, 3).unwrap();
        let mut found: Vec<(usize, usize)> = got
            .detections
            .iter()
            .map(|d| (d.delay_bin, map_doppler_bin(d.doppler_bin, p)))
            .collect();
        found.sort_unstable();
        assert_eq!(found, vec![(5, 2), (20, 9), (51, 14)]);
    }

    #[test]
    fn focused_delay_rows_equal_the_classic_map() {
        let n = 24;
        let p = 10;
        let params = params(n, p);
        let spectrum = PulseSpectrum::flat(n);
        let scene = TargetScene::new(vec![
            Target::new(0.21, 1.9, Complex64::new(0.9, 0.4)),
            Target::new(0.63, -2.7, Complex64::new(-0.5, 0.2)),
        ])
        .unwrap();
        let schedule = PulseSchedule::uniform(p);
        let x = fourier_coeffs(&scene, &params, &spectrum, &schedule, &BandSelection::full(n))
            .unwrap();
        let focused = doppler_focus(&x).unwrap();
        let d = delay_transform(&focused, n);
        let frames = nyquist_time_samples(&scene, &params, &spectrum, &schedule).unwrap();
        let mf = matched_filter(&frames, &spectrum.time_samples()).unwrap();
        let map = doppler_dft(&mf, &params, &spectrum).unwrap();
        for r in 0..p {
            let q = map_doppler_bin(r, p);
            for s in 0..n {
                let diff = (d[(r, s)] - map.values[(q, s)]).norm();
                assert!(diff <= 1e-9 * map.values[(q, s)].norm().max(1.0));
            }
        }
    }

    #[test]
    fn focused_recovery_matches_classic_top_bins_on_full_band() {
        let n = 48;
        let p = 12;
        let params = params(n, p);
        let spectrum = PulseSpectrum::flat(n);
        let scene = TargetScene::new(vec![
            Target::on_grid(3, 10, &params, Complex64::new(1.0, 0.1)),
            Target::on_grid(29, 4, &params, Complex64::new(0.3, -0.8)),
        ])
        .unwrap();
        let schedule = PulseSchedule::uniform(p);
        let x = fourier_coeffs(&scene, &params, &spectrum, &schedule, &BandSelection::full(n))
            .unwrap();
        let sub = recover_focused(&x, &spectrum, 2, &RecoverOptions::default()).unwrap();
        let frames = nyquist_time_samples(&scene, &params, &spectrum, &schedule).unwrap();
        let mf = matched_filter(&frames, &spectrum.time_samples()).unwrap();
        let map = doppler_dft(&mf, &params, &spectrum).unwrap();
        let classic = detect_peaks(&map, 2).unwrap();
        let mut a: Vec<(usize, usize)> = sub
            .detections
            .iter()
            .map(|d| (d.delay_bin, d.doppler_bin))
            .collect();
        let mut b: Vec<(usize, usize)> = classic
            .detections
            .iter()
            .map(|d| (d.delay_bin, map_doppler_bin(d.doppler_bin, p)))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn sfr_static_target_lands_on_its_grid_cell() {
        let (f0, step, p, pri) = (2.0e6, 0.5e6, 16, 1.0e-4);
        let grid = SfrGrid::natural(f0, step, p, pri).unwrap();
        let amp = Complex64::new(0.7, 0.3);
        let scene =
            TargetScene::new(vec![Target::new(3.0 * grid.delay_step_s, 0.0, amp)]).unwrap();
        let y = sfr_phase_detector(&scene, f0, step, p, pri).unwrap();
        let got = sfr_dft_recover(&y, &grid, 1, None).unwrap();
        assert_eq!(got.detections.len(), 1);
        assert_eq!(got.detections[0].delay_bin, 3);
        assert!((got.detections[0].amplitude - amp).norm() < 1e-9);
        assert!(got.residual_energy < 1e-18);
    }

    #[test]
    fn sfr_zero_input_yields_no_detections() {
        let grid = SfrGrid::natural(1.0e6, 0.25e6, 8, 1.0e-4).unwrap();
        let y = vec![Complex64::new(0.0, 0.0); 8];
        let got = sfr_dft_recover(&y, &grid, 3, Some(1e-9)).unwrap();
        assert!(got.detections.is_empty());
        assert_eq!(got.residual_energy, 0.0);
    }

    #[test]
    fn sfr_two_targets_match_the_exhaustive_correlation() {
        let (f0, step, p, pri) = (1.0e6, 0.4e6, 20, 2.0e-4);
        let grid = SfrGrid::natural(f0, step, p, pri).unwrap();
        let scene = TargetScene::new(vec![
            Target::new(4.0 * grid.delay_step_s, 0.0, Complex64::new(1.0, -0.2)),
            Target::new(13.0 * grid.delay_step_s, 0.0, Complex64::new(-0.4, 0.9)),
        ])
        .unwrap();
        let y = sfr_phase_detector(&scene, f0, step, p, pri).unwrap();

        let mut best = Vec::new();
        for i in 0..grid.delay_bins {
            let atom = grid.atom(i, 0);
            let corr: Complex64 =
                atom.iter().zip(y.iter()).map(|(a, r)| a.conj() * r).sum();
            best.push((corr.norm(), i));
        }
        best.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let oracle: Vec<usize> = {
            let mut v = vec![best[0].1, best[1].1];
            v.sort_unstable();
            v
        };
        assert_eq!(oracle, vec![4, 13]);

        let got = sfr_dft_recover(&y, &grid, 2, None).unwrap();
        let mut bins: Vec<usize> = got.detections.iter().map(|d| d.delay_bin).collect();
        bins.sort_unstable();
        assert_eq!(bins, oracle);
        for d in &got.detections {
            let want = if d.delay_bin == 4 {
                Complex64::new(1.0, -0.2)
            } else {
                Complex64::new(-0.4, 0.9)
            };
            assert!((d.amplitude - want).norm() < 1e-9);
        }
    }
}

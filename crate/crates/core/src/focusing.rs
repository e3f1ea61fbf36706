//! Doppler focusing and greedy sub-Nyquist recovery.
//!
//! Focusing sums the per-pulse Fourier coefficients against a bank of
//! slow-time phasors, one per Doppler grid bin.  A target aligned with a
//! bin adds coherently over all pulses while misaligned targets roughly
//! cancel, so each focused row reduces to a single-delay estimation
//! problem with a P-fold SNR advantage.  Recovery alternates a peak search
//! over the delay/Doppler grid with exact atom subtraction.  Phase-coded
//! trains extend the search with an ambiguity-order axis, and
//! [`mprf_resolve`] combines folded estimates from several PRFs.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::cs;
use crate::dft::{inverse_from_sparse, DftPlan};
use crate::model::{RadarParams, SPEED_OF_LIGHT};
use crate::synth::{BandSelection, PulseSchedule, ScheduleKind, XampleSet};
use crate::waveforms::PulseSpectrum;
use crate::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Spectrum magnitudes at or below this are treated as empty bands: the
/// atoms then carry the spectrum instead of dividing it out.
pub const DEFAULT_WHITEN_EPS: f64 = 1e-6;

fn phasor(ph: f64) -> Complex64 {
    Complex64::new(ph.cos(), ph.sin())
}

/// One recovered target, reported in grid bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub delay_bin: usize,
    pub doppler_bin: usize,
    /// Azimuth bin for array recovery; `None` for single-channel modes.
    #[serde(default)]
    pub azimuth_bin: Option<usize>,
    /// Ambiguity order `q` for phase-coded recovery.
    #[serde(default)]
    pub ambiguity_order: Option<usize>,
    pub amplitude: Complex64,
}

impl Detection {
    pub fn magnitude(&self) -> f64 {
        self.amplitude.norm()
    }
}

/// Output of every recovery pipeline: at most the requested number of
/// detections, strongest first, plus the energy left in the working
/// residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub detections: Vec<Detection>,
    pub residual_energy: f64,
}

/// Greedy solver used by the recovery entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverBackend {
    /// Peak picking with exact subtraction (the default).
    MatchingPursuit,
    /// Joint selection over the factored delay/Doppler dictionary.
    MatrixOmp,
}

/// Knobs shared by the recovery entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverOptions {
    pub backend: SolverBackend,
    /// Polish each peak off-grid within half a bin before subtracting.
    pub refine: bool,
    /// Threshold on `min |H[k]|` over the band below which whitening is
    /// skipped.
    pub whiten_eps: f64,
}

impl Default for RecoverOptions {
    fn default() -> RecoverOptions {
        RecoverOptions {
            backend: SolverBackend::MatchingPursuit,
            refine: false,
            whiten_eps: DEFAULT_WHITEN_EPS,
        }
    }
}

/// Coefficients after slow-time focusing: row `r` holds
/// `psi_r[k] = sum_p c_p[k] exp(j 2 pi r m_p / P)` for every selected `k`.
#[derive(Debug, Clone)]
pub struct FocusedCoeffs {
    pub psi: Array2<Complex64>,
    pub kappa: BandSelection,
}

impl FocusedCoeffs {
    pub fn doppler_bins(&self) -> usize {
        self.psi.nrows()
    }
}

/// Focusing gain pattern `g(offset) = sum_p exp(j offset m_p pri)` for each
/// requested Doppler offset in rad/s.
///
/// At offset zero the value is exactly the number of transmitted pulses;
/// uniform trains null exactly at multiples of `2 pi / (P pri)`.
pub fn sum_of_exponents(
    nu_offsets: &[f64],
    schedule: &PulseSchedule,
    pri_s: f64,
) -> Vec<Complex64> {
    nu_offsets
        .iter()
        .map(|&offset| {
            schedule
                .pulse_slots()
                .iter()
                .map(|&m| phasor(offset * m as f64 * pri_s))
                .sum()
        })
        .collect()
}

/// Focuses a single-channel coefficient set over the full Doppler grid of
/// `num_pulses` bins.
///
/// Pulses enter at their slow-time slots, so a non-uniform train is the
/// zero-filled version of the dense one.  Phase-coded sets must go through
/// [`recover_phase_coded`], which demodulates the code first.
pub fn doppler_focus(x: &XampleSet) -> Result<FocusedCoeffs> {
    x.validate()?;
    if x.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "focusing expects one channel, got {}",
            x.channels()
        )));
    }
    if x.schedule.kind() == ScheduleKind::PhaseCoded {
        return Err(Error::InvalidParam(
            "phase-coded sets carry a transmit code; use recover_phase_coded".into(),
        ));
    }
    let p_grid = x.params.num_pulses;
    let k = x.k();
    let plan = DftPlan::new(p_grid);
    let mut psi = Array2::zeros((p_grid, k));
    let mut buf = vec![Complex64::new(0.0, 0.0); p_grid];
    for i in 0..k {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (row, &slot) in x.schedule.pulse_slots().iter().enumerate() {
            buf[slot] = x.coeffs[(0, row, i)];
        }
        plan.inverse(&mut buf);
        for r in 0..p_grid {
            psi[(r, i)] = buf[r];
        }
    }
    Ok(FocusedCoeffs {
        psi,
        kappa: x.kappa.clone(),
    })
}

/// Expands focused rows to the delay grid:
/// `d_r[s] = sum_{k in kappa} psi_r[k] exp(j 2 pi k s / N)`.
pub fn delay_transform(focused: &FocusedCoeffs, num_bins: usize) -> Array2<Complex64> {
    let plan = DftPlan::new(num_bins);
    let rows = focused.psi.nrows();
    let mut out = Array2::zeros((rows, num_bins));
    let mut buf = Vec::new();
    for r in 0..rows {
        let vals: Vec<Complex64> = (0..focused.psi.ncols()).map(|i| focused.psi[(r, i)]).collect();
        inverse_from_sparse(&plan, focused.kappa.indices(), &vals, &mut buf);
        for s in 0..num_bins {
            out[(r, s)] = buf[s];
        }
    }
    out
}

pub(crate) struct Whitened {
    /// Residual coefficient rows, frames by K; divided by `H[k]` when the
    /// band allows it.
    pub(crate) rows: Array2<Complex64>,
    /// Correlation weight per band position: 1 after whitening, `conj(H[k])`
    /// otherwise.
    pub(crate) weight: Vec<Complex64>,
    /// Spectrum factor carried by atoms: 1 after whitening, `H[k]` otherwise.
    pub(crate) atom_h: Vec<Complex64>,
    /// `sum_k |atom_h[k]|^2`, the per-pulse correlation energy of one atom.
    pub(crate) divisor: f64,
}

pub(crate) fn whiten(
    x: &XampleSet,
    channel: usize,
    spectrum: &PulseSpectrum,
    eps: f64,
) -> Result<Whitened> {
    if spectrum.len() != x.params.num_nyquist_bins {
        return Err(Error::ShapeMismatch(format!(
            "spectrum has {} bins, params have {}",
            spectrum.len(),
            x.params.num_nyquist_bins
        )));
    }
    let kap = x.kappa.indices();
    let frames = x.frames();
    let k = x.k();
    let mut rows = Array2::zeros((frames, k));
    for f in 0..frames {
        for i in 0..k {
            rows[(f, i)] = x.coeffs[(channel, f, i)];
        }
    }
    if spectrum.min_magnitude(Some(kap)) > eps {
        for (i, &kk) in kap.iter().enumerate() {
            let h = spectrum.coeff(kk);
            for f in 0..frames {
                rows[(f, i)] /= h;
            }
        }
        Ok(Whitened {
            rows,
            weight: vec![Complex64::new(1.0, 0.0); k],
            atom_h: vec![Complex64::new(1.0, 0.0); k],
            divisor: k as f64,
        })
    } else {
        let atom_h: Vec<Complex64> = kap.iter().map(|&kk| spectrum.coeff(kk)).collect();
        let weight: Vec<Complex64> = atom_h.iter().map(|h| h.conj()).collect();
        let divisor = atom_h.iter().map(|h| h.norm_sqr()).sum();
        Ok(Whitened {
            rows,
            weight,
            atom_h,
            divisor,
        })
    }
}

#[derive(Clone, Copy)]
struct Peak {
    mag2: f64,
    delay: usize,
    doppler: usize,
    fold: usize,
    value: Complex64,
}

/// Scans `|d_r[s]|` of one focused block, keeping the strongest cell; ties
/// prefer lower delay, then lower Doppler, then lower fold.
fn scan_block(
    psi: &Array2<Complex64>,
    weight: &[Complex64],
    kappa: &[usize],
    fold: usize,
    twist_grid: usize,
    plan_n: &DftPlan,
    best: &mut Option<Peak>,
) {
    let n = plan_n.len();
    let mut buf = Vec::new();
    let mut vals = vec![Complex64::new(0.0, 0.0); kappa.len()];
    for r in 0..psi.nrows() {
        let twist = if fold == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            phasor(TAU * r as f64 * fold as f64 / twist_grid as f64)
        };
        for (i, v) in vals.iter_mut().enumerate() {
            let mut w = weight[i] * psi[(r, i)];
            if fold != 0 {
                w *= twist;
            }
            *v = w;
        }
        inverse_from_sparse(plan_n, kappa, &vals, &mut buf);
        for s in 0..n {
            let mag2 = buf[s].norm_sqr();
            let better = match best {
                None => mag2 > 0.0,
                Some(b) => {
                    mag2 > b.mag2
                        || (mag2 == b.mag2
                            && mag2 > 0.0
                            && (s, r, fold) < (b.delay, b.doppler, b.fold))
                }
            };
            if better {
                *best = Some(Peak {
                    mag2,
                    delay: s,
                    doppler: r,
                    fold,
                    value: buf[s],
                });
            }
        }
    }
}

fn focus_block(
    rows: &Array2<Complex64>,
    slots: &[usize],
    p_grid: usize,
    plan_p: &DftPlan,
) -> Array2<Complex64> {
    let k = rows.ncols();
    let mut psi = Array2::zeros((p_grid, k));
    let mut buf = vec![Complex64::new(0.0, 0.0); p_grid];
    for i in 0..k {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (row, &slot) in slots.iter().enumerate() {
            buf[slot] = rows[(row, i)];
        }
        plan_p.inverse(&mut buf);
        for r in 0..p_grid {
            psi[(r, i)] = buf[r];
        }
    }
    psi
}

/// Demodulated window of a phase-coded residual: pulse `p` of fold `q`
/// lives in frame `q + p` and carries `exp(j c[p])`.
fn coded_window(
    rows: &Array2<Complex64>,
    phases: &[f64],
    fold: usize,
) -> Array2<Complex64> {
    let p = phases.len();
    let k = rows.ncols();
    let mut out = Array2::zeros((p, k));
    for pulse in 0..p {
        let code = phases[pulse];
        for i in 0..k {
            let mut v = rows[(fold + pulse, i)];
            if code != 0.0 {
                v *= phasor(-code);
            }
            out[(pulse, i)] = v;
        }
    }
    out
}

struct AtomShape<'a> {
    delay_bins: f64,
    doppler_bins: f64,
    fold: usize,
    atom_h: &'a [Complex64],
}

/// Removes `amp` times the atom from the residual rows, in the frame
/// domain, exactly as synthesis would have added it.
fn subtract_atom(
    rows: &mut Array2<Complex64>,
    schedule: &PulseSchedule,
    kappa: &[usize],
    params: &RadarParams,
    shape: &AtomShape,
    amp: Complex64,
) {
    let n = params.num_nyquist_bins as f64;
    let p_grid = params.num_pulses as f64;
    let scale = amp / params.pri_s;
    let delay_phasors: Vec<Complex64> = kappa
        .iter()
        .enumerate()
        .map(|(i, &k)| shape.atom_h[i] * phasor(-TAU * k as f64 * shape.delay_bins / n))
        .collect();
    match schedule.kind() {
        ScheduleKind::Uniform | ScheduleKind::NonUniform => {
            for (row, &slot) in schedule.pulse_slots().iter().enumerate() {
                let slow = scale * phasor(-TAU * shape.doppler_bins * slot as f64 / p_grid);
                for (i, d) in delay_phasors.iter().enumerate() {
                    rows[(row, i)] -= slow * d;
                }
            }
        }
        ScheduleKind::PhaseCoded => {
            let phases = schedule.phases();
            for (pulse, &code) in phases.iter().enumerate() {
                let frame = shape.fold + pulse;
                let mut slow = scale * phasor(-TAU * shape.doppler_bins * frame as f64 / p_grid);
                if code != 0.0 {
                    slow *= phasor(code);
                }
                for (i, d) in delay_phasors.iter().enumerate() {
                    rows[(frame, i)] -= slow * d;
                }
            }
        }
    }
}

/// One selected cell with the exact continuous shape that was
/// subtracted for it, so a later refit can rebuild its contribution.
#[derive(Clone, Copy)]
struct SupportAtom {
    delay: usize,
    doppler: usize,
    fold: usize,
    delay_bins: f64,
    doppler_bins: f64,
    amp: Complex64,
}

/// Gaussian elimination with partial pivoting on a small complex system.
/// Consumes its inputs; `None` flags a numerically singular matrix.
fn solve_dense(mut gram: Vec<Vec<Complex64>>, mut rhs: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let m = rhs.len();
    let scale = (0..m).map(|i| gram[i][i].norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&a, &b| {
                gram[a][col]
                    .norm_sqr()
                    .partial_cmp(&gram[b][col].norm_sqr())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if gram[pivot][col].norm() <= scale * 1e-12 {
            return None;
        }
        gram.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..m {
            let f = gram[row][col] / gram[col][col];
            for c in col..m {
                let above = gram[col][c];
                gram[row][c] -= f * above;
            }
            let above = rhs[col];
            rhs[row] -= f * above;
        }
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); m];
    for row in (0..m).rev() {
        let mut acc = rhs[row];
        for c in row + 1..m {
            acc -= gram[row][c] * amps[c];
        }
        amps[row] = acc / gram[row][row];
    }
    Some(amps)
}

/// Least-squares amplitudes fitting `sum_i a_i atoms_i` to `y0`.
/// Returns `None` when the Gram system is numerically singular, which
/// happens when two support atoms coincide or are linearly dependent.
fn solve_amplitudes(
    atoms: &[Array2<Complex64>],
    y0: &Array2<Complex64>,
) -> Option<Vec<Complex64>> {
    let m = atoms.len();
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = atoms[i]
                .iter()
                .zip(atoms[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
        }
        rhs[i] = atoms[i].iter().zip(y0.iter()).map(|(a, b)| a.conj() * b).sum();
    }
    solve_dense(gram, rhs)
}

fn residual_from(
    y0: &Array2<Complex64>,
    mats: &[Array2<Complex64>],
    amps: &[Complex64],
) -> Array2<Complex64> {
    let mut rows = y0.clone();
    for (mat, &amp) in mats.iter().zip(amps.iter()) {
        rows.zip_mut_with(mat, |r, a| *r -= amp * a);
    }
    rows
}

fn frobenius(rows: &Array2<Complex64>) -> f64 {
    rows.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Joint refit plus cyclic re-selection over a greedily chosen support.
///
/// All amplitudes are first refitted together by least squares.  Then
/// each pass removes one cell at a time, asks `rescan` for the best
/// replacement on the partial residual, and keeps the swap only when the
/// refitted residual strictly shrinks.  A support that explains the
/// observation exactly drives the residual to the stop threshold and
/// ends the loop early; otherwise the loop ends at the first pass with
/// no accepted swap.
fn polish_support(
    y0: &Array2<Complex64>,
    rows: &mut Array2<Complex64>,
    support: &mut [SupportAtom],
    stop: f64,
    build: &dyn Fn(&SupportAtom) -> Array2<Complex64>,
    rescan: &dyn Fn(&Array2<Complex64>) -> Option<Peak>,
) {
    let m = support.len();
    if m == 0 {
        return;
    }
    let mut mats: Vec<Array2<Complex64>> = support.iter().map(|a| build(a)).collect();
    let amps = match solve_amplitudes(&mats, y0) {
        Some(a) => a,
        None => return,
    };
    for (atom, &amp) in support.iter_mut().zip(amps.iter()) {
        atom.amp = amp;
    }
    *rows = residual_from(y0, &mats, &amps);
    let mut norm = frobenius(rows);
    for _ in 0..2 * m + 2 {
        if norm <= stop {
            break;
        }
        let mut improved = false;
        for i in 0..m {
            let mut partial = rows.clone();
            partial.zip_mut_with(&mats[i], |r, a| *r += support[i].amp * a);
            let cand = match rescan(&partial) {
                Some(p) => p,
                None => continue,
            };
            if support
                .iter()
                .any(|a| (a.delay, a.doppler, a.fold) == (cand.delay, cand.doppler, cand.fold))
            {
                continue;
            }
            let trial = SupportAtom {
                delay: cand.delay,
                doppler: cand.doppler,
                fold: cand.fold,
                delay_bins: cand.delay as f64,
                doppler_bins: cand.doppler as f64,
                amp: Complex64::new(0.0, 0.0),
            };
            let trial_mat = build(&trial);
            let swapped = std::mem::replace(&mut mats[i], trial_mat);
            match solve_amplitudes(&mats, y0) {
                Some(new_amps) => {
                    let trial_rows = residual_from(y0, &mats, &new_amps);
                    let trial_norm = frobenius(&trial_rows);
                    if trial_norm < norm * (1.0 - 1e-9) {
                        support[i] = trial;
                        for (atom, &amp) in support.iter_mut().zip(new_amps.iter()) {
                            atom.amp = amp;
                        }
                        *rows = trial_rows;
                        norm = trial_norm;
                        improved = true;
                    } else {
                        mats[i] = swapped;
                    }
                }
                None => {
                    mats[i] = swapped;
                }
            }
            if norm <= stop {
                break;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Full correlation map of `rows` against the delay/Doppler grid, the
/// same values the focused scan ranks, laid out Doppler row by row.
fn correlation_map(
    rows: &Array2<Complex64>,
    slots: &[usize],
    weight: &[Complex64],
    kappa: &[usize],
    p_grid: usize,
    plan_p: &DftPlan,
    plan_n: &DftPlan,
) -> Array2<Complex64> {
    let n = plan_n.len();
    let psi = focus_block(rows, slots, p_grid, plan_p);
    let mut map = Array2::zeros((p_grid, n));
    let mut buf = Vec::new();
    let mut vals = vec![Complex64::new(0.0, 0.0); kappa.len()];
    for r in 0..p_grid {
        for (i, v) in vals.iter_mut().enumerate() {
            *v = weight[i] * psi[(r, i)];
        }
        inverse_from_sparse(plan_n, kappa, &vals, &mut buf);
        for s in 0..n {
            map[(r, s)] = buf[s];
        }
    }
    map
}

/// Exhaustive least-squares sweep over every `m`-subset of one grid
/// line.  `corr[i]` is the residual correlation at line position `i` and
/// `gram_of(i, j)` the atom inner product between two positions.  The
/// subset explaining the most energy wins; a subset explaining the whole
/// residual returns immediately.  Subsets whose Gram is singular, or
/// whose explained energy exceeds the residual energy by more than
/// rounding, are skipped as numerically untrustworthy.
fn best_line_tuple(
    corr: &[Complex64],
    m: usize,
    energy: f64,
    gram_of: &dyn Fn(usize, usize) -> Complex64,
) -> Option<Vec<usize>> {
    let len = corr.len();
    if m == 0 || len < m {
        return None;
    }
    let mut combo: Vec<usize> = (0..m).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let gram: Vec<Vec<Complex64>> = combo
            .iter()
            .map(|&a| combo.iter().map(|&b| gram_of(a, b)).collect())
            .collect();
        let rhs: Vec<Complex64> = combo.iter().map(|&i| corr[i]).collect();
        if let Some(amps) = solve_dense(gram, rhs) {
            let explained: f64 = amps
                .iter()
                .zip(combo.iter())
                .map(|(a, &i)| (a.conj() * corr[i]).re)
                .sum();
            if explained <= energy * (1.0 + 1e-6) {
                if explained >= energy * (1.0 - 1e-9) {
                    return Some(combo);
                }
                if best.as_ref().map_or(explained > 0.0, |(e, _)| explained > *e) {
                    best = Some((explained, combo.clone()));
                }
            }
        }
        let mut k = m;
        loop {
            if k == 0 {
                return best.map(|(_, t)| t);
            }
            k -= 1;
            if combo[k] != k + len - m {
                combo[k] += 1;
                for j in k + 1..m {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Re-selects whole Doppler rows or delay columns of the support by
/// exhaustive least squares.  Greedy selection can park mutually
/// compensating cells inside one row or column, where single-cell swaps
/// stall; rows and columns are where that happens, because cells sharing
/// neither direction interact only weakly.  Groups of two to four cells
/// are re-solved exactly against the rest of the fit; anything larger is
/// left alone.  Every replacement must strictly shrink the refitted
/// residual.
#[allow(clippy::too_many_arguments)]
fn rescue_grid_groups(
    y0: &Array2<Complex64>,
    rows: &mut Array2<Complex64>,
    support: &mut [SupportAtom],
    stop: f64,
    build: &dyn Fn(&SupportAtom) -> Array2<Complex64>,
    slots: &[usize],
    weight: &[Complex64],
    kappa: &[usize],
    gd: &[Complex64],
    gp: &[Complex64],
    p_grid: usize,
    plan_p: &DftPlan,
    plan_n: &DftPlan,
) -> bool {
    let n = plan_n.len();
    let mut changed = false;
    for _ in 0..2 {
        if frobenius(rows) <= stop {
            break;
        }
        let mut improved = false;
        for by_row in [true, false] {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, atom) in support.iter().enumerate() {
                let key = if by_row { atom.doppler } else { atom.delay };
                groups.entry(key).or_default().push(i);
            }
            for (key, idxs) in groups {
                let m = idxs.len();
                if !(2..=4).contains(&m) {
                    continue;
                }
                let norm = frobenius(rows);
                if norm <= stop {
                    return changed;
                }
                let mut partial = rows.clone();
                for &i in &idxs {
                    let mat = build(&support[i]);
                    let amp = support[i].amp;
                    partial.zip_mut_with(&mat, |r, a| *r += amp * a);
                }
                let energy: f64 = partial.iter().map(|c| c.norm_sqr()).sum();
                let map =
                    correlation_map(&partial, slots, weight, kappa, p_grid, plan_p, plan_n);
                let corr: Vec<Complex64> = if by_row {
                    (0..n).map(|s| map[(key, s)]).collect()
                } else {
                    (0..p_grid).map(|r| map[(r, key)]).collect()
                };
                let gram_of = |a: usize, b: usize| -> Complex64 {
                    if by_row {
                        gd[(b + n - a) % n] * gp[0]
                    } else {
                        gd[0] * gp[(b + p_grid - a) % p_grid]
                    }
                };
                let tuple = match best_line_tuple(&corr, m, energy, &gram_of) {
                    Some(t) => t,
                    None => continue,
                };
                let mut trial: Vec<SupportAtom> = support.to_vec();
                for (&i, &pos) in idxs.iter().zip(tuple.iter()) {
                    let (delay, doppler) = if by_row { (pos, key) } else { (key, pos) };
                    trial[i] = SupportAtom {
                        delay,
                        doppler,
                        fold: 0,
                        delay_bins: delay as f64,
                        doppler_bins: doppler as f64,
                        amp: Complex64::new(0.0, 0.0),
                    };
                }
                let mut cells: Vec<(usize, usize)> =
                    trial.iter().map(|a| (a.delay, a.doppler)).collect();
                cells.sort_unstable();
                if cells.windows(2).any(|w| w[0] == w[1]) {
                    continue;
                }
                let mats: Vec<Array2<Complex64>> = trial.iter().map(|a| build(a)).collect();
                let amps = match solve_amplitudes(&mats, y0) {
                    Some(a) => a,
                    None => continue,
                };
                let trial_rows = residual_from(y0, &mats, &amps);
                let trial_norm = frobenius(&trial_rows);
                if trial_norm < norm * (1.0 - 1e-9) {
                    for (atom, &amp) in trial.iter_mut().zip(amps.iter()) {
                        atom.amp = amp;
                    }
                    support.copy_from_slice(&trial);
                    *rows = trial_rows;
                    changed = true;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    changed
}

/// Dictionary correlation at a continuous grid position, evaluated
/// directly from the residual rows.
fn correlate_at(
    rows: &Array2<Complex64>,
    weight: &[Complex64],
    kappa: &[usize],
    slots: &[usize],
    params: &RadarParams,
    delay_bins: f64,
    doppler_bins: f64,
) -> Complex64 {
    let n = params.num_nyquist_bins as f64;
    let p_grid = params.num_pulses as f64;
    let delay_phasors: Vec<Complex64> = kappa
        .iter()
        .map(|&k| phasor(TAU * k as f64 * delay_bins / n))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (row, &slot) in slots.iter().enumerate() {
        let slow = phasor(TAU * doppler_bins * slot as f64 / p_grid);
        let mut inner = Complex64::new(0.0, 0.0);
        for (i, d) in delay_phasors.iter().enumerate() {
            inner += weight[i] * rows[(row, i)] * d;
        }
        acc += inner * slow;
    }
    acc
}

fn golden_max(mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..24 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

pub(crate) fn sort_detections(detections: &mut [Detection]) {
    detections.sort_by(|a, b| {
        b.magnitude()
            .partial_cmp(&a.magnitude())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                (a.delay_bin, a.doppler_bin, a.azimuth_bin).cmp(&(
                    b.delay_bin,
                    b.doppler_bin,
                    b.azimuth_bin,
                ))
            })
    });
}

/// Recovers up to `num_targets` delay/Doppler cells from a uniform or
/// non-uniform coefficient set.
///
/// Each round focuses the residual, finds the strongest
/// `|sum_k psi_r[k] exp(j 2 pi k s / N)|`, estimates the amplitude as
/// `pri * peak / (pulses * sum_k |H[k]|^2-or-K)`, and subtracts the atom
/// from the residual frames.  With `refine` set, the peak is polished
/// off-grid within half a bin first, which sharpens amplitude estimates
/// for targets between cells.
pub fn recover_focused(
    x: &XampleSet,
    spectrum: &PulseSpectrum,
    num_targets: usize,
    opts: &RecoverOptions,
) -> Result<RecoveryResult> {
    x.validate()?;
    if x.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "single-channel recovery got {} channels",
            x.channels()
        )));
    }
    if x.schedule.kind() == ScheduleKind::PhaseCoded {
        return Err(Error::InvalidParam(
            "phase-coded sets carry a transmit code; use recover_phase_coded".into(),
        ));
    }
    if num_targets == 0 || x.k() == 0 {
        return Err(Error::InvalidParam("need at least one target and one coefficient".into()));
    }
    let wh = whiten(x, 0, spectrum, opts.whiten_eps)?;
    if opts.backend == SolverBackend::MatrixOmp {
        return recover_matrix_omp(x, &wh, num_targets);
    }
    let Whitened {
        mut rows,
        weight,
        atom_h,
        divisor,
    } = wh;
    let params = &x.params;
    let n = params.num_nyquist_bins;
    let p_grid = params.num_pulses;
    let pulses = x.schedule.num_tx() as f64;
    let plan_p = DftPlan::new(p_grid);
    let plan_n = DftPlan::new(n);
    let kap = x.kappa.indices();
    let y0 = rows.clone();
    let initial: f64 = rows.iter().map(|c| c.norm_sqr()).sum();
    let stop = cs::DEFAULT_TOL_FACTOR * initial.sqrt();
    let mut support: Vec<SupportAtom> = Vec::new();
    for _ in 0..num_targets {
        let norm: f64 = rows.iter().map(|c| c.norm_sqr()).sum();
        if norm.sqrt() <= stop {
            break;
        }
        let psi = focus_block(&rows, x.schedule.pulse_slots(), p_grid, &plan_p);
        let mut best = None;
        scan_block(&psi, &weight, kap, 0, p_grid, &plan_n, &mut best);
        let peak = match best {
            Some(p) => p,
            None => break,
        };
        let mut delay_bins = peak.delay as f64;
        let mut doppler_bins = peak.doppler as f64;
        let mut value = peak.value;
        if opts.refine {
            for _ in 0..2 {
                let resid = &rows;
                let d_fixed = delay_bins;
                doppler_bins = golden_max(doppler_bins - 0.5, doppler_bins + 0.5, &|r| {
                    correlate_at(resid, &weight, kap, x.schedule.pulse_slots(), params, d_fixed, r)
                        .norm_sqr()
                });
                let r_fixed = doppler_bins;
                delay_bins = golden_max(delay_bins - 0.5, delay_bins + 0.5, &|s| {
                    correlate_at(resid, &weight, kap, x.schedule.pulse_slots(), params, s, r_fixed)
                        .norm_sqr()
                });
            }
            value = correlate_at(
                &rows,
                &weight,
                kap,
                x.schedule.pulse_slots(),
                params,
                delay_bins,
                doppler_bins,
            );
        }
        let amp = value * params.pri_s / (pulses * divisor);
        subtract_atom(
            &mut rows,
            &x.schedule,
            kap,
            params,
            &AtomShape {
                delay_bins,
                doppler_bins,
                fold: 0,
                atom_h: &atom_h,
            },
            amp,
        );
        support.push(SupportAtom {
            delay: peak.delay,
            doppler: peak.doppler,
            fold: 0,
            delay_bins,
            doppler_bins,
            amp,
        });
    }
    let frames = x.frames();
    let build = |atom: &SupportAtom| -> Array2<Complex64> {
        let mut mat = Array2::zeros((frames, kap.len()));
        subtract_atom(
            &mut mat,
            &x.schedule,
            kap,
            params,
            &AtomShape {
                delay_bins: atom.delay_bins,
                doppler_bins: atom.doppler_bins,
                fold: atom.fold,
                atom_h: &atom_h,
            },
            Complex64::new(-1.0, 0.0),
        );
        mat
    };
    let rescan = |resid: &Array2<Complex64>| -> Option<Peak> {
        let psi = focus_block(resid, x.schedule.pulse_slots(), p_grid, &plan_p);
        let mut best = None;
        scan_block(&psi, &weight, kap, 0, p_grid, &plan_n, &mut best);
        best
    };
    polish_support(&y0, &mut rows, &mut support, stop, &build, &rescan);
    if frobenius(&rows) > stop && support.len() >= 2 {
        let gd: Vec<Complex64> = (0..n)
            .map(|d| {
                kap.iter()
                    .zip(atom_h.iter())
                    .map(|(&k, h)| h.norm_sqr() * phasor(-TAU * ((k * d) % n) as f64 / n as f64))
                    .sum()
            })
            .collect();
        let gp: Vec<Complex64> = (0..p_grid)
            .map(|d| {
                x.schedule
                    .pulse_slots()
                    .iter()
                    .map(|&t| phasor(-TAU * ((d * t) % p_grid) as f64 / p_grid as f64))
                    .sum()
            })
            .collect();
        let rescued = rescue_grid_groups(
            &y0,
            &mut rows,
            &mut support,
            stop,
            &build,
            x.schedule.pulse_slots(),
            &weight,
            kap,
            &gd,
            &gp,
            p_grid,
            &plan_p,
            &plan_n,
        );
        if rescued {
            polish_support(&y0, &mut rows, &mut support, stop, &build, &rescan);
        }
    }
    let mut detections: Vec<Detection> = support
        .iter()
        .map(|a| Detection {
            delay_bin: a.delay,
            doppler_bin: a.doppler,
            azimuth_bin: None,
            ambiguity_order: None,
            amplitude: a.amp,
        })
        .collect();
    sort_detections(&mut detections);
    let residual_energy = rows.iter().map(|c| c.norm_sqr()).sum();
    Ok(RecoveryResult {
        detections,
        residual_energy,
    })
}

/// Joint-selection alternative: one matrix-observation pursuit over the
/// factored slow-time and delay dictionaries.
fn recover_matrix_omp(
    x: &XampleSet,
    wh: &Whitened,
    num_targets: usize,
) -> Result<RecoveryResult> {
    let params = &x.params;
    let n = params.num_nyquist_bins;
    let p_grid = params.num_pulses;
    let frames = x.frames();
    let mut a = Array2::zeros((frames, p_grid));
    for (row, &slot) in x.schedule.pulse_slots().iter().enumerate() {
        for r in 0..p_grid {
            a[(row, r)] = phasor(-TAU * r as f64 * slot as f64 / p_grid as f64);
        }
    }
    let kap = x.kappa.indices();
    let mut b = Array2::zeros((kap.len(), n));
    for (i, &k) in kap.iter().enumerate() {
        let h = wh.atom_h[i] / params.pri_s;
        for s in 0..n {
            b[(i, s)] = h * phasor(-TAU * k as f64 * s as f64 / n as f64);
        }
    }
    let sol = cs::omp_matrix(&a, &b, &wh.rows, num_targets)?;
    let mut detections: Vec<Detection> = sol
        .support
        .iter()
        .zip(sol.values.iter())
        .map(|(&(r, s), &v)| Detection {
            delay_bin: s,
            doppler_bin: r,
            azimuth_bin: None,
            ambiguity_order: None,
            amplitude: v,
        })
        .collect();
    sort_detections(&mut detections);
    Ok(RecoveryResult {
        detections,
        residual_energy: sol.residual_norm * sol.residual_norm,
    })
}

/// Recovers delay, Doppler, and ambiguity order from a phase-coded train.
///
/// For each candidate order `q`, the frames `q .. q+P` are demodulated by
/// the known code, focused, and phase-aligned with `exp(j 2 pi r q / P)`;
/// the greedy loop then searches the joint (delay, Doppler, order) grid
/// and subtracts winners from the shared frame residual.  A `Q = 1`
/// schedule with an all-zero code follows exactly the same arithmetic as
/// [`recover_focused`] and returns identical results.  The `refine` and
/// `backend` options are ignored here.
pub fn recover_phase_coded(
    x: &XampleSet,
    spectrum: &PulseSpectrum,
    num_targets: usize,
    opts: &RecoverOptions,
) -> Result<RecoveryResult> {
    x.validate()?;
    if x.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "single-channel recovery got {} channels",
            x.channels()
        )));
    }
    if x.schedule.kind() != ScheduleKind::PhaseCoded {
        return Err(Error::InvalidParam("schedule carries no transmit code".into()));
    }
    if num_targets == 0 || x.k() == 0 {
        return Err(Error::InvalidParam("need at least one target and one coefficient".into()));
    }
    let q_max = x.schedule.ambiguity_factor();
    let p_grid = x.params.num_pulses;
    if q_max >= p_grid {
        return Err(Error::InvalidParam(format!(
            "ambiguity factor {q_max} must be below the pulse count {p_grid}"
        )));
    }
    let Whitened {
        mut rows,
        weight,
        atom_h,
        divisor,
    } = whiten(x, 0, spectrum, opts.whiten_eps)?;
    let params = &x.params;
    let n = params.num_nyquist_bins;
    let pulses = x.schedule.num_tx() as f64;
    let plan_p = DftPlan::new(p_grid);
    let plan_n = DftPlan::new(n);
    let kap = x.kappa.indices();
    let dense_slots: Vec<usize> = (0..p_grid).collect();
    let y0 = rows.clone();
    let initial: f64 = rows.iter().map(|c| c.norm_sqr()).sum();
    let stop = cs::DEFAULT_TOL_FACTOR * initial.sqrt();
    let mut support: Vec<SupportAtom> = Vec::new();
    for _ in 0..num_targets {
        let norm: f64 = rows.iter().map(|c| c.norm_sqr()).sum();
        if norm.sqrt() <= stop {
            break;
        }
        let mut best = None;
        for fold in 0..q_max {
            let window = coded_window(&rows, x.schedule.phases(), fold);
            let psi = focus_block(&window, &dense_slots, p_grid, &plan_p);
            scan_block(&psi, &weight, kap, fold, p_grid, &plan_n, &mut best);
        }
        let peak = match best {
            Some(p) => p,
            None => break,
        };
        let amp = peak.value * params.pri_s / (pulses * divisor);
        subtract_atom(
            &mut rows,
            &x.schedule,
            kap,
            params,
            &AtomShape {
                delay_bins: peak.delay as f64,
                doppler_bins: peak.doppler as f64,
                fold: peak.fold,
                atom_h: &atom_h,
            },
            amp,
        );
        support.push(SupportAtom {
            delay: peak.delay,
            doppler: peak.doppler,
            fold: peak.fold,
            delay_bins: peak.delay as f64,
            doppler_bins: peak.doppler as f64,
            amp,
        });
    }
    let frames = x.frames();
    let build = |atom: &SupportAtom| -> Array2<Complex64> {
        let mut mat = Array2::zeros((frames, kap.len()));
        subtract_atom(
            &mut mat,
            &x.schedule,
            kap,
            params,
            &AtomShape {
                delay_bins: atom.delay_bins,
                doppler_bins: atom.doppler_bins,
                fold: atom.fold,
                atom_h: &atom_h,
            },
            Complex64::new(-1.0, 0.0),
        );
        mat
    };
    let rescan = |resid: &Array2<Complex64>| -> Option<Peak> {
        let mut best = None;
        for fold in 0..q_max {
            let window = coded_window(resid, x.schedule.phases(), fold);
            let psi = focus_block(&window, &dense_slots, p_grid, &plan_p);
            scan_block(&psi, &weight, kap, fold, p_grid, &plan_n, &mut best);
        }
        best
    };
    polish_support(&y0, &mut rows, &mut support, stop, &build, &rescan);
    let mut detections: Vec<Detection> = support
        .iter()
        .map(|a| Detection {
            delay_bin: a.delay,
            doppler_bin: a.doppler,
            azimuth_bin: None,
            ambiguity_order: Some(a.fold),
            amplitude: a.amp,
        })
        .collect();
    sort_detections(&mut detections);
    let residual_energy = rows.iter().map(|c| c.norm_sqr()).sum();
    Ok(RecoveryResult {
        detections,
        residual_energy,
    })
}

/// Which physical quantity a multi-PRF resolution works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MprfMode {
    Velocity,
    Range,
}

/// Resolves ambiguous per-PRF estimates into one unfolded value.
///
/// `estimates` pairs each train's folded estimate (m/s or m) with its PRF
/// in Hz.  Velocity mode searches unfoldings of the first train and keeps
/// the first one every other train can match within half a correlation
/// bin, returning the average of the matched set.  Range mode unfolds all
/// trains by a common order, scores each order by the squared spread
/// around the median, and returns the best median.  The correlation bin
/// defaults to one resolution cell and can be overridden.
pub fn mprf_resolve(
    estimates: &[(f64, f64)],
    max_unfold: usize,
    mode: MprfMode,
    params: &RadarParams,
    corr_bin: Option<f64>,
) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least two PRF trains, got {}",
            estimates.len()
        )));
    }
    if estimates.iter().any(|&(_, prf)| !(prf > 0.0)) {
        return Err(Error::InvalidParam("PRFs must be positive".into()));
    }
    let increments: Vec<f64> = estimates
        .iter()
        .map(|&(_, prf)| match mode {
            MprfMode::Velocity => params.wavelength_m() * prf / 2.0,
            MprfMode::Range => SPEED_OF_LIGHT / (2.0 * prf),
        })
        .collect();
    let bin = corr_bin.unwrap_or(match mode {
        MprfMode::Velocity => params.wavelength_m() / (2.0 * params.cpi_s()),
        MprfMode::Range => SPEED_OF_LIGHT / (2.0 * params.bandwidth_hz),
    });
    match mode {
        MprfMode::Velocity => {
            for k0 in 0..=max_unfold {
                let anchor = estimates[0].0 + k0 as f64 * increments[0];
                let mut matched = vec![anchor];
                let mut ok = true;
                for (i, &(folded, _)) in estimates.iter().enumerate().skip(1) {
                    let candidate = (0..=max_unfold)
                        .map(|k| folded + k as f64 * increments[i])
                        .min_by(|a, b| {
                            (a - anchor).abs().partial_cmp(&(b - anchor).abs()).unwrap()
                        })
                        .unwrap();
                    if (candidate - anchor).abs() <= bin / 2.0 {
                        matched.push(candidate);
                    } else {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    return Ok(matched.iter().sum::<f64>() / matched.len() as f64);
                }
            }
            Err(Error::AmbiguityUnresolved { max_unfold })
        }
        MprfMode::Range => {
            let mut best: Option<(f64, f64, f64)> = None;
            for k in 0..=max_unfold {
                let mut vals: Vec<f64> = estimates
                    .iter()
                    .enumerate()
                    .map(|(i, &(folded, _))| folded + k as f64 * increments[i])
                    .collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = vals[vals.len() / 2];
                let cost: f64 = vals.iter().map(|v| (v - median) * (v - median)).sum();
                let spread = vals
                    .iter()
                    .map(|v| (v - median).abs())
                    .fold(0.0f64, f64::max);
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, median, spread));
                }
            }
            let (_, median, spread) = best.unwrap();
            if spread > bin / 2.0 {
                return Err(Error::AmbiguityUnresolved { max_unfold });
            }
            Ok(median)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Target, TargetScene};
    use crate::synth::{add_noise, fourier_coeffs};

    fn params(n: usize, p: usize) -> RadarParams {
        RadarParams::new(1.0, n as f64, 1.0e10, p).unwrap()
    }

    fn shaped_spectrum(n: usize) -> PulseSpectrum {
        let coeffs = (0..n)
            .map(|k| {
                let ph = TAU * k as f64 / n as f64;
                Complex64::new(1.0 + 0.4 * ph.cos(), 0.3 * ph.sin())
            })
            .collect();
        PulseSpectrum::from_coeffs(coeffs).unwrap()
    }

    fn bins_of(result: &RecoveryResult) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = result
            .detections
            .iter()
            .map(|d| (d.delay_bin, d.doppler_bin))
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn gain_is_the_pulse_count_at_zero_offset() {
        let uni = PulseSchedule::uniform(200);
        let g = sum_of_exponents(&[0.0], &uni, 1.0);
        assert_eq!(g[0], Complex64::new(200.0, 0.0));
        let null = sum_of_exponents(&[TAU * 3.0 / 200.0], &uni, 1.0);
        assert!(null[0].norm() < 1e-9);
        let sparse = PulseSchedule::non_uniform_random(100, 200, 13).unwrap();
        let g = sum_of_exponents(&[0.0], &sparse, 1.0);
        assert_eq!(g[0], Complex64::new(100.0, 0.0));
    }

    #[test]
    fn focusing_recovers_the_aligned_row_exactly() {
        let params = params(32, 16);
        let spectrum = shaped_spectrum(32);
        let scene =
            TargetScene::new(vec![Target::on_grid(5, 3, &params, Complex64::new(0.9, -0.2))])
                .unwrap();
        let x = fourier_coeffs(
            &scene,
            &params,
            &spectrum,
            &PulseSchedule::uniform(16),
            &BandSelection::full(32),
        )
        .unwrap();
        let focused = doppler_focus(&x).unwrap();
        assert_eq!(focused.doppler_bins(), 16);
        for k in 0..32 {
            let ph = -TAU * k as f64 * 5.0 / 32.0;
            let want = Complex64::new(0.9, -0.2) * 16.0 * spectrum.coeff(k) * phasor(ph);
            let got = focused.psi[(3, k)];
            assert!((got - want).norm() <= 1e-9 * want.norm());
        }
    }

    #[test]
    fn off_focus_rows_hold_a_small_fraction_of_the_energy() {
        let params = params(8, 100);
        let step = TAU / 100.0;
        let scene = TargetScene::new(vec![Target::new(0.3, 4.1 * step, Complex64::new(1.0, 0.0))])
            .unwrap();
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(8),
            &PulseSchedule::uniform(100),
            &BandSelection::full(8),
        )
        .unwrap();
        let focused = doppler_focus(&x).unwrap();
        let energy = |r: usize| -> f64 { (0..8).map(|k| focused.psi[(r, k)].norm_sqr()).sum() };
        let main = energy(4);
        for r in 0..100 {
            if r != 4 {
                assert!(energy(r) <= 0.1 * main, "row {r} leaks {}", energy(r) / main);
            }
        }
    }

    #[test]
    fn focusing_zero_input_gives_zero_rows() {
        let params = params(8, 4);
        let scene = TargetScene::new(Vec::new()).unwrap();
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(8),
            &PulseSchedule::uniform(4),
            &BandSelection::full(8),
        )
        .unwrap();
        let focused = doppler_focus(&x).unwrap();
        assert!(focused.psi.iter().all(|c| *c == Complex64::new(0.0, 0.0)));
        let r = recover_focused(&x, &PulseSpectrum::flat(8), 3, &RecoverOptions::default())
            .unwrap();
        assert!(r.detections.is_empty());
    }

    #[test]
    fn single_on_grid_target_is_exact_from_few_coefficients() {
        let params = params(64, 16);
        let spectrum = shaped_spectrum(64);
        let amp = Complex64::new(0.8, -0.3);
        let scene = TargetScene::new(vec![Target::on_grid(17, 5, &params, amp)]).unwrap();
        let kappa = BandSelection::random(8, 64, 3);
        let x = fourier_coeffs(&scene, &params, &spectrum, &PulseSchedule::uniform(16), &kappa)
            .unwrap();
        let r = recover_focused(&x, &spectrum, 1, &RecoverOptions::default()).unwrap();
        assert_eq!(r.detections.len(), 1);
        assert_eq!(r.detections[0].delay_bin, 17);
        assert_eq!(r.detections[0].doppler_bin, 5);
        assert!((r.detections[0].amplitude - amp).norm() < 1e-9);
    }

    #[test]
    fn minimal_sample_counts_recover_three_targets() {
        let params = params(100, 6);
        let scene = TargetScene::new(vec![
            Target::on_grid(12, 0, &params, Complex64::new(1.0, 0.3)),
            Target::on_grid(47, 2, &params, Complex64::new(-0.7, 0.6)),
            Target::on_grid(83, 5, &params, Complex64::new(0.4, -1.1)),
        ])
        .unwrap();
        let kappa = BandSelection::random(6, 100, 21);
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(100),
            &PulseSchedule::uniform(6),
            &kappa,
        )
        .unwrap();
        let r = recover_focused(&x, &PulseSpectrum::flat(100), 3, &RecoverOptions::default())
            .unwrap();
        assert_eq!(bins_of(&r), vec![(12, 0), (47, 2), (83, 5)]);
        let total: f64 = x.coeffs.iter().map(|c| c.norm_sqr()).sum();
        assert!(r.residual_energy <= 1e-16 * total);
    }

    #[test]
    fn adjacent_delay_bins_are_separated() {
        let params = params(64, 8);
        let scene = TargetScene::new(vec![
            Target::on_grid(30, 2, &params, Complex64::new(1.0, 0.0)),
            Target::on_grid(31, 2, &params, Complex64::new(0.0, 0.9)),
        ])
        .unwrap();
        let kappa = BandSelection::random(16, 64, 5);
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(64),
            &PulseSchedule::uniform(8),
            &kappa,
        )
        .unwrap();
        let r = recover_focused(&x, &PulseSpectrum::flat(64), 2, &RecoverOptions::default())
            .unwrap();
        assert_eq!(bins_of(&r), vec![(30, 2), (31, 2)]);
    }

    #[test]
    fn detections_scale_with_the_input() {
        let params = params(64, 8);
        let scene = TargetScene::new(vec![
            Target::on_grid(9, 1, &params, Complex64::new(1.1, 0.2)),
            Target::on_grid(40, 6, &params, Complex64::new(-0.4, 0.8)),
        ])
        .unwrap();
        let kappa = BandSelection::random(12, 64, 8);
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(64),
            &PulseSchedule::uniform(8),
            &kappa,
        )
        .unwrap();
        let z = Complex64::new(0.3 * 1.1f64.cos(), 0.3 * 1.1f64.sin());
        let mut scaled = x.clone();
        scaled.coeffs.mapv_inplace(|c| c * z);
        let opts = RecoverOptions::default();
        let base = recover_focused(&x, &PulseSpectrum::flat(64), 2, &opts).unwrap();
        let more = recover_focused(&scaled, &PulseSpectrum::flat(64), 2, &opts).unwrap();
        assert_eq!(bins_of(&base), bins_of(&more));
        for (a, b) in base.detections.iter().zip(more.detections.iter()) {
            assert!((b.amplitude - a.amplitude * z).norm() < 1e-9);
        }
    }

    #[test]
    fn empty_bands_fold_the_spectrum_into_the_atoms() {
        let n = 32;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            if k % 3 != 0 {
                *c = Complex64::new(1.0 + 0.1 * k as f64, -0.2);
            }
        }
        let spectrum = PulseSpectrum::from_coeffs(coeffs).unwrap();
        let params = params(n, 8);
        let amp = Complex64::new(0.5, 0.7);
        let scene = TargetScene::new(vec![Target::on_grid(11, 6, &params, amp)]).unwrap();
        let kappa = BandSelection::consecutive(9, n).unwrap();
        assert!(spectrum.min_magnitude(Some(kappa.indices())) <= DEFAULT_WHITEN_EPS);
        let x = fourier_coeffs(&scene, &params, &spectrum, &PulseSchedule::uniform(8), &kappa)
            .unwrap();
        let r = recover_focused(&x, &spectrum, 1, &RecoverOptions::default()).unwrap();
        assert_eq!(r.detections[0].delay_bin, 11);
        assert_eq!(r.detections[0].doppler_bin, 6);
        assert!((r.detections[0].amplitude - amp).norm() < 1e-9);
    }

    #[test]
    fn non_uniform_trains_recover_with_a_fraction_of_the_pulses() {
        let params = params(50, 40);
        let scene = TargetScene::new(vec![
            Target::on_grid(7, 31, &params, Complex64::new(0.9, 0.1)),
            Target::on_grid(33, 4, &params, Complex64::new(-0.2, 1.0)),
        ])
        .unwrap();
        let schedule = PulseSchedule::non_uniform_random(8, 40, 2).unwrap();
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(50),
            &schedule,
            &BandSelection::full(50),
        )
        .unwrap();
        let r = recover_focused(&x, &PulseSpectrum::flat(50), 2, &RecoverOptions::default())
            .unwrap();
        assert_eq!(bins_of(&r), vec![(7, 31), (33, 4)]);
        for d in &r.detections {
            let want = if d.delay_bin == 7 {
                Complex64::new(0.9, 0.1)
            } else {
                Complex64::new(-0.2, 1.0)
            };
            assert!((d.amplitude - want).norm() < 1e-8);
        }
    }

    #[test]
    fn refinement_tightens_off_grid_amplitudes() {
        let params = params(64, 16);
        let amp = Complex64::new(1.0, -0.5);
        let delay = (20.0 + 0.3) / 64.0;
        let doppler = (5.0 - 0.2) * TAU / 16.0;
        let scene = TargetScene::new(vec![Target::new(delay, doppler, amp)]).unwrap();
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(64),
            &PulseSchedule::uniform(16),
            &BandSelection::full(64),
        )
        .unwrap();
        let plain =
            recover_focused(&x, &PulseSpectrum::flat(64), 1, &RecoverOptions::default()).unwrap();
        let refined = recover_focused(
            &x,
            &PulseSpectrum::flat(64),
            1,
            &RecoverOptions {
                refine: true,
                ..RecoverOptions::default()
            },
        )
        .unwrap();
        assert_eq!(plain.detections[0].delay_bin, refined.detections[0].delay_bin);
        let err_plain = (plain.detections[0].amplitude - amp).norm();
        let err_refined = (refined.detections[0].amplitude - amp).norm();
        assert!(
            err_refined < 0.2 * err_plain,
            "refined {err_refined} vs plain {err_plain}"
        );
        assert!(refined.residual_energy < plain.residual_energy);
    }

    #[test]
    fn matrix_backend_agrees_on_the_support() {
        let params = params(100, 6);
        let scene = TargetScene::new(vec![
            Target::on_grid(12, 0, &params, Complex64::new(1.0, 0.3)),
            Target::on_grid(47, 2, &params, Complex64::new(-0.7, 0.6)),
            Target::on_grid(83, 5, &params, Complex64::new(0.4, -1.1)),
        ])
        .unwrap();
        let kappa = BandSelection::random(6, 100, 21);
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(100),
            &PulseSchedule::uniform(6),
            &kappa,
        )
        .unwrap();
        let r = recover_focused(
            &x,
            &PulseSpectrum::flat(100),
            3,
            &RecoverOptions {
                backend: SolverBackend::MatrixOmp,
                ..RecoverOptions::default()
            },
        )
        .unwrap();
        assert_eq!(bins_of(&r), vec![(12, 0), (47, 2), (83, 5)]);
        for d in &r.detections {
            let want = match d.delay_bin {
                12 => Complex64::new(1.0, 0.3),
                47 => Complex64::new(-0.7, 0.6),
                _ => Complex64::new(0.4, -1.1),
            };
            assert!((d.amplitude - want).norm() < 1e-8);
        }
    }

    #[test]
    fn noise_does_not_move_a_strong_peak() {
        let params = params(64, 16);
        let scene =
            TargetScene::new(vec![Target::on_grid(22, 9, &params, Complex64::new(1.0, 0.0))])
                .unwrap();
        let kappa = BandSelection::random(16, 64, 4);
        let clean = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(64),
            &PulseSchedule::uniform(16),
            &kappa,
        )
        .unwrap();
        let noisy = add_noise(&clean, 0.0, 77).unwrap();
        let r = recover_focused(&noisy, &PulseSpectrum::flat(64), 1, &RecoverOptions::default())
            .unwrap();
        assert_eq!(r.detections[0].delay_bin, 22);
        assert_eq!(r.detections[0].doppler_bin, 9);
    }

    #[test]
    fn zero_code_reduction_matches_recover_focused_exactly() {
        let params = params(32, 10);
        let scene = TargetScene::new(vec![
            Target::on_grid(4, 7, &params, Complex64::new(0.6, -0.1)),
            Target::on_grid(19, 2, &params, Complex64::new(-0.3, 0.8)),
        ])
        .unwrap();
        let kappa = BandSelection::random(10, 32, 6);
        let spectrum = shaped_spectrum(32);
        let coded_sched = PulseSchedule::phase_coded_with(vec![0.0; 10], 1).unwrap();
        let coded = fourier_coeffs(&scene, &params, &spectrum, &coded_sched, &kappa).unwrap();
        let uniform = fourier_coeffs(
            &scene,
            &params,
            &spectrum,
            &PulseSchedule::uniform(10),
            &kappa,
        )
        .unwrap();
        let opts = RecoverOptions::default();
        let a = recover_phase_coded(&coded, &spectrum, 2, &opts).unwrap();
        let b = recover_focused(&uniform, &spectrum, 2, &opts).unwrap();
        assert_eq!(a.detections.len(), b.detections.len());
        for (da, db) in a.detections.iter().zip(b.detections.iter()) {
            assert_eq!((da.delay_bin, da.doppler_bin), (db.delay_bin, db.doppler_bin));
            assert_eq!(da.amplitude, db.amplitude);
            assert_eq!(da.ambiguity_order, Some(0));
        }
        assert_eq!(a.residual_energy, b.residual_energy);
    }

    #[test]
    fn ambiguity_order_is_recovered_at_the_pulse_bound() {
        let params = params(40, 7);
        let q = 3;
        let sched = PulseSchedule::phase_coded(7, q, 19).unwrap();
        let grid_delay = 1.0 / 40.0;
        let amp = Complex64::new(0.7, 0.4);
        let true_fold = 2;
        let scene = TargetScene::new(vec![Target::new(
            true_fold as f64 + 13.0 * grid_delay,
            4.0 * TAU / 7.0,
            amp,
        )])
        .unwrap();
        let kappa = BandSelection::random(3, 40, 9);
        let x = fourier_coeffs(&scene, &params, &PulseSpectrum::flat(40), &sched, &kappa)
            .unwrap();
        let r = recover_phase_coded(&x, &PulseSpectrum::flat(40), 1, &RecoverOptions::default())
            .unwrap();
        assert_eq!(r.detections.len(), 1);
        let d = &r.detections[0];
        assert_eq!(d.delay_bin, 13);
        assert_eq!(d.doppler_bin, 4);
        assert_eq!(d.ambiguity_order, Some(true_fold));
        assert!((d.amplitude - amp).norm() < 1e-9);
    }

    #[test]
    fn equal_folded_delays_split_by_their_code_shift() {
        let params = params(40, 12);
        let q = 3;
        let sched = PulseSchedule::phase_coded(12, q, 23).unwrap();
        let grid_delay = 1.0 / 40.0;
        let scene = TargetScene::new(vec![
            Target::new(9.0 * grid_delay, 2.0 * TAU / 12.0, Complex64::new(1.0, 0.2)),
            Target::new(2.0 + 9.0 * grid_delay, 7.0 * TAU / 12.0, Complex64::new(-0.5, 0.9)),
        ])
        .unwrap();
        let kappa = BandSelection::random(8, 40, 14);
        let x = fourier_coeffs(&scene, &params, &PulseSpectrum::flat(40), &sched, &kappa)
            .unwrap();

        let atom = |fold: usize, doppler: usize| -> Vec<Complex64> {
            let mut v = vec![Complex64::new(0.0, 0.0); x.frames() * x.k()];
            for (pulse, &code) in sched.phases().iter().enumerate() {
                let frame = fold + pulse;
                for (i, &k) in kappa.indices().iter().enumerate() {
                    let ph = -TAU * k as f64 * 9.0 / 40.0
                        - TAU * doppler as f64 * frame as f64 / 12.0
                        + code;
                    v[frame * x.k() + i] = phasor(ph);
                }
            }
            v
        };
        let a = atom(0, 2);
        let b = atom(2, 7);
        let dot: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let na: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(dot.norm() / (na * nb) < 0.9);

        let r = recover_phase_coded(&x, &PulseSpectrum::flat(40), 2, &RecoverOptions::default())
            .unwrap();
        let mut found: Vec<(usize, usize, usize)> = r
            .detections
            .iter()
            .map(|d| (d.delay_bin, d.doppler_bin, d.ambiguity_order.unwrap()))
            .collect();
        found.sort_unstable();
        assert_eq!(found, vec![(9, 2, 0), (9, 7, 2)]);
    }

    #[test]
    fn mprf_velocity_inside_the_base_interval_is_unchanged() {
        let params = RadarParams::new(1.0e-3, 1.0e5, 3.0e8, 10).unwrap();
        let v = 30.0;
        let got = mprf_resolve(
            &[(v, 1.0e3), (v, 1.5e3)],
            5,
            MprfMode::Velocity,
            &params,
            Some(1.0),
        )
        .unwrap();
        assert!((got - v).abs() < 1e-9);
    }

    #[test]
    fn mprf_velocity_unfolds_a_two_thirds_ratio() {
        let params = RadarParams::new(1.0e-3, 1.0e5, 3.0e8, 10).unwrap();
        let lambda = params.wavelength_m();
        let (prf1, prf2) = (2.0e3, 3.0e3);
        let (inc1, inc2) = (lambda * prf1 / 2.0, lambda * prf2 / 2.0);
        let v = 1.5 * inc1;
        let folded = [(v - inc1, prf1), (v - inc2, prf2)];
        let got = mprf_resolve(&folded, 3, MprfMode::Velocity, &params, Some(0.5)).unwrap();
        assert!((got - v).abs() < 1e-9, "got {got}, want {v}");

        let nudged = [(v - inc1, prf1), (v - inc2 + 0.2, prf2)];
        let got = mprf_resolve(&nudged, 3, MprfMode::Velocity, &params, Some(0.5)).unwrap();
        assert!((got - v).abs() <= 0.5);

        let hopeless = [(0.0, prf1), (inc2 / 2.0, prf2)];
        let err = mprf_resolve(&hopeless, 0, MprfMode::Velocity, &params, Some(0.01))
            .unwrap_err();
        assert!(matches!(err, Error::AmbiguityUnresolved { max_unfold: 0 }));
    }

    #[test]
    fn mprf_range_clusters_on_the_common_unfolding() {
        let params = RadarParams::new(1.0e-3, 1.0e5, 3.0e8, 10).unwrap();
        let (prf1, prf2) = (2.0e3, 2.1e3);
        let (inc1, inc2) = (
            SPEED_OF_LIGHT / (2.0 * prf1),
            SPEED_OF_LIGHT / (2.0 * prf2),
        );
        let range = 1.8e5;
        let folded = [(range - 2.0 * inc1, prf1), (range - 2.0 * inc2, prf2)];
        let got = mprf_resolve(&folded, 4, MprfMode::Range, &params, None).unwrap();
        assert!((got - range).abs() < 1e-6, "got {got}, want {range}");
        assert!(mprf_resolve(&folded[..1], 4, MprfMode::Range, &params, None).is_err());
    }
}

//! Transmit pulse spectra, probing sequences, and time-frequency shift
//! dictionaries.
//!
//! The recovery pipelines only ever see a pulse through its Fourier
//! coefficients `H[k]`, wrapped here as [`PulseSpectrum`].  The sequence
//! generators ([`alltop_sequence`], [`golay_pair`]) produce deterministic
//! probing waveforms with known correlation structure, and
//! [`build_tf_dictionary`] expands a pulse into the full set of its cyclic
//! time shifts and frequency modulations for dictionary-based recovery.

use ndarray::Array2;
use num_complex::Complex64;

use crate::cs::SensingOperator;
use crate::dft::DftPlan;
use crate::{Error, Result};

/// Largest sequence length for which [`build_tf_dictionary`] materializes the
/// dense atom matrix; longer pulses go through [`TfOperator`].
pub const MAX_DENSE_TF_LEN: usize = 64;

/// Fourier coefficients `H[k]`, `k = 0..N-1`, of one transmitted pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpectrum {
    coeffs: Vec<Complex64>,
}

impl PulseSpectrum {
    /// All-ones spectrum over `n` bins: the pulse is a discrete impulse.
    pub fn flat(n: usize) -> PulseSpectrum {
        PulseSpectrum {
            coeffs: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Wraps externally supplied coefficients.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<PulseSpectrum> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParam("pulse spectrum must be nonempty".into()));
        }
        Ok(PulseSpectrum { coeffs })
    }

    /// Spectrum of the time-domain sequence `h[n]`: its forward DFT.
    pub fn from_time_samples(samples: &[Complex64]) -> Result<PulseSpectrum> {
        if samples.is_empty() {
            return Err(Error::InvalidParam("pulse must be nonempty".into()));
        }
        let plan = DftPlan::new(samples.len());
        let mut buf = samples.to_vec();
        plan.forward(&mut buf);
        Ok(PulseSpectrum { coeffs: buf })
    }

    /// Number of coefficient bins `N`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient at bin `k`.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Spectral energy `sum_k |H[k]|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Smallest coefficient magnitude over a bin subset (all bins when
    /// `kappa` is `None`).  Recovery uses this to decide whether spectral
    /// whitening is safe.
    pub fn min_magnitude(&self, kappa: Option<&[usize]>) -> f64 {
        match kappa {
            Some(idx) => idx
                .iter()
                .map(|&k| self.coeffs[k].norm())
                .fold(f64::INFINITY, f64::min),
            None => self
                .coeffs
                .iter()
                .map(|c| c.norm())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Nyquist-rate time samples `h[n] = (1/N) sum_k H[k] exp(j 2 pi k n / N)`.
    ///
    /// A flat spectrum yields a unit impulse at sample 0.
    pub fn time_samples(&self) -> Vec<Complex64> {
        let n = self.coeffs.len();
        let plan = DftPlan::new(n);
        let mut buf = self.coeffs.clone();
        plan.inverse(&mut buf);
        let scale = 1.0 / n as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Cubic-phase probing sequence `h[m] = n^{-1/2} exp(2 pi j m^3 / n)` for
/// prime `n >= 5`.
///
/// In the time-frequency dictionary built from this sequence, atoms with
/// different time shifts correlate with magnitude exactly `1/sqrt(n)` and
/// atoms sharing a shift are orthogonal, so the dictionary coherence is
/// `1/sqrt(n)`, the best possible for a full shift/modulation set.
pub fn alltop_sequence(n: usize) -> Result<Vec<Complex64>> {
    if !is_prime(n) || n < 5 {
        return Err(Error::InvalidParam(format!(
            "cubic-phase sequence needs a prime length >= 5, got {n}"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|m| {
            // Reduce m^3 mod n in integers first so the phase stays exact
            // for large n.
            let m3 = (m * m % n) * m % n;
            let phase = 2.0 * std::f64::consts::PI * m3 as f64 / n as f64;
            Complex64::new(scale * phase.cos(), scale * phase.sin())
        })
        .collect())
}

/// Complementary sequence pair of power-of-two length `n >= 2`, built by
/// recursive doubling `(a, b) -> (a|b, a|-b)` from the seed `(1,1), (1,-1)`.
///
/// The aperiodic autocorrelations of the pair cancel at every nonzero lag:
/// `C_a[k] + C_b[k] = 2 n delta[k]`, exactly, in integer arithmetic.
pub fn golay_pair(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidParam(format!(
            "complementary pair length must be a power of two >= 2, got {n}"
        )));
    }
    let mut a = vec![1.0, 1.0];
    let mut b = vec![1.0, -1.0];
    while a.len() < n {
        let mut next_a = a.clone();
        next_a.extend_from_slice(&b);
        let mut next_b = a;
        next_b.extend(b.iter().map(|x| -x));
        a = next_a;
        b = next_b;
    }
    Ok((a, b))
}

/// Aperiodic autocorrelation `C_x[k] = sum_n x[n] x[n+k]` for lag `k`,
/// `|k| < len`.
pub fn aperiodic_autocorr(x: &[f64], lag: i64) -> f64 {
    let n = x.len() as i64;
    let k = lag.abs();
    if k >= n {
        return 0.0;
    }
    (0..n - k).map(|i| x[i as usize] * x[(i + k) as usize]).sum()
}

/// Dense time-frequency shift dictionary of a pulse: all `n^2` atoms
/// `atom[d*n + m][t] = exp(2 pi j m t / n) * f[(t - d) mod n]`, with cyclic
/// shift `d` and modulation `m`.
#[derive(Debug, Clone)]
pub struct TfDictionary {
    /// `n x n^2` atom matrix, one atom per column.
    pub atoms: Array2<Complex64>,
    /// The generating pulse.
    pub pulse: Vec<Complex64>,
}

/// Builds the dense dictionary for pulses up to [`MAX_DENSE_TF_LEN`] samples.
/// Longer pulses must use [`TfOperator`], which applies the same dictionary
/// implicitly at FFT cost.
pub fn build_tf_dictionary(pulse: &[Complex64]) -> Result<TfDictionary> {
    let n = pulse.len();
    if n == 0 {
        return Err(Error::InvalidParam("pulse must be nonempty".into()));
    }
    if n > MAX_DENSE_TF_LEN {
        return Err(Error::InvalidParam(format!(
            "dense dictionary limited to length {MAX_DENSE_TF_LEN}; use TfOperator for length {n}"
        )));
    }
    let mut atoms = Array2::zeros((n, n * n));
    for d in 0..n {
        for m in 0..n {
            let col = d * n + m;
            for t in 0..n {
                let phase = 2.0 * std::f64::consts::PI * (m * t % n) as f64 / n as f64;
                let shifted = pulse[(t + n - d) % n];
                atoms[(t, col)] = Complex64::new(phase.cos(), phase.sin()) * shifted;
            }
        }
    }
    Ok(TfDictionary {
        atoms,
        pulse: pulse.to_vec(),
    })
}

/// Implicit time-frequency dictionary: applies the `n x n^2` atom matrix and
/// its adjoint at FFT cost without materializing it.
pub struct TfOperator {
    pulse: Vec<Complex64>,
    plan: DftPlan,
}

impl TfOperator {
    pub fn new(pulse: Vec<Complex64>) -> Result<TfOperator> {
        if pulse.is_empty() {
            return Err(Error::InvalidParam("pulse must be nonempty".into()));
        }
        let plan = DftPlan::new(pulse.len());
        Ok(TfOperator { pulse, plan })
    }
}

impl SensingOperator for TfOperator {
    fn rows(&self) -> usize {
        self.pulse.len()
    }

    fn cols(&self) -> usize {
        self.pulse.len() * self.pulse.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.pulse.len();
        assert_eq!(x.len(), n * n);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        let mut block = vec![Complex64::new(0.0, 0.0); n];
        for d in 0..n {
            block.copy_from_slice(&x[d * n..(d + 1) * n]);
            self.plan.inverse(&mut block);
            for t in 0..n {
                out[t] += block[t] * self.pulse[(t + n - d) % n];
            }
        }
        out
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.pulse.len();
        assert_eq!(y.len(), n);
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        let mut block = vec![Complex64::new(0.0, 0.0); n];
        for d in 0..n {
            for t in 0..n {
                block[t] = y[t] * self.pulse[(t + n - d) % n].conj();
            }
            self.plan.forward(&mut block);
            out[d * n..(d + 1) * n].copy_from_slice(&block);
        }
        out
    }

    fn column_norms(&self) -> Vec<f64> {
        // Shifts and modulations preserve the pulse norm.
        let norm = self.pulse.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        vec![norm; self.cols()]
    }
}

/// Largest normalized inner product between distinct columns.
///
/// Errors on matrices with fewer than two columns or with an all-zero
/// column, for which coherence is undefined.
pub fn coherence(atoms: &Array2<Complex64>) -> Result<f64> {
    let cols = atoms.ncols();
    if cols < 2 {
        return Err(Error::InvalidParam("coherence needs at least two atoms".into()));
    }
    let norms: Vec<f64> = (0..cols)
        .map(|j| atoms.column(j).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::InvalidParam("coherence undefined for a zero atom".into()));
    }
    let mut best = 0.0f64;
    for i in 0..cols {
        for j in (i + 1)..cols {
            let dot: Complex64 = atoms
                .column(i)
                .iter()
                .zip(atoms.column(j).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            best = best.max(dot.norm() / (norms[i] * norms[j]));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_spectrum_is_impulse_in_time() {
        let s = PulseSpectrum::flat(16);
        let h = s.time_samples();
        assert!((h[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for v in &h[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_round_trips_through_time_samples() {
        let coeffs: Vec<Complex64> = (0..12)
            .map(|k| Complex64::new((k as f64 * 0.7).cos(), (k as f64 * 1.3).sin()))
            .collect();
        let s = PulseSpectrum::from_coeffs(coeffs.clone()).unwrap();
        let back = PulseSpectrum::from_time_samples(&s.time_samples()).unwrap();
        for (a, b) in back.coeffs().iter().zip(&coeffs) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn cubic_phase_sequence_rejects_bad_lengths() {
        assert!(alltop_sequence(4).is_err());
        assert!(alltop_sequence(3).is_err());
        assert!(alltop_sequence(9).is_err());
        assert!(alltop_sequence(5).is_ok());
        assert!(alltop_sequence(13).is_ok());
    }

    #[test]
    fn cubic_phase_sequence_has_unit_norm() {
        for n in [5, 7, 11] {
            let h = alltop_sequence(n).unwrap();
            let norm: f64 = h.iter().map(|c| c.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    /// Oracle: brute-force inner products over all atom pairs of the
    /// length-5 dictionary.  Cross-shift pairs correlate at exactly
    /// 1/sqrt(5); same-shift pairs are orthogonal.
    #[test]
    fn length5_dictionary_coherence_is_inverse_sqrt5() {
        let h = alltop_sequence(5).unwrap();
        let dict = build_tf_dictionary(&h).unwrap();
        let expect = 1.0 / 5.0f64.sqrt();
        let atoms = &dict.atoms;
        for i in 0..25 {
            for j in (i + 1)..25 {
                let dot: Complex64 = atoms
                    .column(i)
                    .iter()
                    .zip(atoms.column(j).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let want = if i / 5 == j / 5 { 0.0 } else { expect };
                assert!(
                    (dot.norm() - want).abs() < 1e-12,
                    "atoms {i},{j}: |corr| = {} != {want}",
                    dot.norm()
                );
            }
        }
        assert!((coherence(atoms).unwrap() - expect).abs() < 1e-12);
    }

    /// Oracle: direct convolution sums for the length-8 pair.
    #[test]
    fn length8_pair_passes_complementarity_by_direct_convolution() {
        let (a, b) = golay_pair(8).unwrap();
        for lag in -7i64..=7 {
            let sum = aperiodic_autocorr(&a, lag) + aperiodic_autocorr(&b, lag);
            let expect = if lag == 0 { 16.0 } else { 0.0 };
            assert_eq!(sum, expect, "lag {lag}");
        }
    }

    #[test]
    fn complementary_pairs_exact_for_all_power_of_two_lengths() {
        let mut n = 2;
        while n <= 64 {
            let (a, b) = golay_pair(n).unwrap();
            assert_eq!(a.len(), n);
            assert_eq!(b.len(), n);
            assert!(a.iter().chain(b.iter()).all(|&x| x == 1.0 || x == -1.0));
            for lag in -(n as i64 - 1)..=(n as i64 - 1) {
                let sum = aperiodic_autocorr(&a, lag) + aperiodic_autocorr(&b, lag);
                let expect = if lag == 0 { 2.0 * n as f64 } else { 0.0 };
                assert_eq!(sum, expect, "n {n} lag {lag}");
            }
            n *= 2;
        }
    }

    #[test]
    fn complementary_pair_rejects_other_lengths() {
        assert!(golay_pair(0).is_err());
        assert!(golay_pair(1).is_err());
        assert!(golay_pair(3).is_err());
        assert!(golay_pair(24).is_err());
    }

    #[test]
    fn dictionary_atoms_preserve_pulse_norm() {
        let h = alltop_sequence(7).unwrap();
        let dict = build_tf_dictionary(&h).unwrap();
        assert_eq!(dict.atoms.dim(), (7, 49));
        for j in 0..49 {
            let norm: f64 = dict.atoms.column(j).iter().map(|c| c.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_dictionary_refuses_long_pulses() {
        let pulse = vec![Complex64::new(1.0, 0.0); 65];
        assert!(build_tf_dictionary(&pulse).is_err());
        assert!(TfOperator::new(pulse).is_ok());
    }

    #[test]
    fn operator_matches_dense_dictionary() {
        let h = alltop_sequence(13).unwrap();
        let dict = build_tf_dictionary(&h).unwrap();
        let op = TfOperator::new(h).unwrap();
        let n = 13;
        let x: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.11).sin(), (i as f64 * 0.07).cos()))
            .collect();
        let fast = op.apply(&x);
        for t in 0..n {
            let direct: Complex64 = (0..n * n).map(|i| dict.atoms[(t, i)] * x[i]).sum();
            assert!((fast[t] - direct).norm() < 1e-9);
        }
        let y: Vec<Complex64> = (0..n)
            .map(|t| Complex64::new((t as f64 * 0.23).cos(), -(t as f64 * 0.31).sin()))
            .collect();
        let fast_adj = op.adjoint(&y);
        for i in 0..n * n {
            let direct: Complex64 = (0..n).map(|t| dict.atoms[(t, i)].conj() * y[t]).sum();
            assert!((fast_adj[i] - direct).norm() < 1e-9);
        }
    }

    #[test]
    fn coherence_of_orthonormal_basis_is_zero() {
        let mut atoms = Array2::zeros((4, 4));
        for i in 0..4 {
            atoms[(i, i)] = Complex64::new(1.0, 0.0);
        }
        assert!(coherence(&atoms).unwrap() < 1e-15);
    }

    #[test]
    fn coherence_rejects_degenerate_input() {
        let one = Array2::from_shape_vec((3, 1), vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        assert!(coherence(&one).is_err());
        let mut with_zero = Array2::zeros((3, 2));
        with_zero[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!(coherence(&with_zero).is_err());
    }
}

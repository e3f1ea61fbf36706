//! Thin wrappers around rustfft used by the synthesis and recovery paths.
//!
//! All transforms here are unnormalized: `forward` computes
//! `X[k] = sum_n x[n] exp(-j 2 pi k n / N)` and `inverse` computes
//! `x[n] = sum_k X[k] exp(+j 2 pi k n / N)`.  Callers apply their own
//! normalization so that scale factors stay visible at the call site.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Reusable plan pair for one transform length.
pub(crate) struct DftPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl DftPlan {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        DftPlan {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// In-place unnormalized forward DFT.
    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// In-place unnormalized inverse DFT (positive exponent, no 1/N).
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
    }
}

/// Scatters `values[i]` to `out[indices[i]]` on a zeroed buffer of length
/// `plan.len()`, then applies the unnormalized inverse DFT.  This evaluates
/// `sum_i values[i] exp(+j 2 pi indices[i] n / N)` for every `n` at FFT cost.
pub(crate) fn inverse_from_sparse(
    plan: &DftPlan,
    indices: &[usize],
    values: &[Complex64],
    out: &mut Vec<Complex64>,
) {
    out.clear();
    out.resize(plan.len(), Complex64::new(0.0, 0.0));
    for (&idx, &v) in indices.iter().zip(values) {
        out[idx] += v;
    }
    plan.inverse(out);
}

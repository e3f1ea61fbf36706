//! Greedy and thresholding solvers for sparse linear inverse problems.
//!
//! Every solver works against the [`SensingOperator`] trait, so structured
//! measurement operators (partial Fourier, shift/modulation dictionaries)
//! never have to materialize a dense matrix.  [`omp`] selects atoms one at a
//! time and refits by least squares on the growing support, [`iht`] iterates
//! gradient steps followed by [`hard_threshold`], and [`omp_matrix`] runs the
//! greedy selection jointly over row and column factors of a matrix-valued
//! unknown.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dft::{inverse_from_sparse, DftPlan};
use crate::{Error, Result};

/// Solvers stop once the residual norm falls below this factor times the
/// observation norm.
pub const DEFAULT_TOL_FACTOR: f64 = 1e-9;

/// A linear measurement operator `A` acting on complex vectors.
pub trait SensingOperator {
    /// Number of measurements (length of `A x`).
    fn rows(&self) -> usize;

    /// Number of unknowns (length of `x`).
    fn cols(&self) -> usize;

    /// Computes `A x`.
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;

    /// Computes `A^H y`.
    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;

    /// Materializes column `j`, used to refit on small supports.
    fn column(&self, j: usize) -> Vec<Complex64> {
        let mut unit = vec![Complex64::new(0.0, 0.0); self.cols()];
        unit[j] = Complex64::new(1.0, 0.0);
        self.apply(&unit)
    }

    /// Euclidean norms of all columns, used to normalize atom selection.
    fn column_norms(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| l2(&self.column(j))).collect()
    }
}

/// Dense operator backed by an explicit matrix.
#[derive(Debug, Clone)]
pub struct DenseSensing {
    matrix: Array2<Complex64>,
}

impl DenseSensing {
    pub fn new(matrix: Array2<Complex64>) -> DenseSensing {
        DenseSensing { matrix }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }
}

impl SensingOperator for DenseSensing {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols());
        self.matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows());
        self.matrix
            .columns()
            .into_iter()
            .map(|col| col.iter().zip(y).map(|(a, b)| a.conj() * b).sum())
            .collect()
    }

    fn column(&self, j: usize) -> Vec<Complex64> {
        self.matrix.column(j).to_vec()
    }

    fn column_norms(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| l2(&self.matrix.column(j).to_vec())).collect()
    }
}

/// Row-subsampled DFT operator: `(A x)[i] = scale * sum_s x[s] exp(-j 2 pi
/// rows[i] s / n)`.  Applies via one full FFT per call, so the dense `K x n`
/// matrix never exists.
pub struct PartialFourierSensing {
    n: usize,
    row_indices: Vec<usize>,
    scale: Complex64,
    plan: DftPlan,
}

impl PartialFourierSensing {
    pub fn new(n: usize, row_indices: Vec<usize>, scale: Complex64) -> Result<PartialFourierSensing> {
        if row_indices.iter().any(|&k| k >= n) {
            return Err(Error::InvalidParam("row index out of range".into()));
        }
        Ok(PartialFourierSensing {
            n,
            row_indices,
            scale,
            plan: DftPlan::new(n),
        })
    }
}

impl SensingOperator for PartialFourierSensing {
    fn rows(&self) -> usize {
        self.row_indices.len()
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut buf = x.to_vec();
        self.plan.forward(&mut buf);
        self.row_indices.iter().map(|&k| buf[k] * self.scale).collect()
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.row_indices.len());
        let mut out = Vec::new();
        inverse_from_sparse(&self.plan, &self.row_indices, y, &mut out);
        let s = self.scale.conj();
        for v in &mut out {
            *v *= s;
        }
        out
    }

    fn column(&self, j: usize) -> Vec<Complex64> {
        self.row_indices
            .iter()
            .map(|&k| {
                let ph = -2.0 * std::f64::consts::PI * ((k * j) % self.n) as f64 / self.n as f64;
                self.scale * Complex64::new(ph.cos(), ph.sin())
            })
            .collect()
    }

    fn column_norms(&self) -> Vec<f64> {
        vec![self.scale.norm() * (self.row_indices.len() as f64).sqrt(); self.n]
    }
}

/// One sparse recovery instance: find `x` with at most `sparsity` nonzeros
/// such that `A x` matches `observation`.
pub struct SparseProblem<'a> {
    pub sensing: &'a dyn SensingOperator,
    pub observation: &'a [Complex64],
    pub sparsity: usize,
}

/// Solution of a vector-valued sparse problem.
#[derive(Debug, Clone, Default)]
pub struct SparseSolution {
    /// Selected atom indices, in selection order.
    pub support: Vec<usize>,
    /// Coefficients matching `support`.
    pub values: Vec<Complex64>,
    /// Euclidean norm of the final residual.
    pub residual_norm: f64,
    /// Number of iterations performed.
    pub iterations: usize,
}

/// Solution of a matrix-valued sparse problem; support entries are
/// `(row_factor_index, column_factor_index)` pairs.
#[derive(Debug, Clone, Default)]
pub struct MatrixSparseSolution {
    pub support: Vec<(usize, usize)>,
    pub values: Vec<Complex64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

pub(crate) fn l2(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves the dense linear system `a x = b` by Gaussian elimination with
/// partial pivoting.  Returns `None` when a pivot collapses, which the
/// callers report as a rank-deficient support.
pub(crate) fn solve_linear_system(
    mut a: Vec<Vec<Complex64>>,
    mut b: Vec<Complex64>,
) -> Option<Vec<Complex64>> {
    let n = a.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        if a[pivot_row][col].norm() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                let sub = factor * a[col][k];
                a[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Least squares of `z` on the given columns via normal equations.  Returns
/// the coefficients and the residual vector, or `None` if the Gram matrix is
/// singular.
pub(crate) fn lstsq_columns(
    columns: &[Vec<Complex64>],
    z: &[Complex64],
) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
    let t = columns.len();
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); t]; t];
    let mut rhs = vec![Complex64::new(0.0, 0.0); t];
    for (i, ci) in columns.iter().enumerate() {
        rhs[i] = ci.iter().zip(z).map(|(a, b)| a.conj() * b).sum();
        for (j, cj) in columns.iter().enumerate() {
            gram[i][j] = ci.iter().zip(cj).map(|(a, b)| a.conj() * b).sum();
        }
    }
    let values = solve_linear_system(gram, rhs)?;
    let mut residual = z.to_vec();
    for (v, col) in values.iter().zip(columns) {
        for (r, c) in residual.iter_mut().zip(col) {
            *r -= v * c;
        }
    }
    Some((values, residual))
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
pub(crate) fn hermitian_eigenvalues(mut h: Vec<Vec<Complex64>>) -> Vec<f64> {
    let n = h.len();
    for _ in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for p in 0..n {
            diag += h[p][p].norm_sqr();
            for q in (p + 1)..n {
                off += h[p][q].norm_sqr();
            }
        }
        if off <= 1e-28 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let hpq = h[p][q];
                let mag = hpq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Phase-rotate column/row q so the (p, q) entry is real,
                // then apply the standard symmetric Jacobi rotation.
                let phi = hpq / mag;
                for i in 0..n {
                    h[i][q] *= phi.conj();
                }
                for j in 0..n {
                    h[q][j] = phi * h[q][j];
                }
                let app = h[p][p].re;
                let aqq = h[q][q].re;
                let apq = h[p][q].re;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let hip = h[i][p];
                    let hiq = h[i][q];
                    h[i][p] = c * hip - s * hiq;
                    h[i][q] = s * hip + c * hiq;
                }
                for j in 0..n {
                    let hpj = h[p][j];
                    let hqj = h[q][j];
                    h[p][j] = c * hpj - s * hqj;
                    h[q][j] = s * hpj + c * hqj;
                }
            }
        }
    }
    (0..n).map(|i| h[i][i].re).collect()
}

/// Spectral condition number of the matrix whose columns are given, computed
/// from the eigenvalues of its Gram matrix.  Returns `f64::INFINITY` for a
/// numerically singular column set.
pub fn condition_number(columns: &[Vec<Complex64>]) -> f64 {
    let t = columns.len();
    if t == 0 {
        return 1.0;
    }
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); t]; t];
    for (i, ci) in columns.iter().enumerate() {
        for (j, cj) in columns.iter().enumerate() {
            gram[i][j] = ci.iter().zip(cj).map(|(a, b)| a.conj() * b).sum();
        }
    }
    let eig = hermitian_eigenvalues(gram);
    let max = eig.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= max * 1e-30 || min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

/// Orthogonal matching pursuit.
///
/// Each iteration selects the atom with the largest norm-adjusted
/// correlation against the residual (ties go to the lower index, and atoms
/// are never reselected), then refits all coefficients by least squares on
/// the support, which makes the residual norm non-increasing.  Stops early
/// once the residual falls below `1e-9` times the observation norm.
pub fn omp(problem: &SparseProblem) -> Result<SparseSolution> {
    let op = problem.sensing;
    let z = problem.observation;
    if z.len() != op.rows() {
        return Err(Error::ShapeMismatch(format!(
            "observation length {} vs operator rows {}",
            z.len(),
            op.rows()
        )));
    }
    if problem.sparsity > op.cols() {
        return Err(Error::InvalidParam(format!(
            "sparsity {} exceeds atom count {}",
            problem.sparsity,
            op.cols()
        )));
    }
    let tol = DEFAULT_TOL_FACTOR * l2(z);
    let norms = op.column_norms();
    let mut support: Vec<usize> = Vec::new();
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    let mut values: Vec<Complex64> = Vec::new();
    let mut residual = z.to_vec();
    let mut iterations = 0;
    while support.len() < problem.sparsity {
        if l2(&residual) <= tol {
            break;
        }
        let corr = op.adjoint(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if norms[j] == 0.0 || support.contains(&j) {
                continue;
            }
            let score = c.norm() / norms[j];
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        columns.push(op.column(j));
        match lstsq_columns(&columns, z) {
            Some((v, r)) => {
                values = v;
                residual = r;
                iterations += 1;
            }
            None => {
                support.pop();
                columns.pop();
                return Err(Error::RankDeficient {
                    partial: Box::new(SparseSolution {
                        support,
                        values,
                        residual_norm: l2(&residual),
                        iterations,
                    }),
                });
            }
        }
    }
    Ok(SparseSolution {
        support,
        values,
        residual_norm: l2(&residual),
        iterations,
    })
}

/// Squared operator norm `||A||^2` estimated by 20 power iterations on
/// `A^H A` from a fixed-seed start vector.
fn operator_norm_sq(op: &dyn SensingOperator) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let mut v: Vec<Complex64> = (0..op.cols())
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm = l2(&v);
    if norm == 0.0 {
        return 0.0;
    }
    for x in &mut v {
        *x /= norm;
    }
    let mut lambda = 0.0;
    for _ in 0..20 {
        let w = op.adjoint(&op.apply(&v));
        lambda = l2(&w);
        if lambda == 0.0 {
            return 0.0;
        }
        v = w;
        for x in &mut v {
            *x /= lambda;
        }
    }
    lambda
}

/// Iterative hard thresholding: `x <- T_k(x + mu A^H (z - A x))`.
///
/// `step` overrides the default `mu = 0.9 / ||A||^2` (power-iteration
/// estimate).  Iteration aborts with [`Error::Diverged`] if the residual
/// norm ever exceeds ten times its initial value.
pub fn iht(problem: &SparseProblem, step: Option<f64>, max_iters: usize) -> Result<SparseSolution> {
    let op = problem.sensing;
    let z = problem.observation;
    if z.len() != op.rows() {
        return Err(Error::ShapeMismatch(format!(
            "observation length {} vs operator rows {}",
            z.len(),
            op.rows()
        )));
    }
    let mu = match step {
        Some(s) => {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParam(format!("step size must be positive, got {s}")));
            }
            s
        }
        None => {
            let nsq = operator_norm_sq(op);
            if nsq == 0.0 {
                return Err(Error::InvalidParam("operator norm is zero".into()));
            }
            0.9 / nsq
        }
    };
    let tol = DEFAULT_TOL_FACTOR * l2(z);
    let initial = l2(z);
    let mut x = vec![Complex64::new(0.0, 0.0); op.cols()];
    let mut residual = z.to_vec();
    let mut iterations = 0;
    for _ in 0..max_iters {
        if l2(&residual) <= tol {
            break;
        }
        let grad = op.adjoint(&residual);
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi += mu * g;
        }
        x = hard_threshold(&x, problem.sparsity);
        let ax = op.apply(&x);
        residual = z.iter().zip(&ax).map(|(a, b)| a - b).collect();
        iterations += 1;
        let rnorm = l2(&residual);
        if initial > 0.0 && rnorm > 10.0 * initial {
            return Err(Error::Diverged {
                ratio: rnorm / initial,
            });
        }
    }
    let support: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(i, _)| i)
        .collect();
    let values = support.iter().map(|&i| x[i]).collect();
    Ok(SparseSolution {
        support,
        values,
        residual_norm: l2(&residual),
        iterations,
    })
}

/// Keeps the `k` largest-magnitude entries and zeroes the rest.  Magnitude
/// ties keep the lower index.  Idempotent: applying it twice with the same
/// `k` changes nothing.
pub fn hard_threshold(x: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[b].norm()
            .partial_cmp(&x[a].norm())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for &i in idx.iter().take(k) {
        out[i] = x[i];
    }
    out
}

/// Greedy recovery of a sparse matrix `S` from `X = A S B^T`.
///
/// Each iteration picks the factor pair `(i, j)` maximizing the normalized
/// correlation `|a_i^H X conj(b_j)|`, then refits all selected pairs jointly
/// by least squares on the rank-one atoms `a_i b_j^T`.  On a rank-deficient
/// support the attached partial solution flattens each pair to
/// `i * b.ncols() + j`.
pub fn omp_matrix(
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
    x: &Array2<Complex64>,
    sparsity: usize,
) -> Result<MatrixSparseSolution> {
    if x.nrows() != a.nrows() || x.ncols() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "observation {:?} vs factors {}x{} left, {}x{} right",
            x.dim(),
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if sparsity > a.ncols() * b.ncols() {
        return Err(Error::InvalidParam("sparsity exceeds atom count".into()));
    }
    let a_norms: Vec<f64> = (0..a.ncols()).map(|j| l2(&a.column(j).to_vec())).collect();
    let b_norms: Vec<f64> = (0..b.ncols()).map(|j| l2(&b.column(j).to_vec())).collect();
    let frob = |m: &Array2<Complex64>| m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let tol = DEFAULT_TOL_FACTOR * frob(x);
    let mut support: Vec<(usize, usize)> = Vec::new();
    let mut values: Vec<Complex64> = Vec::new();
    let mut residual = x.clone();
    let mut iterations = 0;
    while support.len() < sparsity {
        if frob(&residual) <= tol {
            break;
        }
        // C[i][j] = a_i^H R conj(b_j), computed as (A^H R) conj(B).
        let ahr = {
            let mut m = Array2::zeros((a.ncols(), x.ncols()));
            for i in 0..a.ncols() {
                for p in 0..x.ncols() {
                    m[(i, p)] = (0..a.nrows())
                        .map(|r| a[(r, i)].conj() * residual[(r, p)])
                        .sum::<Complex64>();
                }
            }
            m
        };
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..a.ncols() {
            if a_norms[i] == 0.0 {
                continue;
            }
            for j in 0..b.ncols() {
                if b_norms[j] == 0.0 || support.contains(&(i, j)) {
                    continue;
                }
                let corr = (0..x.ncols())
                    .map(|p| ahr[(i, p)] * b[(p, j)].conj())
                    .sum::<Complex64>();
                let score = corr.norm() / (a_norms[i] * b_norms[j]);
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((i, j, score));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        support.push((i, j));
        // Joint least squares over the rank-one atoms selected so far:
        // Frobenius inner products factor as <a_v, a_u> * <b_v, b_u>.
        let t = support.len();
        let mut gram = vec![vec![Complex64::new(0.0, 0.0); t]; t];
        let mut rhs = vec![Complex64::new(0.0, 0.0); t];
        for (u, &(iu, ju)) in support.iter().enumerate() {
            rhs[u] = (0..a.nrows())
                .map(|r| {
                    let ar = a[(r, iu)].conj();
                    (0..x.ncols()).map(|p| ar * x[(r, p)] * b[(p, ju)].conj()).sum::<Complex64>()
                })
                .sum();
            for (v, &(iv, jv)) in support.iter().enumerate() {
                let da: Complex64 = (0..a.nrows()).map(|r| a[(r, iu)].conj() * a[(r, iv)]).sum();
                let db: Complex64 = (0..b.nrows()).map(|p| b[(p, ju)].conj() * b[(p, jv)]).sum();
                gram[u][v] = da * db;
            }
        }
        match solve_linear_system(gram, rhs) {
            Some(v) => {
                values = v;
                iterations += 1;
            }
            None => {
                support.pop();
                return Err(Error::RankDeficient {
                    partial: Box::new(SparseSolution {
                        support: support.iter().map(|&(i, j)| i * b.ncols() + j).collect(),
                        values,
                        residual_norm: frob(&residual),
                        iterations,
                    }),
                });
            }
        }
        residual = x.clone();
        for (&(iu, ju), &alpha) in support.iter().zip(&values) {
            for r in 0..x.nrows() {
                for p in 0..x.ncols() {
                    let sub = alpha * a[(r, iu)] * b[(p, ju)];
                    residual[(r, p)] -= sub;
                }
            }
        }
    }
    Ok(MatrixSparseSolution {
        support,
        values,
        residual_norm: frob(&residual),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rng_matrix(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn hard_threshold_keeps_largest_magnitudes() {
        let x = vec![c(3.0, 0.0), c(1.0, 0.0), c(4.0, 0.0), c(1.0, 0.0), c(5.0, 0.0)];
        let out = hard_threshold(&x, 2);
        assert_eq!(out, vec![c(0.0, 0.0), c(0.0, 0.0), c(4.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)]);
    }

    #[test]
    fn hard_threshold_ties_keep_lower_index() {
        let x = vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        let out = hard_threshold(&x, 1);
        assert_eq!(out, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn hard_threshold_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<Complex64> =
                (0..12).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            let once = hard_threshold(&x, 4);
            let twice = hard_threshold(&once, 4);
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn linear_solver_matches_known_system() {
        // [1 1; 1 -1] x = [3; 1] has solution [2; 1].
        let a = vec![vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(-1.0, 0.0)]];
        let x = solve_linear_system(a, vec![c(3.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn linear_solver_detects_singularity() {
        let a = vec![vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]];
        assert!(solve_linear_system(a, vec![c(1.0, 0.0), c(1.0, 0.0)]).is_none());
    }

    #[test]
    fn eigenvalues_match_closed_form_2x2() {
        // Hermitian [[2, i], [-i, 3]] has eigenvalues (5 +- sqrt(5)) / 2.
        let h = vec![vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(3.0, 0.0)]];
        let mut eig = hermitian_eigenvalues(h);
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = (5.0 - 5.0f64.sqrt()) / 2.0;
        let hi = (5.0 + 5.0f64.sqrt()) / 2.0;
        assert!((eig[0] - lo).abs() < 1e-10);
        assert!((eig[1] - hi).abs() < 1e-10);
    }

    #[test]
    fn condition_number_of_orthonormal_columns_is_one() {
        let cols = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]];
        assert!((condition_number(&cols) - 1.0).abs() < 1e-10);
        let dup = vec![vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]];
        assert!(condition_number(&dup).is_infinite());
    }

    #[test]
    fn omp_on_identity_recovers_any_support() {
        let eye = Array2::from_shape_fn((8, 8), |(i, j)| {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let op = DenseSensing::new(eye);
        let mut z = vec![c(0.0, 0.0); 8];
        z[1] = c(2.0, -1.0);
        z[4] = c(-0.5, 0.25);
        z[6] = c(0.0, 3.0);
        let sol = omp(&SparseProblem {
            sensing: &op,
            observation: &z,
            sparsity: 3,
        })
        .unwrap();
        let mut support = sol.support.clone();
        support.sort_unstable();
        assert_eq!(support, vec![1, 4, 6]);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn omp_zero_observation_returns_empty() {
        let op = DenseSensing::new(rng_matrix(6, 10, 1));
        let z = vec![c(0.0, 0.0); 6];
        let sol = omp(&SparseProblem {
            sensing: &op,
            observation: &z,
            sparsity: 3,
        })
        .unwrap();
        assert!(sol.support.is_empty());
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn omp_residual_is_monotone() {
        let op = DenseSensing::new(rng_matrix(20, 40, 7));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z: Vec<Complex64> =
            (0..20).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let z_norm = l2(&z);
        let mut prev = z_norm;
        for k in 1..=10 {
            let sol = omp(&SparseProblem {
                sensing: &op,
                observation: &z,
                sparsity: k,
            })
            .unwrap();
            assert!(sol.residual_norm <= prev + 1e-12 * z_norm, "k={k}");
            prev = sol.residual_norm;
        }
    }

    #[test]
    fn omp_rank_deficient_support_reports_partial() {
        // Two identical columns; the second pick lands on the duplicate and
        // the Gram matrix collapses.
        let mut m = Array2::zeros((4, 2));
        m[(0, 0)] = c(1.0, 0.0);
        m[(0, 1)] = c(1.0, 0.0);
        let op = DenseSensing::new(m);
        let z = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        match omp(&SparseProblem {
            sensing: &op,
            observation: &z,
            sparsity: 2,
        }) {
            Err(Error::RankDeficient { partial }) => {
                assert_eq!(partial.support, vec![0]);
                assert_eq!(partial.iterations, 1);
            }
            other => panic!("expected rank-deficiency, got {other:?}"),
        }
    }

    #[test]
    fn iht_identity_with_unit_step_converges_in_one_iteration() {
        let eye = Array2::from_shape_fn((6, 6), |(i, j)| {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let op = DenseSensing::new(eye);
        let mut z = vec![c(0.0, 0.0); 6];
        z[2] = c(1.5, 0.5);
        z[5] = c(-1.0, 2.0);
        let sol = iht(
            &SparseProblem {
                sensing: &op,
                observation: &z,
                sparsity: 2,
            },
            Some(1.0),
            50,
        )
        .unwrap();
        assert_eq!(sol.iterations, 1);
        let mut support = sol.support.clone();
        support.sort_unstable();
        assert_eq!(support, vec![2, 5]);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn iht_default_step_recovers_planted_sparse_vector() {
        let a = rng_matrix(30, 12, 11);
        let op = DenseSensing::new(a.clone());
        let mut x = vec![c(0.0, 0.0); 12];
        x[3] = c(1.0, 1.0);
        x[9] = c(-2.0, 0.5);
        let z = op.apply(&x);
        let sol = iht(
            &SparseProblem {
                sensing: &op,
                observation: &z,
                sparsity: 2,
            },
            None,
            2000,
        )
        .unwrap();
        let mut support = sol.support.clone();
        support.sort_unstable();
        assert_eq!(support, vec![3, 9]);
        assert!(sol.residual_norm < 1e-6 * l2(&z));
    }

    #[test]
    fn iht_pathological_step_reports_divergence() {
        let op = DenseSensing::new(rng_matrix(10, 10, 13));
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let z: Vec<Complex64> =
            (0..10).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        match iht(
            &SparseProblem {
                sensing: &op,
                observation: &z,
                sparsity: 3,
            },
            Some(100.0),
            200,
        ) {
            Err(Error::Diverged { ratio }) => assert!(ratio > 10.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn omp_and_iht_agree_on_well_conditioned_instance() {
        let a = rng_matrix(40, 15, 21);
        let op = DenseSensing::new(a);
        let mut x = vec![c(0.0, 0.0); 15];
        x[2] = c(2.0, 0.0);
        x[11] = c(0.0, -3.0);
        let z = op.apply(&x);
        let p = SparseProblem {
            sensing: &op,
            observation: &z,
            sparsity: 2,
        };
        let a_sol = omp(&p).unwrap();
        let b_sol = iht(&p, None, 3000).unwrap();
        let mut sa = a_sol.support.clone();
        let mut sb = b_sol.support.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        assert_eq!(sa, sb);
        assert_eq!(sa, vec![2, 11]);
    }

    #[test]
    fn partial_fourier_operator_matches_dense_definition() {
        let n = 24;
        let rows = vec![1, 5, 6, 17, 22];
        let scale = c(0.25, -0.1);
        let op = PartialFourierSensing::new(n, rows.clone(), scale).unwrap();
        let dense = Array2::from_shape_fn((rows.len(), n), |(i, s)| {
            let ph = -2.0 * std::f64::consts::PI * (rows[i] * s) as f64 / n as f64;
            scale * c(ph.cos(), ph.sin())
        });
        let dop = DenseSensing::new(dense);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Vec<Complex64> =
            (0..n).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let y_fast = op.apply(&x);
        let y_dense = dop.apply(&x);
        for (a, b) in y_fast.iter().zip(&y_dense) {
            assert!((a - b).norm() < 1e-10);
        }
        let y: Vec<Complex64> = (0..rows.len())
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let adj_fast = op.adjoint(&y);
        let adj_dense = dop.adjoint(&y);
        for (a, b) in adj_fast.iter().zip(&adj_dense) {
            assert!((a - b).norm() < 1e-10);
        }
        for j in [0, 7, n - 1] {
            let col_fast = op.column(j);
            let col_dense = dop.column(j);
            for (a, b) in col_fast.iter().zip(&col_dense) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_pursuit_recovers_planted_entries() {
        let a = rng_matrix(8, 12, 41);
        let b = rng_matrix(6, 9, 42);
        let planted = [((2usize, 3usize), c(1.0, -0.5)), ((7, 0), c(-2.0, 1.0)), ((5, 8), c(0.5, 0.5))];
        let mut x = Array2::zeros((8, 6));
        for &((i, j), alpha) in &planted {
            for r in 0..8 {
                for p in 0..6 {
                    let add = alpha * a[(r, i)] * b[(p, j)];
                    x[(r, p)] += add;
                }
            }
        }
        let sol = omp_matrix(&a, &b, &x, 3).unwrap();
        let mut got: Vec<(usize, usize)> = sol.support.clone();
        got.sort_unstable();
        let mut want: Vec<(usize, usize)> = planted.iter().map(|&(s, _)| s).collect();
        want.sort_unstable();
        assert_eq!(got, want);
        for (&(i, j), &v) in sol.support.iter().zip(&sol.values) {
            let truth = planted.iter().find(|&&(s, _)| s == (i, j)).unwrap().1;
            assert!((v - truth).norm() < 1e-8, "entry ({i},{j}): {v} vs {truth}");
        }
        let frob: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(sol.residual_norm < 1e-8 * frob);
    }

    #[test]
    fn matrix_pursuit_rejects_shape_mismatch() {
        let a = rng_matrix(8, 12, 51);
        let b = rng_matrix(6, 9, 52);
        let x = Array2::zeros((8, 7));
        assert!(omp_matrix(&a, &b, &x, 2).is_err());
    }
}

//! Dense symmetric positive-definite helpers for the conjugate Gaussian steps.
//!
//! Every Gibbs update in the crate has the form "draw from N(Q⁻¹b, Q⁻¹)" with
//! an SPD precision `Q`. [`SpdFactor`] stores the upper Cholesky factor `U`
//! (`Q = UᵀU`) in nalgebra's column-major layout so that every inner product
//! in the factorization and in the triangular solves runs over contiguous
//! memory.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SpdFactor {
    upper: DMatrix<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SpdFactor {
    /// Cholesky factorization of the upper triangle of `a`. Returns `None`
    /// when a non-positive pivot appears.
    pub fn new(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut upper = DMatrix::<f64>::zeros(n, n);
        let src = a.as_slice();
        let u = upper.as_mut_slice();
        for j in 0..n {
            let (done, rest) = u.split_at_mut(j * n);
            let col_j = &mut rest[..n];
            for i in 0..j {
                let col_i = &done[i * n..i * n + n];
                let s = src[j * n + i] - dot(&col_i[..i], &col_j[..i]);
                col_j[i] = s / col_i[i];
            }
            let d = src[j * n + j] - dot(&col_j[..j], &col_j[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            col_j[j] = d.sqrt();
        }
        Some(Self { upper })
    }

    pub fn dim(&self) -> usize {
        self.upper.nrows()
    }

    /// Solves `Uᵀ y = b` in place.
    fn forward(&self, y: &mut [f64]) {
        let n = self.dim();
        let u = self.upper.as_slice();
        for i in 0..n {
            let col = &u[i * n..i * n + n];
            y[i] = (y[i] - dot(&col[..i], &y[..i])) / col[i];
        }
    }

    /// Solves `U x = y` in place.
    fn backward(&self, x: &mut [f64]) {
        let n = self.dim();
        let u = self.upper.as_slice();
        for j in (0..n).rev() {
            let col = &u[j * n..j * n + n];
            x[j] /= col[j];
            let xj = x[j];
            for (xi, uij) in x[..j].iter_mut().zip(&col[..j]) {
                *xi -= xj * uij;
            }
        }
    }

    /// `Q⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.forward(x.as_mut_slice());
        self.backward(x.as_mut_slice());
        x
    }

    /// `U⁻¹ e`; for standard-normal `e` this has covariance `Q⁻¹`.
    pub fn solve_upper(&self, e: &DVector<f64>) -> DVector<f64> {
        let mut x = e.clone();
        self.backward(x.as_mut_slice());
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            let mut col = inv.column(j).into_owned();
            self.forward(col.as_mut_slice());
            self.backward(col.as_mut_slice());
            inv.set_column(j, &col);
        }
        // Symmetrize against round-off.
        let t = inv.transpose();
        (inv + t) * 0.5
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.upper.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Factorizes `q`; on failure adds `1e-8 · trace/dim` to the diagonal and
/// retries once. The flag reports whether the jitter was needed.
pub fn factor_with_jitter(q: &DMatrix<f64>) -> Result<(SpdFactor, bool)> {
    if let Some(f) = SpdFactor::new(q) {
        return Ok((f, false));
    }
    let n = q.nrows().max(1);
    let jitter = 1e-8 * q.trace().abs() / n as f64;
    let mut bumped = q.clone();
    for i in 0..q.nrows() {
        bumped[(i, i)] += jitter;
    }
    SpdFactor::new(&bumped)
        .map(|f| (f, true))
        .ok_or_else(|| Error::Numerical("precision matrix is not positive definite after jitter".into()))
}

/// Draw from `N(Q⁻¹ b, Q⁻¹)`. Returns the draw, its mean, and the jitter flag.
pub fn sample_gaussian_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    shift: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>, bool)> {
    let (factor, jittered) = factor_with_jitter(precision)?;
    let mean = factor.solve(shift);
    let eps = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let draw = &mean + factor.solve_upper(&eps);
    Ok((draw, mean, jittered))
}

/// Symmetric inverse of an SPD matrix, with the same jitter policy.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(factor_with_jitter(a)?.0.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RandomStream::new(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn factor_reconstructs_matrix() {
        let a = random_spd(17, 3);
        let f = SpdFactor::new(&a).unwrap();
        let u = f.upper.upper_triangle();
        let back = u.transpose() * &u;
        assert!((back - &a).abs().max() < 1e-12);
    }

    #[test]
    fn agrees_with_nalgebra_cholesky() {
        let a = random_spd(30, 11);
        let b = DVector::from_fn(30, |i, _| i as f64 - 7.0);
        let ours = SpdFactor::new(&a).unwrap().solve(&b);
        let theirs = a.clone().cholesky().unwrap().solve(&b);
        assert!((ours - theirs).abs().max() < 1e-10);
        let inv = SpdFactor::new(&a).unwrap().inverse();
        assert!((inv * &a - DMatrix::identity(30, 30)).abs().max() < 1e-10);
    }

    #[test]
    fn log_det_matches_product_of_eigenvalues() {
        let a = random_spd(6, 5);
        let eig = a.clone().symmetric_eigen();
        let expect: f64 = eig.eigenvalues.iter().map(|v| v.ln()).sum();
        assert!((SpdFactor::new(&a).unwrap().log_det() - expect).abs() < 1e-10);
    }

    #[test]
    fn indefinite_matrix_fails_even_with_jitter() {
        let mut a = DMatrix::identity(3, 3);
        a[(1, 1)] = -1.0;
        assert!(SpdFactor::new(&a).is_none());
        assert!(factor_with_jitter(&a).is_err());
    }

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        // Rank-one PSD matrix: exact zero pivot, fixed by the diagonal bump.
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let (_, jittered) = factor_with_jitter(&a).unwrap();
        assert!(jittered);
    }
}

//! Conjugate-update distributions not covered by `rand_distr`.

use crate::error::{Error, Result};
use crate::linalg::factor_with_jitter;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

/// One draw from the inverse-gamma law with density `∝ x^{−a−1} e^{−b/x}`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("inverse-gamma needs positive finite parameters, got ({shape}, {scale})")));
    }
    let g = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    // A gamma draw can underflow to zero for tiny shapes; redraw rather than
    // return an infinite variance.
    loop {
        let v: f64 = g.sample(rng);
        if v > 0.0 && (1.0 / v).is_finite() {
            return Ok(1.0 / v);
        }
    }
}

/// Wishart draw with `df` degrees of freedom and scale `Ψ⁻¹`, given `Ψ`.
///
/// If `Σ ~ IW(df, Ψ)` then `Σ⁻¹` has exactly this law, so the result is the
/// precision of an inverse-Wishart draw.
pub fn sample_wishart_from_inverse_scale<R: Rng + ?Sized>(df: f64, psi: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = psi.nrows();
    if df <= p as f64 - 1.0 {
        return Err(Error::InvalidParameter(format!("Wishart needs df > dim - 1, got {df} for dim {p}")));
    }
    let (factor, _) = factor_with_jitter(psi)?;
    // Columns of U⁻¹ give a square root of Ψ⁻¹ = U⁻¹U⁻ᵀ.
    let mut root = DMatrix::zeros(p, p);
    for k in 0..p {
        let mut e = DVector::zeros(p);
        e[k] = 1.0;
        root.set_column(k, &factor.solve_upper(&e));
    }
    // Bartlett factor: chi roots on the diagonal, normals below it.
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = root * a;
    let w = &la * la.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

//! Small dense linear-algebra helpers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative eigenvalue floor for inverse square roots.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Symmetric inverse square root `M^{-1/2}` by eigendecomposition.
///
/// Eigenvalues below `EIGEN_FLOOR * lambda_max` are raised to that floor.
/// Clearly negative eigenvalues (below `-1e-6 * lambda_max`) or a
/// nonpositive spectrum are errors.
pub fn inverse_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Calibration(format!(
            "information matrix is singular (largest eigenvalue {max:e})"
        )));
    }
    if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l < -1e-6 * max) {
        return Err(Error::Calibration(format!(
            "information matrix is not positive semidefinite (eigenvalue {bad:e})"
        )));
    }
    let floor = EIGEN_FLOOR * max;
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose())
}

/// Lower Cholesky factor with a small diagonal jitter retry for PSD input.
pub fn cholesky_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..5 {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(c) = a.cholesky() {
            return Ok(c.l());
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    Err(Error::Numeric("covariance matrix is not positive semidefinite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let r = inverse_sqrt(&m).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((r[(1, 1)] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.2, 0.1, 0.2, 1.0]);
        let r = inverse_sqrt(&m).unwrap();
        let prod = &r * &m * &r;
        assert!((prod - DMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn singular_matrix_is_floored_not_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(inverse_sqrt(&m).is_ok());
        assert!(inverse_sqrt(&DMatrix::zeros(2, 2)).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(inverse_sqrt(&neg).is_err());
    }
}

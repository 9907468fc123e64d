use nalgebra::Matrix3;

use crate::error::{Error, Result};

/// Symmetric square root `L` with `L Lᵀ = Σ` of a positive semi-definite
/// covariance, for drawing correlated Gaussian noise. Zero covariances are
/// allowed.
pub fn psd_sqrt(sigma: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if !sigma.iter().all(|v| v.is_finite()) || (sigma - sigma.transpose()).abs().max() > 1e-12 * (1.0 + sigma.abs().max()) {
        return Err(Error::InvalidInput(format!("covariance must be finite and symmetric: {sigma:?}")));
    }
    let eig = sigma.symmetric_eigen();
    let tol = 1e-12 * eig.eigenvalues.abs().max().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&v| v < -tol) {
        return Err(Error::InvalidInput(format!("covariance is not positive semi-definite: {sigma:?}")));
    }
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose())
}

//! Exact (full-rank) GP regression on magnetometer readings. O(N³), for
//! verifying the reduced-rank map on small problems.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::Hyperparameters;
use crate::error::{Error, Result};

/// Largest dataset the oracle accepts.
pub const MAX_ORACLE_OBSERVATIONS: usize = 500;
const GRAM_JITTER: f64 = 1e-8;

/// A body-frame field reading `y = R_bw ∇φ(p) + e`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpObservation {
    pub position: Vector3<f64>,
    pub r_bw: Matrix3<f64>,
    pub y: Vector3<f64>,
}

/// Squared-exponential potential kernel `σ²_SE exp(−‖p − p′‖² / 2ℓ²)`.
pub fn kernel_se(p: &Vector3<f64>, q: &Vector3<f64>, hyper: &Hyperparameters) -> f64 {
    hyper.sigma2_se * (-(p - q).norm_squared() / (2.0 * hyper.ell * hyper.ell)).exp()
}

/// `∇_p ∇_{p′}ᵀ κ_SE(p, p′)`: covariance between field values at two points
/// under the squared-exponential potential.
pub fn kernel_se_hessian(p: &Vector3<f64>, q: &Vector3<f64>, hyper: &Hyperparameters) -> Matrix3<f64> {
    let l2 = hyper.ell * hyper.ell;
    let d = p - q;
    (Matrix3::identity() / l2 - d * d.transpose() / (l2 * l2)) * kernel_se(p, q, hyper)
}

/// Field covariance between two points under the full prior.
fn field_kernel(p: &Vector3<f64>, q: &Vector3<f64>, hyper: &Hyperparameters) -> Matrix3<f64> {
    Matrix3::identity() * hyper.sigma2_lin + kernel_se_hessian(p, q, hyper)
}

/// Posterior mean and covariance of the world-frame field at `query`.
pub fn full_gp_oracle(
    observations: &[GpObservation],
    query: &Vector3<f64>,
    hyper: &Hyperparameters,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    hyper.validate()?;
    let n = observations.len();
    if n > MAX_ORACLE_OBSERVATIONS {
        return Err(Error::InvalidInput(format!(
            "exact GP oracle limited to {MAX_ORACLE_OBSERVATIONS} observations, got {n}"
        )));
    }
    let prior = field_kernel(query, query, hyper);
    if n == 0 {
        return Ok((Vector3::zeros(), prior));
    }
    let mut gram = DMatrix::zeros(3 * n, 3 * n);
    for (i, a) in observations.iter().enumerate() {
        for (j, b) in observations.iter().enumerate().skip(i) {
            let block = a.r_bw * field_kernel(&a.position, &b.position, hyper) * b.r_bw.transpose();
            gram.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(&block);
            gram.fixed_view_mut::<3, 3>(3 * j, 3 * i).copy_from(&block.transpose());
        }
    }
    for k in 0..3 * n {
        gram[(k, k)] += hyper.sigma2_noise + GRAM_JITTER;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("oracle Gram matrix is not positive definite".into()))?;
    let y = DVector::from_iterator(3 * n, observations.iter().flat_map(|o| o.y.iter().copied()));
    let alpha = chol.solve(&y);
    // Cross-covariance between the query field and every reading.
    let mut cross = DMatrix::zeros(3, 3 * n);
    for (j, o) in observations.iter().enumerate() {
        cross
            .fixed_view_mut::<3, 3>(0, 3 * j)
            .copy_from(&(field_kernel(query, &o.position, hyper) * o.r_bw.transpose()));
    }
    let mean = &cross * alpha;
    let reduced = chol.solve(&cross.transpose());
    let cov = prior - &cross * reduced;
    Ok((
        Vector3::new(mean[0], mean[1], mean[2]),
        Matrix3::from_fn(|i, j| 0.5 * (cov[(i, j)] + cov[(j, i)])),
    ))
}

//! Reduced-rank Gaussian-process magnetic field map of a single tile.
//!
//! The field is the gradient of a scalar potential with a linear plus
//! squared-exponential prior. In the tile basis the potential is
//! `Φ(p)ᵀ m` with `Φ(p) = (p, φ_1(p), …, φ_m(p))`, so a magnetometer reading
//! is linear in the coefficients and each tile carries a Gaussian over them.

mod oracle;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

pub use oracle::{full_gp_oracle, kernel_se, kernel_se_hessian, GpObservation};

use crate::eigen::Basis3D;
use crate::error::{Error, Result};

/// Innovation covariances with a worse condition number are rejected.
const MAX_INNOVATION_CONDITION: f64 = 1e12;
/// Diagonal jitter added to innovation covariances before factorisation.
const INNOVATION_JITTER: f64 = 1e-9;

/// Prior and noise parameters of the field model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Linear-kernel magnitude, μT²/m².
    pub sigma2_lin: f64,
    /// Squared-exponential magnitude, μT².
    pub sigma2_se: f64,
    /// Squared-exponential length scale, metres.
    pub ell: f64,
    /// Magnetometer noise variance, μT².
    pub sigma2_noise: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            sigma2_lin: 650.0,
            sigma2_se: 200.0,
            ell: 1.3,
            sigma2_noise: 10.0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma2_lin, self.sigma2_se, self.ell, self.sigma2_noise];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("hyperparameters must be positive: {self:?}")))
        }
    }
}

/// Spectral density of the 3D squared-exponential kernel at squared
/// frequency `lambda2`.
pub fn spectral_density_se(lambda2: f64, hyper: &Hyperparameters) -> f64 {
    let l2 = hyper.ell * hyper.ell;
    hyper.sigma2_se * (2.0 * std::f64::consts::PI * l2).powf(1.5) * (-0.5 * lambda2 * l2).exp()
}

/// `C = R_bw ∇Φ`: maps tile coefficients to a body-frame field reading.
pub fn measurement_matrix(nabla_phi: &Matrix3xX<f64>, r_bw: &Matrix3<f64>) -> Matrix3xX<f64> {
    r_bw * nabla_phi
}

/// Gaussian belief over one tile's coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TileMap {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl TileMap {
    /// Prior: zero mean, `diag(σ²_lin ×3, S_SE(λ_1), …, S_SE(λ_m))`.
    pub fn prior(basis: &Basis3D, hyper: &Hyperparameters) -> Self {
        let n = basis.state_dim();
        let diag = DVector::from_iterator(
            n,
            std::iter::repeat_n(hyper.sigma2_lin, 3)
                .chain(basis.eigenvalues().iter().map(|&l2| spectral_density_se(l2, hyper))),
        );
        Self {
            mean: DVector::zeros(n),
            cov: DMatrix::from_diagonal(&diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Sequential Kalman update with one body-frame reading `y = C m + e`.
    pub fn kalman_update(&mut self, c: &Matrix3xX<f64>, y: &Vector3<f64>, hyper: &Hyperparameters) -> Result<()> {
        self.check_dims(c)?;
        let pct = &self.cov * c.transpose();
        let s = c * &pct + Matrix3::identity() * hyper.sigma2_noise;
        let s_inv = invert_innovation(&s)?;
        let gain = &pct * s_inv;
        let innovation = y - c * &self.mean;
        self.mean += &gain * innovation;
        // P − K S Kᵀ = P − K (P Cᵀ)ᵀ
        self.cov.gemm(-1.0, &gain, &pct.transpose(), 1.0);
        symmetrise(&mut self.cov);
        Ok(())
    }

    /// World-frame field prediction `∇Φ m` and its covariance `∇Φ P ∇Φᵀ`
    /// (without measurement noise).
    pub fn predict_field(&self, nabla_phi: &Matrix3xX<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let mean = nabla_phi * &self.mean;
        let cov = nabla_phi * (&self.cov * nabla_phi.transpose());
        (mean, (cov + cov.transpose()) * 0.5)
    }

    /// `log N(y; C m, C P Cᵀ + σ² I)`.
    pub fn log_likelihood(&self, c: &Matrix3xX<f64>, y: &Vector3<f64>, hyper: &Hyperparameters) -> Result<f64> {
        self.check_dims(c)?;
        let s = c * (&self.cov * c.transpose()) + Matrix3::identity() * hyper.sigma2_noise;
        gaussian_log_density(&(y - c * &self.mean), &s)
    }

    fn check_dims(&self, c: &Matrix3xX<f64>) -> Result<()> {
        if c.ncols() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "measurement matrix has {} columns for a {}-dimensional map",
                c.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Log density of a zero-mean 3D Gaussian with covariance `s` at `r`.
pub fn gaussian_log_density(r: &Vector3<f64>, s: &Matrix3<f64>) -> Result<f64> {
    let s = (s + s.transpose()) * 0.5 + Matrix3::identity() * INNOVATION_JITTER;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("innovation covariance is not positive definite: {s:?}")))?;
    let z = chol.l().solve_lower_triangular(r).unwrap_or_else(Vector3::zeros);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (z.norm_squared() + log_det + 3.0 * (2.0 * std::f64::consts::PI).ln()))
}

fn invert_innovation(s: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let eig = s.symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION {
        return Err(Error::Numerical(format!(
            "innovation covariance is singular (eigenvalues {:?}); check the hyperparameters",
            eig.eigenvalues.as_slice()
        )));
    }
    let inv = eig.eigenvectors * Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v)) * eig.eigenvectors.transpose();
    Ok((inv + inv.transpose()) * 0.5)
}

fn symmetrise(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_map(n: usize, rng: &mut ChaCha8Rng) -> TileMap {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        TileMap {
            mean: DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0)),
            cov: &a * a.transpose() + DMatrix::identity(n, n),
        }
    }

    fn random_c(n: usize, rng: &mut ChaCha8Rng) -> Matrix3xX<f64> {
        Matrix3xX::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn spectral_density_at_zero() {
        let s = spectral_density_se(0.0, &Hyperparameters::default());
        let want = 200.0 * (2.0 * std::f64::consts::PI * 1.69f64).powf(1.5);
        assert_relative_eq!(s, want, max_relative = 1e-14);
        // Commonly quoted as ≈ 6920.6; the closed form gives 6920.379.
        assert!((s - 6920.6).abs() < 0.5);
    }

    #[test]
    fn spectral_density_decreases_and_scales() {
        let h = Hyperparameters::default();
        assert!(spectral_density_se(1.0, &h) > spectral_density_se(2.0, &h));
        let zero = Hyperparameters { sigma2_se: 0.0, ..h };
        assert_eq!(spectral_density_se(0.7, &zero), 0.0);
    }

    #[test]
    fn spectral_density_matches_numeric_fourier_transform() {
        // S(ω) = ∫ κ(r) e^{-iω·r} dr; with ω along x the integral separates.
        let h = Hyperparameters::default();
        let (step, half) = (0.01, 1200);
        let omega: f64 = 1.1;
        let one_d = |w: f64| -> f64 {
            (-half..=half)
                .map(|k| {
                    let x = k as f64 * step;
                    (-x * x / (2.0 * h.ell * h.ell)).exp() * (w * x).cos() * step
                })
                .sum()
        };
        let numeric = h.sigma2_se * one_d(omega) * one_d(0.0).powi(2);
        assert_relative_eq!(numeric, spectral_density_se(omega * omega, &h), max_relative = 1e-9);
    }

    #[test]
    fn zero_measurement_matrix_leaves_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut map = random_map(6, &mut rng);
        let before = map.clone();
        map.kalman_update(&Matrix3xX::zeros(6), &Vector3::new(1.0, 2.0, 3.0), &Hyperparameters::default())
            .unwrap();
        assert_relative_eq!(map.mean, before.mean);
        assert_relative_eq!(map.cov, before.cov);
    }

    #[test]
    fn scalar_conjugate_update() {
        // One coefficient observed in all three axes: three identical
        // scalar updates compose to precision 1/σ₀² + 3/σ².
        let hyper = Hyperparameters::default();
        let s0 = 40.0;
        let mut map = TileMap {
            mean: DVector::zeros(1),
            cov: DMatrix::from_element(1, 1, s0),
        };
        let c = Matrix3xX::from_column_slice(&[1.0, 0.0, 0.0]);
        map.kalman_update(&c, &Vector3::new(7.0, 0.0, 0.0), &hyper).unwrap();
        assert_relative_eq!(map.mean[0], s0 * 7.0 / (s0 + hyper.sigma2_noise), max_relative = 1e-14);
        assert_relative_eq!(map.cov[(0, 0)], s0 * hyper.sigma2_noise / (s0 + hyper.sigma2_noise), max_relative = 1e-14);
    }

    #[test]
    fn update_shrinks_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut map = random_map(8, &mut rng);
        let before = map.cov.trace();
        map.kalman_update(&random_c(8, &mut rng), &Vector3::new(1.0, -1.0, 0.5), &Hyperparameters::default())
            .unwrap();
        assert!(map.cov.trace() < before);
    }

    #[test]
    fn update_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hyper = Hyperparameters::default();
        let map = random_map(7, &mut rng);
        let (c1, c2) = (random_c(7, &mut rng), random_c(7, &mut rng));
        let (y1, y2) = (Vector3::new(1.0, 2.0, 3.0), Vector3::new(-3.0, 0.5, 2.0));
        let mut a = map.clone();
        a.kalman_update(&c1, &y1, &hyper).unwrap();
        a.kalman_update(&c2, &y2, &hyper).unwrap();
        let mut b = map;
        b.kalman_update(&c2, &y2, &hyper).unwrap();
        b.kalman_update(&c1, &y1, &hyper).unwrap();
        assert_relative_eq!(a.mean, b.mean, epsilon = 1e-8);
        assert_relative_eq!(a.cov, b.cov, epsilon = 1e-8);
    }

    #[test]
    fn singular_innovation_is_rejected() {
        let hyper = Hyperparameters { sigma2_noise: 1e-20, ..Default::default() };
        let mut map = TileMap {
            mean: DVector::zeros(3),
            cov: DMatrix::identity(3, 3),
        };
        let c = Matrix3xX::from_column_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(map.kalman_update(&c, &Vector3::zeros(), &hyper).is_err());
    }

    #[test]
    fn log_likelihood_at_zero_residual() {
        let hyper = Hyperparameters::default();
        let map = TileMap {
            mean: DVector::from_vec(vec![1.0, 2.0, 3.0]),
            cov: DMatrix::zeros(3, 3),
        };
        let c = Matrix3xX::identity(3);
        let ll = map.log_likelihood(&c, &Vector3::new(1.0, 2.0, 3.0), &hyper).unwrap();
        let s2 = hyper.sigma2_noise + INNOVATION_JITTER;
        assert_relative_eq!(ll, -1.5 * (2.0 * std::f64::consts::PI * s2).ln(), max_relative = 1e-12);
    }

    #[test]
    fn log_likelihood_matches_dense_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hyper = Hyperparameters::default();
        for _ in 0..50 {
            let map = random_map(5, &mut rng);
            let c = random_c(5, &mut rng);
            let y = Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0));
            let s = &c * (&map.cov * c.transpose()) + Matrix3::identity() * (hyper.sigma2_noise + INNOVATION_JITTER);
            let r = y - &c * &map.mean;
            let dens = (-0.5 * (r.transpose() * s.try_inverse().unwrap() * r)[0]).exp()
                / ((2.0 * std::f64::consts::PI).powi(3) * s.determinant()).sqrt();
            let ll = map.log_likelihood(&c, &y, &hyper).unwrap();
            assert_relative_eq!(ll, dens.ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn log_likelihood_falls_with_residual() {
        let hyper = Hyperparameters::default();
        let map = TileMap {
            mean: DVector::zeros(3),
            cov: DMatrix::identity(3, 3) * 4.0,
        };
        let c = Matrix3xX::identity(3);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let ll = map.log_likelihood(&c, &Vector3::new(k as f64, 0.5 * k as f64, 0.0), &hyper).unwrap();
            assert!(ll < last);
            last = ll;
        }
    }

    #[test]
    fn measurement_matrix_is_rotation_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_c(9, &mut rng);
        assert_eq!(measurement_matrix(&g, &Matrix3::identity()), g);
        let r = crate::geom::Quaternion::new(0.3, 0.1, -0.7, 0.2).normalized().to_rotation_matrix();
        let c = measurement_matrix(&g, &r);
        for j in 0..9 {
            for i in 0..3 {
                let naive: f64 = (0..3).map(|k| r[(i, k)] * g[(k, j)]).sum();
                assert_relative_eq!(c[(i, j)], naive, epsilon = 1e-14);
            }
            assert_relative_eq!(c.column(j).norm(), g.column(j).norm(), epsilon = 1e-12);
        }
    }
}

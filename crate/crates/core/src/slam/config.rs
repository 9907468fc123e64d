use nalgebra::{Matrix3, Vector3};

use crate::eigen::Basis3D;
use crate::error::{Error, Result};
use crate::geom::{psd_sqrt, HexGridSpec};
use crate::gpmap::Hyperparameters;

/// Default position drift, m²/s.
pub const DEFAULT_SIGMA_P: [f64; 3] = [0.1 * 0.1, 0.1 * 0.1, 0.02 * 0.02];

/// Default orientation drift as per-axis standard deviations, deg/√s.
pub const DEFAULT_SIGMA_Q_DEG: [f64; 3] = [0.01, 0.01, 0.24];

/// Diagonal rotation covariance in rad²/s from per-axis deg/√s.
pub fn sigma_q_from_degrees(sd_deg: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(sd_deg.map(|s| s.to_radians().powi(2))))
}

/// Particle filter settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SlamConfig {
    pub particles: usize,
    /// Position process noise, m²/s.
    pub sigma_p: Matrix3<f64>,
    /// Orientation process noise on the rotation vector, rad²/s.
    pub sigma_q: Matrix3<f64>,
    /// Tile circumradius, metres.
    pub radius: f64,
    /// Tile half-height, metres.
    pub half_height: f64,
    /// How far each tile's basis domain reaches past the tile, metres.
    pub extension: f64,
    /// Basis functions per tile.
    pub basis_size: usize,
    pub hyper: Hyperparameters,
    /// Path distance a reading waits before it enters the map, metres.
    pub delay_lengthscale: f64,
    /// Readings this close to a tile face also update the tile behind it.
    pub neighbor_threshold: f64,
    /// Share of particles that must be revisiting a tile to resample.
    pub resample_fraction: f64,
    pub rng_seed: u64,
    /// Run the per-particle stages on the rayon pool. Results do not
    /// depend on this.
    pub parallel: bool,
}

impl Default for SlamConfig {
    fn default() -> Self {
        let hyper = Hyperparameters::default();
        Self {
            particles: 100,
            sigma_p: Matrix3::from_diagonal(&Vector3::from(DEFAULT_SIGMA_P)),
            sigma_q: sigma_q_from_degrees(DEFAULT_SIGMA_Q_DEG),
            radius: 5.0,
            half_height: 2.0,
            extension: 1.0,
            basis_size: 256,
            hyper,
            delay_lengthscale: hyper.ell,
            neighbor_threshold: 0.1,
            resample_fraction: 0.9,
            rng_seed: 0,
            parallel: true,
        }
    }
}

impl SlamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        psd_sqrt(&self.sigma_p).map_err(|e| Error::Config(format!("Sigma_p: {e}")))?;
        psd_sqrt(&self.sigma_q).map_err(|e| Error::Config(format!("Sigma_q: {e}")))?;
        if !(self.resample_fraction > 0.0 && self.resample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "resample_fraction must be in (0, 1], got {}",
                self.resample_fraction
            )));
        }
        for (name, v) in [
            ("extension", self.extension),
            ("delay_lengthscale", self.delay_lengthscale),
            ("neighbor_threshold", self.neighbor_threshold),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite nonnegative length, got {v}")));
            }
        }
        if self.basis_size == 0 {
            return Err(Error::Config("basis_size must be positive".into()));
        }
        self.hyper.validate()?;
        self.grid()?;
        Ok(())
    }

    /// The tiling, with tile (0, 0, 0) centred on the start position.
    pub fn grid(&self) -> Result<HexGridSpec> {
        HexGridSpec::new(self.radius, self.half_height)
    }

    /// Checks that `basis` was built for this tile geometry and size.
    pub fn check_basis(&self, basis: &Basis3D) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        if !close(basis.extended_radius(), self.radius + self.extension)
            || !close(basis.extended_half_height(), self.half_height + self.extension)
            || basis.len() != self.basis_size
        {
            return Err(Error::Config(format!(
                "basis is for r = {}, L_z = {}, m = {} but the run needs r = {}, L_z = {}, m = {} (extended)",
                basis.extended_radius(),
                basis.extended_half_height(),
                basis.len(),
                self.radius + self.extension,
                self.half_height + self.extension,
                self.basis_size
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn defaults_validate() {
        SlamConfig::default().validate().unwrap();
    }

    #[test]
    fn yaw_drift_is_converted_to_radians() {
        let c = SlamConfig::default();
        assert_relative_eq!(c.sigma_q[(2, 2)], (0.24 * std::f64::consts::PI / 180.0).powi(2), epsilon = 1e-18);
        assert_relative_eq!(c.sigma_p[(0, 0)], 0.01, epsilon = 1e-18);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let bad = [
            SlamConfig { particles: 0, ..Default::default() },
            SlamConfig { resample_fraction: 0.0, ..Default::default() },
            SlamConfig { resample_fraction: 1.5, ..Default::default() },
            SlamConfig { sigma_p: -Matrix3::identity(), ..Default::default() },
            SlamConfig { neighbor_threshold: f64::NAN, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};

/// Field evaluation is refused closer than this to a dipole, metres.
pub const DIPOLE_CLEARANCE: f64 = 0.2;

/// Typical mid-latitude Earth field in a z-up frame, μT.
pub const DEFAULT_EARTH: Vector3<f64> = Vector3::new(15.0, 5.0, -45.0);

/// Point magnetic dipole. The moment already includes the `μ₀/4π` factor, so
/// it is in μT·m³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dipole {
    pub position: Vector3<f64>,
    pub moment: Vector3<f64>,
}

/// Ground-truth magnetic field: uniform Earth field plus point dipoles.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldField {
    pub earth: Vector3<f64>,
    pub dipoles: Vec<Dipole>,
}

/// Where and how strongly [`WorldField::random`] places dipoles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleLayout {
    /// Horizontal box `[min, max]` the sources are scattered over, metres.
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub count: usize,
    /// Range of `|m|`, μT·m³.
    pub moment_range: (f64, f64),
}

impl WorldField {
    pub fn earth_only(earth: Vector3<f64>) -> Self {
        Self {
            earth,
            dipoles: Vec::new(),
        }
    }

    /// Randomly scattered dipoles with isotropic moment directions.
    pub fn random<R: Rng + ?Sized>(earth: Vector3<f64>, layout: &DipoleLayout, rng: &mut R) -> Self {
        let dipoles = (0..layout.count)
            .map(|_| {
                let position = Vector3::from_fn(|i, _| rng.random_range(layout.min[i]..=layout.max[i]));
                let direction = loop {
                    let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                    let n: f64 = v.norm();
                    if n > 0.1 && n <= 1.0 {
                        break v / n;
                    }
                };
                let strength = rng.random_range(layout.moment_range.0..=layout.moment_range.1);
                Dipole {
                    position,
                    moment: direction * strength,
                }
            })
            .collect();
        Self { earth, dipoles }
    }

    /// Indoor-like world around the walking area `min..max` (metres):
    /// `density` sources per m², 2–3 m below the walking plane, giving
    /// anomalies of roughly 5–50 μT there.
    pub fn indoor<R: Rng + ?Sized>(min: [f64; 2], max: [f64; 2], density: f64, rng: &mut R) -> Self {
        let margin = 3.0;
        let area = (max[0] - min[0] + 2.0 * margin) * (max[1] - min[1] + 2.0 * margin);
        let layout = DipoleLayout {
            min: Vector3::new(min[0] - margin, min[1] - margin, -3.0),
            max: Vector3::new(max[0] + margin, max[1] + margin, -2.0),
            count: (area * density).round().max(1.0) as usize,
            moment_range: (100.0, 400.0),
        };
        Self::random(DEFAULT_EARTH, &layout, rng)
    }

    /// Scales every dipole moment so that the anomaly (field minus Earth) has
    /// the given per-component RMS over `points`. No-op without dipoles.
    pub fn scale_anomaly_rms(&mut self, points: &[Vector3<f64>], rms: f64) -> Result<()> {
        if !(rms >= 0.0 && rms.is_finite()) {
            return Err(Error::InvalidInput(format!("anomaly RMS {rms}")));
        }
        if self.dipoles.is_empty() || points.is_empty() {
            return Ok(());
        }
        let mut sum_sq = 0.0;
        for p in points {
            sum_sq += (self.eval_field(p)? - self.earth).norm_squared();
        }
        let current = (sum_sq / (3.0 * points.len() as f64)).sqrt();
        if current > 0.0 {
            let factor = rms / current;
            for d in &mut self.dipoles {
                d.moment *= factor;
            }
        }
        Ok(())
    }

    /// Field at `p`, μT.
    pub fn eval_field(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let mut b = self.earth;
        for d in &self.dipoles {
            let r = p - d.position;
            let dist = r.norm();
            if !(dist >= DIPOLE_CLEARANCE) {
                return Err(Error::OutsideDomain {
                    point: [p.x, p.y, p.z],
                    domain: "the dipole clearance region",
                });
            }
            let rhat = r / dist;
            b += (rhat * (3.0 * d.moment.dot(&rhat)) - d.moment) / (dist * dist * dist);
        }
        Ok(b)
    }
}

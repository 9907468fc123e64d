use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geom::Quaternion;

/// One odometry and magnetometer sample.
///
/// `mag` is measured at the pose *before* the increment; `dp` (world frame)
/// and `dq` then carry the sensor to the next sample's pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// Sample time, seconds.
    pub t: f64,
    /// Time to the next sample, seconds.
    pub dt: f64,
    pub dp: Vector3<f64>,
    pub dq: Quaternion,
    /// Body-frame magnetometer reading, μT.
    pub mag: Vector3<f64>,
}

impl StepRecord {
    pub fn validate(&self) -> Result<()> {
        let finite = self.t.is_finite()
            && self.dt.is_finite()
            && self.dp.iter().all(|v| v.is_finite())
            && self.dq.is_finite()
            && self.mag.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput(format!("non-finite step record at t = {}", self.t)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("step at t = {} has dt = {}", self.t, self.dt)));
        }
        if (self.dq.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("step at t = {} has a non-unit dq", self.t)));
        }
        Ok(())
    }
}

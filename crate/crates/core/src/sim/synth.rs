use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trajectory::TruthSample;
use super::world::WorldField;
use crate::error::{Error, Result};
use crate::geom::{psd_sqrt, quat_exp, Pose};
use crate::record::StepRecord;

/// Odometry drift: per-step increments get `N(0, dt·Σ)` noise, so the
/// dead-reckoned pose drifts as a random walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdometryNoise {
    /// Position drift covariance, m²/s.
    pub sigma_p: Matrix3<f64>,
    /// Rotation-vector drift covariance, rad²/s.
    pub sigma_q: Matrix3<f64>,
}

impl OdometryNoise {
    pub fn none() -> Self {
        Self {
            sigma_p: Matrix3::zeros(),
            sigma_q: Matrix3::zeros(),
        }
    }
}

/// A sudden position offset added to the odometry at time `t`, like the
/// discontinuities a visual-inertial tracker produces when it relocalises.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionJump {
    pub t: f64,
    pub offset: [f64; 3],
}

fn standard_normal3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::from_fn(|_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
}

fn gaussian<R: Rng + ?Sized>(sqrt_cov: &Matrix3<f64>, rng: &mut R) -> Vector3<f64> {
    sqrt_cov * standard_normal3(rng)
}

/// Turns a ground-truth track into a noisy sensor log.
///
/// Record `k` holds the magnetometer reading at truth pose `k` and the
/// (noisy) increment to pose `k + 1`; the last record carries a zero
/// increment. Returns the log and the truth poses it was made from.
pub fn synthesize_log<R: Rng + ?Sized>(
    truth: &[TruthSample],
    world: &WorldField,
    noise: &OdometryNoise,
    mag_noise_sd: f64,
    jumps: &[PositionJump],
    rng: &mut R,
) -> Result<(Vec<StepRecord>, Vec<TruthSample>)> {
    if truth.len() < 2 {
        return Err(Error::InvalidInput("a log needs at least two truth samples".into()));
    }
    if !(mag_noise_sd >= 0.0 && mag_noise_sd.is_finite()) {
        return Err(Error::InvalidInput(format!("magnetometer noise sd {mag_noise_sd}")));
    }
    let sqrt_p = psd_sqrt(&noise.sigma_p)?;
    let sqrt_q = psd_sqrt(&noise.sigma_q)?;
    let mut records = Vec::with_capacity(truth.len());
    for k in 0..truth.len() {
        let here = &truth[k];
        let field = world.eval_field(&here.pose.position)?;
        let mag_noise = standard_normal3(rng) * mag_noise_sd;
        let mag = here.pose.world_to_body() * field + mag_noise;
        let record = match truth.get(k + 1) {
            Some(next) => {
                let dt = next.t - here.t;
                if !(dt > 0.0) {
                    return Err(Error::InvalidInput(format!("truth not time-ordered at t = {}", here.t)));
                }
                let mut dp = next.pose.position - here.pose.position + gaussian(&(sqrt_p * dt.sqrt()), rng);
                for jump in jumps.iter().filter(|j| here.t <= j.t && j.t < next.t) {
                    dp += Vector3::from(jump.offset);
                }
                let dq_true = next.pose.orientation.hamilton(&here.pose.orientation.conjugate());
                let drift = quat_exp(&gaussian(&(sqrt_q * dt.sqrt()), rng))?;
                StepRecord {
                    t: here.t,
                    dt,
                    dp,
                    dq: dq_true.hamilton(&drift).normalized(),
                    mag,
                }
            }
            None => StepRecord {
                t: here.t,
                dt: records.last().map_or(1.0, |r: &StepRecord| r.dt),
                dp: Vector3::zeros(),
                dq: crate::geom::Quaternion::identity(),
                mag,
            },
        };
        records.push(record);
    }
    Ok((records, truth.to_vec()))
}

/// Integrates a log's increments from `start`: the pose at each record's
/// time, before its increment is applied.
pub fn dead_reckon(records: &[StepRecord], start: Pose) -> Vec<Pose> {
    let mut pose = start;
    records
        .iter()
        .map(|r| {
            let out = pose;
            pose = Pose::new(pose.position + r.dp, r.dq.hamilton(&pose.orientation).normalized());
            out
        })
        .collect()
}

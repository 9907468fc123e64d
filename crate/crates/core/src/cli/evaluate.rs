use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::record::StepRecord;
use crate::sim::{dead_reckon, TruthSample};

/// Accuracy of an estimated trajectory and of raw dead reckoning against
/// the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub samples: usize,
    /// Position RMSE over time, metres.
    pub rmse_slam: f64,
    pub rmse_dead_reckoning: f64,
    /// Position error at the last sample, metres.
    pub final_slam: f64,
    pub final_dead_reckoning: f64,
}

impl Evaluation {
    /// SLAM over dead-reckoning final error.
    pub fn final_ratio(&self) -> f64 {
        self.final_slam / self.final_dead_reckoning
    }

    pub fn rmse_ratio(&self) -> f64 {
        self.rmse_slam / self.rmse_dead_reckoning
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# magslam-evaluation 1.0\n");
        for (k, v) in [
            ("samples", self.samples as f64),
            ("rmse_slam_m", self.rmse_slam),
            ("rmse_dead_reckoning_m", self.rmse_dead_reckoning),
            ("rmse_ratio", self.rmse_ratio()),
            ("final_error_slam_m", self.final_slam),
            ("final_error_dead_reckoning_m", self.final_dead_reckoning),
            ("final_error_ratio", self.final_ratio()),
        ] {
            writeln!(s, "{k} = {v}").expect("string write");
        }
        s
    }
}

/// Places a filter estimate, which starts at the origin with identity
/// orientation, in the truth's frame by composing it with the shared start
/// pose. Odometry increments are world-frame, so positions shift and
/// orientations compose on the right.
pub fn align_to_start(estimate: &Pose, start: &Pose) -> Pose {
    Pose::new(
        start.position + estimate.position,
        estimate.orientation.hamilton(&start.orientation).normalized(),
    )
}

fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Compares estimates (one per log record, in the filter's start-anchored
/// frame) and the dead-reckoned log with the truth. Only the start pose is
/// shared; nothing is fitted.
pub fn evaluate(estimates: &[Pose], records: &[StepRecord], truth: &[TruthSample]) -> Result<Evaluation> {
    if estimates.len() != truth.len() || records.len() != truth.len() {
        return Err(Error::Data(format!(
            "{} estimates, {} log records and {} truth samples do not line up",
            estimates.len(),
            records.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    let start = truth[0].pose;
    let dr = dead_reckon(records, start);
    let error = |p: &Vector3<f64>, s: &TruthSample| (p - s.pose.position).norm();
    let slam: Vec<f64> = estimates
        .iter()
        .zip(truth)
        .map(|(e, s)| error(&align_to_start(e, &start).position, s))
        .collect();
    let drift: Vec<f64> = dr.iter().zip(truth).map(|(d, s)| error(&d.position, s)).collect();
    Ok(Evaluation {
        samples: truth.len(),
        rmse_slam: rmse(&slam),
        rmse_dead_reckoning: rmse(&drift),
        final_slam: *slam.last().expect("nonempty"),
        final_dead_reckoning: *drift.last().expect("nonempty"),
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geom::{Pose, Quaternion};
    use crate::sim::{generate_trajectory, synthesize_log, OdometryNoise, TrajectorySpec, WorldField, DEFAULT_EARTH};

    fn walk(noise: OdometryNoise) -> (Vec<StepRecord>, Vec<TruthSample>) {
        let mut spec = TrajectorySpec::square_loop();
        spec.laps = 1;
        let truth = generate_trajectory(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        synthesize_log(&truth, &WorldField::earth_only(DEFAULT_EARTH), &noise, 1.0, &[], &mut rng).unwrap()
    }

    #[test]
    fn perfect_estimate_scores_zero() {
        let (records, truth) = walk(OdometryNoise::none());
        let est: Vec<Pose> = truth.iter().map(|s| s.pose).collect();
        let e = evaluate(&est, &records, &truth).unwrap();
        assert_eq!(e.rmse_slam, 0.0);
        assert!(e.rmse_dead_reckoning < 1e-9);
    }

    #[test]
    fn dead_reckoning_error_matches_independent_integration() {
        let noise = OdometryNoise {
            sigma_p: nalgebra::Matrix3::from_diagonal(&Vector3::new(0.01, 0.01, 0.0004)),
            sigma_q: nalgebra::Matrix3::zeros(),
        };
        let (records, truth) = walk(noise);
        // Re-integrate the noisy increments by hand.
        let mut p = truth[0].pose.position;
        let mut sq = 0.0;
        for (r, s) in records.iter().zip(&truth) {
            sq += (p - s.pose.position).norm_squared();
            p += r.dp;
        }
        let expect = (sq / truth.len() as f64).sqrt();
        let est: Vec<Pose> = truth.iter().map(|s| s.pose).collect();
        let e = evaluate(&est, &records, &truth).unwrap();
        assert!((e.rmse_dead_reckoning - expect).abs() < 1e-9 * expect);
        assert!(e.rmse_dead_reckoning > 0.01);
    }

    #[test]
    fn estimates_are_anchored_at_the_true_start() {
        let (records, mut truth) = walk(OdometryNoise::none());
        let offset = Vector3::new(3.0, -2.0, 1.0);
        for s in &mut truth {
            s.pose.position += offset;
        }
        let est: Vec<Pose> = truth.iter().map(|s| Pose::new(s.pose.position - offset, s.pose.orientation)).collect();
        assert!(evaluate(&est, &records, &truth).unwrap().rmse_slam < 1e-12);
        let start = Pose::new(offset, Quaternion::from_yaw(0.5));
        let aligned = align_to_start(&Pose::new(Vector3::x(), Quaternion::from_yaw(0.25)), &start);
        assert!((aligned.orientation.yaw() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let (records, truth) = walk(OdometryNoise::none());
        let est: Vec<Pose> = truth.iter().skip(1).map(|s| s.pose).collect();
        assert!(evaluate(&est, &records, &truth).is_err());
    }
}

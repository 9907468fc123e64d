use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::synth::{synthesize_log, OdometryNoise, PositionJump};
use super::trajectory::{generate_trajectory, TrajectorySpec, TruthSample};
use super::world::WorldField;
use crate::error::Result;
use crate::gpmap::Hyperparameters;
use crate::record::StepRecord;
use crate::slam::{sigma_q_from_degrees, DEFAULT_SIGMA_P, DEFAULT_SIGMA_Q_DEG};

/// A complete synthetic experiment: walk, world and sensor noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub trajectory: TrajectorySpec,
    /// Dipoles per m² of the walked area (plus margin).
    pub dipole_density: f64,
    /// Per-component RMS of the anomaly along the walk, μT. `None` keeps
    /// the raw dipole strengths.
    pub anomaly_rms: Option<f64>,
    pub mag_noise_sd: f64,
    pub odometry: OdometryNoise,
    pub jumps: Vec<PositionJump>,
    /// Seeds the world and all sensor noise.
    pub seed: u64,
}

impl Scenario {
    /// Default indoor world and drift for a trajectory.
    pub fn new(trajectory: TrajectorySpec, seed: u64) -> Self {
        Self {
            trajectory,
            dipole_density: 0.15,
            anomaly_rms: Some(default_anomaly_rms()),
            mag_noise_sd: 1.0,
            odometry: OdometryNoise {
                sigma_p: Matrix3::from_diagonal(&Vector3::from(DEFAULT_SIGMA_P)),
                sigma_q: sigma_q_from_degrees(DEFAULT_SIGMA_Q_DEG),
            },
            jumps: Vec::new(),
            seed,
        }
    }
}

/// The field spread the default GP prior expects: `√σ²_SE / ℓ` per
/// component.
pub fn default_anomaly_rms() -> f64 {
    let h = Hyperparameters::default();
    h.sigma2_se.sqrt() / h.ell
}

/// Output of [`simulate`].
#[derive(Clone, Debug)]
pub struct Simulation {
    pub world: WorldField,
    pub truth: Vec<TruthSample>,
    pub log: Vec<StepRecord>,
}

/// Generates the walk, scatters dipoles under it and synthesises the log.
pub fn simulate(scenario: &Scenario) -> Result<Simulation> {
    let truth = generate_trajectory(&scenario.trajectory)?;
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s in &truth {
        for i in 0..2 {
            min[i] = min[i].min(s.pose.position[i]);
            max[i] = max[i].max(s.pose.position[i]);
        }
    }
    let mut world_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut noise_rng = world_rng.clone();
    noise_rng.set_stream(1);
    let mut world = WorldField::indoor(min, max, scenario.dipole_density, &mut world_rng);
    if let Some(rms) = scenario.anomaly_rms {
        let path: Vec<_> = truth.iter().map(|s| s.pose.position).collect();
        world.scale_anomaly_rms(&path, rms)?;
    }
    let (log, truth) = synthesize_log(
        &truth,
        &world,
        &scenario.odometry,
        scenario.mag_noise_sd,
        &scenario.jumps,
        &mut noise_rng,
    )?;
    Ok(Simulation { world, truth, log })
}

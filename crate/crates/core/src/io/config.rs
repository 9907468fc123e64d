use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::export::Channel;
use crate::eigen::BasisSpec;
use crate::error::{Error, Result};
use crate::gpmap::Hyperparameters;
use crate::sim::{default_anomaly_rms, OdometryNoise, PositionJump, Scenario, TrajectoryKind, TrajectorySpec};
use crate::slam::{sigma_q_from_degrees, SlamConfig, DEFAULT_SIGMA_P, DEFAULT_SIGMA_Q_DEG};

/// Everything a command-line run needs, read from TOML. Omitted keys take
/// their defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the filter and the simulator.
    pub seed: u64,
    pub slam: SlamSection,
    pub basis: BasisSection,
    pub scenario: ScenarioSection,
    pub export: ExportSection,
    pub paths: PathsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamSection {
    pub particles: usize,
    /// Diagonal of the position drift covariance, m²/s.
    pub sigma_p: [f64; 3],
    /// Per-axis orientation drift, deg/√s.
    pub sigma_q_deg: [f64; 3],
    pub radius: f64,
    pub half_height: f64,
    pub extension: f64,
    pub basis_size: usize,
    pub hyper: Hyperparameters,
    /// Defaults to the kernel length scale.
    pub delay_lengthscale: Option<f64>,
    pub neighbor_threshold: f64,
    pub resample_fraction: f64,
    pub parallel: bool,
}

impl Default for SlamSection {
    fn default() -> Self {
        let d = SlamConfig::default();
        Self {
            particles: d.particles,
            sigma_p: DEFAULT_SIGMA_P,
            sigma_q_deg: DEFAULT_SIGMA_Q_DEG,
            radius: d.radius,
            half_height: d.half_height,
            extension: d.extension,
            basis_size: d.basis_size,
            hyper: d.hyper,
            delay_lengthscale: None,
            neighbor_threshold: d.neighbor_threshold,
            resample_fraction: d.resample_fraction,
            parallel: d.parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    /// Lattice step of the hexagon eigenproblem, metres.
    pub step: f64,
    /// Hexagon modes solved for the candidate pool.
    pub hex_modes: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        let d = BasisSpec::default();
        Self {
            step: d.step,
            hex_modes: d.hex_modes,
        }
    }
}

/// Simulator settings. Trajectory fields left out keep the preset of the
/// chosen kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub trajectory: Option<TrajectoryKind>,
    pub extents: Option<[f64; 3]>,
    pub laps: Option<u32>,
    pub speed: Option<f64>,
    pub sample_rate: Option<f64>,
    pub dipole_density: f64,
    /// Along-path anomaly RMS per component, μT; 0 keeps raw dipoles.
    pub anomaly_rms: f64,
    pub mag_noise_sd: f64,
    pub jumps: Vec<PositionJump>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            trajectory: None,
            extents: None,
            laps: None,
            speed: None,
            sample_rate: None,
            dipole_density: 0.15,
            anomaly_rms: default_anomaly_rms(),
            mag_noise_sd: 1.0,
            jumps: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    /// Height of the exported map plane, metres.
    pub z0: f64,
    /// Lattice step of the exported map, metres.
    pub step: f64,
    pub channel: Channel,
    /// Fade uncertain map cells toward white.
    pub uncertainty_alpha: bool,
    /// Seconds of log time between map snapshots during a run.
    pub snapshot_every: Option<f64>,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self {
            z0: 0.0,
            step: 0.25,
            channel: Channel::Norm,
            uncertainty_alpha: true,
            snapshot_every: None,
        }
    }
}

/// File locations. Relative paths resolve against the config file's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Cache directory, or a `.bin` file to use as is.
    pub basis_cache: PathBuf,
    pub log: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            basis_cache: "basis-cache".into(),
            log: "log.csv".into(),
            out_dir: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and anchors its relative paths at its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.paths.basis_cache, &mut config.paths.log, &mut config.paths.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn slam_config(&self) -> Result<SlamConfig> {
        let s = &self.slam;
        let config = SlamConfig {
            particles: s.particles,
            sigma_p: Matrix3::from_diagonal(&Vector3::from(s.sigma_p)),
            sigma_q: sigma_q_from_degrees(s.sigma_q_deg),
            radius: s.radius,
            half_height: s.half_height,
            extension: s.extension,
            basis_size: s.basis_size,
            hyper: s.hyper,
            delay_lengthscale: s.delay_lengthscale.unwrap_or(s.hyper.ell),
            neighbor_threshold: s.neighbor_threshold,
            resample_fraction: s.resample_fraction,
            rng_seed: self.seed,
            parallel: s.parallel,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn basis_spec(&self) -> BasisSpec {
        BasisSpec {
            radius: self.slam.radius,
            half_height: self.slam.half_height,
            extension: self.slam.extension,
            step: self.basis.step,
            hex_modes: self.basis.hex_modes,
            m: self.slam.basis_size,
        }
    }

    /// The simulated experiment; `kind` overrides the configured trajectory.
    pub fn scenario(&self, kind: Option<TrajectoryKind>) -> Result<Scenario> {
        let sc = &self.scenario;
        let kind = kind
            .or(sc.trajectory)
            .ok_or_else(|| Error::Config("no scenario trajectory given".into()))?;
        let mut trajectory = match kind {
            TrajectoryKind::SquareLoop => TrajectorySpec::square_loop(),
            TrajectoryKind::Stair3d => TrajectorySpec::stair_3d(),
            TrajectoryKind::RandomWalk => TrajectorySpec::random_walk(self.seed),
        };
        trajectory.seed = self.seed;
        trajectory.extents = sc.extents.unwrap_or(trajectory.extents);
        trajectory.laps = sc.laps.unwrap_or(trajectory.laps);
        trajectory.speed = sc.speed.unwrap_or(trajectory.speed);
        trajectory.sample_rate = sc.sample_rate.unwrap_or(trajectory.sample_rate);
        let mut scenario = Scenario::new(trajectory, self.seed);
        scenario.dipole_density = sc.dipole_density;
        scenario.anomaly_rms = (sc.anomaly_rms > 0.0).then_some(sc.anomaly_rms);
        scenario.mag_noise_sd = sc.mag_noise_sd;
        scenario.jumps = sc.jumps.clone();
        scenario.odometry = OdometryNoise {
            sigma_p: Matrix3::from_diagonal(&Vector3::from(self.slam.sigma_p)),
            sigma_q: sigma_q_from_degrees(self.slam.sigma_q_deg),
        };
        Ok(scenario)
    }
}

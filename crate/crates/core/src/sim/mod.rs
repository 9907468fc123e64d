//! Synthetic worlds, scripted walks and noisy sensor logs with known ground
//! truth.

mod scenario;
mod synth;
mod trajectory;
mod world;

pub use scenario::{default_anomaly_rms, simulate, Scenario, Simulation};
pub use synth::{dead_reckon, synthesize_log, OdometryNoise, PositionJump};
pub use trajectory::{generate_trajectory, TrajectoryKind, TrajectorySpec, TruthSample, LOOP_CORNER_RADIUS};
pub use world::{Dipole, DipoleLayout, WorldField, DEFAULT_EARTH, DIPOLE_CLEARANCE};

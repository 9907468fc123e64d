//! Simulates each trajectory preset over its own dipole world, writes the
//! sensor logs with their ground-truth sidecars, and reads them back.
//!
//! ```text
//! cargo run --release --example simulate_world -- [out_dir]
//! ```

use std::path::PathBuf;

use magslam::geom::Pose;
use magslam::io::{read_log, read_truth, truth_path_for, write_log, write_truth};
use magslam::sim::{dead_reckon, simulate, Scenario, TrajectorySpec};

fn main() -> magslam::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sim-out".into()));
    for trajectory in [TrajectorySpec::square_loop(), TrajectorySpec::stair_3d(), TrajectorySpec::random_walk(7)] {
        let sim = simulate(&Scenario::new(trajectory, 7))?;
        let name = format!("{:?}", trajectory.kind).to_lowercase();
        let log = dir.join(format!("{name}.csv"));
        write_log(&log, &sim.log)?;
        write_truth(&truth_path_for(&log), &sim.log, &sim.truth)?;
        let back = read_log(&log)?;
        assert_eq!(back.records, sim.log);
        assert_eq!(read_truth(&truth_path_for(&log))?.truth, sim.truth);

        let anomaly: f64 = sim
            .truth
            .iter()
            .map(|s| (sim.world.eval_field(&s.pose.position).unwrap() - sim.world.earth).norm_squared())
            .sum::<f64>()
            / sim.truth.len() as f64;
        let dr = dead_reckon(&sim.log, Pose::identity());
        let drift = (dr.last().unwrap().position - sim.truth.last().unwrap().pose.position).norm();
        println!(
            "{name:12} {:5} records over {:6.1} s, {:3} dipoles, anomaly RMS {:5.1} μT, dead-reckoning drift {drift:.2} m -> {}",
            sim.log.len(),
            sim.log.last().unwrap().t,
            sim.world.dipoles.len(),
            (anomaly / 3.0).sqrt(),
            log.display()
        );
    }
    Ok(())
}

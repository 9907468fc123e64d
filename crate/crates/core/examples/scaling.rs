//! Times the filter against particle count and against the number of tiles
//! a walk creates, and checks the memory estimate in the run summary.
//!
//! ```text
//! cargo run --release --example scaling
//! ```

use std::sync::Arc;
use std::time::Instant;

use magslam::eigen::BasisSpec;
use magslam::io::{RunStatus, RunSummary};
use magslam::sim::{simulate, Scenario, TrajectorySpec};
use magslam::slam::{run, RunOutput, SlamConfig};

fn timed(log: &[magslam::record::StepRecord], config: &SlamConfig, basis: &Arc<magslam::eigen::Basis3D>) -> (RunOutput, f64) {
    let start = Instant::now();
    let out = run(log, config, basis.clone()).expect("filter run");
    (out, start.elapsed().as_secs_f64())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BasisSpec { m: 64, hex_modes: 40, ..BasisSpec::default() };
    let basis = Arc::new(spec.build()?);
    let config = SlamConfig { basis_size: 64, ..SlamConfig::default() };

    let sim = simulate(&Scenario::new(TrajectorySpec::square_loop(), 0))?;
    let mut times = Vec::new();
    for particles in [100, 200] {
        let (_, secs) = timed(&sim.log, &SlamConfig { particles, ..config.clone() }, &basis);
        println!("{particles} particles: {secs:.2} s for {} steps", sim.log.len());
        times.push(secs);
    }
    println!("runtime ratio 200/100 particles: {:.2}", times[1] / times[0]);

    // One lap around ever larger rectangles.
    let mut points = Vec::new();
    for [w, d] in [[20.0, 10.0], [35.0, 18.0], [50.0, 26.0], [64.0, 34.0]] {
        let mut trajectory = TrajectorySpec::square_loop();
        trajectory.extents = [w, d, 0.0];
        trajectory.laps = 1;
        let sim = simulate(&Scenario::new(trajectory, 1))?;
        let cfg = SlamConfig { particles: 20, ..config.clone() };
        let (out, secs) = timed(&sim.log, &cfg, &basis);
        let summary = RunSummary::new(&out, RunStatus::Complete, &cfg.grid()?, basis.state_dim(), secs, None, 0);
        println!(
            "{w} × {d} m loop: {} tiles, {secs:.2} s, memory estimate {} entries, stored {} ({:+.1}%)",
            summary.tiles_best,
            summary.memory_estimate,
            summary.stored_map_values,
            100.0 * (summary.stored_map_values as f64 / summary.memory_estimate as f64 - 1.0)
        );
        points.push((summary.tiles_best as f64, secs));
    }
    let (first, last) = (points[0], points[points.len() - 1]);
    println!(
        "runtime exponent in tile count: {:.2}",
        (last.1 / first.1).ln() / (last.0 / first.0).ln()
    );
    Ok(())
}

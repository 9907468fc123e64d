//! Walks three laps of a 20 × 5 m loop over a synthetic dipole world and
//! compares the filter's final position error with plain dead reckoning.
//!
//! ```text
//! cargo run --release --example loop_closure_slam -- [seeds] [particles]
//! ```

use std::sync::Arc;
use std::time::Instant;

use magslam::eigen::BasisSpec;
use magslam::geom::Pose;
use magslam::sim::{dead_reckon, simulate, Scenario, TrajectorySpec};
use magslam::slam::{run, SlamConfig};

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let particles: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);

    let spec = BasisSpec { m: 64, hex_modes: 40, ..BasisSpec::default() };
    let basis = Arc::new(spec.build()?);
    let config = SlamConfig { basis_size: 64, particles, ..SlamConfig::default() };

    let (mut slam_err, mut dr_err) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let sim = simulate(&Scenario::new(TrajectorySpec::square_loop(), seed))?;
        let truth_end = sim.truth.last().unwrap().pose.position;
        let dr_end = dead_reckon(&sim.log, Pose::identity()).last().unwrap().position;
        let start = Instant::now();
        let out = run(&sim.log, &SlamConfig { rng_seed: seed, ..config.clone() }, basis.clone())?;
        let est_end = out.final_pose().unwrap().position;
        let (e, d) = ((est_end - truth_end).norm(), (dr_end - truth_end).norm());
        println!(
            "seed {seed}: slam {e:.3} m, dead reckoning {d:.3} m, {} resamples, min ESS {:.1}, {} tiles, {:.1?}",
            out.diagnostics.resample_events,
            out.diagnostics.min_ess,
            out.maps.len(),
            start.elapsed()
        );
        slam_err.push(e);
        dr_err.push(d);
    }
    let (s, d) = (median(&mut slam_err), median(&mut dr_err));
    println!("median final error: slam {s:.3} m, dead reckoning {d:.3} m, ratio {:.2}", s / d);
    Ok(())
}

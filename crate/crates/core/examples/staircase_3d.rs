//! Climbs a staircase into the second layer of tiles and back down, then
//! reports which tile layers the filter mapped and how well the estimated
//! height follows the truth.
//!
//! ```text
//! cargo run --release --example staircase_3d -- [seeds] [particles]
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use magslam::cli::{align_to_start, evaluate};
use magslam::eigen::BasisSpec;
use magslam::sim::{simulate, Scenario, TrajectorySpec};
use magslam::slam::{run, SlamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let particles: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);

    let spec = BasisSpec { m: 64, hex_modes: 40, ..BasisSpec::default() };
    let basis = Arc::new(spec.build()?);

    for seed in 0..seeds {
        let sim = simulate(&Scenario::new(TrajectorySpec::stair_3d(), seed))?;
        let config = SlamConfig { basis_size: 64, particles, rng_seed: seed, ..SlamConfig::default() };
        let out = run(&sim.log, &config, basis.clone())?;

        let layers: BTreeSet<i32> = out.maps.keys().map(|t| t.k).collect();
        let start = sim.truth[0].pose;
        let z_rmse = (out
            .estimates
            .iter()
            .zip(&sim.truth)
            .map(|(e, s)| (align_to_start(&e.pose, &start).position.z - s.pose.position.z).powi(2))
            .sum::<f64>()
            / sim.truth.len() as f64)
            .sqrt();
        let poses: Vec<_> = out.estimates.iter().map(|e| e.pose).collect();
        let eval = evaluate(&poses, &sim.log, &sim.truth)?;
        let top = sim.truth.iter().map(|s| s.pose.position.z).fold(f64::MIN, f64::max);
        println!(
            "seed {seed}: top of stairs {top:.2} m, tile layers {layers:?}, height RMSE {z_rmse:.3} m, \
             position RMSE {:.3} m (dead reckoning {:.3} m)",
            eval.rmse_slam, eval.rmse_dead_reckoning
        );
    }
    Ok(())
}

//! Runs the filter over one lap of the loop, then exports the best
//! particle's map at walking height as a CSV grid and a PPM heatmap whose
//! unexplored areas fade to white.
//!
//! ```text
//! cargo run --release --example export_heatmap -- [out_dir]
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use magslam::eigen::BasisSpec;
use magslam::io::{export_map_grid, write_heatmap, write_map_grid, Channel, GridSpec};
use magslam::sim::{simulate, Scenario, TrajectorySpec};
use magslam::slam::{run, SlamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "heatmap-out".into()));
    let spec = BasisSpec { m: 64, hex_modes: 40, ..BasisSpec::default() };
    let basis = Arc::new(spec.build()?);
    let config = SlamConfig { basis_size: 64, particles: 50, ..SlamConfig::default() };

    let mut trajectory = TrajectorySpec::square_loop();
    trajectory.laps = 1;
    let sim = simulate(&Scenario::new(trajectory, 2))?;
    let out = run(&sim.log, &config, basis.clone())?;
    println!("{} steps, best particle holds {} tiles", out.estimates.len(), out.maps.len());

    let grid = export_map_grid(&out.maps, &basis, &config.grid()?, &GridSpec { z0: 0.0, step: 0.1 })?;
    let (lo, hi) = grid.points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), g| (lo.min(g.norm()), hi.max(g.norm())));
    println!("{} map points, |B| from {lo:.1} to {hi:.1} μT", grid.points.len());
    write_map_grid(&dir.join("map_grid.csv"), &grid)?;
    for channel in [Channel::Norm, Channel::Z] {
        let path = dir.join(format!("map_{channel:?}.ppm").to_lowercase());
        write_heatmap(&path, &grid, channel, true)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

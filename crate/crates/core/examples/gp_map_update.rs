//! Learns one tile's magnetic map from a walk through a dipole field with
//! known pose, and shows the prediction error and uncertainty shrinking as
//! readings arrive.
//!
//! ```text
//! cargo run --release --example gp_map_update
//! ```

use magslam::eigen::BasisSpec;
use magslam::geom::Quaternion;
use magslam::gpmap::{measurement_matrix, Hyperparameters, TileMap};
use magslam::sim::{Dipole, WorldField, DEFAULT_EARTH};
use nalgebra::Vector3;

fn main() -> magslam::Result<()> {
    let spec = BasisSpec { m: 64, hex_modes: 40, ..BasisSpec::default() };
    let basis = spec.build()?;
    let hyper = Hyperparameters::default();
    let mut world = WorldField::earth_only(DEFAULT_EARTH);
    world.dipoles.push(Dipole { position: Vector3::new(1.0, 0.5, -2.5), moment: Vector3::new(0.0, 40.0, 120.0) });
    world.dipoles.push(Dipole { position: Vector3::new(-2.0, -1.0, -2.2), moment: Vector3::new(60.0, 0.0, -90.0) });

    // A figure of eight through the tile at hip height.
    let path: Vec<Vector3<f64>> = (0..400)
        .map(|k| {
            let u = k as f64 / 400.0 * std::f64::consts::TAU;
            Vector3::new(3.0 * u.sin(), 1.5 * (2.0 * u).sin(), 0.0)
        })
        .collect();
    let probes: Vec<Vector3<f64>> = (0..50)
        .map(|k| {
            let u = (k as f64 + 0.5) / 50.0 * std::f64::consts::TAU;
            Vector3::new(2.7 * u.sin(), 1.2 * (2.0 * u).sin(), 0.1)
        })
        .collect();

    let mut map = TileMap::prior(&basis, &hyper);
    let report = |map: &TileMap, seen: usize| -> magslam::Result<()> {
        let (mut err, mut std) = (0.0, 0.0);
        for p in &probes {
            let (mean, cov) = map.predict_field(&basis.eval_nabla_phi(p)?);
            err += (mean - world.eval_field(p)?).norm_squared();
            std += cov.trace() / 3.0;
        }
        let n = probes.len() as f64;
        println!("{seen:4} readings: field RMSE {:7.3} μT, mean marginal std {:7.3} μT", (err / n).sqrt(), (std / n).sqrt());
        Ok(())
    };
    report(&map, 0)?;
    for (k, p) in path.iter().enumerate() {
        // The sensor yaws along the path; readings are in its body frame.
        let q = Quaternion::from_yaw(0.01 * k as f64);
        let r_bw = q.to_rotation_matrix().transpose();
        let y = r_bw * world.eval_field(p)?;
        map.kalman_update(&measurement_matrix(&basis.eval_nabla_phi(p)?, &r_bw), &y, &hyper)?;
        if [9, 49, 149, 399].contains(&k) {
            report(&map, k + 1)?;
        }
    }
    Ok(())
}

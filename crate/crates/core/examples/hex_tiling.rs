//! Tiles space into hexagonal prisms and follows a short walk from tile to
//! tile, printing each tile entered and how close the walker is to the
//! nearest face.
//!
//! ```text
//! cargo run --example hex_tiling
//! ```

use magslam::geom::{HexGridSpec, TileId};
use nalgebra::Vector3;

fn main() -> magslam::Result<()> {
    let grid = HexGridSpec::new(5.0, 2.0)?;
    println!(
        "r = {} m, inradius {:.3} m, height {} m, tile volume {:.1} m³",
        grid.radius,
        grid.inradius(),
        2.0 * grid.half_height,
        grid.tile_volume()
    );

    let origin = TileId::default();
    println!("edge neighbours of {origin}:");
    for t in grid.edge_neighbors(origin) {
        let c = grid.tile_center(t);
        println!("  {t} centred at ({:6.2}, {:6.2}, {:5.2})", c.x, c.y, c.z);
    }

    // North-east, then up a ramp into the next layer.
    let mut current = None;
    for k in 0..=160 {
        let s = k as f64 * 0.1;
        let p = Vector3::new(0.8 * s, 0.5 * s, (s - 8.0).max(0.0) * 0.6);
        let t = grid.point_to_tile(&p);
        if current != Some(t) {
            let d = grid.boundary_distance(&p, t)?;
            let near = grid.tile_neighbors(t, &p, 0.1);
            println!(
                "s = {s:4.1} m at ({:5.2}, {:5.2}, {:4.2}): enter {t}, {d:.2} m from a face, near {near:?}",
                p.x, p.y, p.z
            );
            current = Some(t);
        }
    }
    Ok(())
}

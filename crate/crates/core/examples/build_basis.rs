//! Solves the default tile eigenbasis and prints its spectrum.
//!
//! ```text
//! cargo run --release --example build_basis
//! ```

use std::time::Instant;

use magslam::eigen::BasisSpec;

fn main() -> magslam::Result<()> {
    let spec = BasisSpec::default();
    let start = Instant::now();
    let basis = spec.build()?;
    println!(
        "hexagon r = {} m (extended {} m), half-height {} m (extended {} m), step {} m",
        spec.radius,
        spec.extended_radius(),
        spec.half_height,
        spec.extended_half_height(),
        spec.step
    );
    println!("solved {} hexagon modes and kept {} prism modes in {:.2?}", spec.hex_modes, basis.len(), start.elapsed());

    let hex = basis.hex().eigenvalues();
    println!("first hexagon eigenvalues: {:.5?}", &hex[..6]);
    println!("largest n1 used: {}", basis.index_pairs().iter().map(|p| p.0).max().unwrap_or(0));
    println!("largest n2 used: {}", basis.index_pairs().iter().map(|p| p.1).max().unwrap_or(0));
    for (j, (&(n1, n2), l2)) in basis.index_pairs().iter().zip(basis.eigenvalues()).enumerate().step_by(32) {
        println!("  j = {j:3}  (n1, n2) = ({n1:2}, {n2:2})  λ² = {l2:.5}");
    }
    Ok(())
}

//! Compares the reduced-rank squared-exponential kernel of the default tile
//! basis with the exact kernel at random point pairs inside the tile.
//!
//! ```text
//! cargo run --release --example kernel_fidelity
//! ```

use magslam::eigen::BasisSpec;
use magslam::gpmap::{kernel_se, spectral_density_se, Hyperparameters};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> magslam::Result<()> {
    let spec = BasisSpec::default();
    let hyper = Hyperparameters::default();
    let basis = spec.build()?;
    let weights: Vec<f64> = basis.eigenvalues().iter().map(|&l2| spectral_density_se(l2, &hyper)).collect();
    let hexagon = magslam::geom::Hexagon::new(spec.radius)?;
    let margin = 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sample = || loop {
        let p = Vector3::new(
            rng.random_range(-spec.radius..spec.radius),
            rng.random_range(-spec.radius..spec.radius),
            rng.random_range(-(spec.half_height - margin)..=spec.half_height - margin),
        );
        if hexagon.signed_distance(&p.xy()) >= margin {
            return p;
        }
    };
    let (mut worst, mut sum) = (0.0f64, 0.0);
    let pairs = 2000;
    for _ in 0..pairs {
        let (p, q) = (sample(), sample());
        let (fp, _) = basis.eval(&p)?;
        let (fq, _) = basis.eval(&q)?;
        let approx: f64 = weights.iter().zip(fp.iter().zip(fq.iter())).map(|(s, (a, b))| s * a * b).sum();
        let err = (approx - kernel_se(&p, &q, &hyper)).abs();
        worst = worst.max(err);
        sum += err;
    }
    println!("{pairs} pairs: max |error| = {worst:.3} μT², mean = {:.3} μT² (limit {:.1})", sum / pairs as f64, 0.05 * hyper.sigma2_se);
    Ok(())
}

//! Property checks shared by the invariant suite and the acceptance run.

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use magslam::eigen::{Basis3D, BasisSpec};
use magslam::geom::{quat_exp, quat_multiply, quat_to_rotmat, HexGridSpec, Hexagon, Pose, Quaternion, TileId};
use magslam::gpmap::{measurement_matrix, spectral_density_se, Hyperparameters, TileMap};
use magslam::record::StepRecord;
use magslam::sim::{simulate, Scenario, TrajectorySpec};
use magslam::slam::{
    apply_log_likelihoods, flush_all, maybe_resample, point_estimate, propagate, run, systematic_ancestors,
    MapModel, Particle, PendingEntry, ProcessNoise, SlamConfig, VisitState,
};
use nalgebra::{DVector, Matrix3, Vector3};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), TestCaseError>;

/// Cases for properties that only exercise arithmetic.
pub const ALGEBRAIC_CASES: u32 = 10_000;

pub fn small_basis() -> &'static Arc<Basis3D> {
    static BASIS: OnceLock<Arc<Basis3D>> = OnceLock::new();
    BASIS.get_or_init(|| {
        let spec = BasisSpec { step: 0.25, hex_modes: 12, m: 16, ..BasisSpec::default() };
        Arc::new(spec.build().unwrap())
    })
}

/// The desk-scale basis: 64 functions on the default tile.
pub fn desk_basis() -> &'static Arc<Basis3D> {
    static BASIS: OnceLock<Arc<Basis3D>> = OnceLock::new();
    BASIS.get_or_init(|| Arc::new(BasisSpec { m: 64, hex_modes: 40, ..BasisSpec::default() }.build().unwrap()))
}

pub fn model() -> MapModel {
    let grid = HexGridSpec::new(5.0, 2.0).unwrap();
    MapModel::new(small_basis().clone(), grid, Hyperparameters::default(), 1.3, 0.1)
}

pub fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

pub fn unit_quaternion() -> impl Strategy<Value = Quaternion> {
    vec3(4.0).prop_map(|v| quat_exp(&v).unwrap())
}

fn is_unit(q: &Quaternion) -> bool {
    (q.norm() - 1.0).abs() < 1e-9
}

pub fn quaternion_inputs() -> impl Strategy<Value = (Quaternion, Quaternion, Vector3<f64>)> {
    (unit_quaternion(), unit_quaternion(), vec3(10.0))
}

pub fn check_quaternions((a, b, v): (Quaternion, Quaternion, Vector3<f64>)) -> Check {
    prop_assert!(is_unit(&quat_exp(&v).unwrap()));
    let ab = quat_multiply(&a, &b).unwrap();
    prop_assert!(is_unit(&ab));
    let r = quat_to_rotmat(&ab);
    prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
    prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    // The product rotates like the matrix product.
    prop_assert!((r - quat_to_rotmat(&a) * quat_to_rotmat(&b)).amax() < 1e-12);
    Ok(())
}

pub type PropagationInput = (Quaternion, Quaternion, Vector3<f64>, f64, u64);

pub fn propagation_inputs() -> impl Strategy<Value = PropagationInput> {
    (unit_quaternion(), unit_quaternion(), vec3(1.0), 0.01f64..2.0, any::<u64>())
}

pub fn check_propagation((q, dq, dp, dt, seed): PropagationInput) -> Check {
    let mut particle = Particle::new(Pose::new(Vector3::zeros(), q), 0.0);
    let step = StepRecord { t: 0.0, dt, dp, dq, mag: Vector3::zeros() };
    let noise = ProcessNoise {
        sqrt_p: Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, 0.02)),
        sqrt_q: Matrix3::from_diagonal_element(0.05),
    };
    propagate(&mut particle, &step, &noise, &mut ChaCha8Rng::seed_from_u64(seed));
    prop_assert!(is_unit(&particle.pose.orientation));
    prop_assert!(particle.pose.position.iter().all(|v| v.is_finite()));
    Ok(())
}

pub fn weight_inputs() -> impl Strategy<Value = (Vec<f64>, f64, u64)> {
    (prop::collection::vec(-300.0f64..50.0, 1..64), 0.0f64..=1.0, any::<u64>())
}

/// Weighting and resampling keep the weights on the simplex.
pub fn check_weights((lls, revisiting, seed): (Vec<f64>, f64, u64)) -> Check {
    let n = lls.len();
    let mut particles: Vec<Particle> = (0..n)
        .map(|i| {
            let tile = TileId::new(i as i32, 0, 0);
            let mut p = Particle::new(Pose::identity(), -(n as f64).ln());
            p.current_tile = Some(tile);
            let state = if (i as f64) < revisiting * n as f64 { VisitState::Revisiting } else { VisitState::Entered };
            p.visits.insert(tile, state);
            p
        })
        .collect();
    let ess = apply_log_likelihoods(&mut particles, &lls, 0.0).unwrap();
    let total: f64 = particles.iter().map(Particle::weight).sum();
    prop_assert!((total - 1.0).abs() < 1e-12);
    prop_assert!(particles.iter().all(|p| p.weight() >= 0.0));
    prop_assert!((1.0 - 1e-9..=n as f64 * (1.0 + 1e-9)).contains(&ess));

    // The argmax does not move when every weight is scaled.
    let best = point_estimate(&particles);
    let mut shifted = particles.clone();
    shifted.iter_mut().for_each(|p| p.log_weight += 3.7);
    prop_assert_eq!(point_estimate(&shifted), best);

    maybe_resample(&mut particles, 0.9, &mut ChaCha8Rng::seed_from_u64(seed));
    let total: f64 = particles.iter().map(Particle::weight).sum();
    prop_assert_eq!(particles.len(), n);
    prop_assert!((total - 1.0).abs() < 1e-12);
    prop_assert!(particles.iter().all(|p| p.weight() >= 0.0));
    Ok(())
}

pub fn systematic_inputs() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(0.0f64..1.0, 1..64), 0.0f64..1.0)
}

pub fn check_systematic((raw, u): (Vec<f64>, f64)) -> Check {
    let total: f64 = raw.iter().sum();
    if total < 1e-6 {
        return Ok(());
    }
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let n = w.len();
    let ancestors = systematic_ancestors(&w, u);
    prop_assert_eq!(ancestors.len(), n);
    for (i, wi) in w.iter().enumerate() {
        let count = ancestors.iter().filter(|&&a| a == i).count() as f64;
        let expect = wi * n as f64;
        prop_assert!((count - expect).abs() < 1.0 + 1e-9, "particle {} count {} expected {}", i, count, expect);
    }
    Ok(())
}

pub type TileInput = (i32, i32, i32, f64, f64, f64);

pub fn tile_inputs() -> impl Strategy<Value = TileInput> {
    (-50i32..50, -50i32..50, -5i32..5, 0.0f64..0.99, 0.0f64..std::f64::consts::TAU, -0.99f64..0.99)
}

pub fn check_tile_round_trip((a, b, k, radius, angle, dz): TileInput) -> Check {
    let grid = HexGridSpec::new(5.0, 2.0).unwrap();
    let t = TileId::new(a, b, k);
    let centre = grid.tile_center(t);
    prop_assert_eq!(grid.point_to_tile(&centre), t);
    // Anything inside the inscribed cylinder belongs to the same tile.
    let r = radius * grid.inradius();
    let p = centre + Vector3::new(r * angle.cos(), r * angle.sin(), dz * grid.half_height);
    prop_assert_eq!(grid.point_to_tile(&p), t);
    Ok(())
}

pub type KalmanInput = (Vec<(Vector3<f64>, Vector3<f64>, Quaternion)>, f64);

pub fn kalman_inputs() -> impl Strategy<Value = KalmanInput> {
    (prop::collection::vec((vec3(4.0), vec3(40.0), unit_quaternion()), 1..4), -1.9f64..1.9)
}

/// Covariances stay symmetric PSD and their traces fall with every update.
pub fn check_kalman((points, z): KalmanInput) -> Check {
    let hyper = Hyperparameters::default();
    let basis = small_basis();
    let mut map = TileMap::prior(basis, &hyper);
    let mut trace = map.cov.trace();
    for (p, y, q) in points {
        let p = Vector3::new(p.x * 0.7, p.y * 0.7, z);
        let c = measurement_matrix(&basis.eval_nabla_phi(&p).unwrap(), &quat_to_rotmat(&q).transpose());
        map.kalman_update(&c, &y, &hyper).unwrap();
        let next = map.cov.trace();
        prop_assert!(next < trace);
        trace = next;
        prop_assert!((&map.cov - map.cov.transpose()).amax() < 1e-9);
        prop_assert!(map.cov.clone().symmetric_eigenvalues().min() >= -1e-8 * trace);
        prop_assert!(map.mean.iter().all(|v| v.is_finite()));
        let (_, s) = map.predict_field(&basis.eval_nabla_phi(&p).unwrap());
        prop_assert!(s.symmetric_eigenvalues().min() >= -1e-8 * s.trace());
    }
    Ok(())
}

pub fn flush_inputs() -> impl Strategy<Value = ([f64; 2], f64, Vector3<f64>)> {
    (prop::array::uniform2(-9.0f64..9.0), -1.99f64..1.99, vec3(50.0))
}

/// A reading changes its home tile and the neighbours it is close to,
/// and nothing else.
pub fn check_tile_independence((offset, z, y): ([f64; 2], f64, Vector3<f64>)) -> Check {
    let model = model();
    let mut particle = Particle::new(Pose::identity(), 0.0);
    for a in -2..=2 {
        for b in -2..=2 {
            particle.maps.insert(TileId::new(a, b, 0), model.prior.clone());
        }
    }
    let before = particle.maps.clone();
    let position = Vector3::new(offset[0], offset[1], z);
    particle.pending.push_back(PendingEntry { position, r_bw: Matrix3::identity(), y, path_length: 0.0 });
    flush_all(&mut particle, &model).unwrap();

    let home = model.grid.point_to_tile(&position);
    let mut allowed = model.grid.tile_neighbors(home, &position, model.neighbor_threshold);
    allowed.push(home);
    for (tile, map) in &particle.maps {
        if allowed.contains(tile) {
            prop_assert!(!Arc::ptr_eq(map, &before[tile]), "tile {} was not updated", tile);
        } else {
            prop_assert!(Arc::ptr_eq(map, &before[tile]), "tile {} changed", tile);
        }
    }
    prop_assert_eq!(particle.maps.len(), before.len());
    Ok(())
}

pub fn curl_inputs() -> impl Strategy<Value = u64> {
    any::<u64>()
}

/// A field drawn from the map prior has negligible numerical curl at a
/// random interior point.
pub fn check_curl_free(seed: u64) -> Check {
    let basis = desk_basis();
    let hyper = Hyperparameters::default();
    let hex = Hexagon::new(basis.extended_radius()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd: Vec<f64> = std::iter::repeat_n(hyper.sigma2_lin, 3)
        .chain(basis.eigenvalues().iter().map(|&l| spectral_density_se(l, &hyper)))
        .map(f64::sqrt)
        .collect();
    let m = DVector::from_iterator(sd.len(), sd.iter().map(|s| s * rng.random_range(-1.0..1.0)));
    let field = |p: Vector3<f64>| basis.eval_nabla_phi(&p).unwrap() * &m;
    // At least two lattice steps inside the extended prism.
    let margin = 0.2;
    let height = basis.extended_half_height() - margin;
    let r = basis.extended_radius();
    let p = loop {
        let p = Vector3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-height..height));
        if hex.signed_distance(&p.xy()) >= margin {
            break p;
        }
    };
    let d = 1e-3;
    let partial = |axis: usize| {
        let e = Vector3::ith(axis, d);
        (field(p + e) - field(p - e)) / (2.0 * d)
    };
    let (dx, dy, dz) = (partial(0), partial(1), partial(2));
    let curl = Vector3::new(dy.z - dz.y, dz.x - dx.z, dx.y - dy.x);
    let f = field(p);
    prop_assert!(curl.norm() < 1e-2 * f.norm(), "curl {} vs field {} at {:?}", curl.norm(), f.norm(), p);
    Ok(())
}

fn short_loop() -> &'static Vec<StepRecord> {
    static LOG: OnceLock<Vec<StepRecord>> = OnceLock::new();
    LOG.get_or_init(|| {
        let mut trajectory = TrajectorySpec::square_loop();
        trajectory.extents = [8.0, 4.0, 0.0];
        trajectory.laps = 1;
        simulate(&Scenario::new(trajectory, 5)).unwrap().log
    })
}

pub fn determinism_inputs() -> impl Strategy<Value = (u64, bool)> {
    (any::<u64>(), any::<bool>())
}

/// Same seed, same run, whether or not the particles are processed in
/// parallel.
pub fn check_determinism((seed, parallel): (u64, bool)) -> Check {
    let config = SlamConfig { particles: 12, basis_size: 16, rng_seed: seed, parallel, ..SlamConfig::default() };
    let first = run(short_loop(), &config, small_basis().clone()).unwrap();
    let second = run(short_loop(), &SlamConfig { parallel: !parallel, ..config.clone() }, small_basis().clone()).unwrap();
    prop_assert_eq!(&first.estimates, &second.estimates);
    prop_assert_eq!(&first.maps, &second.maps);
    Ok(())
}

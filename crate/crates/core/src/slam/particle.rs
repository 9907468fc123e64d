use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eigen::Basis3D;
use crate::error::{Error, Result};
use crate::geom::{quat_exp, HexGridSpec, Pose, TileId};
use crate::gpmap::{measurement_matrix, Hyperparameters, TileMap};
use crate::record::StepRecord;

/// Where a particle stands with respect to a tile it has been in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VisitState {
    /// Inside for the first time.
    Entered,
    /// Been inside, now elsewhere.
    Left,
    /// Back inside after having left.
    Revisiting,
}

/// A reading waiting to be written into the map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendingEntry {
    pub position: Vector3<f64>,
    /// World-to-body rotation at the time of the reading.
    pub r_bw: Matrix3<f64>,
    pub y: Vector3<f64>,
    /// The particle's path length when the reading was taken.
    pub path_length: f64,
}

/// One pose-and-map hypothesis.
///
/// Maps are shared between copies made by resampling and cloned on first
/// write, which behaves exactly like a deep copy.
#[derive(Clone, Debug)]
pub struct Particle {
    pub pose: Pose,
    /// Log of the normalised importance weight.
    pub log_weight: f64,
    pub maps: BTreeMap<TileId, Arc<TileMap>>,
    pub pending: VecDeque<PendingEntry>,
    pub visits: BTreeMap<TileId, VisitState>,
    pub current_tile: Option<TileId>,
    /// Odometry distance travelled so far, metres. Measured on the logged
    /// increments, so every particle flushes the same readings each step.
    pub path_length: f64,
}

impl Particle {
    pub fn new(pose: Pose, log_weight: f64) -> Self {
        Self {
            pose,
            log_weight,
            maps: BTreeMap::new(),
            pending: VecDeque::new(),
            visits: BTreeMap::new(),
            current_tile: None,
            path_length: 0.0,
        }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn current_visit(&self) -> Option<VisitState> {
        self.current_tile.and_then(|t| self.visits.get(&t).copied())
    }

    /// Number of map values held, counting shared maps once per particle.
    pub fn stored_map_values(&self) -> usize {
        self.maps.values().map(|m| m.cov.len() + m.mean.len()).sum()
    }
}

/// Everything the per-particle map operations need besides the particle.
#[derive(Clone, Debug)]
pub struct MapModel {
    pub basis: Arc<Basis3D>,
    pub grid: HexGridSpec,
    pub hyper: Hyperparameters,
    pub prior: Arc<TileMap>,
    pub delay_lengthscale: f64,
    pub neighbor_threshold: f64,
}

impl MapModel {
    pub fn new(
        basis: Arc<Basis3D>,
        grid: HexGridSpec,
        hyper: Hyperparameters,
        delay_lengthscale: f64,
        neighbor_threshold: f64,
    ) -> Self {
        let prior = Arc::new(TileMap::prior(&basis, &hyper));
        Self {
            basis,
            grid,
            hyper,
            prior,
            delay_lengthscale,
            neighbor_threshold,
        }
    }
}

/// Process noise square roots, per second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessNoise {
    pub sqrt_p: Matrix3<f64>,
    pub sqrt_q: Matrix3<f64>,
}

/// `N_P` identical particles at the origin with uniform weights.
pub fn initialize(particles: usize) -> Result<Vec<Particle>> {
    if particles == 0 {
        return Err(Error::Config("at least one particle is required".into()));
    }
    let log_w = -(particles as f64).ln();
    Ok(vec![Particle::new(Pose::identity(), log_w); particles])
}

fn standard_normal3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::from_fn(|_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
}

/// Applies one odometry increment plus process noise:
/// `p ← p + Δp + ε_p`, `q ← Δq ⊙ q ⊙ exp(ε_q)`.
pub fn propagate<R: Rng + ?Sized>(particle: &mut Particle, step: &StepRecord, noise: &ProcessNoise, rng: &mut R) {
    let scale = step.dt.sqrt();
    let eps_p = noise.sqrt_p * standard_normal3(rng) * scale;
    let eps_q = noise.sqrt_q * standard_normal3(rng) * scale;
    particle.pose.position += step.dp + eps_p;
    particle.path_length += step.dp.norm();
    // The rotation vector is finite by construction, so exp cannot fail.
    let jitter = quat_exp(&eps_q).unwrap_or_default();
    particle.pose.orientation = step.dq.hamilton(&particle.pose.orientation).hamilton(&jitter).normalized();
}

/// Gives the particle a prior map for the tile it stands in if it has none,
/// and tracks entering, leaving and revisiting tiles.
pub fn create_tiles(particle: &mut Particle, model: &MapModel) {
    let tile = model.grid.point_to_tile(&particle.pose.position);
    if particle.current_tile == Some(tile) {
        return;
    }
    if let Some(prev) = particle.current_tile {
        particle.visits.insert(prev, VisitState::Left);
    }
    let state = if particle.maps.contains_key(&tile) {
        VisitState::Revisiting
    } else {
        particle.maps.insert(tile, model.prior.clone());
        VisitState::Entered
    };
    particle.visits.insert(tile, state);
    particle.current_tile = Some(tile);
}

/// Measurement matrix for a world position read through tile `t`, or `None`
/// when the position is outside that tile's basis domain.
fn tile_measurement(
    model: &MapModel,
    tile: TileId,
    position: &Vector3<f64>,
    r_bw: &Matrix3<f64>,
) -> Result<Option<nalgebra::Matrix3xX<f64>>> {
    let local = model.grid.to_local(position, tile);
    match model.basis.eval_nabla_phi(&local) {
        Ok(nabla) => Ok(Some(measurement_matrix(&nabla, r_bw))),
        Err(Error::OutsideDomain { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Log-likelihood of the step's reading under the particle's own map of the
/// tile it stands in.
pub fn measurement_log_likelihood(particle: &Particle, step: &StepRecord, model: &MapModel) -> Result<f64> {
    let tile = model.grid.point_to_tile(&particle.pose.position);
    let map = particle.maps.get(&tile).ok_or_else(|| {
        Error::InvalidInput(format!("particle has no map for tile {tile}; create_tiles must run first"))
    })?;
    let r_bw = particle.pose.world_to_body();
    let c = tile_measurement(model, tile, &particle.pose.position, &r_bw)?.ok_or(Error::OutsideDomain {
        point: particle.pose.position.into(),
        domain: "its own tile",
    })?;
    map.log_likelihood(&c, &step.mag, &model.hyper)
}

/// Adds per-particle log-likelihoods to the weights and renormalises.
/// Returns the effective sample size.
pub fn apply_log_likelihoods(particles: &mut [Particle], log_likelihoods: &[f64], t: f64) -> Result<f64> {
    for (p, ll) in particles.iter_mut().zip(log_likelihoods) {
        p.log_weight += ll;
    }
    let max = particles.iter().map(|p| p.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if !(max >= -700.0) {
        return Err(Error::Divergence { t, max_log_weight: max });
    }
    let total: f64 = particles.iter().map(|p| (p.log_weight - max).exp()).sum();
    let shift = max + total.ln();
    for p in particles.iter_mut() {
        p.log_weight -= shift;
    }
    Ok(effective_sample_size(particles))
}

/// `1 / Σ w²`.
pub fn effective_sample_size(particles: &[Particle]) -> f64 {
    1.0 / particles.iter().map(|p| p.weight().powi(2)).sum::<f64>()
}

/// Importance weighting: multiplies each weight by the likelihood of the
/// step's reading and normalises. Returns the effective sample size.
pub fn weight(particles: &mut [Particle], step: &StepRecord, model: &MapModel) -> Result<f64> {
    let lls = particles
        .iter()
        .map(|p| measurement_log_likelihood(p, step, model))
        .collect::<Result<Vec<_>>>()?;
    apply_log_likelihoods(particles, &lls, step.t)
}

/// Systematic resampling ancestors for normalised `weights`, one uniform
/// draw `u ∈ [0, 1)`. Ancestors come out grouped, heaviest first (stable in
/// index), so the first particle is a copy of the best one.
pub fn systematic_ancestors(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    let mut i = 0;
    for j in 0..n {
        let target = (u + j as f64) / n as f64 * total;
        while i + 1 < n && cumulative + weights[i] <= target {
            cumulative += weights[i];
            i += 1;
        }
        out.push(i);
    }
    out.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    out
}

/// Resamples the whole population when at least `fraction` of the particles
/// are revisiting a tile. Returns whether it did.
pub fn maybe_resample<R: Rng + ?Sized>(particles: &mut Vec<Particle>, fraction: f64, rng: &mut R) -> bool {
    let n = particles.len();
    let revisiting = particles
        .iter()
        .filter(|p| p.current_visit() == Some(VisitState::Revisiting))
        .count();
    if (revisiting as f64) < fraction * n as f64 {
        return false;
    }
    let weights: Vec<f64> = particles.iter().map(Particle::weight).collect();
    let ancestors = systematic_ancestors(&weights, rng.random::<f64>());
    let log_w = -(n as f64).ln();
    *particles = ancestors
        .into_iter()
        .map(|a| {
            let mut p = particles[a].clone();
            p.log_weight = log_w;
            p
        })
        .collect();
    true
}

/// Outcome of [`update_maps`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlushStats {
    /// Readings written into the map.
    pub flushed: usize,
    /// Kalman updates applied, neighbours included.
    pub updates: usize,
    /// Readings discarded because they fell outside their tile's domain.
    pub dropped: usize,
}

impl std::ops::AddAssign for FlushStats {
    fn add_assign(&mut self, o: Self) {
        self.flushed += o.flushed;
        self.updates += o.updates;
        self.dropped += o.dropped;
    }
}

/// Writes one reading into the tile containing it and every existing
/// neighbour tile whose shared face is within the threshold.
fn flush_entry(particle: &mut Particle, entry: &PendingEntry, model: &MapModel, stats: &mut FlushStats) -> Result<()> {
    let home = model.grid.point_to_tile(&entry.position);
    let mut targets = vec![home];
    targets.extend(model.grid.tile_neighbors(home, &entry.position, model.neighbor_threshold));
    let mut written = false;
    for tile in targets {
        let Some(map) = particle.maps.get_mut(&tile) else {
            continue;
        };
        let Some(c) = tile_measurement(model, tile, &entry.position, &entry.r_bw)? else {
            continue;
        };
        Arc::make_mut(map).kalman_update(&c, &entry.y, &model.hyper)?;
        stats.updates += 1;
        written |= tile == home;
    }
    if written {
        stats.flushed += 1;
    } else {
        stats.dropped += 1;
    }
    Ok(())
}

/// Queues the step's reading and writes into the map every queued reading
/// taken more than the delay length ago along the particle's path.
pub fn update_maps(particle: &mut Particle, step: &StepRecord, model: &MapModel) -> Result<FlushStats> {
    particle.pending.push_back(PendingEntry {
        position: particle.pose.position,
        r_bw: particle.pose.world_to_body(),
        y: step.mag,
        path_length: particle.path_length,
    });
    let mut stats = FlushStats::default();
    while let Some(front) = particle.pending.front().copied() {
        if particle.path_length - front.path_length <= model.delay_lengthscale {
            break;
        }
        particle.pending.pop_front();
        flush_entry(particle, &front, model, &mut stats)?;
    }
    Ok(stats)
}

/// Writes every queued reading into the map regardless of the delay.
pub fn flush_all(particle: &mut Particle, model: &MapModel) -> Result<FlushStats> {
    let mut stats = FlushStats::default();
    while let Some(front) = particle.pending.pop_front() {
        flush_entry(particle, &front, model, &mut stats)?;
    }
    Ok(stats)
}

/// Index of the highest-weight particle, lowest index on ties.
pub fn point_estimate(particles: &[Particle]) -> usize {
    let mut best = 0;
    for (i, p) in particles.iter().enumerate().skip(1) {
        if p.log_weight > particles[best].log_weight {
            best = i;
        }
    }
    best
}

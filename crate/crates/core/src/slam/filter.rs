use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::SlamConfig;
use super::particle::{
    apply_log_likelihoods, create_tiles, flush_all, initialize, maybe_resample, measurement_log_likelihood,
    point_estimate, propagate, update_maps, FlushStats, MapModel, Particle, ProcessNoise,
};
use crate::eigen::Basis3D;
use crate::error::{Error, Result};
use crate::geom::{psd_sqrt, Pose, TileId};
use crate::gpmap::TileMap;
use crate::record::StepRecord;

/// Stream reserved for the resampling draws; particle `i` uses stream `i`.
const RESAMPLE_STREAM: u64 = u64::MAX;

/// What the filter reports after each step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub t: f64,
    /// Pose of the highest-weight particle at the reading's time.
    pub pose: Pose,
    pub particle: usize,
    pub ess: f64,
    pub resampled: bool,
    /// Tiles held by the highest-weight particle.
    pub tiles: usize,
}

/// Run-wide counters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    pub resample_events: usize,
    pub flushed_entries: usize,
    pub map_updates: usize,
    pub dropped_entries: usize,
    pub min_ess: f64,
}

/// Rao-Blackwellised particle filter over per-tile GP maps.
#[derive(Clone, Debug)]
pub struct Filter {
    config: SlamConfig,
    model: MapModel,
    noise: ProcessNoise,
    particles: Vec<Particle>,
    rngs: Vec<ChaCha8Rng>,
    resample_rng: ChaCha8Rng,
    diagnostics: Diagnostics,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

impl Filter {
    pub fn new(config: SlamConfig, basis: Arc<Basis3D>) -> Result<Self> {
        config.validate()?;
        config.check_basis(&basis)?;
        let model = MapModel::new(
            basis,
            config.grid()?,
            config.hyper,
            config.delay_lengthscale,
            config.neighbor_threshold,
        );
        let noise = ProcessNoise {
            sqrt_p: psd_sqrt(&config.sigma_p)?,
            sqrt_q: psd_sqrt(&config.sigma_q)?,
        };
        let particles = initialize(config.particles)?;
        let rngs = (0..config.particles as u64).map(|i| stream(config.rng_seed, i)).collect();
        Ok(Self {
            resample_rng: stream(config.rng_seed, RESAMPLE_STREAM),
            config,
            model,
            noise,
            particles,
            rngs,
            diagnostics: Diagnostics {
                min_ess: f64::INFINITY,
                ..Default::default()
            },
        })
    }

    pub fn config(&self) -> &SlamConfig {
        &self.config
    }

    pub fn model(&self) -> &MapModel {
        &self.model
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn best(&self) -> &Particle {
        &self.particles[point_estimate(&self.particles)]
    }

    /// Sum over particles and tiles of the stored map values.
    pub fn stored_map_values(&self) -> usize {
        self.particles.iter().map(Particle::stored_map_values).sum()
    }

    /// Runs `f` on every particle with its own random stream, in parallel
    /// when configured. The first error by particle index wins.
    fn each_particle<T, F>(&mut self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut Particle, &mut ChaCha8Rng) -> Result<T> + Sync + Send,
    {
        let items = self.particles.iter_mut().zip(self.rngs.iter_mut());
        let results: Vec<Result<T>> = if self.config.parallel {
            items.collect::<Vec<_>>().into_par_iter().map(|(p, r)| f(p, r)).collect()
        } else {
            items.map(|(p, r)| f(p, r)).collect()
        };
        results.into_iter().collect()
    }

    /// One pass of the filter loop for one log record.
    pub fn step(&mut self, record: &StepRecord) -> Result<Estimate> {
        record.validate()?;
        let model = self.model.clone();
        let lls = self.each_particle(|p, _| {
            create_tiles(p, &model);
            measurement_log_likelihood(p, record, &model)
        })?;
        let ess = apply_log_likelihoods(&mut self.particles, &lls, record.t)?;
        let resampled = maybe_resample(&mut self.particles, self.config.resample_fraction, &mut self.resample_rng);
        let stats = self.each_particle(|p, _| update_maps(p, record, &model))?;
        let best = point_estimate(&self.particles);
        let estimate = Estimate {
            t: record.t,
            pose: self.particles[best].pose,
            particle: best,
            ess,
            resampled,
            tiles: self.particles[best].maps.len(),
        };
        let noise = self.noise;
        self.each_particle(|p, rng| {
            propagate(p, record, &noise, rng);
            Ok(())
        })?;

        let d = &mut self.diagnostics;
        d.steps += 1;
        d.resample_events += resampled as usize;
        d.min_ess = d.min_ess.min(ess);
        self.record_flushes(stats);
        Ok(estimate)
    }

    fn record_flushes(&mut self, stats: Vec<FlushStats>) {
        let mut total = FlushStats::default();
        for s in stats {
            total += s;
        }
        self.diagnostics.flushed_entries += total.flushed;
        self.diagnostics.map_updates += total.updates;
        self.diagnostics.dropped_entries += total.dropped;
    }

    /// Writes all still-delayed readings into every particle's maps.
    pub fn flush_pending(&mut self) -> Result<()> {
        let model = self.model.clone();
        let stats = self.each_particle(|p, _| flush_all(p, &model))?;
        self.record_flushes(stats);
        Ok(())
    }
}

/// Result of a run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub estimates: Vec<Estimate>,
    /// Final maps of the highest-weight particle.
    pub maps: BTreeMap<TileId, Arc<TileMap>>,
    pub diagnostics: Diagnostics,
    /// Distinct tiles held by all particles together, summed per particle.
    pub tiles_per_particle: Vec<usize>,
    pub stored_map_values: usize,
    /// `false` when the observer stopped the run early or it failed.
    pub complete: bool,
}

impl RunOutput {
    fn from_filter(filter: &Filter, estimates: Vec<Estimate>, complete: bool) -> Self {
        Self {
            estimates,
            maps: filter.best().maps.clone(),
            diagnostics: *filter.diagnostics(),
            tiles_per_particle: filter.particles().iter().map(|p| p.maps.len()).collect(),
            stored_map_values: filter.stored_map_values(),
            complete,
        }
    }

    pub fn final_pose(&self) -> Option<Pose> {
        self.estimates.last().map(|e| e.pose)
    }
}

/// A failed run with everything produced before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub partial: Box<RunOutput>,
}

/// Runs the filter over a whole log. `observer` sees the filter after every
/// step and may stop the run early; the output is then marked incomplete.
/// Readings still delayed at the end are written into the maps.
pub fn run_with<F>(log: &[StepRecord], filter: &mut Filter, mut observer: F) -> Result<RunOutput, RunFailure>
where
    F: FnMut(&Filter, &Estimate) -> ControlFlow<()>,
{
    let mut estimates = Vec::with_capacity(log.len());
    let fail = |filter: &Filter, estimates: Vec<Estimate>, error: Error| RunFailure {
        error,
        partial: Box::new(RunOutput::from_filter(filter, estimates, false)),
    };
    if log.is_empty() {
        return Err(fail(filter, estimates, Error::InvalidInput("empty log".into())));
    }
    if let Some(w) = log.windows(2).find(|w| !(w[1].t > w[0].t)) {
        let error = Error::InvalidInput(format!("log is not time-ordered at t = {}", w[1].t));
        return Err(fail(filter, estimates, error));
    }
    let mut complete = true;
    for record in log {
        match filter.step(record) {
            Ok(e) => estimates.push(e),
            Err(error) => return Err(fail(filter, estimates, error)),
        }
        if observer(filter, estimates.last().unwrap()).is_break() {
            complete = false;
            break;
        }
    }
    if let Err(error) = filter.flush_pending() {
        return Err(fail(filter, estimates, error));
    }
    Ok(RunOutput::from_filter(filter, estimates, complete))
}

/// Runs a fresh filter for `config` over `log`.
pub fn run(log: &[StepRecord], config: &SlamConfig, basis: Arc<Basis3D>) -> Result<RunOutput, RunFailure> {
    let mut filter = Filter::new(config.clone(), basis).map_err(|error| RunFailure {
        error,
        partial: Box::new(RunOutput {
            estimates: Vec::new(),
            maps: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
            tiles_per_particle: Vec::new(),
            stored_map_values: 0,
            complete: false,
        }),
    })?;
    run_with(log, &mut filter, |_, _| ControlFlow::Continue(()))
}

//! Rao-Blackwellised particle filter: each particle carries a pose and its
//! own Gaussian map per hexagonal tile.
//!
//! Every step runs, in order: tile creation, importance weighting,
//! revisit-gated resampling, delayed map updates, the point estimate and
//! finally odometry propagation.

mod config;
mod filter;
mod particle;

pub use config::{sigma_q_from_degrees, SlamConfig, DEFAULT_SIGMA_P, DEFAULT_SIGMA_Q_DEG};
pub use filter::{run, run_with, Diagnostics, Estimate, Filter, RunFailure, RunOutput};
pub use particle::{
    apply_log_likelihoods, create_tiles, effective_sample_size, flush_all, initialize, maybe_resample,
    measurement_log_likelihood, point_estimate, propagate, systematic_ancestors, update_maps, weight, FlushStats,
    MapModel, Particle, PendingEntry, ProcessNoise, VisitState,
};

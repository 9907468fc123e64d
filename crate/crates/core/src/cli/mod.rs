//! Command-line front end. Each subcommand is a plain function taking a
//! [`RunConfig`], so it can be driven from tests and examples as well as
//! from the `magslam` binary.

mod evaluate;

pub use evaluate::{align_to_start, evaluate, Evaluation};

use std::fmt::Write as _;
use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{
    basis_cache_path, export_map_grid, load_basis, load_or_build_basis, read_estimates, read_log, read_map_state,
    read_truth, truth_path_for, write_estimates, write_heatmap, write_log, write_map_grid, write_map_state,
    write_truth, Channel, GridSpec, RunConfig, RunStatus, RunSummary,
};
use crate::sim::{simulate, TrajectoryKind};
use crate::slam::{run_with, Filter};

/// Files a SLAM run writes into the output directory.
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const MAP_STATE_FILE: &str = "maps.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const MAP_GRID_FILE: &str = "map_grid.csv";
pub const HEATMAP_FILE: &str = "map.ppm";
pub const EVALUATION_FILE: &str = "evaluation.txt";

#[derive(Debug, Parser)]
#[command(name = "magslam", version, about = "Magnetic-field SLAM on hexagonal-tile Gaussian process maps")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags every subcommand accepts; they override the config file.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sensor log to write (simulate) or read (slam, evaluate).
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Basis cache directory, or a `.bin` file.
    #[arg(long, global = true)]
    pub basis_cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the tile eigenbasis and store it in the cache.
    Basis,
    /// Generate a synthetic log and its ground-truth sidecar.
    Simulate {
        #[arg(long, value_parser = parse_kind)]
        scenario: TrajectoryKind,
    },
    /// Run the particle filter over a log.
    Slam {
        #[arg(long)]
        particles: Option<usize>,
        /// Seconds of log time between map snapshots.
        #[arg(long)]
        snapshot_every: Option<f64>,
    },
    /// Sample the final maps of a run on a plane and draw a heatmap.
    ExportMap {
        /// Height of the plane, metres.
        #[arg(long)]
        z0: Option<f64>,
        /// Lattice step, metres.
        #[arg(long)]
        step: Option<f64>,
        /// norm, x, y or z.
        #[arg(long, value_parser = parse_channel)]
        channel: Option<Channel>,
        /// Do not fade uncertain cells.
        #[arg(long)]
        opaque: bool,
    },
    /// Score a run's estimates and dead reckoning against the truth.
    Evaluate {
        /// Estimate file; defaults to the one in the output directory.
        #[arg(long)]
        estimates: Option<PathBuf>,
        /// Truth sidecar; defaults to the one next to the log.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<TrajectoryKind, String> {
    s.parse::<TrajectoryKind>().map_err(|e| e.to_string())
}

fn parse_channel(s: &str) -> std::result::Result<Channel, String> {
    s.parse::<Channel>().map_err(|e| e.to_string())
}

impl CommonArgs {
    /// The config file (or defaults) with the command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(p) = &self.log {
            config.paths.log = p.clone();
        }
        if let Some(p) = &self.out_dir {
            config.paths.out_dir = p.clone();
        }
        if let Some(p) = &self.basis_cache {
            config.paths.basis_cache = p.clone();
        }
        Ok(config)
    }
}

/// What [`cmd_basis`] did.
#[derive(Clone, Debug)]
pub struct BasisReport {
    pub path: PathBuf,
    pub cache_hit: bool,
    /// Smallest hexagon eigenvalues `λ²`, at most ten.
    pub hex_eigenvalues: Vec<f64>,
    /// Smallest prism eigenvalues `λ²`, at most ten.
    pub eigenvalues: Vec<f64>,
    pub elapsed: Duration,
}

pub fn cmd_basis(config: &RunConfig) -> Result<BasisReport> {
    let spec = config.basis_spec();
    config.slam_config()?;
    let start = Instant::now();
    let (basis, cache_hit) = load_or_build_basis(&config.paths.basis_cache, &spec)?;
    Ok(BasisReport {
        path: basis_cache_path(&config.paths.basis_cache, &spec),
        cache_hit,
        hex_eigenvalues: basis.hex().eigenvalues().iter().take(10).copied().collect(),
        eigenvalues: basis.eigenvalues().iter().take(10).copied().collect(),
        elapsed: start.elapsed(),
    })
}

/// What [`cmd_simulate`] wrote.
#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub log: PathBuf,
    pub truth: PathBuf,
    pub records: usize,
}

pub fn cmd_simulate(config: &RunConfig, kind: Option<TrajectoryKind>) -> Result<SimulateReport> {
    let sim = simulate(&config.scenario(kind)?)?;
    let log = config.paths.log.clone();
    let truth = truth_path_for(&log);
    write_log(&log, &sim.log)?;
    write_truth(&truth, &sim.log, &sim.truth)?;
    Ok(SimulateReport {
        log,
        truth,
        records: sim.log.len(),
    })
}

/// Loads the cached basis a run needs without ever solving it.
fn cached_basis(config: &RunConfig) -> Result<crate::eigen::Basis3D> {
    let spec = config.basis_spec();
    let path = basis_cache_path(&config.paths.basis_cache, &spec);
    if !path.exists() {
        return Err(Error::CacheMismatch {
            path,
            detail: "no basis has been cached for this tile geometry and basis size".into(),
        });
    }
    load_basis(&path, &spec)
}

/// What [`cmd_slam`] wrote.
#[derive(Clone, Debug)]
pub struct SlamReport {
    pub summary: RunSummary,
    pub out_dir: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Runs the filter over the configured log and writes the estimates, the
/// best particle's maps, periodic map snapshots and a summary. Setting
/// `stop` ends the run early; whatever was computed is still written and
/// marked incomplete. A failing run also writes its partial outputs before
/// the error is returned.
pub fn cmd_slam(config: &RunConfig, stop: &AtomicBool) -> Result<SlamReport> {
    let slam = config.slam_config()?;
    let tiles = slam.grid()?;
    let basis = Arc::new(cached_basis(config)?);
    let data = read_log(&config.paths.log)?;
    let truth_path = truth_path_for(&config.paths.log);
    let truth = truth_path.exists().then(|| read_truth(&truth_path)).transpose()?;
    let out_dir = &config.paths.out_dir;
    let grid_spec = GridSpec {
        z0: config.export.z0,
        step: config.export.step,
    };

    let mut filter = Filter::new(slam, basis.clone())?;
    let mut snapshots = Vec::new();
    let mut snapshot_error = None;
    let mut next_snapshot = config
        .export
        .snapshot_every
        .filter(|s| *s > 0.0)
        .zip(data.records.first())
        .map(|(every, first)| (every, first.t + every));
    let started = Instant::now();
    let result = run_with(&data.records, &mut filter, |f, e| {
        if let Some((every, due)) = next_snapshot.as_mut() {
            if e.t >= *due {
                while *due <= e.t {
                    *due += *every;
                }
                let path = out_dir.join(SNAPSHOT_DIR).join(format!("grid_t{:010.3}.csv", e.t));
                let written = export_map_grid(&f.best().maps, &basis, &f.model().grid, &grid_spec)
                    .and_then(|g| write_map_grid(&path, &g));
                match written {
                    Ok(()) => snapshots.push(path),
                    Err(err) => {
                        snapshot_error = Some(err);
                        return ControlFlow::Break(());
                    }
                }
            }
        }
        if stop.load(Ordering::Relaxed) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    let runtime = started.elapsed().as_secs_f64();

    let (output, status, error) = match result {
        Ok(o) => {
            let status = match (&snapshot_error, o.complete) {
                (Some(e), _) => RunStatus::Failed(e.to_string()),
                (None, true) => RunStatus::Complete,
                (None, false) => RunStatus::Incomplete,
            };
            (o, status, snapshot_error)
        }
        Err(failure) => (*failure.partial, RunStatus::Failed(failure.error.to_string()), Some(failure.error)),
    };
    let final_error = truth.as_ref().and_then(|t| {
        let (last, start) = (output.estimates.last()?, t.truth.first()?);
        let truth_now = t.truth.get(output.estimates.len() - 1)?;
        Some((align_to_start(&last.pose, &start.pose).position - truth_now.pose.position).norm())
    });
    let summary = RunSummary::new(
        &output,
        status,
        &tiles,
        basis.state_dim(),
        runtime,
        final_error,
        data.renormalised,
    );
    write_estimates(&out_dir.join(ESTIMATES_FILE), &output.estimates, &tiles)?;
    write_map_state(&out_dir.join(MAP_STATE_FILE), &output.maps)?;
    summary.write(&out_dir.join(SUMMARY_FILE))?;
    match error {
        Some(e) => Err(e),
        None => Ok(SlamReport {
            summary,
            out_dir: out_dir.clone(),
            snapshots,
        }),
    }
}

/// Overrides for [`cmd_export_map`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ExportOptions {
    pub z0: Option<f64>,
    pub step: Option<f64>,
    pub channel: Option<Channel>,
    pub opaque: bool,
}

/// What [`cmd_export_map`] wrote.
#[derive(Clone, Debug)]
pub struct ExportReport {
    pub grid: PathBuf,
    pub heatmap: PathBuf,
    pub points: usize,
}

/// Samples the maps saved by a run and draws them. An empty sample set
/// (no mapped tile on the plane) writes the grid but no image.
pub fn cmd_export_map(config: &RunConfig, opts: ExportOptions) -> Result<ExportReport> {
    let slam = config.slam_config()?;
    let basis = cached_basis(config)?;
    let out_dir = &config.paths.out_dir;
    let maps = read_map_state(&out_dir.join(MAP_STATE_FILE))?;
    if let Some(m) = maps.values().find(|m| m.dim() != basis.state_dim()) {
        return Err(Error::Data(format!(
            "saved maps have {} states per tile but the basis has {}",
            m.dim(),
            basis.state_dim()
        )));
    }
    let spec = GridSpec {
        z0: opts.z0.unwrap_or(config.export.z0),
        step: opts.step.unwrap_or(config.export.step),
    };
    let grid = export_map_grid(&maps, &basis, &slam.grid()?, &spec)?;
    let report = ExportReport {
        grid: out_dir.join(MAP_GRID_FILE),
        heatmap: out_dir.join(HEATMAP_FILE),
        points: grid.points.len(),
    };
    write_map_grid(&report.grid, &grid)?;
    if !grid.points.is_empty() {
        let alpha = config.export.uncertainty_alpha && !opts.opaque;
        write_heatmap(&report.heatmap, &grid, opts.channel.unwrap_or(config.export.channel), alpha)?;
    }
    Ok(report)
}

/// Scores a run's estimate file against a truth sidecar and writes the
/// report next to the estimates.
pub fn cmd_evaluate(estimates: &Path, truth: &Path, out: &Path) -> Result<Evaluation> {
    let est = read_estimates(estimates)?;
    let truth = read_truth(truth)?;
    let poses: Vec<_> = est.iter().map(|e| e.pose).collect();
    let eval = evaluate(&poses, &truth.log.records, &truth.truth)?;
    if let Some((e, s)) = est.iter().zip(&truth.truth).find(|(e, s)| (e.t - s.t).abs() > 1e-9) {
        return Err(Error::Data(format!("estimate at t = {} is paired with truth at t = {}", e.t, s.t)));
    }
    std::fs::create_dir_all(out.parent().unwrap_or(Path::new(""))).map_err(|e| Error::io(out, e))?;
    std::fs::write(out, eval.to_text()).map_err(|e| Error::io(out, e))?;
    Ok(eval)
}

/// Parses arguments, runs the subcommand and maps failures to exit codes:
/// 2 usage, 3 data, 4 numerical.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>, stop: &AtomicBool) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli, stop) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli, stop: &AtomicBool) -> Result<()> {
    let mut out = String::new();
    let mut config = cli.common.resolve()?;
    match &cli.command {
        Command::Basis => {
            let r = cmd_basis(&config)?;
            let state = if r.cache_hit { "cache hit" } else { "solved" };
            writeln!(out, "{state}: {} ({:.2} s)", r.path.display(), r.elapsed.as_secs_f64()).expect("string write");
            writeln!(out, "hexagon eigenvalues λ²: {}", join(&r.hex_eigenvalues)).expect("string write");
            writeln!(out, "prism eigenvalues λ²:   {}", join(&r.eigenvalues)).expect("string write");
        }
        Command::Simulate { scenario } => {
            let r = cmd_simulate(&config, Some(*scenario))?;
            writeln!(out, "wrote {} records to {} (truth: {})", r.records, r.log.display(), r.truth.display()).expect("string write");
        }
        Command::Slam {
            particles,
            snapshot_every,
        } => {
            if let Some(n) = particles {
                config.slam.particles = *n;
            }
            if snapshot_every.is_some() {
                config.export.snapshot_every = *snapshot_every;
            }
            let r = cmd_slam(&config, stop)?;
            write!(out, "{}", r.summary.to_text()).expect("string write");
            writeln!(out, "outputs in {}", r.out_dir.display()).expect("string write");
        }
        Command::ExportMap {
            z0,
            step,
            channel,
            opaque,
        } => {
            let opts = ExportOptions {
                z0: *z0,
                step: *step,
                channel: *channel,
                opaque: *opaque,
            };
            let r = cmd_export_map(&config, opts)?;
            writeln!(out, "{} map points in {}", r.points, r.grid.display()).expect("string write");
            if r.points > 0 {
                writeln!(out, "heatmap in {}", r.heatmap.display()).expect("string write");
            }
        }
        Command::Evaluate { estimates, truth } => {
            let out_dir = &config.paths.out_dir;
            let estimates = estimates.clone().unwrap_or_else(|| out_dir.join(ESTIMATES_FILE));
            let truth = truth.clone().unwrap_or_else(|| truth_path_for(&config.paths.log));
            let e = cmd_evaluate(&estimates, &truth, &out_dir.join(EVALUATION_FILE))?;
            write!(out, "{}", e.to_text()).expect("string write");
        }
    }
    // A closed stdout (say, piped into `head`) is not a failure of the run.
    let _ = std::io::stdout().write_all(out.as_bytes());
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" ")
}

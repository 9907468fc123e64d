use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::log::ESTIMATE_COLUMNS;
use super::{create, csv_reader, csv_writer, finish, format_error, open, parse_floats, read_version_line, write_row};
use crate::eigen::Basis3D;
use crate::error::{Error, Result};
use crate::geom::{HexGridSpec, TileId};
use crate::gpmap::TileMap;
use crate::slam::{Estimate, RunOutput};

const GRID_COLUMNS: [&str; 8] = ["x", "y", "z", "bx", "by", "bz", "norm", "std"];

/// A horizontal sampling plane for map export.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Height of the plane, metres.
    pub z0: f64,
    /// Lattice step, metres. Points sit at integer multiples of it.
    pub step: f64,
}

/// One sampled map point: world position, predicted field (μT) and the
/// RMS of the three component standard deviations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub position: Vector3<f64>,
    pub field: Vector3<f64>,
    pub std: f64,
}

impl GridPoint {
    pub fn norm(&self) -> f64 {
        self.field.norm()
    }
}

/// Map samples on a square lattice, rows from north to south and west to
/// east within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct MapGrid {
    pub step: f64,
    pub points: Vec<GridPoint>,
}

/// Samples the maps on the plane `z = z0`. Lattice points that fall in no
/// mapped tile are left out.
pub fn export_map_grid(
    maps: &BTreeMap<TileId, Arc<TileMap>>,
    basis: &Basis3D,
    tiles: &HexGridSpec,
    spec: &GridSpec,
) -> Result<MapGrid> {
    if !(spec.step > 0.0 && spec.step.is_finite()) || !spec.z0.is_finite() {
        return Err(Error::InvalidInput(format!("map grid step {} at z {}", spec.step, spec.z0)));
    }
    let layer = tiles.point_to_tile(&Vector3::new(0.0, 0.0, spec.z0)).k;
    let (mut i_lo, mut i_hi, mut j_lo, mut j_hi) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for t in maps.keys().filter(|t| t.k == layer) {
        let c = tiles.tile_center(*t);
        i_lo = i_lo.min(((c.x - tiles.radius) / spec.step).floor() as i64);
        i_hi = i_hi.max(((c.x + tiles.radius) / spec.step).ceil() as i64);
        j_lo = j_lo.min(((c.y - tiles.inradius()) / spec.step).floor() as i64);
        j_hi = j_hi.max(((c.y + tiles.inradius()) / spec.step).ceil() as i64);
    }
    let mut points = Vec::new();
    for j in (j_lo..=j_hi).rev() {
        for i in i_lo..=i_hi {
            let p = Vector3::new(i as f64 * spec.step, j as f64 * spec.step, spec.z0);
            let tile = tiles.point_to_tile(&p);
            let Some(map) = maps.get(&tile) else { continue };
            let nabla = basis.eval_nabla_phi(&tiles.to_local(&p, tile))?;
            let (field, cov) = map.predict_field(&nabla);
            points.push(GridPoint {
                position: p,
                field,
                std: (cov.trace().max(0.0) / 3.0).sqrt(),
            });
        }
    }
    Ok(MapGrid {
        step: spec.step,
        points,
    })
}

pub fn write_map_grid(path: &Path, grid: &MapGrid) -> Result<()> {
    let mut csv = csv_writer(path, "grid", &GRID_COLUMNS)?;
    for g in &grid.points {
        let (p, b) = (g.position, g.field);
        let fields = [p.x, p.y, p.z, b.x, b.y, b.z, g.norm(), g.std].map(|v| v.to_string());
        write_row(&mut csv, path, &fields)?;
    }
    finish(csv, path)
}

/// Reads a map grid. The lattice step is the smallest spacing between
/// distinct coordinates.
pub fn read_map_grid(path: &Path) -> Result<MapGrid> {
    let mut csv = csv_reader(path, "grid", &GRID_COLUMNS)?;
    let mut points = Vec::new();
    for row in csv.records() {
        let row = row.map_err(|e| super::csv_error(path, e))?;
        let v = parse_floats(path, &row, &GRID_COLUMNS)?;
        points.push(GridPoint {
            position: Vector3::new(v[0], v[1], v[2]),
            field: Vector3::new(v[3], v[4], v[5]),
            std: v[7],
        });
    }
    let step = lattice_step(&points).unwrap_or(1.0);
    Ok(MapGrid { step, points })
}

fn lattice_step(points: &[GridPoint]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..2 {
        let mut c: Vec<f64> = points.iter().map(|p| p.position[axis]).collect();
        c.sort_by(f64::total_cmp);
        for w in c.windows(2) {
            let gap = w[1] - w[0];
            if gap > 1e-9 {
                best = Some(best.map_or(gap, |b| b.min(gap)));
            }
        }
    }
    best
}

/// Viridis sampled at ten evenly spaced points, endpoints included.
const VIRIDIS: [[u8; 3]; 10] = [
    [0x44, 0x01, 0x54],
    [0x48, 0x28, 0x78],
    [0x3e, 0x49, 0x89],
    [0x31, 0x68, 0x8e],
    [0x26, 0x82, 0x8e],
    [0x1f, 0x9e, 0x89],
    [0x35, 0xb7, 0x79],
    [0x6e, 0xce, 0x58],
    [0xb5, 0xde, 0x2b],
    [0xfd, 0xe7, 0x25],
];

/// Viridis at `t` in `[0, 1]`, linear between the stops.
fn viridis(t: f64) -> [f64; 3] {
    let x = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - k as f64;
    std::array::from_fn(|c| VIRIDIS[k][c] as f64 * (1.0 - f) + VIRIDIS[k + 1][c] as f64 * f)
}

/// Map quantity drawn by [`export_heatmap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Norm,
    X,
    Y,
    Z,
}

impl Channel {
    fn value(self, g: &GridPoint) -> f64 {
        match self {
            Channel::Norm => g.norm(),
            Channel::X => g.field.x,
            Channel::Y => g.field.y,
            Channel::Z => g.field.z,
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Channel::Norm),
            "x" => Ok(Channel::X),
            "y" => Ok(Channel::Y),
            "z" => Ok(Channel::Z),
            other => Err(Error::InvalidInput(format!("unknown channel `{other}` (norm, x, y or z)"))),
        }
    }
}

/// Renders a map grid as a binary PPM, one pixel per lattice point, north
/// up. Values run through the viridis ramp over their range; with
/// `uncertainty_alpha` each pixel is blended toward the white background in
/// proportion to its marginal std, scaled to the grid's std range. Cells
/// without a sample stay white.
pub fn export_heatmap(grid: &MapGrid, channel: Channel, uncertainty_alpha: bool) -> Result<Vec<u8>> {
    if grid.points.is_empty() {
        return Err(Error::InvalidInput("cannot draw an empty map grid".into()));
    }
    let range = |f: &dyn Fn(&GridPoint) -> f64| {
        grid.points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x_lo, x_hi) = range(&|g| g.position.x);
    let (y_lo, y_hi) = range(&|g| g.position.y);
    let (v_lo, v_hi) = range(&|g| channel.value(g));
    let (s_lo, s_hi) = range(&|g| g.std);
    let cell = |d: f64| (d / grid.step).round() as usize;
    let (width, height) = (cell(x_hi - x_lo) + 1, cell(y_hi - y_lo) + 1);
    let unit = |v: f64, lo: f64, hi: f64| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };

    let mut pixels = vec![255u8; width * height * 3];
    for g in &grid.points {
        let c = viridis(unit(channel.value(g), v_lo, v_hi));
        let fade = if uncertainty_alpha { unit(g.std, s_lo, s_hi) } else { 0.0 };
        let (col, row) = (cell(g.position.x - x_lo), cell(y_hi - g.position.y));
        let k = 3 * (row * width + col);
        for (p, c) in pixels[k..k + 3].iter_mut().zip(c) {
            *p = (c + (255.0 - c) * fade).round() as u8;
        }
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels);
    Ok(out)
}

pub fn write_heatmap(path: &Path, grid: &MapGrid, channel: Channel, uncertainty_alpha: bool) -> Result<()> {
    let bytes = export_heatmap(grid, channel, uncertainty_alpha)?;
    let mut out = create(path)?;
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Writes one row per filter step: pose, tile, ESS and the resample flag.
pub fn write_estimates(path: &Path, estimates: &[Estimate], tiles: &HexGridSpec) -> Result<()> {
    let mut csv = csv_writer(path, "estimates", &ESTIMATE_COLUMNS)?;
    for e in estimates {
        let (p, q) = (e.pose.position, e.pose.orientation);
        let t = tiles.point_to_tile(&p);
        let mut fields: Vec<String> = [e.t, p.x, p.y, p.z, q.w, q.x, q.y, q.z].iter().map(f64::to_string).collect();
        fields.extend([t.a, t.b, t.k].iter().map(i32::to_string));
        fields.push(e.ess.to_string());
        fields.push((e.resampled as u8).to_string());
        write_row(&mut csv, path, &fields)?;
    }
    finish(csv, path)
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Complete,
    /// Stopped early on request.
    Incomplete,
    Failed(String),
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunStatus::Complete => f.write_str("complete"),
            RunStatus::Incomplete => f.write_str("incomplete"),
            RunStatus::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

/// Key figures of a SLAM run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub status: RunStatus,
    pub steps: usize,
    pub particles: usize,
    /// Distance between the last estimate and the true position, metres.
    pub final_error: Option<f64>,
    pub runtime_s: f64,
    /// Tiles held by the highest-weight particle.
    pub tiles_best: usize,
    /// Tiles summed over all particles.
    pub tiles_total: usize,
    /// `Σ tiles × (m+3)²` map entries.
    pub memory_estimate: usize,
    /// Map entries actually stored: a covariance and a mean per tile.
    pub stored_map_values: usize,
    pub tile_volume_m3: f64,
    pub resample_events: usize,
    pub min_ess: f64,
    pub map_updates: usize,
    pub dropped_entries: usize,
    pub renormalised_dq: usize,
}

impl RunSummary {
    pub fn new(
        output: &RunOutput,
        status: RunStatus,
        tiles: &HexGridSpec,
        state_dim: usize,
        runtime_s: f64,
        final_error: Option<f64>,
        renormalised_dq: usize,
    ) -> Self {
        let tiles_total = output.tiles_per_particle.iter().sum();
        let d = &output.diagnostics;
        Self {
            status,
            steps: output.estimates.len(),
            particles: output.tiles_per_particle.len(),
            final_error,
            runtime_s,
            tiles_best: output.maps.len(),
            tiles_total,
            memory_estimate: tiles_total * state_dim * state_dim,
            stored_map_values: output.stored_map_values,
            tile_volume_m3: tiles.tile_volume(),
            resample_events: d.resample_events,
            min_ess: if d.steps > 0 { d.min_ess } else { f64::NAN },
            map_updates: d.map_updates,
            dropped_entries: d.dropped_entries,
            renormalised_dq,
        }
    }

    /// `key = value` lines under a version line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# magslam-summary 1.0\n");
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        line("status", self.status.to_string());
        line("steps", self.steps.to_string());
        line("particles", self.particles.to_string());
        line(
            "final_error_m",
            self.final_error.map_or_else(|| "n/a".into(), |e| format!("{e:.4}")),
        );
        line("runtime_s", format!("{:.3}", self.runtime_s));
        line("tiles_best_particle", self.tiles_best.to_string());
        line("tiles_all_particles", self.tiles_total.to_string());
        line("memory_estimate_entries", self.memory_estimate.to_string());
        line("stored_map_values", self.stored_map_values.to_string());
        line("tile_volume_m3", format!("{:.1}", self.tile_volume_m3));
        line("resample_events", self.resample_events.to_string());
        line("min_ess", format!("{:.3}", self.min_ess));
        line("map_updates", self.map_updates.to_string());
        line("dropped_entries", self.dropped_entries.to_string());
        line("renormalised_dq", self.renormalised_dq.to_string());
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        out.write_all(self.to_text().as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads a `key = value` summary file.
pub fn read_summary(path: &Path) -> Result<BTreeMap<String, String>> {
    use std::io::BufRead;
    let mut reader = open(path)?;
    read_version_line(&mut reader, path, "summary")?;
    let mut out = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| format_error(path, n + 2, format!("expected `key = value`, found `{line}`")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

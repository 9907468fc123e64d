use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pose, Quaternion};

/// Corner radius of the rounded square loop, metres.
pub const LOOP_CORNER_RADIUS: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    SquareLoop,
    Stair3d,
    RandomWalk,
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square_loop" => Ok(Self::SquareLoop),
            "stair_3d" => Ok(Self::Stair3d),
            "random_walk" => Ok(Self::RandomWalk),
            other => Err(Error::InvalidInput(format!(
                "unknown trajectory '{other}' (expected square_loop, stair_3d or random_walk)"
            ))),
        }
    }
}

/// Scripted ground-truth walk.
///
/// `extents` means, per kind:
/// * square loop: `[width, depth, _]` of the rectangle walked
///   counter-clockwise from the middle of its south side;
/// * staircase: `[run, lateral offset, rise]`: a climb of `rise` over `run`
///   metres, a U-turn onto a parallel line and the mirrored descent;
/// * random walk: `[x, y, _]` half-widths of the region it wanders in.
///
/// `speed` is the horizontal walking speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub extents: [f64; 3],
    pub laps: u32,
    pub speed: f64,
    pub sample_rate: f64,
    /// Seed for the random walk's turns.
    #[serde(default)]
    pub seed: u64,
}

impl TrajectorySpec {
    /// The 20 × 5 m loop walked three times at 1.2 m/s and 10 Hz.
    pub fn square_loop() -> Self {
        Self {
            kind: TrajectoryKind::SquareLoop,
            extents: [20.0, 5.0, 0.0],
            laps: 3,
            speed: 1.2,
            sample_rate: 10.0,
            seed: 0,
        }
    }

    /// A staircase climbing from the ground layer of tiles into the next.
    pub fn stair_3d() -> Self {
        Self {
            kind: TrajectoryKind::Stair3d,
            extents: [8.0, 2.0, 4.5],
            laps: 1,
            speed: 0.8,
            sample_rate: 10.0,
            seed: 0,
        }
    }

    pub fn random_walk(seed: u64) -> Self {
        Self {
            kind: TrajectoryKind::RandomWalk,
            extents: [10.0, 10.0, 0.0],
            laps: 1,
            speed: 1.2,
            sample_rate: 10.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0 && self.speed.is_finite()) || !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trajectory needs positive speed and sample rate, got {} m/s at {} Hz",
                self.speed, self.sample_rate
            )));
        }
        if self.laps == 0 {
            return Err(Error::InvalidInput("trajectory needs at least one lap".into()));
        }
        Ok(())
    }
}

/// A ground-truth pose at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    Line { start: Vector2<f64>, heading: f64, length: f64 },
    /// Circular arc, counter-clockwise when `turn > 0`.
    Arc { centre: Vector2<f64>, radius: f64, start_angle: f64, turn: f64 },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Line { length, .. } => length,
            Segment::Arc { radius, turn, .. } => radius * turn.abs(),
        }
    }

    /// Position and heading `s` metres along the segment.
    fn at(&self, s: f64) -> (Vector2<f64>, f64) {
        match *self {
            Segment::Line { start, heading, .. } => (start + Vector2::new(heading.cos(), heading.sin()) * s, heading),
            Segment::Arc { centre, radius, start_angle, turn } => {
                let angle = start_angle + turn.signum() * s / radius;
                let pos = centre + Vector2::new(angle.cos(), angle.sin()) * radius;
                (pos, angle + turn.signum() * FRAC_PI_2)
            }
        }
    }

    fn end(&self) -> (Vector2<f64>, f64) {
        self.at(self.length())
    }
}

/// Planar path built from lines and arcs, with a height profile of
/// smoothstep ramps over arc length.
#[derive(Clone, Debug, Default)]
struct Path {
    segments: Vec<Segment>,
    /// `(start, length, rise)` in arc length.
    ramps: Vec<(f64, f64, f64)>,
}

impl Path {
    fn cursor(&self) -> (Vector2<f64>, f64) {
        self.segments.last().map_or((Vector2::zeros(), 0.0), Segment::end)
    }

    fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    fn line(&mut self, length: f64) {
        let (start, heading) = self.cursor();
        self.segments.push(Segment::Line { start, heading, length });
    }

    fn arc(&mut self, radius: f64, turn: f64) {
        let (p, heading) = self.cursor();
        let side = turn.signum() * FRAC_PI_2;
        let centre = p + Vector2::new((heading + side).cos(), (heading + side).sin()) * radius;
        let start_angle = heading - side;
        self.segments.push(Segment::Arc { centre, radius, start_angle, turn });
    }

    fn ramp(&mut self, length: f64, rise: f64) {
        self.ramps.push((self.length(), length, rise));
        self.line(length);
    }

    fn pose_at(&self, s: f64) -> Pose {
        let mut rest = s;
        let mut last = (Vector2::zeros(), 0.0);
        for seg in &self.segments {
            let len = seg.length();
            if rest <= len {
                last = seg.at(rest.max(0.0));
                rest = -1.0;
                break;
            }
            rest -= len;
            last = seg.end();
        }
        let _ = rest;
        let z: f64 = self
            .ramps
            .iter()
            .map(|&(s0, len, rise)| {
                let u = ((s - s0) / len).clamp(0.0, 1.0);
                rise * u * u * (3.0 - 2.0 * u)
            })
            .sum();
        let (xy, heading) = last;
        Pose::new(Vector3::new(xy.x, xy.y, z), Quaternion::from_yaw(heading))
    }
}

fn square_loop_path(width: f64, depth: f64) -> Result<Path> {
    let rho = LOOP_CORNER_RADIUS;
    if !(width > 2.0 * rho && depth > 2.0 * rho) {
        return Err(Error::InvalidInput(format!("square loop {width} × {depth} m is too small")));
    }
    let mut path = Path::default();
    path.line(width / 2.0 - rho);
    for side in [depth, width, depth] {
        path.arc(rho, FRAC_PI_2);
        path.line(side - 2.0 * rho);
    }
    path.arc(rho, FRAC_PI_2);
    path.line(width / 2.0 - rho);
    Ok(path)
}

fn stair_path(run: f64, lateral: f64, rise: f64) -> Result<Path> {
    if !(run > 0.0 && lateral > 0.0) {
        return Err(Error::InvalidInput(format!("staircase run {run} m and offset {lateral} m must be positive")));
    }
    let landing = 3.0;
    let mut path = Path::default();
    path.line(landing);
    path.ramp(run, rise);
    path.line(landing);
    path.arc(lateral / 2.0, PI);
    path.line(landing);
    path.ramp(run, -rise);
    path.line(landing);
    Ok(path)
}

fn random_walk_path(half: [f64; 2], length: f64, seed: u64) -> Path {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Path::default();
    while path.length() < length {
        let (p, heading) = path.cursor();
        let straight = rng.random_range(1.0..4.0);
        path.line(straight);
        // Turn back towards the middle when near the edge of the region.
        let outside = p.x.abs() > 0.7 * half[0] || p.y.abs() > 0.7 * half[1];
        let turn = if outside {
            let to_centre = (-p.y).atan2(-p.x);
            let mut d = to_centre - heading;
            d = (d + PI).rem_euclid(2.0 * PI) - PI;
            if d.abs() < 0.05 { 0.05 } else { d }
        } else {
            rng.random_range(-FRAC_PI_2..FRAC_PI_2)
        };
        path.arc(rng.random_range(1.0..3.0), turn);
    }
    path
}

/// Samples the scripted walk at `sample_rate`, plus the exact end time.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<TruthSample>> {
    spec.validate()?;
    let [a, b, c] = spec.extents;
    let (path, laps) = match spec.kind {
        TrajectoryKind::SquareLoop => (square_loop_path(a, b)?, spec.laps),
        TrajectoryKind::Stair3d => (stair_path(a, b, c)?, spec.laps),
        TrajectoryKind::RandomWalk => (random_walk_path([a, b], 60.0 * spec.laps as f64, spec.seed), 1),
    };
    let lap = path.length();
    let total = lap * laps as f64;
    let duration = total / spec.speed;
    let n = (duration * spec.sample_rate).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 / spec.sample_rate).collect();
    if duration - times[n] > 1e-9 / spec.sample_rate {
        times.push(duration);
    }
    Ok(times
        .into_iter()
        .map(|t| {
            let s = (t * spec.speed).min(total);
            let lap_index = ((s / lap).floor() as u32).min(laps - 1);
            let within = s - lap_index as f64 * lap;
            TruthSample {
                t,
                pose: path.pose_at(within),
            }
        })
        .collect())
}

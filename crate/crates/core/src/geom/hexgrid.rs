use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Axial offsets of the six edge-sharing neighbours, in edge order (edge `k`
/// has outward normal at angle 30° + 60°·k).
const EDGE_NEIGHBOURS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Flat-top regular hexagon centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hexagon {
    /// Circumradius, metres.
    pub radius: f64,
}

impl Hexagon {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("hexagon radius {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn inradius(&self) -> f64 {
        self.radius * SQRT3 / 2.0
    }

    pub fn area(&self) -> f64 {
        1.5 * SQRT3 * self.radius * self.radius
    }

    /// Outward unit normal of edge `k`.
    pub fn edge_normal(k: usize) -> Vector2<f64> {
        let angle = (30.0 + 60.0 * k as f64).to_radians();
        Vector2::new(angle.cos(), angle.sin())
    }

    /// Vertex `k`, at angle 60°·k.
    pub fn vertex(&self, k: usize) -> Vector2<f64> {
        let angle = (60.0 * (k % 6) as f64).to_radians();
        Vector2::new(self.radius * angle.cos(), self.radius * angle.sin())
    }

    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, p: &Vector2<f64>) -> f64 {
        let support = (0..6)
            .map(|k| Self::edge_normal(k).dot(p))
            .fold(f64::NEG_INFINITY, f64::max);
        self.inradius() - support
    }

    /// Strict interior.
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        self.signed_distance(p) > 0.0
    }

    /// Distance along the unit direction `dir` from the interior point `p`
    /// to where the ray leaves the hexagon.
    pub fn exit_distance(&self, p: &Vector2<f64>, dir: &Vector2<f64>) -> f64 {
        let c = self.inradius();
        (0..6)
            .filter_map(|k| {
                let n = Self::edge_normal(k);
                let rate = n.dot(dir);
                (rate > 0.0).then(|| (c - n.dot(p)) / rate)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the edge whose supporting line is nearest to `p`.
    pub fn nearest_edge(&self, p: &Vector2<f64>) -> usize {
        (0..6)
            .max_by(|&a, &b| {
                Self::edge_normal(a)
                    .dot(p)
                    .total_cmp(&Self::edge_normal(b).dot(p))
            })
            .unwrap_or(0)
    }

    /// Euclidean distance from `p` to the closed segment forming edge `k`.
    pub fn distance_to_edge(&self, p: &Vector2<f64>, k: usize) -> f64 {
        segment_distance(p, &self.vertex(k), &self.vertex(k + 1))
    }
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Integer index of a hexagonal prism tile: axial coordinates `(a, b)` and
/// vertical layer `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TileId {
    pub a: i32,
    pub b: i32,
    pub k: i32,
}

impl TileId {
    pub const fn new(a: i32, b: i32, k: i32) -> Self {
        Self { a, b, k }
    }
}

impl std::fmt::Display for TileId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.k)
    }
}

/// Global tiling of space into flat-top hexagonal prisms of circumradius
/// `radius` and height `2 * half_height`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HexGridSpec {
    pub radius: f64,
    pub half_height: f64,
    /// World position of the centre of tile (0, 0, 0).
    pub origin: Vector3<f64>,
}

impl HexGridSpec {
    pub fn new(radius: f64, half_height: f64) -> Result<Self> {
        Self::with_origin(radius, half_height, Vector3::zeros())
    }

    pub fn with_origin(radius: f64, half_height: f64, origin: Vector3<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !(half_height > 0.0 && half_height.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "hex grid needs r > 0 and L_z > 0, got r = {radius}, L_z = {half_height}"
            )));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("non-finite grid origin".into()));
        }
        Ok(Self {
            radius,
            half_height,
            origin,
        })
    }

    pub fn hexagon(&self) -> Hexagon {
        Hexagon {
            radius: self.radius,
        }
    }

    pub fn inradius(&self) -> f64 {
        self.radius * SQRT3 / 2.0
    }

    /// Prism volume of one tile, m³.
    pub fn tile_volume(&self) -> f64 {
        self.hexagon().area() * 2.0 * self.half_height
    }

    pub fn tile_center(&self, t: TileId) -> Vector3<f64> {
        let (a, b) = (t.a as f64, t.b as f64);
        self.origin
            + Vector3::new(
                1.5 * self.radius * a,
                SQRT3 * self.radius * (b + 0.5 * a),
                2.0 * self.half_height * t.k as f64,
            )
    }

    /// Tile containing `p`. Horizontal ties resolve through cube-coordinate
    /// rounding; slabs are half-open `[c - L_z, c + L_z)`.
    pub fn point_to_tile(&self, p: &Vector3<f64>) -> TileId {
        let d = p - self.origin;
        let qf = (2.0 / 3.0) * d.x / self.radius;
        let rf = (-d.x / 3.0 + SQRT3 / 3.0 * d.y) / self.radius;
        let (a, b) = cube_round(qf, rf);
        let k = ((d.z + self.half_height) / (2.0 * self.half_height)).floor() as i32;
        TileId { a, b, k }
    }

    /// `p` relative to the centre of tile `t`.
    pub fn to_local(&self, p: &Vector3<f64>, t: TileId) -> Vector3<f64> {
        p - self.tile_center(t)
    }

    /// Distance from `p` to the nearest face of its own tile `t`.
    pub fn boundary_distance(&self, p: &Vector3<f64>, t: TileId) -> Result<f64> {
        if self.point_to_tile(p) != t {
            return Err(Error::OutsideDomain {
                point: [p.x, p.y, p.z],
                domain: "the requested tile",
            });
        }
        let local = self.to_local(p, t);
        let horizontal = self.hexagon().signed_distance(&local.xy()).max(0.0);
        let vertical = (self.half_height - local.z.abs()).max(0.0);
        Ok(horizontal.min(vertical))
    }

    /// Tiles adjacent to `t` whose shared face lies within `threshold` of
    /// `near`. In-plane neighbours are found from the distance to each shared
    /// edge segment, vertical ones from the distance to the slab faces.
    pub fn tile_neighbors(&self, t: TileId, near: &Vector3<f64>, threshold: f64) -> Vec<TileId> {
        let local = self.to_local(near, t);
        let hex = self.hexagon();
        let p2 = local.xy();
        let mut out: Vec<TileId> = (0..6)
            .filter(|&k| hex.distance_to_edge(&p2, k) <= threshold)
            .map(|k| {
                let (da, db) = EDGE_NEIGHBOURS[k];
                TileId::new(t.a + da, t.b + db, t.k)
            })
            .collect();
        if (self.half_height - local.z).abs() <= threshold {
            out.push(TileId::new(t.a, t.b, t.k + 1));
        }
        if (local.z + self.half_height).abs() <= threshold {
            out.push(TileId::new(t.a, t.b, t.k - 1));
        }
        out.sort();
        out
    }

    /// The six edge-sharing neighbours of `t` in the same layer.
    pub fn edge_neighbors(&self, t: TileId) -> [TileId; 6] {
        EDGE_NEIGHBOURS.map(|(da, db)| TileId::new(t.a + da, t.b + db, t.k))
    }
}

fn cube_round(q: f64, r: f64) -> (i32, i32) {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i32, rr as i32)
}

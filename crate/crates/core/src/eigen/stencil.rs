use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geom::Hexagon;

/// Exterior node layers kept around the domain for interpolation stencils.
pub(crate) const GRID_MARGIN: i64 = 4;

/// Smallest boundary fraction used in the ghost-point correction; keeps the
/// diagonal finite when the boundary passes through a node.
const MIN_BOUNDARY_FRACTION: f64 = 1e-6;

/// A bounded open region of the plane on which the Dirichlet Laplacian is
/// discretised.
pub trait Domain2D {
    fn contains(&self, p: &Vector2<f64>) -> bool;

    /// Distance along the unit vector `dir` from the interior point `p` to
    /// the boundary.
    fn exit_distance(&self, p: &Vector2<f64>, dir: &Vector2<f64>) -> f64;

    /// Axis-aligned bounding box `(min, max)`.
    fn bounds(&self) -> (Vector2<f64>, Vector2<f64>);
}

impl Domain2D for Hexagon {
    fn contains(&self, p: &Vector2<f64>) -> bool {
        Hexagon::contains(self, p)
    }

    fn exit_distance(&self, p: &Vector2<f64>, dir: &Vector2<f64>) -> f64 {
        Hexagon::exit_distance(self, p, dir)
    }

    fn bounds(&self) -> (Vector2<f64>, Vector2<f64>) {
        let half = Vector2::new(self.radius, self.inradius());
        (-half, half)
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rectangle {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Domain2D for Rectangle {
    fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    fn exit_distance(&self, p: &Vector2<f64>, dir: &Vector2<f64>) -> f64 {
        let mut t = f64::INFINITY;
        for axis in 0..2 {
            if dir[axis] > 0.0 {
                t = t.min((self.max[axis] - p[axis]) / dir[axis]);
            } else if dir[axis] < 0.0 {
                t = t.min((self.min[axis] - p[axis]) / dir[axis]);
            }
        }
        t
    }

    fn bounds(&self) -> (Vector2<f64>, Vector2<f64>) {
        (self.min, self.max)
    }
}

/// Uniform square lattice. Node `(i, j)` sits at `((i + i0)·h, (j + j0)·h)`,
/// so lattices that straddle the origin are exactly symmetric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub step: f64,
    pub i0: i64,
    pub j0: i64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    /// Lattice covering `domain` plus [`GRID_MARGIN`] exterior layers.
    pub fn covering<D: Domain2D>(domain: &D, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidInput(format!("grid step {step}")));
        }
        let (lo, hi) = domain.bounds();
        let snap_down = |v: f64| {
            let f = v / step;
            if (f - f.round()).abs() < 1e-9 { f.round() } else { f.floor() }
        };
        let snap_up = |v: f64| {
            let f = v / step;
            if (f - f.round()).abs() < 1e-9 { f.round() } else { f.ceil() }
        };
        let (ix_lo, ix_hi) = (snap_down(lo.x) as i64, snap_up(hi.x) as i64);
        let (iy_lo, iy_hi) = (snap_down(lo.y) as i64, snap_up(hi.y) as i64);
        Ok(Self {
            step,
            i0: ix_lo - GRID_MARGIN,
            j0: iy_lo - GRID_MARGIN,
            nx: (ix_hi - ix_lo + 1 + 2 * GRID_MARGIN) as usize,
            ny: (iy_hi - iy_lo + 1 + 2 * GRID_MARGIN) as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn coords(&self, i: usize, j: usize) -> Vector2<f64> {
        Vector2::new(
            (i as i64 + self.i0) as f64 * self.step,
            (j as i64 + self.j0) as f64 * self.step,
        )
    }

    /// Cell containing `p` as `(i, j, u, v)`: lower-left node and the
    /// fractional offsets within the cell.
    pub fn locate(&self, p: &Vector2<f64>) -> Option<(usize, usize, f64, f64)> {
        let fx = p.x / self.step - self.i0 as f64;
        let fy = p.y / self.step - self.j0 as f64;
        let (i, j) = (fx.floor(), fy.floor());
        if i < 0.0 || j < 0.0 || i >= (self.nx - 1) as f64 || j >= (self.ny - 1) as f64 {
            return None;
        }
        Some((i as usize, j as usize, fx - i, fy - j))
    }
}

/// Symmetric sparse matrix in compressed-row form (both triangles stored,
/// columns sorted within each row).
#[derive(Clone, Debug)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, a)| a * x[j]).sum();
        }
    }

    /// Column of the first stored entry in each row (the envelope start).
    pub fn first_columns(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.cols[self.row_ptr[i]].min(i)).collect()
    }
}

/// Nine-point discretisation of −∇² on the interior nodes of a domain.
#[derive(Clone, Debug)]
pub struct LaplacianStencil {
    pub grid: Grid2D,
    /// Unknown index of each grid node, `None` on and outside the boundary.
    pub unknown: Vec<Option<usize>>,
    /// Grid coordinates `(i, j)` of each unknown, row-major.
    pub nodes: Vec<(usize, usize)>,
    pub matrix: SparseSym,
}

/// Builds the compact nine-point stencil `(20, −4 edge, −1 corner)/(6h²)`
/// for −∇² with homogeneous Dirichlet conditions.
///
/// Boundary nodes are eliminated. Where a stencil arm leaves the domain at a
/// fraction `θ` of its length, the missing neighbour is replaced by the
/// linear extrapolation through the boundary zero, `u_out = −(1−θ)/θ·u_in`.
/// That moves only the diagonal, so the matrix stays symmetric, and it
/// removes the first-order staircase error of plain masking. On boundaries
/// that pass through grid nodes (`θ = 1`) the plain stencil is recovered.
pub fn build_laplacian_stencil<D: Domain2D>(domain: &D, h: f64) -> Result<LaplacianStencil> {
    let grid = Grid2D::covering(domain, h)?;
    let mut unknown = vec![None; grid.len()];
    let mut nodes = Vec::new();
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            if domain.contains(&grid.coords(i, j)) {
                unknown[grid.node(i, j)] = Some(nodes.len());
                nodes.push((i, j));
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::InvalidInput(format!(
            "grid step {h} leaves no interior nodes"
        )));
    }

    let scale = 1.0 / (6.0 * h * h);
    let mut row_ptr = Vec::with_capacity(nodes.len() + 1);
    let mut cols = Vec::with_capacity(nodes.len() * 9);
    let mut vals = Vec::with_capacity(nodes.len() * 9);
    row_ptr.push(0);
    for &(i, j) in &nodes {
        let centre = grid.coords(i, j);
        let mut diag = 20.0 * scale;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(9);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let w = if di == 0 || dj == 0 { -4.0 } else { -1.0 } * scale;
                let (ni, nj) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                match unknown[grid.node(ni, nj)] {
                    Some(col) => row.push((col, w)),
                    None => {
                        let arm = Vector2::new(di as f64, dj as f64) * h;
                        let len = arm.norm();
                        let theta = (domain.exit_distance(&centre, &(arm / len)) / len)
                            .clamp(MIN_BOUNDARY_FRACTION, 1.0);
                        diag += -w * (1.0 - theta) / theta;
                    }
                }
            }
        }
        row.push((unknown[grid.node(i, j)].unwrap(), diag));
        row.sort_by_key(|&(c, _)| c);
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    let matrix = SparseSym {
        n: nodes.len(),
        row_ptr,
        cols,
        vals,
    };
    Ok(LaplacianStencil {
        grid,
        unknown,
        nodes,
        matrix,
    })
}

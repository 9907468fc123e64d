use nalgebra::{DMatrix, Vector2};

use super::solver::{smallest_eigenpairs, EigenOptions};
use super::stencil::{build_laplacian_stencil, Grid2D, LaplacianStencil};
use crate::error::{Error, Result};
use crate::geom::Hexagon;

/// Nodes on each side of an interpolation cell that enter its stencil.
const REACH: usize = 2;
const PATCH: usize = 2 * REACH + 2;

/// Interior nodes that inform each ghost value, and the degree of the
/// local polynomial fitted to them.
const GHOST_SOURCES: usize = 20;
const GHOST_WINDOW: i64 = 7;

/// Points this far outside the hexagon (relative to its radius) still count
/// as on its boundary.
const BOUNDARY_SLACK: f64 = 1e-9;

/// Numerically solved Dirichlet eigenpairs of −∇² on a flat-top hexagon,
/// sampled on a square lattice.
///
/// Eigenfunctions are unit-L2 over the hexagon under midpoint quadrature and
/// signed so that their largest-magnitude grid value is positive; samples on
/// and outside the boundary are zero.
///
/// Off the lattice an eigenfunction is evaluated as `φ = D·ψ`, where `D` is a
/// smooth distance-like function vanishing exactly on the hexagon boundary
/// and `ψ = φ/D` is interpolated with C¹ piecewise-bicubic Hermite patches.
/// The Dirichlet condition therefore holds exactly, interpolation works on a
/// function that stays smooth up to the edges, and the returned gradient is
/// the exact derivative of the returned value.
#[derive(Clone, Debug)]
pub struct HexEigenbasis2D {
    hexagon: Hexagon,
    grid: Grid2D,
    interior: Vec<bool>,
    eigenvalues: Vec<f64>,
    /// Node-major samples `values[node * count + n]`, zero off the interior.
    values: Vec<f64>,
    /// Node-major `φ/D`, extended over a band of exterior nodes.
    quotient: Vec<f64>,
}

/// Separable interpolation weights over the node patch around a point.
struct PatchWeights {
    /// Lower-left node of the patch.
    i: usize,
    j: usize,
    u: [f64; PATCH],
    du: [f64; PATCH],
    v: [f64; PATCH],
    dv: [f64; PATCH],
}

impl HexEigenbasis2D {
    /// Solves the `count` smallest eigenpairs on a hexagon of circumradius
    /// `radius` with lattice step `h`.
    pub fn solve(radius: f64, h: f64, count: usize) -> Result<Self> {
        let hexagon = Hexagon::new(radius)?;
        let stencil = build_laplacian_stencil(&hexagon, h)?;
        Self::from_stencil(hexagon, &stencil, count)
    }

    pub fn from_stencil(hexagon: Hexagon, stencil: &LaplacianStencil, count: usize) -> Result<Self> {
        let pairs = smallest_eigenpairs(&stencil.matrix, count, EigenOptions::default())?;
        let grid = stencil.grid;
        let h = grid.step;
        let mut values = vec![0.0; grid.len() * count];
        for n in 0..count {
            let v = pairs.vectors.column(n);
            let (mut best, mut best_abs) = (0.0, -1.0);
            for &x in v.iter() {
                if x.abs() > best_abs {
                    best_abs = x.abs();
                    best = x;
                }
            }
            let scale = best.signum() / (h * v.norm());
            for (u, &(i, j)) in stencil.nodes.iter().enumerate() {
                values[grid.node(i, j) * count + n] = v[u] * scale;
            }
        }
        let interior = stencil.unknown.iter().map(Option::is_some).collect();
        Self::from_parts(hexagon, grid, interior, pairs.values, values)
    }

    /// Assembles a basis from stored samples and builds the interpolation
    /// data.
    pub(crate) fn from_parts(
        hexagon: Hexagon,
        grid: Grid2D,
        interior: Vec<bool>,
        eigenvalues: Vec<f64>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        let count = eigenvalues.len();
        if interior.len() != grid.len() || values.len() != grid.len() * count {
            return Err(Error::InvalidInput("inconsistent eigenbasis arrays".into()));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) || eigenvalues.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::InvalidInput(
                "eigenvalues must be positive and nondecreasing".into(),
            ));
        }
        for (node, &inside) in interior.iter().enumerate() {
            if !inside {
                values[node * count..(node + 1) * count].fill(0.0);
            }
        }
        let quotient = build_quotient(&hexagon, &grid, &interior, count, &values)?;
        Ok(Self {
            hexagon,
            grid,
            interior,
            eigenvalues,
            values,
            quotient,
        })
    }

    pub fn hexagon(&self) -> Hexagon {
        self.hexagon
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `[λ_n^hex]²`, ascending, for `n = 1..=count` (stored 0-based).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.interior[self.grid.node(i, j)]
    }

    pub(crate) fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub(crate) fn samples(&self) -> &[f64] {
        &self.values
    }

    /// Stored sample of eigenfunction `n` (0-based) at node `(i, j)`; zero on
    /// and outside the boundary.
    pub fn grid_value(&self, n: usize, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j) * self.count() + n]
    }

    /// Value and gradient of eigenfunction `n` (0-based) at `p`.
    pub fn eval(&self, n: usize, p: &Vector2<f64>) -> Result<(f64, Vector2<f64>)> {
        if n >= self.count() {
            return Err(Error::InvalidInput(format!(
                "eigenfunction {n} requested, {} solved",
                self.count()
            )));
        }
        let w = self.patch(p)?;
        let count = self.count();
        let (mut q, mut qx, mut qy) = (0.0, 0.0, 0.0);
        for a in 0..PATCH {
            let (mut col, mut col_dv) = (0.0, 0.0);
            for b in 0..PATCH {
                let e = self.quotient[self.grid.node(w.i + a, w.j + b) * count + n];
                col += w.v[b] * e;
                col_dv += w.dv[b] * e;
            }
            q += w.u[a] * col;
            qx += w.du[a] * col;
            qy += w.u[a] * col_dv;
        }
        let (d, dd) = envelope(&self.hexagon, p);
        Ok((d * q, dd * q + Vector2::new(qx, qy) * d))
    }

    /// Values and gradients of every eigenfunction at `p`.
    pub fn eval_all(&self, p: &Vector2<f64>, values: &mut Vec<f64>, grads: &mut Vec<Vector2<f64>>) -> Result<()> {
        let w = self.patch(p)?;
        let count = self.count();
        values.clear();
        values.resize(count, 0.0);
        let mut qx = vec![0.0; count];
        let mut qy = vec![0.0; count];
        for a in 0..PATCH {
            for b in 0..PATCH {
                let node = self.grid.node(w.i + a, w.j + b);
                let e = &self.quotient[node * count..(node + 1) * count];
                let (wv, wx, wy) = (w.u[a] * w.v[b], w.du[a] * w.v[b], w.u[a] * w.dv[b]);
                for n in 0..count {
                    values[n] += wv * e[n];
                    qx[n] += wx * e[n];
                    qy[n] += wy * e[n];
                }
            }
        }
        let (d, dd) = envelope(&self.hexagon, p);
        grads.clear();
        grads.extend(
            values
                .iter()
                .zip(qx.iter().zip(&qy))
                .map(|(&q, (&x, &y))| dd * q + Vector2::new(x, y) * d),
        );
        for v in values.iter_mut() {
            *v *= d;
        }
        Ok(())
    }

    fn patch(&self, p: &Vector2<f64>) -> Result<PatchWeights> {
        if !(p.x.is_finite() && p.y.is_finite())
            || self.hexagon.signed_distance(p) < -BOUNDARY_SLACK * self.hexagon.radius
        {
            return Err(Error::OutsideDomain {
                point: [p.x, p.y, 0.0],
                domain: "the extended hexagon",
            });
        }
        let (i, j, u, v) = self
            .grid
            .locate(p)
            .filter(|&(i, j, _, _)| {
                i >= REACH && j >= REACH && i + REACH + 1 < self.grid.nx && j + REACH + 1 < self.grid.ny
            })
            .ok_or(Error::OutsideDomain {
                point: [p.x, p.y, 0.0],
                domain: "the eigenbasis lattice",
            })?;
        let h = self.grid.step;
        let (wu, dwu) = hermite_weights(u);
        let (wv, dwv) = hermite_weights(v);
        Ok(PatchWeights {
            i: i - REACH,
            j: j - REACH,
            u: wu,
            du: dwu.map(|w| w / h),
            v: wv,
            dv: dwv.map(|w| w / h),
        })
    }
}

/// Smooth distance-like function of the hexagon and its gradient.
///
/// The six edge functions `c − n_k·p` are combined with the conjunction
/// `x ∧ y = x + y − √(x² + y²)`, which is positive exactly where both
/// arguments are, vanishes where either does, and is smooth away from points
/// where both vanish (the vertices). Near an edge interior `D` agrees with the
/// distance to that edge to first order.
pub(crate) fn envelope(hex: &Hexagon, p: &Vector2<f64>) -> (f64, Vector2<f64>) {
    let c = hex.inradius();
    let mut d = c - Hexagon::edge_normal(0).dot(p);
    let mut grad = -Hexagon::edge_normal(0);
    for k in 1..6 {
        let n = Hexagon::edge_normal(k);
        let f = c - n.dot(p);
        let s = d.hypot(f);
        if s == 0.0 {
            return (0.0, Vector2::zeros());
        }
        grad = grad * (1.0 - d / s) - n * (1.0 - f / s);
        d = d + f - s;
    }
    (d, grad)
}

/// One-dimensional cubic Hermite interpolation on the cell `[0, 1]` with node
/// slopes from fourth-order central differences, expressed as weights on the
/// patch nodes `−REACH..=REACH+1` (value weights, then d/dt weights).
///
/// The 2D interpolant is the tensor product of this scheme, which is the
/// bicubic Hermite patch whose cross derivatives are the tensor-product
/// differences.
fn hermite_weights(t: f64) -> ([f64; PATCH], [f64; PATCH]) {
    const SLOPE: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
    let (t2, t3) = (t * t, t * t * t);
    let basis = [
        [2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t],
        [-2.0 * t3 + 3.0 * t2, t3 - t2],
    ];
    let dbasis = [
        [6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0],
        [-6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t],
    ];
    let (mut w, mut dw) = ([0.0; PATCH], [0.0; PATCH]);
    for corner in 0..2 {
        let c = REACH + corner;
        w[c] += basis[corner][0];
        dw[c] += dbasis[corner][0];
        for (k, s) in SLOPE.iter().enumerate() {
            let node = c + k - 2;
            w[node] += basis[corner][1] * s;
            dw[node] += dbasis[corner][1] * s;
        }
    }
    (w, dw)
}

/// `φ/D` at interior nodes, continued to the exterior nodes any
/// interpolation patch can reach by a local least-squares quadratic fit to
/// the nearest interior quotients.
fn build_quotient(hex: &Hexagon, grid: &Grid2D, interior: &[bool], count: usize, values: &[f64]) -> Result<Vec<f64>> {
    let h = grid.step;
    let mut quotient = vec![0.0; values.len()];
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let node = grid.node(i, j);
            if interior[node] {
                let (d, _) = envelope(hex, &grid.coords(i, j));
                for n in 0..count {
                    quotient[node * count + n] = values[node * count + n] / d;
                }
            }
        }
    }

    // Any patch touching the hexagon lies within this distance of it.
    let band = (REACH as f64 + 1.0) * h * std::f64::consts::SQRT_2 + 1e-9 * h;
    let mut near: Vec<(f64, usize, Vector2<f64>)> = Vec::new();
    for gi in 0..grid.nx {
        for gj in 0..grid.ny {
            let g = grid.node(gi, gj);
            let centre = grid.coords(gi, gj);
            if interior[g] || hex.signed_distance(&centre) < -band {
                continue;
            }
            near.clear();
            let (lo_i, hi_i) = (gi.saturating_sub(GHOST_WINDOW as usize), (gi + GHOST_WINDOW as usize).min(grid.nx - 1));
            let (lo_j, hi_j) = (gj.saturating_sub(GHOST_WINDOW as usize), (gj + GHOST_WINDOW as usize).min(grid.ny - 1));
            for si in lo_i..=hi_i {
                for sj in lo_j..=hi_j {
                    let s = grid.node(si, sj);
                    if interior[s] {
                        let offset = (grid.coords(si, sj) - centre) / h;
                        near.push((offset.norm_squared(), s, offset));
                    }
                }
            }
            if near.len() < GHOST_SOURCES {
                return Err(Error::InvalidInput(format!(
                    "lattice step {h} too coarse to extend the eigenbasis past the boundary"
                )));
            }
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.truncate(GHOST_SOURCES);
            // Value at the ghost = intercept of the quadratic fit, a fixed
            // linear functional of the source values.
            let design = DMatrix::from_fn(GHOST_SOURCES, 6, |r, c| {
                let o = near[r].2;
                [1.0, o.x, o.y, o.x * o.x, o.x * o.y, o.y * o.y][c]
            });
            let pinv = design.pseudo_inverse(1e-12).map_err(|e| Error::Numerical(e.into()))?;
            let g_row = &mut quotient[g * count..(g + 1) * count];
            for (r, &(_, s, _)) in near.iter().enumerate() {
                let w = pinv[(0, r)];
                let src = &values[s * count..(s + 1) * count];
                let (d, _) = envelope(hex, &grid.coords(s / grid.ny, s % grid.ny));
                for n in 0..count {
                    g_row[n] += w * src[n] / d;
                }
            }
        }
    }
    Ok(quotient)
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Unit-circumradius hexagon at 50 cells across.
    fn unit_basis() -> &'static HexEigenbasis2D {
        static B: OnceLock<HexEigenbasis2D> = OnceLock::new();
        B.get_or_init(|| HexEigenbasis2D::solve(1.0, 0.04, 40).unwrap())
    }

    fn max_abs(b: &HexEigenbasis2D, n: usize) -> f64 {
        let g = b.grid();
        let mut m: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                m = m.max(b.grid_value(n, i, j).abs());
            }
        }
        m
    }

    #[test]
    fn faber_krahn_bound_holds() {
        // Disc of equal area: λ₁ ≥ π j₀₁² / A.
        let j01_sq = 2.404_825_557_695_773_f64.powi(2);
        let area = 1.5 * 3f64.sqrt();
        let bound = std::f64::consts::PI * j01_sq / area;
        assert!((bound - 6.993).abs() < 1e-3);
        assert!(unit_basis().eigenvalues()[0] >= bound);
    }

    #[test]
    fn eigenvalues_positive_ascending() {
        let ev = unit_basis().eigenvalues();
        assert!(ev[0] > 0.0);
        assert!(ev.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn gram_matrix_is_identity() {
        let b = unit_basis();
        let g = b.grid();
        let h2 = g.step * g.step;
        for n1 in 0..b.count() {
            for n2 in n1..b.count() {
                let mut s = 0.0;
                for i in 0..g.nx {
                    for j in 0..g.ny {
                        s += b.grid_value(n1, i, j) * b.grid_value(n2, i, j) * h2;
                    }
                }
                let want = if n1 == n2 { 1.0 } else { 0.0 };
                let tol = if n1 == n2 { 1e-6 } else { 5e-3 };
                assert!((s - want).abs() < tol, "({n1}, {n2}): {s}");
            }
        }
    }

    #[test]
    fn largest_value_is_positive() {
        let b = unit_basis();
        let g = b.grid();
        for n in 0..b.count() {
            let mut best = 0.0f64;
            for i in 0..g.nx {
                for j in 0..g.ny {
                    let v = b.grid_value(n, i, j);
                    if v.abs() > best.abs() {
                        best = v;
                    }
                }
            }
            assert!(best > 0.0);
        }
    }

    #[test]
    fn exterior_nodes_store_zero() {
        let b = unit_basis();
        let g = b.grid();
        for i in 0..g.nx {
            for j in 0..g.ny {
                if !b.hexagon().contains(&g.coords(i, j)) {
                    assert_eq!(b.grid_value(3, i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let b = unit_basis();
        let g = b.grid();
        for (i, j) in [(20, 20), (30, 25), (12, 28)] {
            assert!(b.is_interior(i, j));
            for n in [0, 5, 17] {
                let (v, _) = b.eval(n, &g.coords(i, j)).unwrap();
                assert!((v - b.grid_value(n, i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_values_vanish() {
        let b = unit_basis();
        let hex = b.hexagon();
        for n in [0, 1, 9, 39] {
            let peak = max_abs(b, n);
            for k in 0..6 {
                for s in 0..=20 {
                    let t = s as f64 / 20.0;
                    let p = hex.vertex(k) * (1.0 - t) + hex.vertex(k + 1) * t;
                    let (v, _) = b.eval(n, &p).unwrap();
                    assert!(v.abs() < 1e-3 * peak, "n = {n}, edge {k}, t = {t}: {v} vs {peak}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let b = unit_basis();
        let hex = b.hexagon();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let step = 1e-4;
        let mut tested = 0;
        while tested < 100 {
            let p = Vector2::new(rng.random_range(-0.9..0.9), rng.random_range(-0.8..0.8));
            if hex.signed_distance(&p) < 2.0 * step {
                continue;
            }
            let n = rng.random_range(0..b.count());
            let (v0, g) = b.eval(n, &p).unwrap();
            let (vx, _) = b.eval(n, &(p + Vector2::new(step, 0.0))).unwrap();
            let (vy, _) = b.eval(n, &(p + Vector2::new(0.0, step))).unwrap();
            let fd = Vector2::new((vx - v0) / step, (vy - v0) / step);
            let scale = g.norm().max(1e-3 * max_abs(b, n));
            assert!((fd - g).norm() < 1e-2 * scale, "n = {n} at {p:?}: {fd:?} vs {g:?}");
            tested += 1;
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        assert!(unit_basis().eval(0, &Vector2::new(1.01, 0.0)).is_err());
        assert!(unit_basis().eval(0, &Vector2::new(1.0, 0.0)).is_ok());
        assert!(unit_basis().eval(99, &Vector2::zeros()).is_err());
    }

    #[test]
    fn eval_all_agrees_with_single() {
        let b = unit_basis();
        let p = Vector2::new(0.31, -0.22);
        let (mut vals, mut grads) = (Vec::new(), Vec::new());
        b.eval_all(&p, &mut vals, &mut grads).unwrap();
        for n in [0, 7, 39] {
            let (v, g) = b.eval(n, &p).unwrap();
            assert!((v - vals[n]).abs() < 1e-12 * max_abs(b, n));
            assert!((g - grads[n]).norm() < 1e-12 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn smooth_function_vanishing_on_edges_is_reproduced() {
        // f = Π_k (c − n_k·p) · cos(x) vanishes on every edge line.
        let hex = Hexagon::new(1.0).unwrap();
        let st = build_laplacian_stencil(&hex, 0.04).unwrap();
        let g = st.grid;
        let f = |p: &Vector2<f64>| {
            (0..6).map(|k| hex.inradius() - Hexagon::edge_normal(k).dot(p)).product::<f64>() * p.x.cos()
        };
        let interior: Vec<bool> = st.unknown.iter().map(Option::is_some).collect();
        let mut vals = vec![0.0; g.len()];
        let mut peak: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                if interior[g.node(i, j)] {
                    vals[g.node(i, j)] = f(&g.coords(i, j));
                    peak = peak.max(vals[g.node(i, j)].abs());
                }
            }
        }
        let b = HexEigenbasis2D::from_parts(hex, g, interior, vec![1.0], vals).unwrap();
        for k in 0..6 {
            for s in 0..=50 {
                let t = s as f64 / 50.0;
                let p = (hex.vertex(k) * (1.0 - t) + hex.vertex(k + 1) * t) * 0.97;
                let (v, _) = b.eval(0, &p).unwrap();
                assert!((v - f(&p)).abs() < 1e-4 * peak);
            }
        }
    }

    #[test]
    fn envelope_vanishes_on_edges_with_unit_normal_slope() {
        let hex = Hexagon::new(2.0).unwrap();
        let mid = (hex.vertex(1) + hex.vertex(2)) * 0.5;
        let (d, g) = envelope(&hex, &mid);
        assert!(d.abs() < 1e-12);
        assert!((g + Hexagon::edge_normal(1)).norm() < 1e-9);
        assert!(envelope(&hex, &Vector2::zeros()).0 > 0.0);
    }
}

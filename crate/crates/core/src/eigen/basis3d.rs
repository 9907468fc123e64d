use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DVector, Matrix3xX, Vector2, Vector3};

use super::hex2d::HexEigenbasis2D;
use crate::error::{Error, Result};

/// Vertical modes considered per hexagon mode.
pub const MAX_VERTICAL_MODES: usize = 32;

/// Points this far outside the prism (relative to its size) are accepted.
const FACE_SLACK: f64 = 1e-9;

/// Eigenbasis of the Dirichlet Laplacian on a hexagonal prism: products of a
/// numerically solved hexagon mode and a sine in the vertical.
///
/// `φ_j(p) = φ^hex_{n1}(p1, p2) · sin(π n2 (p3 + L) / 2L) / √L` with `L` the
/// half-height, and `λ_j² = [λ^hex_{n1}]² + (π n2 / 2L)²`.
#[derive(Clone, Debug)]
pub struct Basis3D {
    hex: Arc<HexEigenbasis2D>,
    half_height: f64,
    /// 1-based `(n1, n2)`, ascending in `λ²`.
    pairs: Vec<(usize, usize)>,
    eigenvalues: Vec<f64>,
}

/// Picks the `m` prism modes with the smallest `λ²` (equivalently the largest
/// squared-exponential spectral weight), ties broken by `(n1, n2)`.
pub fn select_index_pairs(hex: Arc<HexEigenbasis2D>, half_height: f64, m: usize) -> Result<Basis3D> {
    if !(half_height > 0.0 && half_height.is_finite()) {
        return Err(Error::InvalidInput(format!("prism half-height {half_height}")));
    }
    if m == 0 {
        return Err(Error::InvalidInput("a basis needs at least one function".into()));
    }
    let hex_ev = hex.eigenvalues();
    let vertical = |n2: usize| (PI * n2 as f64 / (2.0 * half_height)).powi(2);
    let mut candidates: Vec<(f64, usize, usize)> = (1..=hex_ev.len())
        .flat_map(|n1| (1..=MAX_VERTICAL_MODES).map(move |n2| (n1, n2)))
        .map(|(n1, n2)| (hex_ev[n1 - 1] + vertical(n2), n1, n2))
        .collect();
    if candidates.len() < m {
        return Err(Error::InvalidInput(format!(
            "{m} basis functions requested from a pool of {}",
            candidates.len()
        )));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    candidates.truncate(m);

    // Every mode outside the pool has λ² at least this large.
    let unseen = (hex_ev[hex_ev.len() - 1] + vertical(1)).min(hex_ev[0] + vertical(MAX_VERTICAL_MODES + 1));
    let last = candidates[m - 1].0;
    if last > unseen {
        return Err(Error::InvalidInput(format!(
            "{} hexagon modes are too few for {m} prism modes (λ² {last:.4} exceeds the pool bound {unseen:.4})",
            hex_ev.len()
        )));
    }
    Ok(Basis3D {
        hex,
        half_height,
        pairs: candidates.iter().map(|&(_, a, b)| (a, b)).collect(),
        eigenvalues: candidates.iter().map(|&(l, _, _)| l).collect(),
    })
}

impl Basis3D {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of state entries per tile: three linear terms plus the basis.
    pub fn state_dim(&self) -> usize {
        self.len() + 3
    }

    pub fn hex(&self) -> &HexEigenbasis2D {
        &self.hex
    }

    pub fn index_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `λ_j²`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn extended_radius(&self) -> f64 {
        self.hex.hexagon().radius
    }

    pub fn extended_half_height(&self) -> f64 {
        self.half_height
    }

    fn check_vertical(&self, p: &Vector3<f64>) -> Result<()> {
        if !(p.z.abs() <= self.half_height * (1.0 + FACE_SLACK)) {
            return Err(Error::OutsideDomain {
                point: [p.x, p.y, p.z],
                domain: "the extended prism",
            });
        }
        Ok(())
    }

    /// Sine factor and its derivative for each vertical mode up to `max_n2`.
    fn vertical_factors(&self, z: f64, max_n2: usize) -> (Vec<f64>, Vec<f64>) {
        let l = self.half_height;
        let norm = 1.0 / l.sqrt();
        (1..=max_n2)
            .map(|n2| {
                let k = PI * n2 as f64 / (2.0 * l);
                let (s, c) = (k * (z + l)).sin_cos();
                (s * norm, k * c * norm)
            })
            .unzip()
    }

    /// Basis values `φ_j(p)` and gradients `∇φ_j(p)` (as columns) at a
    /// tile-local point.
    pub fn eval(&self, p: &Vector3<f64>) -> Result<(DVector<f64>, Matrix3xX<f64>)> {
        self.check_vertical(p)?;
        let (mut hv, mut hg) = (Vec::new(), Vec::new());
        self.hex.eval_all(&Vector2::new(p.x, p.y), &mut hv, &mut hg)?;
        let max_n2 = self.pairs.iter().map(|&(_, n2)| n2).max().unwrap_or(0);
        let (s, ds) = self.vertical_factors(p.z, max_n2);
        let m = self.len();
        let mut values = DVector::zeros(m);
        let mut grads = Matrix3xX::zeros(m);
        for (j, &(n1, n2)) in self.pairs.iter().enumerate() {
            let (f, g, sz, dsz) = (hv[n1 - 1], hg[n1 - 1], s[n2 - 1], ds[n2 - 1]);
            values[j] = f * sz;
            grads.set_column(j, &Vector3::new(g.x * sz, g.y * sz, f * dsz));
        }
        Ok((values, grads))
    }

    /// `∇Φ(p)`: the 3×(m+3) gradient of the tile features at a tile-local
    /// point, the identity for the linear terms followed by `∇φ_j`.
    pub fn eval_nabla_phi(&self, p: &Vector3<f64>) -> Result<Matrix3xX<f64>> {
        let (_, grads) = self.eval(p)?;
        let mut out = Matrix3xX::zeros(self.state_dim());
        out.fixed_columns_mut::<3>(0).fill_with_identity();
        out.columns_mut(3, self.len()).copy_from(&grads);
        Ok(out)
    }

    /// `Φ(p)`: the scalar-potential features `(p1, p2, p3, φ_1, …, φ_m)`.
    pub fn eval_potential(&self, p: &Vector3<f64>) -> Result<DVector<f64>> {
        let (values, _) = self.eval(p)?;
        let mut out = DVector::zeros(self.state_dim());
        out.fixed_rows_mut::<3>(0).copy_from(p);
        out.rows_mut(3, self.len()).copy_from(&values);
        Ok(out)
    }
}

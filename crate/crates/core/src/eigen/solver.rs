//! Smallest eigenpairs of a sparse symmetric positive-definite matrix.
//!
//! Block Lanczos on the shift-inverted operator `A⁻¹` with full
//! reorthogonalisation, followed by a Rayleigh–Ritz projection of `A` on
//! the Krylov basis. Inverse applications go through an envelope Cholesky
//! factor, which is cheap for lattice-ordered stencils (bandwidth ≈ one
//! grid row). The block width handles the (near-)double eigenvalues that
//! symmetric domains produce.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::stencil::SparseSym;
use crate::error::{Error, Result};

/// Cholesky factor `A = L Lᵀ` stored row-wise over the envelope of `A`.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n;
        let first = a.first_columns();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[offset[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[offset[j]..offset[j + 1]];
                let dot: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(&row_j[k0 - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / ljj;
            }
            let sq: f64 = row_i[..i - fi].iter().map(|x| x * x).sum();
            let d = row_i[i - fi] - sq;
            if !(d > 0.0) {
                return Err(Error::Numerical(format!(
                    "stencil matrix is not positive definite (pivot {d:e} at row {i})"
                )));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self {
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }
}

/// Tuning for [`smallest_eigenpairs`].
#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub block_size: usize,
    /// Residual tolerance relative to the eigenvalue.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            block_size: 4,
            tolerance: 1e-7,
            seed: 0x5eed,
        }
    }
}

/// Converged eigenpairs, ascending.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit 2-norm eigenvectors as columns.
    pub vectors: DMatrix<f64>,
    /// `‖A x − λ x‖ / λ` per pair.
    pub residuals: Vec<f64>,
}

/// The `count` smallest eigenpairs of the SPD matrix `a`.
pub fn smallest_eigenpairs(a: &SparseSym, count: usize, opts: EigenOptions) -> Result<EigenPairs> {
    let n = a.n;
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!(
            "requested {count} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let chol = EnvelopeCholesky::factor(a)?;
    let b = opts.block_size.max(1);
    let round_up = |d: usize| d.div_ceil(b) * b;
    let mut dim = round_up((3 * count + 60).min(n));
    let max_dim = round_up((8 * count + 200).min(n));
    loop {
        let dim_eff = dim.min(n);
        let pairs = krylov_ritz(a, &chol, count, b, dim_eff, opts.seed)?;
        let worst = pairs.residuals.iter().copied().fold(0.0, f64::max);
        if worst <= opts.tolerance {
            return Ok(pairs);
        }
        if dim_eff >= max_dim.min(n) {
            return Err(Error::Eigensolver(format!(
                "worst relative residual {worst:.3e} > {:.1e} with a {dim_eff}-dimensional Krylov space",
                opts.tolerance
            )));
        }
        dim = round_up(dim * 3 / 2);
    }
}

fn krylov_ritz(
    a: &SparseSym,
    chol: &EnvelopeCholesky,
    count: usize,
    block: usize,
    dim: usize,
    seed: u64,
) -> Result<EigenPairs> {
    let n = a.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::<f64>::zeros(n, dim);
    let mut filled = 0;
    let mut w = DMatrix::<f64>::from_fn(n, block.min(dim), |_, _| StandardNormal.sample(&mut rng));
    while filled < dim {
        let width = w.ncols().min(dim - filled);
        for _pass in 0..2 {
            if filled > 0 {
                let basis = q.columns(0, filled);
                let coeff = basis.tr_mul(&w);
                w -= basis * coeff;
            }
        }
        let mut added = 0;
        for c in 0..width {
            let mut v: DVector<f64> = w.column(c).into_owned();
            let mut accepted = false;
            // The block was already orthogonalised against earlier blocks,
            // so a fresh column only needs the current block; a random
            // restart needs everything.
            let mut from = filled;
            for _attempt in 0..4 {
                let before = v.norm();
                for _pass in 0..2 {
                    for k in from..filled + added {
                        let qk = q.column(k);
                        let proj = qk.dot(&v);
                        v.axpy(-proj, &qk, 1.0);
                    }
                }
                let after = v.norm();
                if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 0.0 {
                    q.column_mut(filled + added).copy_from(&(v / after));
                    accepted = true;
                    break;
                }
                // Krylov space exhausted in this direction: restart it.
                v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                from = 0;
            }
            if !accepted {
                return Err(Error::Eigensolver(
                    "could not extend the Krylov basis (rank collapse)".into(),
                ));
            }
            added += 1;
        }
        let start = filled;
        filled += added;
        if filled >= dim {
            break;
        }
        let next = block.min(dim - filled);
        w = DMatrix::zeros(n, next);
        for c in 0..next {
            let mut col: Vec<f64> = q.column(start + c % added).iter().copied().collect();
            chol.solve_in_place(&mut col);
            w.column_mut(c).copy_from_slice(&col);
        }
    }

    // Rayleigh–Ritz with A itself.
    let mut aq = DMatrix::<f64>::zeros(n, dim);
    let mut y = vec![0.0; n];
    for c in 0..dim {
        a.mul_vec(q.column(c).as_slice(), &mut y);
        aq.column_mut(c).copy_from_slice(&y);
    }
    let mut t = q.tr_mul(&aq);
    t = (&t + t.transpose()) * 0.5;
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let sel = &order[..count];
    let ymat = DMatrix::from_fn(dim, count, |r, c| eig.eigenvectors[(r, sel[c])]);
    let x = &q * &ymat;
    let ax = &aq * &ymat;
    let values: Vec<f64> = sel.iter().map(|&i| eig.eigenvalues[i]).collect();
    let residuals = (0..count)
        .map(|c| {
            let r = ax.column(c) - x.column(c) * values[c];
            r.norm() / (values[c].abs() * x.column(c).norm())
        })
        .collect();
    Ok(EigenPairs {
        values,
        vectors: x,
        residuals,
    })
}

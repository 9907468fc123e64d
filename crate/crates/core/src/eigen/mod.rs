//! Laplace eigenbasis of the extended hexagonal tile.

mod basis3d;
mod hex2d;
mod solver;
mod stencil;

use std::sync::Arc;

pub use basis3d::{select_index_pairs, Basis3D, MAX_VERTICAL_MODES};
pub use hex2d::HexEigenbasis2D;
pub use solver::{smallest_eigenpairs, EigenOptions, EigenPairs, EnvelopeCholesky};
pub use stencil::{build_laplacian_stencil, Domain2D, Grid2D, LaplacianStencil, Rectangle, SparseSym};

use crate::error::Result;

/// Everything that determines a tile basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisSpec {
    /// Circumradius of the tile hexagon, metres.
    pub radius: f64,
    /// Half-height of the tile slab, metres.
    pub half_height: f64,
    /// How far the eigenproblem domain extends past the tile, metres.
    pub extension: f64,
    /// Lattice step of the hexagon eigenproblem, metres.
    pub step: f64,
    /// Hexagon modes solved for the candidate pool.
    pub hex_modes: usize,
    /// Basis functions kept.
    pub m: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            radius: 5.0,
            half_height: 2.0,
            extension: 1.0,
            step: 0.1,
            hex_modes: 96,
            m: 256,
        }
    }
}

impl BasisSpec {
    pub fn extended_radius(&self) -> f64 {
        self.radius + self.extension
    }

    pub fn extended_half_height(&self) -> f64 {
        self.half_height + self.extension
    }

    /// Solves the hexagon eigenproblem and selects the prism modes.
    pub fn build(&self) -> Result<Basis3D> {
        let hex = HexEigenbasis2D::solve(self.extended_radius(), self.step, self.hex_modes)?;
        select_index_pairs(Arc::new(hex), self.extended_half_height(), self.m)
    }
}

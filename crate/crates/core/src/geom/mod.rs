//! Quaternions, rigid poses and the hexagonal prism tiling.

mod hexgrid;
mod psd;
mod quaternion;

pub use hexgrid::{Hexagon, HexGridSpec, TileId};
pub use psd::psd_sqrt;
pub use quaternion::{quat_exp, quat_multiply, quat_to_rotmat, Pose, Quaternion};

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this rotation angle `exp` switches to its Taylor expansion.
const SMALL_ANGLE: f64 = 1e-8;

/// Hamilton quaternion, scalar first.
///
/// Rotations are unit quaternions. `q.to_rotation_matrix()` maps body-frame
/// vectors to the world frame when `q` is a body-to-world orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Rotation of `angle` radians about `axis` (need not be normalised).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() || !angle.is_finite() {
            return Err(Error::InvalidInput(format!(
                "axis-angle needs a finite nonzero axis, got {axis:?} / {angle}"
            )));
        }
        quat_exp(&(axis * (angle / n)))
    }

    /// Rotation about the world z axis.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (0.5 * yaw).sin_cos();
        Self::new(c, 0.0, 0.0, s)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Scales to unit norm. The zero quaternion maps to the identity.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Raw Hamilton product without renormalisation.
    pub fn hamilton(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        quat_to_rotmat(self)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_rotation_matrix() * v
    }

    /// Rotation angle in `[0, π]` between two orientations.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let d = self.conjugate().hamilton(other);
        2.0 * d.vector().norm().atan2(d.w.abs())
    }

    /// Yaw of the rotated body x axis, radians.
    pub fn yaw(&self) -> f64 {
        let r = self.to_rotation_matrix();
        r[(1, 0)].atan2(r[(0, 0)])
    }
}

/// Renormalised Hamilton product; no finiteness check (see [`quat_multiply`]).
impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.hamilton(&rhs).normalized()
    }
}

/// Hamilton product `q1 ⊙ q2`, renormalised.
///
/// With `q2` a body-to-world orientation, `q1 ⊙ q2` applies `q1` as a
/// world-frame increment.
pub fn quat_multiply(q1: &Quaternion, q2: &Quaternion) -> Result<Quaternion> {
    if !q1.is_finite() || !q2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite quaternion in product: {q1:?} ⊙ {q2:?}"
        )));
    }
    Ok(q1.hamilton(q2).normalized())
}

/// Unit quaternion of the rotation vector `v` (angle ‖v‖ about v/‖v‖).
pub fn quat_exp(v: &Vector3<f64>) -> Result<Quaternion> {
    if !v.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite rotation vector {v:?}"
        )));
    }
    let theta = v.norm();
    let (w, s) = if theta < SMALL_ANGLE {
        // cos(θ/2) and sin(θ/2)/θ to fourth order
        let t2 = theta * theta;
        (1.0 - t2 / 8.0, 0.5 - t2 / 48.0)
    } else {
        let half = 0.5 * theta;
        (half.cos(), half.sin() / theta)
    };
    Ok(Quaternion::new(w, s * v.x, s * v.y, s * v.z).normalized())
}

pub fn quat_to_rotmat(q: &Quaternion) -> Matrix3<f64> {
    let Quaternion { w, x, y, z } = *q;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )
}

/// Rigid pose of the sensor: world-frame position and body-to-world
/// orientation.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Quaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// `R^{bw}`: world-to-body rotation.
    pub fn world_to_body(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().transpose()
    }
}

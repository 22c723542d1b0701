//! Vector, yaw-rotation and grid-index arithmetic shared by every module.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

/// World-frame point or derivative, in meters (or m/s^k).
pub type Vec3 = Vector3<f64>;

/// Wraps an angle to the half-open interval (-pi, pi].
pub fn normalize_yaw(theta: f64) -> f64 {
    let wrapped = theta.sin().atan2(theta.cos());
    // atan2 returns [-pi, pi]; fold the closed end over
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Signed difference `a - b` wrapped to (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_yaw(a - b)
}

/// Returns the representative of `theta` closest to `reference` (nearest-branch unwrap).
pub fn unwrap_near(theta: f64, reference: f64) -> f64 {
    reference + angle_diff(theta, reference)
}

/// World-to-body rotation about the vertical axis.
///
/// ```text
/// [ cos  sin  0 ]
/// [-sin  cos  0 ]
/// [  0    0   1 ]
/// ```
pub fn yaw_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Derivative of [`yaw_rotation`] with respect to the angle.
pub fn yaw_rotation_derivative(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(-s, c, 0.0, -c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Keeps the horizontal component of `v`.
pub fn horizontal_projection(v: &Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

/// Position plus heading of the tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawPose {
    pub position: Vec3,
    /// Radians in (-pi, pi].
    pub yaw: f64,
}

impl YawPose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: normalize_yaw(yaw),
        }
    }

    /// Expresses a world point in this pose's body frame.
    pub fn to_body(&self, world: &Vec3) -> Vec3 {
        yaw_rotation(self.yaw) * (world - self.position)
    }

    /// Maps a body-frame point back to the world frame.
    pub fn to_world(&self, body: &Vec3) -> Vec3 {
        self.position + yaw_rotation(self.yaw).transpose() * body
    }
}

/// Axis-aligned regular lattice. `origin` is the center of voxel (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Option<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() || dims.iter().any(|&d| d == 0) {
            return None;
        }
        Some(Self {
            origin,
            resolution,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fractional lattice coordinate of `p`; not clamped.
    pub fn world_to_grid(&self, p: &Vec3) -> Vec3 {
        (p - self.origin) / self.resolution
    }

    pub fn grid_to_world(&self, idx: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * self.resolution
    }

    /// Voxel whose cell (center +- half a voxel) contains `p`, if inside the grid.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let g = self.world_to_grid(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let i = (g[a] + 0.5).floor();
            if i < 0.0 || i >= self.dims[a] as f64 || !i.is_finite() {
                return None;
            }
            out[a] = i as usize;
        }
        Some(out)
    }

    /// Row-major linear index with x varying fastest.
    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        let r = i / self.dims[0];
        [x, r % self.dims[1], r / self.dims[1]]
    }

    /// Lower corner of the voxel cells (origin minus half a voxel).
    pub fn min_corner(&self) -> Vec3 {
        self.origin - Vec3::repeat(0.5 * self.resolution)
    }

    /// Upper corner of the voxel cells.
    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64 - 0.5,
                self.dims[1] as f64 - 0.5,
                self.dims[2] as f64 - 0.5,
            ) * self.resolution
    }
}

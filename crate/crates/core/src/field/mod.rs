//! Precomputed distance fields: the field-of-view field (distance from a
//! point inside the camera pyramid to the nearest pyramid face) and the
//! robot-shape penetration field used by the collision penalty.
//!
//! Both are built once by an exact squared distance transform and then only
//! read. Queries interpolate trilinearly between voxel centers.

mod io;
pub mod transform;

use crate::error::{Error, Result};
use crate::geometry::{yaw_rotation, yaw_rotation_derivative, GridSpec, Vec3};

pub use io::{load_field, read_field, save_field, write_field, FIELD_MAGIC, FIELD_VERSION};

/// Camera view pyramid: `0 < x <= depth`, `|y| <= x tan(alpha/2)`, `|z| <= x tan(beta/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovParams {
    /// Horizontal field of view, radians.
    pub alpha: f64,
    /// Vertical field of view, radians.
    pub beta: f64,
    /// Preferred observation distance, meters.
    pub distance: f64,
    /// Pyramid depth, meters.
    pub depth: f64,
}

/// Depth that makes the axial point `(d, 0, 0)` the maximizer of the
/// distance-to-boundary along the optical axis.
///
/// On the axis the nearest slanted face is at `x sin(min(alpha, beta)/2)` and
/// the far face at `depth - x`; equating them at `x = d` gives the result.
pub fn choose_depth(alpha: f64, beta: f64, distance: f64) -> f64 {
    distance * (1.0 + (0.5 * alpha.min(beta)).sin())
}

impl FovParams {
    pub fn new(alpha: f64, beta: f64, distance: f64) -> Result<Self> {
        let ok_angle = |a: f64| a > 0.0 && a < std::f64::consts::PI;
        if !ok_angle(alpha) || !ok_angle(beta) {
            return Err(Error::InvalidFov(format!(
                "angles must lie in (0, pi): alpha={alpha}, beta={beta}"
            )));
        }
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::InvalidFov(format!("observation distance must be positive, got {distance}")));
        }
        Ok(Self {
            alpha,
            beta,
            distance,
            depth: choose_depth(alpha, beta, distance),
        })
    }

    pub fn from_degrees(alpha_deg: f64, beta_deg: f64, distance: f64) -> Result<Self> {
        Self::new(alpha_deg.to_radians(), beta_deg.to_radians(), distance)
    }

    /// Default camera used throughout: 69.4 x 42.5 degrees, 2.5 m.
    pub fn standard() -> Self {
        Self::from_degrees(69.4, 42.5, 2.5).expect("valid constants")
    }

    pub fn tan_half_alpha(&self) -> f64 {
        (0.5 * self.alpha).tan()
    }

    pub fn tan_half_beta(&self) -> f64 {
        (0.5 * self.beta).tan()
    }

    /// Body-frame pyramid membership.
    pub fn contains(&self, p: &Vec3) -> bool {
        p.x > 0.0
            && p.x <= self.depth
            && p.y.abs() <= p.x * self.tan_half_alpha()
            && p.z.abs() <= p.x * self.tan_half_beta()
    }

    /// Exact Euclidean distance from an inside point to the nearest face.
    pub fn distance_to_boundary(&self, p: &Vec3) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        let (sa, ca) = (0.5 * self.alpha).sin_cos();
        let (sb, cb) = (0.5 * self.beta).sin_cos();
        let side_y = p.x * sa - p.y.abs() * ca;
        let side_z = p.x * sb - p.z.abs() * cb;
        side_y.min(side_z).min(self.depth - p.x)
    }
}

/// Robot body used for the penetration field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobotShape {
    Sphere { radius: f64 },
    Box { half_extents: Vec3 },
}

/// Regular 3-D grid of `f32` values with per-voxel central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    spec: GridSpec,
    fov: Option<FovParams>,
    values: Vec<f32>,
    gradients: Vec<[f32; 3]>,
}

/// Value and gradient at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: Vec3,
}

impl FieldSample {
    const ZERO: Self = Self {
        value: 0.0,
        gradient: Vec3::new(0.0, 0.0, 0.0),
    };
}

impl ScalarField3 {
    /// Wraps raw values and derives central-difference gradients.
    pub fn from_values(spec: GridSpec, fov: Option<FovParams>, values: Vec<f32>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {}",
                values.len(),
                spec.len()
            )));
        }
        let gradients = central_differences(&spec, &values);
        Ok(Self {
            spec,
            fov,
            values,
            gradients,
        })
    }

    pub(crate) fn from_parts(
        spec: GridSpec,
        fov: Option<FovParams>,
        values: Vec<f32>,
        gradients: Vec<[f32; 3]>,
    ) -> Self {
        Self {
            spec,
            fov,
            values,
            gradients,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn fov(&self) -> Option<&FovParams> {
        self.fov.as_ref()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn gradients(&self) -> &[[f32; 3]] {
        &self.gradients
    }

    pub fn voxel_value(&self, idx: [usize; 3]) -> f64 {
        self.values[self.spec.linear(idx)] as f64
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f32, |a, &b| a.max(b)) as f64
    }

    /// Bytes held by values and gradients.
    pub fn memory_bytes(&self) -> usize {
        self.values.len() * std::mem::size_of::<f32>() + self.gradients.len() * std::mem::size_of::<[f32; 3]>()
    }

    /// Lattice cell containing `p` plus fractional offsets, or `None` outside.
    #[inline]
    fn locate(&self, p: &Vec3) -> Option<([usize; 3], [f64; 3])> {
        let g = self.spec.world_to_grid(p);
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.spec.dims[a];
            let ga = g[a];
            if !(ga >= 0.0) || ga > (n - 1) as f64 {
                return None;
            }
            if n == 1 {
                base[a] = 0;
                frac[a] = 0.0;
                continue;
            }
            let i = (ga.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = ga - i as f64;
        }
        Some((base, frac))
    }

    #[inline]
    fn corner_offsets(&self, base: [usize; 3]) -> [usize; 8] {
        let d = self.spec.dims;
        let sx = usize::from(d[0] > 1);
        let sy = if d[1] > 1 { d[0] } else { 0 };
        let sz = if d[2] > 1 { d[0] * d[1] } else { 0 };
        let i0 = self.spec.linear(base);
        [
            i0,
            i0 + sx,
            i0 + sy,
            i0 + sx + sy,
            i0 + sz,
            i0 + sx + sz,
            i0 + sy + sz,
            i0 + sx + sy + sz,
        ]
    }

    /// Trilinear value and trilinearly interpolated stored gradient.
    /// Points outside the lattice give zero.
    pub fn query(&self, p: &Vec3) -> FieldSample {
        let Some((base, [fx, fy, fz])) = self.locate(p) else {
            return FieldSample::ZERO;
        };
        let idx = self.corner_offsets(base);
        let w = trilinear_weights(fx, fy, fz);
        let mut value = 0.0;
        let mut gradient = Vec3::zeros();
        for c in 0..8 {
            value += w[c] * self.values[idx[c]] as f64;
            let g = self.gradients[idx[c]];
            gradient += w[c] * Vec3::new(g[0] as f64, g[1] as f64, g[2] as f64);
        }
        FieldSample { value, gradient }
    }

    /// Trilinear value and the exact derivative of the trilinear interpolant.
    ///
    /// Unlike [`query`](Self::query) the gradient here is consistent with the
    /// value, which is what line searches and finite-difference checks need.
    pub fn interpolate(&self, p: &Vec3) -> FieldSample {
        let Some((base, [fx, fy, fz])) = self.locate(p) else {
            return FieldSample::ZERO;
        };
        let idx = self.corner_offsets(base);
        let v: [f64; 8] = std::array::from_fn(|c| self.values[idx[c]] as f64);
        if v.iter().all(|&x| x == 0.0) {
            return FieldSample::ZERO;
        }
        let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
        // interpolate along x first
        let c00 = v[0] * gx + v[1] * fx;
        let c10 = v[2] * gx + v[3] * fx;
        let c01 = v[4] * gx + v[5] * fx;
        let c11 = v[6] * gx + v[7] * fx;
        let c0 = c00 * gy + c10 * fy;
        let c1 = c01 * gy + c11 * fy;
        let value = c0 * gz + c1 * fz;

        let dx00 = v[1] - v[0];
        let dx10 = v[3] - v[2];
        let dx01 = v[5] - v[4];
        let dx11 = v[7] - v[6];
        let dx = (dx00 * gy + dx10 * fy) * gz + (dx01 * gy + dx11 * fy) * fz;
        let dy = (c10 - c00) * gz + (c11 - c01) * fz;
        let dz = c1 - c0;
        let inv = 1.0 / self.spec.resolution;
        FieldSample {
            value,
            gradient: Vec3::new(dx, dy, dz) * inv,
        }
    }
}

#[inline]
fn trilinear_weights(fx: f64, fy: f64, fz: f64) -> [f64; 8] {
    let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
    [
        gx * gy * gz,
        fx * gy * gz,
        gx * fy * gz,
        fx * fy * gz,
        gx * gy * fz,
        fx * gy * fz,
        gx * fy * fz,
        fx * fy * fz,
    ]
}

/// Per-voxel gradient in value units per meter; one-sided at grid edges.
fn central_differences(spec: &GridSpec, values: &[f32]) -> Vec<[f32; 3]> {
    let d = spec.dims;
    let strides = [1, d[0], d[0] * d[1]];
    let inv = 1.0 / spec.resolution;
    (0..values.len())
        .map(|i| {
            let idx = spec.unlinear(i);
            let mut g = [0.0f32; 3];
            for a in 0..3 {
                if d[a] < 2 {
                    continue;
                }
                let (lo, hi, span) = if idx[a] == 0 {
                    (i, i + strides[a], 1.0)
                } else if idx[a] == d[a] - 1 {
                    (i - strides[a], i, 1.0)
                } else {
                    (i - strides[a], i + strides[a], 2.0)
                };
                g[a] = ((values[hi] as f64 - values[lo] as f64) / span * inv) as f32;
            }
            g
        })
        .collect()
}

/// Integer half-width (in voxels) covering `extent` plus a free margin.
fn half_cells(extent: f64, resolution: f64, margin: usize) -> usize {
    (extent / resolution - 1e-9).ceil().max(0.0) as usize + margin
}

/// Builds the field-of-view distance field.
///
/// The lattice covers the pyramid's bounding box plus two free voxels and is
/// aligned so that the optical axis runs through voxel centers. Each inside
/// voxel stores the distance to the nearest boundary voxel (see
/// [`boundary_voxels`]); outside voxels store zero.
pub fn build_fov_esdf(fov: &FovParams, resolution: f64) -> Result<ScalarField3> {
    if !(fov.alpha > 0.0) || !(fov.beta > 0.0) {
        return Err(Error::InvalidFov("alpha and beta must be positive".into()));
    }
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::InvalidParameter(format!("resolution must be positive, got {resolution}")));
    }
    let margin = 2;
    let nx_pos = half_cells(fov.depth, resolution, margin);
    let ny = half_cells(fov.depth * fov.tan_half_alpha(), resolution, margin);
    let nz = half_cells(fov.depth * fov.tan_half_beta(), resolution, margin);
    let dims = [nx_pos + margin + 1, 2 * ny + 1, 2 * nz + 1];
    let origin = Vec3::new(
        -(margin as f64) * resolution,
        -(ny as f64) * resolution,
        -(nz as f64) * resolution,
    );
    let spec = GridSpec::new(origin, resolution, dims)
        .ok_or_else(|| Error::InvalidParameter("degenerate field grid".into()))?;

    let inside: Vec<bool> = (0..spec.len()).map(|i| fov.contains(&spec.grid_to_world(spec.unlinear(i)))).collect();
    let boundary = boundary_voxels(&spec, &inside);
    let sq = transform::squared_edt(dims, &boundary);
    let values = inside
        .iter()
        .zip(&sq)
        .map(|(&ins, &d2)| if ins && d2.is_finite() { (d2.sqrt() * resolution) as f32 } else { 0.0 })
        .collect();
    ScalarField3::from_values(spec, Some(*fov), values)
}

/// Inside voxels with at least one of their 26 neighbors outside (or at the
/// grid edge).
///
/// For a convex region every lattice cell that contains an outside point has
/// an outside corner, and all its other corners are 26-neighbors of it, so the
/// interpolated field is exactly zero outside.
pub fn boundary_voxels(spec: &GridSpec, inside: &[bool]) -> Vec<bool> {
    let d = spec.dims;
    (0..inside.len())
        .map(|i| {
            if !inside[i] {
                return false;
            }
            let idx = spec.unlinear(i);
            if (0..3).any(|a| idx[a] == 0 || idx[a] == d[a] - 1) {
                return true;
            }
            for dz in 0..3 {
                for dy in 0..3 {
                    for dx in 0..3 {
                        let n = [idx[0] + dx - 1, idx[1] + dy - 1, idx[2] + dz - 1];
                        if !inside[spec.linear(n)] {
                            return true;
                        }
                    }
                }
            }
            false
        })
        .collect()
}

/// Builds the penetration-depth field of the inflated robot body.
///
/// Inside the inflated shape the value is the distance to the nearest outside
/// voxel center less half a voxel; outside it is zero.
pub fn build_robot_field(shape: RobotShape, safety_margin: f64, resolution: f64) -> Result<ScalarField3> {
    if !(resolution > 0.0) || !(safety_margin >= 0.0) {
        return Err(Error::InvalidParameter("resolution must be positive and margin non-negative".into()));
    }
    let half = match shape {
        RobotShape::Sphere { radius } => {
            if !(radius > 0.0) {
                return Err(Error::InvalidShape(format!("sphere radius must be positive, got {radius}")));
            }
            Vec3::repeat(radius)
        }
        RobotShape::Box { half_extents } => {
            if half_extents.iter().any(|&h| !(h > 0.0)) {
                return Err(Error::InvalidShape(format!("box half extents must be positive, got {half_extents:?}")));
            }
            half_extents
        }
    };
    let n: [usize; 3] = std::array::from_fn(|a| half_cells(half[a] + safety_margin, resolution, 3));
    let dims = [2 * n[0] + 1, 2 * n[1] + 1, 2 * n[2] + 1];
    let origin = Vec3::new(
        -(n[0] as f64) * resolution,
        -(n[1] as f64) * resolution,
        -(n[2] as f64) * resolution,
    );
    let spec = GridSpec::new(origin, resolution, dims)
        .ok_or_else(|| Error::InvalidParameter("degenerate robot grid".into()))?;
    let inside_shape = |p: &Vec3| match shape {
        RobotShape::Sphere { radius } => p.norm() <= radius + safety_margin,
        RobotShape::Box { half_extents } => {
            // Minkowski sum of the box and a ball of the margin radius
            let outside = (p.abs() - half_extents).sup(&Vec3::zeros());
            outside.norm() <= safety_margin
        }
    };
    let inside: Vec<bool> = (0..spec.len()).map(|i| inside_shape(&spec.grid_to_world(spec.unlinear(i)))).collect();
    let outside: Vec<bool> = inside.iter().map(|&b| !b).collect();
    let sq = transform::squared_edt(dims, &outside);
    let values = inside
        .iter()
        .zip(&sq)
        .map(|(&ins, &d2)| {
            if ins {
                ((d2.sqrt() - 0.5).max(0.0) * resolution) as f32
            } else {
                0.0
            }
        })
        .collect();
    ScalarField3::from_values(spec, None, values)
}

/// Collision metric `H = sum_k h(v_k)^3` with `v_k = R(yaw) (w_k - p)` and
/// its derivatives with respect to the position and yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionCost {
    pub value: f64,
    pub d_position: Vec3,
    pub d_yaw: f64,
}

pub fn collision_cost(robot: &ScalarField3, obstacles: &[Vec3], position: &Vec3, yaw: f64) -> CollisionCost {
    let rot = yaw_rotation(yaw);
    let drot = yaw_rotation_derivative(yaw);
    let reach = robot.spec().max_corner().norm();
    let reach2 = reach * reach;
    let mut out = CollisionCost {
        value: 0.0,
        d_position: Vec3::zeros(),
        d_yaw: 0.0,
    };
    for w in obstacles {
        let rel = w - position;
        if rel.norm_squared() > reach2 {
            continue;
        }
        let v = rot * rel;
        let s = robot.interpolate(&v);
        if s.value <= 0.0 {
            continue;
        }
        out.value += s.value.powi(3);
        let k = 3.0 * s.value * s.value;
        out.d_position -= k * rot.transpose() * s.gradient;
        out.d_yaw += k * (drot * rel).dot(&s.gradient);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Axial point maximizing min distance to the five faces, by dense 1-D scan.
    fn brute_force_depth(alpha: f64, beta: f64, d: f64) -> f64 {
        // For a candidate depth D the axial profile is min(x sin(a/2), x sin(b/2), D - x);
        // bisect on D until its argmax sits at d.
        let argmax = |depth: f64| {
            let n = 200_000;
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 1..n {
                let x = depth * i as f64 / n as f64;
                let v = (x * (0.5 * alpha).sin()).min(x * (0.5 * beta).sin()).min(depth - x);
                if v > best.1 {
                    best = (x, v);
                }
            }
            best.0
        };
        let (mut lo, mut hi) = (d, 3.0 * d);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if argmax(mid) < d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn depth_rule_matches_brute_force() {
        let d1 = choose_depth(69.4f64.to_radians(), 42.5f64.to_radians(), 2.5);
        assert!((d1 - 3.4061).abs() < 1e-4, "{d1}");
        assert!((d1 - brute_force_depth(69.4f64.to_radians(), 42.5f64.to_radians(), 2.5)).abs() < 1e-4);
        let d2 = choose_depth(90f64.to_radians(), 90f64.to_radians(), 1.0);
        assert!((d2 - 1.7071).abs() < 1e-4);
        assert!((d2 - brute_force_depth(90f64.to_radians(), 90f64.to_radians(), 1.0)).abs() < 1e-4);
        assert!((choose_depth(1.0, 1e-9, 2.0) - 2.0).abs() < 1e-8);
        // either ordering of the angles
        assert_eq!(choose_depth(0.5, 1.2, 2.0), choose_depth(1.2, 0.5, 2.0));
    }

    #[test]
    fn rejects_degenerate_fov() {
        assert!(FovParams::from_degrees(0.0, 42.5, 2.5).is_err());
        assert!(FovParams::from_degrees(69.4, -1.0, 2.5).is_err());
        assert!(FovParams::from_degrees(69.4, 42.5, 0.0).is_err());
        assert!(FovParams::from_degrees(180.0, 42.5, 2.5).is_err());
    }

    #[test]
    fn default_field_values() {
        let fov = FovParams::standard();
        let f = build_fov_esdf(&fov, 0.05).unwrap();
        assert_eq!(f.query(&Vec3::new(2.0 * fov.depth, 0.0, 0.0)).value, 0.0);
        let center = f.query(&Vec3::new(fov.distance, 0.0, 0.0)).value;
        let diag = 0.05 * 3f64.sqrt();
        assert!((center - fov.distance * (0.5 * fov.beta).sin()).abs() <= diag, "{center}");
        assert!(f.query(&Vec3::zeros()).value <= 0.05);
        assert!(f.memory_bytes() < 16 << 20);
    }

    #[test]
    fn interpolation_at_lattice_and_midpoints() {
        let f = build_fov_esdf(&FovParams::standard(), 0.1).unwrap();
        let idx = [15, f.spec().dims[1] / 2 + 3, f.spec().dims[2] / 2 - 1];
        let p = f.spec().grid_to_world(idx);
        assert!((f.query(&p).value - f.voxel_value(idx)).abs() < 1e-12);
        let q = f.spec().grid_to_world([idx[0] + 1, idx[1], idx[2]]);
        let mid = f.query(&(0.5 * (p + q))).value;
        let expect = 0.5 * (f.voxel_value(idx) + f.voxel_value([idx[0] + 1, idx[1], idx[2]]));
        assert!((mid - expect).abs() < 1e-9);
        let s = f.interpolate(&(0.5 * (p + q)));
        assert!((s.value - mid).abs() < 1e-12);
    }

    #[test]
    fn outside_everything_is_zero() {
        let fov = FovParams::standard();
        let f = build_fov_esdf(&fov, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut n = 0;
        while n < 10_000 {
            let p = Vec3::new(rng.random_range(-1.0..5.0), rng.random_range(-3.5..3.5), rng.random_range(-2.0..2.0));
            if fov.contains(&p) {
                continue;
            }
            n += 1;
            assert_eq!(f.query(&p).value, 0.0, "{p:?}");
            assert_eq!(f.interpolate(&p).value, 0.0, "{p:?}");
        }
    }

    #[test]
    fn values_non_negative_and_zero_outside_pyramid() {
        let fov = FovParams::standard();
        let f = build_fov_esdf(&fov, 0.05).unwrap();
        for (i, &v) in f.values().iter().enumerate() {
            assert!(v >= 0.0);
            if !fov.contains(&f.spec().grid_to_world(f.spec().unlinear(i))) {
                assert_eq!(v, 0.0);
            }
        }
    }

    /// True when the two nearest bounding planes are within `gap` of each
    /// other, i.e. the distance field has a kink nearby.
    fn near_medial_surface(fov: &FovParams, p: &Vec3, gap: f64) -> bool {
        let (sa, ca) = (0.5 * fov.alpha).sin_cos();
        let (sb, cb) = (0.5 * fov.beta).sin_cos();
        let mut d = [
            p.x * sa - p.y * ca,
            p.x * sa + p.y * ca,
            p.x * sb - p.z * cb,
            p.x * sb + p.z * cb,
            fov.depth - p.x,
        ];
        d.sort_by(f64::total_cmp);
        d[1] - d[0] < gap
    }

    #[test]
    fn stored_gradient_tracks_interpolated_value() {
        let fov = FovParams::standard();
        let f = build_fov_esdf(&fov, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = 0.05 / 10.0;
        let mut checked = 0;
        let mut total_err = 0.0;
        let mut total_norm = 0.0;
        while checked < 1000 {
            let p = Vec3::new(rng.random_range(0.3..3.2), rng.random_range(-1.5..1.5), rng.random_range(-0.9..0.9));
            if fov.distance_to_boundary(&p) < 0.2 || near_medial_surface(&fov, &p, 2.0 * 0.05) {
                continue;
            }
            checked += 1;
            let fd = Vec3::new(
                (f.query(&(p + Vec3::x() * h)).value - f.query(&(p - Vec3::x() * h)).value) / (2.0 * h),
                (f.query(&(p + Vec3::y() * h)).value - f.query(&(p - Vec3::y() * h)).value) / (2.0 * h),
                (f.query(&(p + Vec3::z() * h)).value - f.query(&(p - Vec3::z() * h)).value) / (2.0 * h),
            );
            total_err += (fd - f.query(&p).gradient).norm();
            total_norm += fd.norm();
        }
        assert!(total_err / total_norm <= 5e-2, "{}", total_err / total_norm);
    }

    #[test]
    fn exact_derivative_matches_finite_difference() {
        let f = build_fov_esdf(&FovParams::standard(), 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-7;
        for _ in 0..1000 {
            let p = Vec3::new(rng.random_range(0.3..3.2), rng.random_range(-1.5..1.5), rng.random_range(-0.9..0.9));
            let s = f.interpolate(&p);
            for a in 0..3 {
                let e = Vec3::ith(a, h);
                let fd = (f.interpolate(&(p + e)).value - f.interpolate(&(p - e)).value) / (2.0 * h);
                // a cell face inside the stencil is the only way to disagree
                let g = f.spec().world_to_grid(&p)[a];
                if (g - g.round()).abs() * 0.05 < 2.0 * h {
                    continue;
                }
                assert!((fd - s.gradient[a]).abs() < 1e-5, "{fd} vs {}", s.gradient[a]);
            }
        }
    }

    #[test]
    fn coarse_field_equals_brute_force_scan() {
        let fov = FovParams::standard();
        let res = fov.depth / 20.0;
        let f = build_fov_esdf(&fov, res).unwrap();
        let spec = *f.spec();
        let inside: Vec<bool> = (0..spec.len()).map(|i| fov.contains(&spec.grid_to_world(spec.unlinear(i)))).collect();
        let boundary: Vec<[usize; 3]> = boundary_voxels(&spec, &inside)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| spec.unlinear(i))
            .collect();
        for i in 0..spec.len() {
            let a = spec.unlinear(i);
            let expect = if inside[i] {
                let d2 = boundary
                    .iter()
                    .map(|b| (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                (d2.sqrt() * res) as f32
            } else {
                0.0
            };
            assert_eq!(f.values()[i], expect);
        }
    }

    #[test]
    fn axial_profile_peaks_at_observation_distance() {
        let fov = FovParams::standard();
        let res = 0.05;
        let f = build_fov_esdf(&fov, res).unwrap();
        let spec = f.spec();
        let jy = spec.dims[1] / 2;
        let jz = spec.dims[2] / 2;
        let profile: Vec<(f64, f64)> = (0..spec.dims[0])
            .map(|i| (spec.grid_to_world([i, jy, jz]).x, f.voxel_value([i, jy, jz])))
            .collect();
        let (x_star, _) = profile.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        assert!((x_star - fov.distance).abs() <= res + 1e-9, "{x_star}");
        for w in profile.windows(2) {
            if w[1].0 <= fov.distance - res {
                assert!(w[1].1 >= w[0].1, "not increasing at {:?}", w);
            }
            if w[0].0 >= fov.distance + res {
                assert!(w[1].1 <= w[0].1, "not decreasing at {:?}", w);
            }
        }
        // every global maximizer sits on the ridge through (d, *, 0)
        let max = f.max_value() as f32;
        for (i, &v) in f.values().iter().enumerate() {
            if v == max {
                let p = spec.grid_to_world(spec.unlinear(i));
                assert!((p.x - fov.distance).abs() <= res + 1e-9 && p.z.abs() <= res + 1e-9, "{p:?}");
            }
        }
    }

    #[test]
    fn robot_field_sphere() {
        let f = build_robot_field(RobotShape::Sphere { radius: 0.3 }, 0.1, 0.05).unwrap();
        assert!((f.query(&Vec3::zeros()).value - 0.4).abs() <= 0.05);
        assert_eq!(f.query(&Vec3::new(0.6, 0.0, 0.0)).value, 0.0);
        let far = collision_cost(&f, &[Vec3::new(3.0, 0.0, 0.0)], &Vec3::zeros(), 0.0);
        assert_eq!(far.value, 0.0);
        assert!(build_robot_field(RobotShape::Sphere { radius: 0.0 }, 0.1, 0.05).is_err());
    }

    #[test]
    fn collision_gradient_matches_finite_difference() {
        let f = build_robot_field(RobotShape::Box { half_extents: Vec3::new(0.35, 0.25, 0.1) }, 0.1, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-6;
        let mut done = 0;
        while done < 200 {
            let pts: Vec<Vec3> = (0..12)
                .map(|_| Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.3..0.3)))
                .collect();
            let p = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.05..0.05));
            let yaw = rng.random_range(-3.0..3.0);
            let c = collision_cost(&f, &pts, &p, yaw);
            if c.value == 0.0 {
                continue;
            }
            done += 1;
            let mut fd = [0.0; 4];
            for a in 0..3 {
                let e = Vec3::ith(a, h);
                fd[a] = (collision_cost(&f, &pts, &(p + e), yaw).value - collision_cost(&f, &pts, &(p - e), yaw).value) / (2.0 * h);
            }
            fd[3] = (collision_cost(&f, &pts, &p, yaw + h).value - collision_cost(&f, &pts, &p, yaw - h).value) / (2.0 * h);
            let an = [c.d_position.x, c.d_position.y, c.d_position.z, c.d_yaw];
            let err: f64 = (0..4).map(|i| (fd[i] - an[i]).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = an.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            assert!(err / norm <= 1e-3, "rel err {} at {p:?}", err / norm);
        }
    }
}

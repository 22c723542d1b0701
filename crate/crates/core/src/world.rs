//! Voxelized static environment: shape insertion, exact voxel-walk line of
//! sight, and extraction of obstacle points around the tracker's view.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::field::FovParams;
use crate::geometry::{GridSpec, Vec3, YawPose};

/// Obstacle primitive. Voxels whose centers fall inside are marked.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Half-open box `min <= c < max`.
    Box { min: Vec3, max: Vec3 },
    /// Vertical cylinder spanning `z_min <= z < z_max`.
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
    /// Each point marks the voxel containing it.
    Points(Vec<Vec3>),
}

impl Shape {
    fn validate(&self) -> Result<()> {
        match self {
            Shape::Box { min, max } => {
                if (0..3).any(|a| !(max[a] > min[a])) {
                    return Err(Error::InvalidShape(format!("box extents must be positive: {min:?} .. {max:?}")));
                }
            }
            Shape::Cylinder { radius, z_min, z_max, .. } => {
                if !(*radius > 0.0) || !(z_max > z_min) {
                    return Err(Error::InvalidShape(format!(
                        "cylinder needs radius > 0 and height > 0 (r={radius}, z={z_min}..{z_max})"
                    )));
                }
            }
            Shape::Points(pts) => {
                if pts.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
                    return Err(Error::InvalidShape("non-finite point".into()));
                }
            }
        }
        Ok(())
    }

    fn contains(&self, c: &Vec3) -> bool {
        match self {
            Shape::Box { min, max } => (0..3).all(|a| c[a] >= min[a] && c[a] < max[a]),
            Shape::Cylinder { center, radius, z_min, z_max } => {
                let dx = c.x - center[0];
                let dy = c.y - center[1];
                c.z >= *z_min && c.z < *z_max && dx * dx + dy * dy <= radius * radius
            }
            Shape::Points(_) => false,
        }
    }

    /// World-space bounding box used to limit the voxel scan.
    fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Shape::Box { min, max } => (*min, *max),
            Shape::Cylinder { center, radius, z_min, z_max } => (
                Vec3::new(center[0] - radius, center[1] - radius, *z_min),
                Vec3::new(center[0] + radius, center[1] + radius, *z_max),
            ),
            Shape::Points(pts) => {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for p in pts {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                (lo, hi)
            }
        }
    }
}

/// Boolean occupancy over a [`GridSpec`]. Space outside the grid is free.
#[derive(Debug, Clone)]
pub struct OccupancyWorld {
    spec: GridSpec,
    occupied: Vec<bool>,
    points: OnceLock<Vec<Vec3>>,
    floor: Option<f64>,
}

impl OccupancyWorld {
    pub fn new(spec: GridSpec) -> Self {
        Self {
            occupied: vec![false; spec.len()],
            spec,
            points: OnceLock::new(),
            floor: None,
        }
    }

    /// Solid ground below height `z`. It is a collision surface only: it is
    /// not stored as occupancy, so it never enters the occlusion term or
    /// line-of-sight tests.
    pub fn with_floor(mut self, z: Option<f64>) -> Self {
        self.floor = z;
        self
    }

    pub fn floor(&self) -> Option<f64> {
        self.floor
    }

    /// Lattice points one half voxel below the floor whose horizontal
    /// positions lie in `[lo, hi]`.
    pub fn floor_points_in_box(&self, lo: &Vec3, hi: &Vec3) -> Vec<Vec3> {
        let Some(z) = self.floor else {
            return Vec::new();
        };
        let r = self.spec.resolution;
        let z = z - 0.5 * r;
        if z < lo.z || z > hi.z {
            return Vec::new();
        }
        let o = self.spec.origin;
        let range = |a: usize| ((lo[a] - o[a]) / r).ceil() as i64..=((hi[a] - o[a]) / r).floor() as i64;
        let mut out = Vec::new();
        for j in range(1) {
            for i in range(0) {
                out.push(Vec3::new(o.x + i as f64 * r, o.y + j as f64 * r, z));
            }
        }
        out
    }

    /// Grid covering the axis-aligned region `[min, max]` at `resolution`.
    pub fn with_bounds(min: Vec3, max: Vec3, resolution: f64) -> Result<Self> {
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let n = ((max[a] - min[a]) / resolution).round();
            if !(n >= 1.0) || !n.is_finite() {
                return Err(Error::InvalidParameter(format!("empty world extent on axis {a}")));
            }
            dims[a] = n as usize;
        }
        let origin = min + Vec3::repeat(0.5 * resolution);
        let spec = GridSpec::new(origin, resolution, dims)
            .ok_or_else(|| Error::InvalidParameter("bad world grid".into()))?;
        Ok(Self::new(spec))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn insert(&mut self, shape: &Shape) -> Result<usize> {
        self.set(shape, true)
    }

    pub fn remove(&mut self, shape: &Shape) -> Result<usize> {
        self.set(shape, false)
    }

    pub fn clear(&mut self) {
        self.occupied.iter_mut().for_each(|o| *o = false);
        self.points = OnceLock::new();
    }

    /// Marks every voxel the shape covers; returns how many voxels changed.
    fn set(&mut self, shape: &Shape, value: bool) -> Result<usize> {
        shape.validate()?;
        let mut changed = 0;
        if let Shape::Points(pts) = shape {
            for p in pts {
                if let Some(idx) = self.spec.voxel_of(p) {
                    let i = self.spec.linear(idx);
                    if self.occupied[i] != value {
                        self.occupied[i] = value;
                        changed += 1;
                    }
                }
            }
        } else {
            let (lo, hi) = shape.bounds();
            let glo = self.spec.world_to_grid(&lo);
            let ghi = self.spec.world_to_grid(&hi);
            let mut range = [(0usize, 0usize); 3];
            for a in 0..3 {
                let start = glo[a].floor().max(0.0);
                let end = (ghi[a].ceil() + 1.0).min(self.spec.dims[a] as f64);
                if end <= start {
                    return Ok(0);
                }
                range[a] = (start as usize, end as usize);
            }
            for z in range[2].0..range[2].1 {
                for y in range[1].0..range[1].1 {
                    for x in range[0].0..range[0].1 {
                        let idx = [x, y, z];
                        if shape.contains(&self.spec.grid_to_world(idx)) {
                            let i = self.spec.linear(idx);
                            if self.occupied[i] != value {
                                self.occupied[i] = value;
                                changed += 1;
                            }
                        }
                    }
                }
            }
        }
        if changed > 0 {
            self.points = OnceLock::new();
        }
        Ok(changed)
    }

    pub fn is_occupied_voxel(&self, idx: [usize; 3]) -> bool {
        self.occupied[self.spec.linear(idx)]
    }

    /// Occupancy of the voxel containing `p`; outside the grid is free.
    pub fn is_occupied(&self, p: &Vec3) -> bool {
        self.spec.voxel_of(p).is_some_and(|idx| self.is_occupied_voxel(idx))
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Centers of all occupied voxels, in linear-index order.
    pub fn obstacle_points(&self) -> &[Vec3] {
        self.points.get_or_init(|| {
            self.occupied
                .iter()
                .enumerate()
                .filter(|(_, &o)| o)
                .map(|(i, _)| self.spec.grid_to_world(self.spec.unlinear(i)))
                .collect()
        })
    }

    /// Occupied voxel centers with centers inside the box `[lo, hi]`.
    pub fn obstacle_points_in_box(&self, lo: &Vec3, hi: &Vec3) -> Vec<Vec3> {
        let glo = self.spec.world_to_grid(lo);
        let ghi = self.spec.world_to_grid(hi);
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let start = glo[a].ceil().max(0.0);
            let end = (ghi[a].floor() + 1.0).min(self.spec.dims[a] as f64);
            if !(end > start) {
                return Vec::new();
            }
            range[a] = (start as usize, end as usize);
        }
        let mut out = Vec::new();
        for z in range[2].0..range[2].1 {
            for y in range[1].0..range[1].1 {
                for x in range[0].0..range[0].1 {
                    if self.is_occupied_voxel([x, y, z]) {
                        out.push(self.spec.grid_to_world([x, y, z]));
                    }
                }
            }
        }
        out
    }

    /// True iff the segment `a -> b` crosses no occupied voxel.
    ///
    /// Walks the exact sequence of cells the segment passes through
    /// (Amanatides-Woo), after clipping it to the grid.
    pub fn line_of_sight(&self, a: &Vec3, b: &Vec3) -> bool {
        self.first_hit(a, b).is_none()
    }

    /// First occupied voxel met walking from `a` to `b`.
    pub fn first_hit(&self, a: &Vec3, b: &Vec3) -> Option<[usize; 3]> {
        let dims = self.spec.dims;
        // cell i spans [i, i+1) in these coordinates
        let ga = self.spec.world_to_grid(a) + Vec3::repeat(0.5);
        let gb = self.spec.world_to_grid(b) + Vec3::repeat(0.5);
        let dir = gb - ga;

        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for ax in 0..3 {
            let hi = dims[ax] as f64;
            if dir[ax] == 0.0 {
                if ga[ax] < 0.0 || ga[ax] >= hi {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[ax];
                let (mut ta, mut tb) = ((0.0 - ga[ax]) * inv, (hi - ga[ax]) * inv);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        if t0 > t1 {
            return None;
        }

        let start = ga + dir * t0;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for ax in 0..3 {
            let c = start[ax].floor().clamp(0.0, dims[ax] as f64 - 1.0);
            cell[ax] = c as i64;
            if dir[ax] > 0.0 {
                step[ax] = 1;
                t_delta[ax] = 1.0 / dir[ax];
                t_max[ax] = (c + 1.0 - ga[ax]) / dir[ax];
            } else if dir[ax] < 0.0 {
                step[ax] = -1;
                t_delta[ax] = -1.0 / dir[ax];
                t_max[ax] = (c - ga[ax]) / dir[ax];
            }
        }

        loop {
            if (0..3).any(|ax| cell[ax] < 0 || cell[ax] >= dims[ax] as i64) {
                return None;
            }
            let idx = [cell[0] as usize, cell[1] as usize, cell[2] as usize];
            if self.is_occupied_voxel(idx) {
                return Some(idx);
            }
            let ax = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            if t_max[ax] > t1 {
                return None;
            }
            cell[ax] += step[ax];
            t_max[ax] += t_delta[ax];
        }
    }

    /// Occupied voxel centers inside a sphere that contains the view pyramid.
    ///
    /// The sphere has radius `depth * margin` and is centered half a depth
    /// ahead of the tracker; the occlusion cost vanishes outside the pyramid,
    /// so any superset is correct.
    pub fn obstacle_points_near_fov(&self, pose: &YawPose, fov: &FovParams, margin: f64) -> Vec<Vec3> {
        let center = pose.to_world(&Vec3::new(0.5 * fov.depth, 0.0, 0.0));
        let r = fov.depth * margin;
        let r2 = r * r;
        self.obstacle_points()
            .iter()
            .filter(|p| (*p - center).norm_squared() <= r2)
            .copied()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FovParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize, res: f64) -> OccupancyWorld {
        OccupancyWorld::new(GridSpec::new(Vec3::zeros(), res, [n, n, n]).unwrap())
    }

    #[test]
    fn zero_radius_cylinder_is_rejected() {
        let mut w = cube(10, 0.1);
        let r = w.insert(&Shape::Cylinder { center: [0.5, 0.5], radius: 0.0, z_min: 0.0, z_max: 1.0 });
        assert!(r.is_err());
        assert_eq!(w.occupied_count(), 0);
    }

    #[test]
    fn negative_box_is_rejected() {
        let mut w = cube(10, 0.1);
        assert!(w.insert(&Shape::Box { min: Vec3::new(1.0, 0.0, 0.0), max: Vec3::new(0.0, 1.0, 1.0) }).is_err());
    }

    #[test]
    fn box_query_matches_filtered_point_list() {
        let mut w = cube(20, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..300).map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 2.0).collect();
        w.insert(&Shape::Points(pts)).unwrap();
        let (lo, hi) = (Vec3::new(0.33, 0.1, 0.5), Vec3::new(1.41, 1.9, 1.27));
        let mut want: Vec<Vec3> = w
            .obstacle_points()
            .iter()
            .filter(|p| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
            .copied()
            .collect();
        let mut got = w.obstacle_points_in_box(&lo, &hi);
        let key = |p: &Vec3| (p.z, p.y, p.x);
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn full_cover_box() {
        let mut w = cube(10, 0.1);
        w.insert(&Shape::Box { min: Vec3::repeat(-1.0), max: Vec3::repeat(2.0) }).unwrap();
        assert_eq!(w.occupied_count(), 1000);
    }

    #[test]
    fn single_voxel_box() {
        let mut w = cube(10, 0.1);
        w.insert(&Shape::Box { min: Vec3::zeros(), max: Vec3::repeat(0.1) }).unwrap();
        assert_eq!(w.occupied_count(), 1);
        assert!(w.is_occupied_voxel([0, 0, 0]));
    }

    #[test]
    fn empty_world_always_visible() {
        let w = cube(10, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = Vec3::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
            let b = Vec3::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
            assert!(w.line_of_sight(&a, &b));
        }
    }

    #[test]
    fn wall_blocks_sight() {
        let mut w = cube(20, 0.1);
        w.insert(&Shape::Box { min: Vec3::new(0.95, -1.0, -1.0), max: Vec3::new(1.05, 3.0, 3.0) }).unwrap();
        assert!(!w.line_of_sight(&Vec3::new(0.2, 0.9, 0.9), &Vec3::new(1.7, 1.1, 0.3)));
        // segment leaving the grid around the wall sees nothing
        assert!(w.line_of_sight(&Vec3::new(0.2, 0.9, 0.9), &Vec3::new(0.2, 5.0, 0.9)));
    }

    #[test]
    fn points_mark_containing_voxel_and_remove_restores() {
        let mut w = cube(10, 0.1);
        let pts = Shape::Points(vec![Vec3::new(0.31, 0.42, 0.04), Vec3::new(5.0, 5.0, 5.0)]);
        assert_eq!(w.insert(&pts).unwrap(), 1);
        assert!(w.is_occupied_voxel([3, 4, 0]));
        assert_eq!(w.obstacle_points().len(), 1);
        w.remove(&pts).unwrap();
        assert!(w.obstacle_points().is_empty());
    }

    #[test]
    fn line_of_sight_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w = cube(30, 0.1);
        for _ in 0..25 {
            let c = Vec3::new(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
            let h = Vec3::new(rng.random_range(0.05..0.3), rng.random_range(0.05..0.3), rng.random_range(0.05..0.3));
            w.insert(&Shape::Box { min: c - h, max: c + h }).unwrap();
        }
        let step = 1e-3;
        let mut disagreements = 0;
        for _ in 0..500 {
            let a = Vec3::new(rng.random_range(-0.5..3.5), rng.random_range(-0.5..3.5), rng.random_range(-0.5..3.5));
            let b = Vec3::new(rng.random_range(-0.5..3.5), rng.random_range(-0.5..3.5), rng.random_range(-0.5..3.5));
            let len = (b - a).norm();
            let n = (len / step).ceil() as usize;
            let sampled = (0..=n).all(|i| !w.is_occupied(&(a + (b - a) * (i as f64 / n as f64))));
            if sampled != w.line_of_sight(&a, &b) {
                disagreements += 1;
            }
            assert_eq!(w.line_of_sight(&a, &b), w.line_of_sight(&b, &a));
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn fov_superset_filter() {
        let fov = FovParams::from_degrees(69.4, 42.5, 2.5).unwrap();
        let mut w = OccupancyWorld::with_bounds(Vec3::new(-15.0, -15.0, -5.0), Vec3::new(15.0, 15.0, 5.0), 0.2).unwrap();
        let pose = YawPose::new(Vec3::zeros(), 0.7);
        assert!(w.obstacle_points_near_fov(&pose, &fov, 1.25).is_empty());
        let behind = pose.to_world(&Vec3::new(-3.0 * fov.depth, 0.0, 0.0));
        let ahead = pose.to_world(&Vec3::new(fov.distance, 0.0, 0.0));
        w.insert(&Shape::Points(vec![behind, ahead])).unwrap();
        let near = w.obstacle_points_near_fov(&pose, &fov, 1.25);
        assert_eq!(near.len(), 1);
        assert!((near[0] - ahead).norm() < 0.2);
    }
}

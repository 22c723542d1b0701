//! Visibility-aware initial path: one waypoint per segment, kept at the
//! preferred horizontal distance from the predicted target and rotated
//! around it until the line of sight is clear.

use crate::geometry::{horizontal_projection, Vec3, YawPose};
use crate::prediction::BezierCurve;
use crate::world::OccupancyWorld;

/// Angular sweep used when a candidate is occluded.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArcSearch {
    /// Radians between probes.
    pub step: f64,
    /// Largest offset probed on each side, radians.
    pub max_sweep: f64,
}

impl Default for ArcSearch {
    fn default() -> Self {
        Self {
            step: 5f64.to_radians(),
            max_sweep: std::f64::consts::PI,
        }
    }
}

/// Every probed arc point is occluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoFreePoint;

impl std::fmt::Display for NoFreePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no visible point on the observation arc")
    }
}

impl std::error::Error for NoFreePoint {}

#[derive(Debug, Clone)]
pub struct PathRequest<'a> {
    pub prediction: &'a BezierCurve,
    pub tracker: YawPose,
    pub world: &'a OccupancyWorld,
    /// Preferred horizontal observation distance, m.
    pub distance: f64,
    /// Waypoint spacing in prediction time, s.
    pub interval: f64,
    pub segments: usize,
    pub arc: ArcSearch,
    /// Added to the target altitude for every waypoint.
    pub altitude_offset: f64,
    /// Shift of the prediction clock; positive while the target is lost.
    pub time_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialPath {
    pub waypoints: Vec<Vec3>,
    /// Predicted target position for each waypoint.
    pub targets: Vec<Vec3>,
    pub visible: Vec<bool>,
}

impl InitialPath {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn all_visible(&self) -> bool {
        self.visible.iter().all(|&v| v)
    }
}

/// Point at horizontal distance `distance` from `target`, on the side facing
/// `previous`. Falls back to the direction behind the tracker yaw when
/// `previous` is (nearly) straight above or below the target.
pub fn candidate_point(target: &Vec3, previous: &Vec3, distance: f64, tracker_yaw: f64) -> Vec3 {
    let diff = horizontal_projection(&(target - previous));
    let norm = diff.norm();
    let dir = if norm > 1e-6 {
        diff / norm
    } else {
        Vec3::new(tracker_yaw.cos(), tracker_yaw.sin(), 0.0)
    };
    let mut c = target - dir * distance;
    c.z = target.z;
    c
}

fn rotate_about(target: &Vec3, point: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    let dx = point.x - target.x;
    let dy = point.y - target.y;
    Vec3::new(target.x + c * dx - s * dy, target.y + s * dx + c * dy, point.z)
}

/// First visible point on the horizontal circle through `candidate`, probing
/// offsets `0, +step, -step, +2 step, ...` up to `max_sweep` on each side.
pub fn arc_search(target: &Vec3, candidate: &Vec3, world: &OccupancyWorld, arc: &ArcSearch) -> Result<Vec3, NoFreePoint> {
    if world.line_of_sight(candidate, target) {
        return Ok(*candidate);
    }
    if !(arc.step > 0.0) {
        return Err(NoFreePoint);
    }
    let steps = (arc.max_sweep / arc.step + 1e-9).floor() as usize;
    for k in 1..=steps {
        for sign in [1.0, -1.0] {
            let p = rotate_about(target, candidate, sign * k as f64 * arc.step);
            if world.line_of_sight(&p, target) {
                return Ok(p);
            }
        }
    }
    Err(NoFreePoint)
}

pub fn plan_initial_path(req: &PathRequest<'_>) -> InitialPath {
    let mut out = InitialPath {
        waypoints: Vec::with_capacity(req.segments),
        targets: Vec::with_capacity(req.segments),
        visible: Vec::with_capacity(req.segments),
    };
    let mut prev = req.tracker.position;
    for k in 1..=req.segments {
        let mut rho = req.prediction.eval(k as f64 * req.interval + req.time_offset);
        let target = rho;
        rho.z += req.altitude_offset;
        let c = candidate_point(&rho, &prev, req.distance, req.tracker.yaw);
        // visibility is judged against the true target position
        let (p, ok) = match arc_search(&target, &c, req.world, &req.arc) {
            Ok(p) => (p, true),
            Err(NoFreePoint) => (prev, false),
        };
        out.waypoints.push(p);
        out.targets.push(target);
        out.visible.push(ok);
        prev = p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Shape;
    use approx::assert_abs_diff_eq;

    fn world() -> OccupancyWorld {
        OccupancyWorld::with_bounds(Vec3::new(-10.0, -10.0, 0.0), Vec3::new(10.0, 10.0, 4.0), 0.1).unwrap()
    }

    #[test]
    fn candidate_examples() {
        let c = candidate_point(&Vec3::new(5.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, 1.0), 2.5, 0.0);
        assert_abs_diff_eq!(c, Vec3::new(2.5, 0.0, 1.0), epsilon = 1e-12);
        let c = candidate_point(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 3.0, 2.0), 1.0, 0.0);
        assert_abs_diff_eq!(c, Vec3::new(0.0, 1.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn candidate_falls_back_to_tracker_heading() {
        let rho = Vec3::new(1.0, 1.0, 1.0);
        let c = candidate_point(&rho, &Vec3::new(1.0, 1.0, 3.0), 2.0, 0.5);
        assert_abs_diff_eq!(horizontal_projection(&(c - rho)).norm(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, rho - Vec3::new(0.5f64.cos(), 0.5f64.sin(), 0.0) * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn unobstructed_candidate_is_kept() {
        let w = world();
        let rho = Vec3::new(2.0, 0.0, 1.0);
        let c = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(arc_search(&rho, &c, &w, &ArcSearch::default()), Ok(c));
    }

    #[test]
    fn enclosed_target_has_no_free_point() {
        let mut w = world();
        let rho = Vec3::new(0.0, 0.0, 1.0);
        for k in 0..72 {
            let a = k as f64 * 5f64.to_radians();
            w.insert(&Shape::Cylinder {
                center: [1.2 * a.cos(), 1.2 * a.sin()],
                radius: 0.15,
                z_min: 0.0,
                z_max: 4.0,
            })
            .unwrap();
        }
        let c = Vec3::new(-2.5, 0.0, 1.0);
        assert_eq!(arc_search(&rho, &c, &w, &ArcSearch::default()), Err(NoFreePoint));
    }
}

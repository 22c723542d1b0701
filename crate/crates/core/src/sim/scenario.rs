//! Declarative scenario description, loaded from TOML.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{build_fov_esdf, build_robot_field, FovParams, RobotShape, ScalarField3};
use crate::geometry::Vec3;
use crate::planner::PlannerConfig;
use crate::world::{OccupancyWorld, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Simulated seconds.
    pub duration: f64,
    /// Replanning and perception rate, Hz.
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
    pub world: WorldSpec,
    pub target: TargetScript,
    #[serde(default)]
    pub tracker: Option<TrackerStart>,
    #[serde(default)]
    pub perception: PerceptionSpec,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub robot: RobotSpec,
    #[serde(default)]
    pub planner: PlannerConfig,
    /// Obstacles that appear and disappear during the run.
    #[serde(default)]
    pub events: Vec<ObstacleEvent>,
}

fn default_rate() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    #[serde(default = "default_world_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub obstacles: Vec<ShapeSpec>,
    #[serde(default)]
    pub forest: Option<ForestSpec>,
    /// Ground height; the tracker is kept above it by the collision term.
    #[serde(default)]
    pub floor: Option<f64>,
}

fn default_world_resolution() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Box { min: [f64; 3], max: [f64; 3] },
    Cylinder { center: [f64; 2], radius: f64, z_min: f64, z_max: f64 },
}

impl ShapeSpec {
    pub fn to_shape(&self) -> Shape {
        match self {
            ShapeSpec::Box { min, max } => Shape::Box {
                min: Vec3::from(*min),
                max: Vec3::from(*max),
            },
            ShapeSpec::Cylinder { center, radius, z_min, z_max } => Shape::Cylinder {
                center: *center,
                radius: *radius,
                z_min: *z_min,
                z_max: *z_max,
            },
        }
    }
}

/// Seeded vertical cylinders kept clear of the target's path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSpec {
    pub count: usize,
    /// Horizontal placement region, `[x_min, y_min]` and `[x_max, y_max]`.
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub radius: [f64; 2],
    pub height: [f64; 2],
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

fn default_clearance() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEvent {
    /// Time the obstacle appears.
    pub start: f64,
    /// Time it disappears; absent means it stays.
    #[serde(default)]
    pub end: Option<f64>,
    pub shape: ShapeSpec,
}

impl ObstacleEvent {
    pub fn active(&self, t: f64) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerStart {
    pub position: [f64; 3],
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionSpec {
    /// Detection range, meters.
    pub max_range: f64,
    /// Feed the true target position to the predictor every tick, as in a
    /// cooperative target broadcasting its state. The visibility flags are
    /// still computed from geometry.
    pub broadcast: bool,
}

impl Default for PerceptionSpec {
    fn default() -> Self {
        Self {
            max_range: 10.0,
            broadcast: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    /// Preferred observation distance.
    pub distance: f64,
    pub resolution: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            alpha_deg: 69.4,
            beta_deg: 42.5,
            distance: 2.5,
            resolution: 0.05,
        }
    }
}

impl CameraSpec {
    pub fn fov(&self) -> Result<FovParams> {
        FovParams::from_degrees(self.alpha_deg, self.beta_deg, self.distance)
    }

    pub fn build_field(&self) -> Result<ScalarField3> {
        build_fov_esdf(&self.fov()?, self.resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSpec {
    pub radius: f64,
    pub margin: f64,
    pub resolution: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            radius: 0.25,
            margin: 0.1,
            resolution: 0.05,
        }
    }
}

impl RobotSpec {
    pub fn build_field(&self) -> Result<ScalarField3> {
        build_robot_field(RobotShape::Sphere { radius: self.radius }, self.margin, self.resolution)
    }
}

/// Scripted target motion. Before time zero the target rests at its start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetScript {
    /// Constant-speed legs between waypoints; `speeds` has one entry per
    /// leg, or a single entry for all of them.
    Path {
        waypoints: Vec<[f64; 3]>,
        speeds: Vec<f64>,
        #[serde(default)]
        closed: bool,
    },
    Circle {
        center: [f64; 3],
        radius: f64,
        speed: f64,
    },
}

impl TargetScript {
    fn validate(&self) -> Result<()> {
        match self {
            TargetScript::Path { waypoints, speeds, closed } => {
                let legs = waypoints.len().saturating_sub(1) + usize::from(*closed && waypoints.len() > 1);
                if waypoints.len() < 2 {
                    return Err(Error::Scenario("target path needs at least two waypoints".into()));
                }
                if speeds.len() != 1 && speeds.len() != legs {
                    return Err(Error::Scenario(format!("target path has {legs} legs but {} speeds", speeds.len())));
                }
                if speeds.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Scenario("target speeds must be positive".into()));
                }
            }
            TargetScript::Circle { radius, speed, .. } => {
                if !(*radius > 0.0) || !(*speed > 0.0) {
                    return Err(Error::Scenario("circle needs positive radius and speed".into()));
                }
            }
        }
        Ok(())
    }

    fn legs(&self) -> Vec<(Vec3, Vec3, f64)> {
        match self {
            TargetScript::Path { waypoints, speeds, closed } => {
                let mut pts: Vec<Vec3> = waypoints.iter().map(|w| Vec3::from(*w)).collect();
                if *closed {
                    pts.push(pts[0]);
                }
                pts.windows(2)
                    .enumerate()
                    .map(|(i, w)| (w[0], w[1], if speeds.len() == 1 { speeds[0] } else { speeds[i] }))
                    .collect()
            }
            TargetScript::Circle { .. } => Vec::new(),
        }
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let t = t.max(0.0);
        match self {
            TargetScript::Circle { center, radius, speed } => {
                let a = speed * t / radius;
                Vec3::from(*center) + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
            }
            TargetScript::Path { closed, .. } => {
                let legs = self.legs();
                let total: f64 = legs.iter().map(|(a, b, s)| (b - a).norm() / s).sum();
                let mut rem = if *closed && total > 0.0 { t % total } else { t };
                for (a, b, s) in &legs {
                    let dt = (b - a).norm() / s;
                    if rem <= dt {
                        return if dt > 0.0 { a + (b - a) * (rem / dt) } else { *a };
                    }
                    rem -= dt;
                }
                legs.last().map(|l| l.1).unwrap_or_else(Vec3::zeros)
            }
        }
    }

    /// Polyline approximating the swept path over `[0, duration]`.
    pub fn polyline(&self, duration: f64) -> Vec<Vec3> {
        match self {
            TargetScript::Path { .. } => {
                let mut pts: Vec<Vec3> = self.legs().iter().map(|l| l.0).collect();
                if let Some(l) = self.legs().last() {
                    pts.push(l.1);
                }
                pts
            }
            TargetScript::Circle { radius, speed, .. } => {
                let sweep = (speed * duration / radius).min(std::f64::consts::TAU);
                let n = ((sweep * radius / 0.1).ceil() as usize).max(8);
                (0..=n).map(|k| self.position(sweep * radius / speed * k as f64 / n as f64)).collect()
            }
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Scenario("duration must be positive".into()));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::Scenario("rate must be positive".into()));
        }
        if !(self.perception.max_range > 0.0) {
            return Err(Error::Scenario("perception range must be positive".into()));
        }
        for e in &self.events {
            if e.end.is_some_and(|end| end <= e.start) {
                return Err(Error::Scenario("event ends before it starts".into()));
            }
        }
        self.target.validate()?;
        self.camera.fov()?;
        self.planner.validate()?;
        Ok(())
    }

    /// Explicit start, or at rest `camera.distance` behind the target
    /// facing along its initial heading.
    pub fn tracker_start(&self) -> TrackerStart {
        if let Some(t) = self.tracker {
            return t;
        }
        let p0 = self.target.position(0.0);
        let ahead = self.target.position(0.5) - p0;
        let yaw = if ahead.x.hypot(ahead.y) > 1e-9 { ahead.y.atan2(ahead.x) } else { 0.0 };
        let p = p0 - Vec3::new(yaw.cos(), yaw.sin(), 0.0) * self.camera.distance;
        TrackerStart {
            position: [p.x, p.y, p.z],
            yaw,
        }
    }

    /// Static obstacles, forest included, in insertion order.
    pub fn static_shapes(&self) -> Result<Vec<Shape>> {
        let w = &self.world;
        let mut shapes: Vec<Shape> = w.obstacles.iter().map(ShapeSpec::to_shape).collect();
        if let Some(f) = &w.forest {
            let mut keep_clear = self.target.polyline(self.duration);
            keep_clear.push(Vec3::from(self.tracker_start().position));
            shapes.extend(generate_forest(self.seed, f, &keep_clear)?);
        }
        Ok(shapes)
    }

    /// Static world, forest included.
    pub fn build_world(&self) -> Result<OccupancyWorld> {
        let w = &self.world;
        let mut world = OccupancyWorld::with_bounds(Vec3::from(w.min), Vec3::from(w.max), w.resolution)?.with_floor(w.floor);
        for s in self.static_shapes()? {
            world.insert(&s)?;
        }
        Ok(world)
    }
}

fn horizontal_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let (px, py) = (p.x - a.x, p.y - a.y);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (px - s * dx).hypot(py - s * dy)
}

/// Horizontal distance from `p` to a polyline (or a single point).
pub fn polyline_distance(p: &Vec3, line: &[Vec3]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [a] => (p.x - a.x).hypot(p.y - a.y),
        _ => line
            .windows(2)
            .map(|w| horizontal_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

pub const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Places `spec.count` non-overlapping cylinders whose surfaces stay at
/// least `spec.clearance` from `corridor`.
pub fn generate_forest(seed: u64, spec: &ForestSpec, corridor: &[Vec3]) -> Result<Vec<Shape>> {
    let ok = spec.min[0] < spec.max[0]
        && spec.min[1] < spec.max[1]
        && spec.radius[0] > 0.0
        && spec.radius[0] <= spec.radius[1]
        && spec.height[0] > 0.0
        && spec.height[0] <= spec.height[1]
        && spec.clearance >= 0.0;
    if !ok {
        return Err(Error::Scenario("inconsistent forest ranges".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<([f64; 2], f64, f64)> = Vec::with_capacity(spec.count);
    let mut attempts = 0;
    let sample = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[0] < r[1] { rng.random_range(r[0]..r[1]) } else { r[0] };
    while placed.len() < spec.count {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailed(attempts));
        }
        attempts += 1;
        let r = sample(&mut rng, spec.radius);
        let h = sample(&mut rng, spec.height);
        if spec.max[0] - spec.min[0] <= 2.0 * r || spec.max[1] - spec.min[1] <= 2.0 * r {
            continue;
        }
        let x = rng.random_range(spec.min[0] + r..spec.max[0] - r);
        let y = rng.random_range(spec.min[1] + r..spec.max[1] - r);
        let c = Vec3::new(x, y, 0.0);
        if polyline_distance(&c, corridor) < r + spec.clearance {
            continue;
        }
        if placed.iter().any(|(o, ro, _)| (o[0] - x).hypot(o[1] - y) < r + ro) {
            continue;
        }
        placed.push(([x, y], r, h));
    }
    Ok(placed
        .into_iter()
        .map(|(center, radius, h)| Shape::Cylinder {
            center,
            radius,
            z_min: 0.0,
            z_max: h,
        })
        .collect())
}

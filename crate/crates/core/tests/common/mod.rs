//! Shared scene builders and finite-difference helpers for integration tests.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use fovtrack::field::{build_fov_esdf, build_robot_field, FovParams, RobotShape, ScalarField3};
use fovtrack::minco::{minco_map, BoundaryState, MincoTrajectory, Rates, TrajectoryGradient};
use fovtrack::objective::{CostWeights, EvaluationContext, IntegrationRule};
use fovtrack::prediction::{fit_prediction, BezierCurve, ObservationBuffer};
use fovtrack::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn shared_fov_field() -> Arc<ScalarField3> {
    static F: OnceLock<Arc<ScalarField3>> = OnceLock::new();
    F.get_or_init(|| Arc::new(build_fov_esdf(&FovParams::standard(), 0.05).unwrap())).clone()
}

pub fn shared_robot_field() -> Arc<ScalarField3> {
    static F: OnceLock<Arc<ScalarField3>> = OnceLock::new();
    F.get_or_init(|| Arc::new(build_robot_field(RobotShape::Sphere { radius: 0.25 }, 0.1, 0.05).unwrap())).clone()
}

pub fn fov_field() -> &'static ScalarField3 {
    static F: OnceLock<Arc<ScalarField3>> = OnceLock::new();
    F.get_or_init(shared_fov_field)
}

pub fn robot_field() -> &'static ScalarField3 {
    static F: OnceLock<Arc<ScalarField3>> = OnceLock::new();
    F.get_or_init(shared_robot_field)
}

/// Decision variables of a trajectory with fixed boundary conditions.
#[derive(Debug, Clone)]
pub struct Scene {
    pub head: BoundaryState,
    pub tail: Rates,
    pub waypoints: Vec<Vec3>,
    pub yaws: Vec<f64>,
    pub durations: Vec<f64>,
    pub prediction: BezierCurve,
    pub time_offset: f64,
    pub obstacles: Vec<Vec3>,
    pub collision_points: Vec<Vec3>,
}

impl Scene {
    pub fn trajectory(&self) -> MincoTrajectory {
        minco_map(&self.head, &self.tail, &self.waypoints, &self.yaws, &self.durations).unwrap()
    }

    pub fn context(&self, weights: CostWeights) -> EvaluationContext<'_> {
        EvaluationContext::new(
            &self.prediction,
            self.time_offset,
            fov_field(),
            robot_field(),
            self.obstacles.clone(),
            self.collision_points.clone(),
            weights,
            IntegrationRule::for_durations(&self.durations),
            self.durations.len() as f64 * 0.5,
        )
        .unwrap()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut x = Vec::new();
        for w in &self.waypoints {
            x.extend(w.iter());
        }
        x.extend(&self.yaws);
        x.extend(&self.durations);
        x
    }

    pub fn with_vars(&self, x: &[f64]) -> Scene {
        let m = self.durations.len();
        let mut s = self.clone();
        s.waypoints = (0..m).map(|i| Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])).collect();
        s.yaws = x[3 * m..4 * m].to_vec();
        s.durations = x[4 * m..5 * m].to_vec();
        s
    }
}

pub fn flatten_gradient(g: &TrajectoryGradient) -> Vec<f64> {
    let mut x = Vec::new();
    for w in &g.waypoints {
        x.extend(w.iter());
    }
    x.extend(&g.yaws);
    x.extend(&g.durations);
    x
}

fn rv(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
    Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

/// Tracker chasing a target about `d` ahead, with `obstacles` random points
/// scattered through the region the camera sweeps.
pub fn random_scene(rng: &mut ChaCha8Rng, segments: usize, obstacles: usize) -> Scene {
    let tau = 0.5;
    let v_target = Vec3::new(rng.random_range(0.2..1.2), rng.random_range(-0.5..0.5), 0.0);
    let start = Vec3::new(2.5, 0.0, 1.0) + rv(rng, 0.2);
    let h: Vec<Vec3> = (0..3).map(|i| start + v_target * (tau * (i as f64 - 2.0))).collect();
    let prediction = fit_prediction(&ObservationBuffer::new(tau, h, 0.0).unwrap()).unwrap();

    let head = BoundaryState {
        position: Vec3::new(0.0, 0.0, 1.0),
        yaw: rng.random_range(-0.2..0.2),
        rates: Rates {
            velocity: v_target + rv(rng, 0.2),
            acceleration: rv(rng, 0.3),
            yaw_rate: rng.random_range(-0.2..0.2),
            yaw_acceleration: 0.0,
        },
    };
    let mut waypoints = Vec::new();
    let mut yaws = Vec::new();
    let mut durations = Vec::new();
    let mut t: f64 = 0.0;
    for _ in 0..segments {
        let dt = rng.random_range(0.4..0.7);
        t += dt;
        durations.push(dt);
        let target = prediction.eval(t.min(prediction.horizon()));
        let p = target - Vec3::new(2.5, 0.0, 0.0) + rv(rng, 0.3);
        waypoints.push(p);
        let bearing = (target.y - p.y).atan2(target.x - p.x);
        yaws.push(bearing + rng.random_range(-0.3..0.3));
    }
    let tail = Rates {
        velocity: v_target,
        ..Rates::default()
    };
    let lo = Vec3::new(0.3, -1.6, 0.2);
    let hi = Vec3::new(t * v_target.x + 3.5, 1.6, 1.8);
    let obstacles = (0..obstacles)
        .map(|_| {
            Vec3::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            )
        })
        .collect();
    Scene {
        head,
        tail,
        waypoints,
        yaws,
        durations,
        prediction,
        time_offset: rng.random_range(0.0..0.3),
        obstacles,
        collision_points: Vec::new(),
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Five-point central differences of `f` at `x` with steps `h * max(1, |x_k|)`.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for k in 0..x.len() {
        let step = h * x[k].abs().max(1.0);
        let mut at = |off: f64| {
            y[k] = x[k] + off;
            let v = f(&y);
            y[k] = x[k];
            v
        };
        out[k] = (at(-2.0 * step) - 8.0 * at(-step) + 8.0 * at(step) - at(2.0 * step)) / (12.0 * step);
    }
    out
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let err: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm == 0.0 {
        err
    } else {
        err / norm
    }
}

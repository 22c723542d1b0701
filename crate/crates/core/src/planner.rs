//! One replanning cycle: prediction, initial path, and trajectory
//! optimization over waypoints, yaws and durations.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField3;
use crate::geometry::{unwrap_near, Vec3, YawPose};
use crate::lbfgs::{minimize, LbfgsConfig, LbfgsStatus};
use crate::minco::{minco_map, BoundaryState, MincoTrajectory, Rates};
use crate::objective::{
    cost_breakdown, gather_collision_points, farthest_point_subsample, gather_obstacles, keep_possible_occluders, voxel_downsample, total_objective, CostWeights, EvaluationContext, IntegrationRule,
};
use crate::path::{plan_initial_path, ArcSearch, InitialPath, PathRequest};
use crate::prediction::{BezierCurve, BezierFitter, ObservationBuffer};
use crate::world::OccupancyWorld;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Seconds between observations and between initial waypoints.
    pub interval: f64,
    /// Observation intervals used by the predictor.
    pub prediction_intervals: usize,
    /// Trajectory segments per plan.
    pub segments: usize,
    pub arc: ArcSearch,
    /// Height of the tracker above the target when placing waypoints.
    pub altitude_offset: f64,
    pub weights: CostWeights,
    pub optimizer: LbfgsConfig,
    /// Lower bound on every segment duration.
    pub min_duration: f64,
    /// Superset margin for gathering obstacle points near the view.
    pub fov_margin: f64,
    pub obstacle_cap: usize,
    /// When set, obstacle points deeper along the sightline than the
    /// predicted target plus this slack are left out of the occlusion term.
    pub occluder_slack: Option<f64>,
    /// Edge of the cubes used to thin obstacle points before the cap; zero
    /// keeps every occupied voxel.
    pub obstacle_leaf: f64,
    /// Slack added to the robot field's reach when gathering collision points.
    pub collision_margin: f64,
    /// Also try the previous plan as a starting point and keep the cheaper one.
    pub warm_start: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            interval: 0.5,
            prediction_intervals: 2,
            segments: 2,
            arc: ArcSearch::default(),
            altitude_offset: 0.0,
            weights: CostWeights::default(),
            optimizer: LbfgsConfig::default(),
            min_duration: 0.01,
            fov_margin: 1.25,
            obstacle_cap: 2000,
            occluder_slack: Some(0.5),
            obstacle_leaf: 0.4,
            collision_margin: 0.5,
            warm_start: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.optimizer.validate()?;
        let ok = self.interval > 0.0
            && self.prediction_intervals >= 1
            && self.segments >= 1
            && self.arc.step > 0.0
            && self.arc.max_sweep >= 0.0
            && self.altitude_offset.is_finite()
            && self.min_duration > 0.0
            && self.fov_margin >= 1.0
            && self.collision_margin >= 0.0
            && self.obstacle_leaf >= 0.0
            && self.occluder_slack.is_none_or(|s| s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("inconsistent planner configuration".into()))
        }
    }
}

/// Kinematic state of the tracker at the start of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_acceleration: f64,
}

impl TrackerState {
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
            yaw,
            yaw_rate: 0.0,
            yaw_acceleration: 0.0,
        }
    }

    /// State read off a trajectory at time `t` since its start.
    pub fn on_trajectory(traj: &MincoTrajectory, t: f64) -> Self {
        let s = traj.eval(t);
        Self {
            position: s.position,
            velocity: s.velocity,
            acceleration: s.acceleration,
            yaw: s.yaw,
            yaw_rate: s.yaw_rate,
            yaw_acceleration: s.yaw_acceleration,
        }
    }

    pub fn is_finite(&self) -> bool {
        let v = [self.yaw, self.yaw_rate, self.yaw_acceleration];
        [self.position, self.velocity, self.acceleration].iter().all(|p| p.iter().all(|c| c.is_finite()))
            && v.iter().all(|c| c.is_finite())
    }

    pub fn pose(&self) -> YawPose {
        YawPose::new(self.position, self.yaw)
    }

    fn boundary(&self) -> BoundaryState {
        BoundaryState {
            position: self.position,
            yaw: self.yaw,
            rates: Rates {
                velocity: self.velocity,
                acceleration: self.acceleration,
                yaw_rate: self.yaw_rate,
                yaw_acceleration: self.yaw_acceleration,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Converged,
    Stalled,
    MaxIterations,
    LineSearchFailed,
    /// Optimization was impossible; the trajectory is a straight line to
    /// the last initial waypoint.
    Degraded,
    /// The trajectory enters an occupied voxel or drops below the floor.
    /// Callers should keep following their previous plan.
    Unsafe,
}

impl From<LbfgsStatus> for PlanStatus {
    fn from(s: LbfgsStatus) -> Self {
        match s {
            LbfgsStatus::Converged => PlanStatus::Converged,
            LbfgsStatus::Stalled => PlanStatus::Stalled,
            LbfgsStatus::MaxIterations => PlanStatus::MaxIterations,
            LbfgsStatus::LineSearchFailed => PlanStatus::LineSearchFailed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: MincoTrajectory,
    pub prediction: BezierCurve,
    pub initial_path: InitialPath,
    /// Objective at the chosen starting point.
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: PlanStatus,
    pub warm_started: bool,
    /// Prediction and initial path, microseconds.
    pub path_us: u64,
    /// Context setup and optimization, microseconds.
    pub optimize_us: u64,
}

/// Planner with precomputed fields and state carried between cycles.
#[derive(Debug, Clone)]
pub struct Planner {
    config: PlannerConfig,
    fov_field: Arc<ScalarField3>,
    robot_field: Arc<ScalarField3>,
    fitter: Option<BezierFitter>,
    previous: Option<(f64, MincoTrajectory)>,
}

impl Planner {
    pub fn new(config: PlannerConfig, fov_field: Arc<ScalarField3>, robot_field: Arc<ScalarField3>) -> Result<Self> {
        config.validate()?;
        if fov_field.fov().is_none() {
            return Err(Error::InvalidParameter("first field must be a field-of-view field".into()));
        }
        Ok(Self {
            config,
            fov_field,
            robot_field,
            fitter: None,
            previous: None,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn fov_field(&self) -> &ScalarField3 {
        &self.fov_field
    }

    pub fn robot_field(&self) -> &ScalarField3 {
        &self.robot_field
    }

    /// Forgets the previous plan.
    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// Fits the buffer and plans from it.
    pub fn plan(&mut self, world: &OccupancyWorld, tracker: &TrackerState, buffer: &ObservationBuffer, now: f64) -> Result<PlanResult> {
        let start = Instant::now();
        if !self.fitter.as_ref().is_some_and(|f| f.matches(buffer)) {
            self.fitter = Some(BezierFitter::new(buffer.intervals(), buffer.interval())?);
        }
        let prediction = self.fitter.as_ref().expect("fitter").fit(buffer)?;
        let fit_us = start.elapsed().as_micros() as u64;
        let mut r = self.plan_with_prediction(world, tracker, prediction, (now - buffer.timestamp()).max(0.0), now)?;
        r.path_us += fit_us;
        Ok(r)
    }

    /// Plans against an existing prediction whose time origin lies
    /// `time_offset` seconds before `now`.
    pub fn plan_with_prediction(
        &mut self,
        world: &OccupancyWorld,
        tracker: &TrackerState,
        prediction: BezierCurve,
        time_offset: f64,
        now: f64,
    ) -> Result<PlanResult> {
        if !tracker.is_finite() {
            return Err(Error::InvalidParameter("non-finite tracker state".into()));
        }
        let cfg = &self.config;
        let m = cfg.segments;
        let fov = *self.fov_field.fov().expect("checked in new");

        let t0 = Instant::now();
        let path = plan_initial_path(&PathRequest {
            prediction: &prediction,
            tracker: tracker.pose(),
            world,
            distance: fov.distance,
            interval: cfg.interval,
            segments: m,
            arc: cfg.arc,
            altitude_offset: cfg.altitude_offset,
            time_offset,
        });
        let path_us = t0.elapsed().as_micros() as u64;

        let t1 = Instant::now();
        let head = tracker.boundary();
        let mut yaws = Vec::with_capacity(m);
        let mut reference = tracker.yaw;
        for (p, target) in path.waypoints.iter().zip(&path.targets) {
            let d = target - p;
            let bearing = if d.x.hypot(d.y) > 1e-6 { d.y.atan2(d.x) } else { reference };
            reference = unwrap_near(bearing, reference);
            yaws.push(reference);
        }
        let durations = vec![cfg.interval; m];
        let horizon_time = m as f64 * cfg.interval + time_offset;
        let mut tail_velocity = prediction.eval_with_velocity(horizon_time).1;
        let vmax = cfg.weights.max_velocity;
        if tail_velocity.norm() > vmax {
            tail_velocity *= vmax / tail_velocity.norm();
        }
        let tail = Rates {
            velocity: tail_velocity,
            ..Rates::default()
        };

        let mut poses = vec![tracker.pose()];
        poses.extend(path.waypoints.iter().zip(&yaws).map(|(p, y)| YawPose::new(*p, *y)));
        let mut obstacles = gather_obstacles(world, &poses, &fov, cfg.fov_margin, usize::MAX);
        if let Some(slack) = cfg.occluder_slack {
            let mut sightlines = vec![(tracker.position, prediction.eval(time_offset))];
            sightlines.extend(path.waypoints.iter().copied().zip(path.targets.iter().copied()));
            obstacles = keep_possible_occluders(obstacles, &sightlines, slack);
        }
        let obstacles = farthest_point_subsample(&voxel_downsample(&obstacles, cfg.obstacle_leaf), cfg.obstacle_cap);
        let reach = self.robot_field.spec().max_corner().norm().max(self.robot_field.spec().min_corner().norm());
        let mut line = vec![tracker.position];
        line.extend(&path.waypoints);
        let collision_points = gather_collision_points(world, &line, reach + cfg.collision_margin);
        let ctx = EvaluationContext::new(
            &prediction,
            time_offset,
            &self.fov_field,
            &self.robot_field,
            obstacles,
            collision_points,
            cfg.weights,
            IntegrationRule::for_durations(&durations),
            m as f64 * cfg.interval,
        )
        .expect("field checked in new");

        let eval = |x: &[f64], g: &mut [f64]| -> f64 {
            let (wp, ys, ts) = unpack(x, m, cfg.min_duration);
            let value = minco_map(&head, &tail, &wp, &ys, &ts)
                .and_then(|traj| total_objective(&traj, &ctx))
                .ok()
                .filter(|(v, _)| v.is_finite());
            match value {
                Some((v, grad)) => {
                    for i in 0..m {
                        for a in 0..3 {
                            g[3 * i + a] = grad.waypoints[i][a];
                        }
                        g[3 * m + i] = grad.yaws[i];
                        g[4 * m + i] = grad.durations[i] * sigmoid(x[4 * m + i]);
                    }
                    v
                }
                None => {
                    g.iter_mut().for_each(|v| *v = 0.0);
                    f64::INFINITY
                }
            }
        };

        let mut x0 = pack(&path.waypoints, &yaws, &durations, cfg.min_duration);
        let mut scratch = vec![0.0; x0.len()];
        let mut initial_cost = eval(&x0, &mut scratch);
        let mut warm_started = false;
        if cfg.warm_start {
            if let Some(x) = self.previous.as_ref().and_then(|(t, prev)| warm_point(prev, now - t, m, cfg, tracker.yaw)) {
                let j = eval(&x, &mut scratch);
                if j < initial_cost {
                    x0 = x;
                    initial_cost = j;
                    warm_started = true;
                }
            }
        }

        let outcome = if initial_cost.is_finite() {
            minimize(eval, &x0, &cfg.optimizer).ok()
        } else {
            None
        };
        let optimized = outcome.and_then(|r| {
            let (wp, ys, ts) = unpack(&r.x, m, cfg.min_duration);
            minco_map(&head, &tail, &wp, &ys, &ts).ok().map(|traj| (traj, r))
        });
        let optimize_us = t1.elapsed().as_micros() as u64;
        if log::log_enabled!(log::Level::Debug) {
            if let Some((traj, r)) = &optimized {
                let (wp, ys, ts) = unpack(&x0, m, cfg.min_duration);
                let start = minco_map(&head, &tail, &wp, &ys, &ts).ok().map(|t| cost_breakdown(&t, &ctx));
                log::debug!(
                    "t={now:.2} J0={initial_cost:.3e} J={:.3e} it={} obstacles={} start {:?} end {:?}",
                    r.value,
                    r.iterations,
                    ctx.obstacles.len(),
                    start,
                    cost_breakdown(traj, &ctx)
                );
            }
        }

        let result = match optimized {
            Some((trajectory, r)) => PlanResult {
                trajectory,
                prediction,
                initial_path: path,
                initial_cost,
                cost: r.value,
                iterations: r.iterations,
                evaluations: r.evaluations,
                status: r.status.into(),
                warm_started,
                path_us,
                optimize_us,
            },
            None => {
                let trajectory = straight_line(tracker, path.waypoints.last().copied(), m, cfg.interval);
                PlanResult {
                    trajectory,
                    prediction,
                    initial_path: path,
                    initial_cost,
                    cost: f64::NAN,
                    iterations: 0,
                    evaluations: 0,
                    status: PlanStatus::Degraded,
                    warm_started: false,
                    path_us,
                    optimize_us,
                }
            }
        };
        let mut result = result;
        if !trajectory_is_safe(world, &result.trajectory) {
            log::debug!("t={now:.2} rejected unsafe plan ({:?})", result.status);
            result.status = PlanStatus::Unsafe;
            return Ok(result);
        }
        self.previous = Some((now, result.trajectory.clone()));
        Ok(result)
    }
}

/// Sampling step of the safety audit, seconds.
const AUDIT_STEP: f64 = 0.02;

/// True when no sample of the trajectory lies in an occupied voxel or below
/// the floor. A trajectory that starts in such a place is accepted, since
/// holding still would not get the tracker out.
pub fn trajectory_is_safe(world: &OccupancyWorld, traj: &MincoTrajectory) -> bool {
    let bad = |p: &Vec3| world.is_occupied(p) || world.floor().is_some_and(|z| p.z < z);
    if bad(&traj.eval(0.0).position) {
        return true;
    }
    let total = traj.total_duration();
    let n = (total / AUDIT_STEP).ceil().max(1.0) as usize;
    (1..=n).all(|k| !bad(&traj.eval(total * k as f64 / n as f64).position))
}

/// Stateless single plan from a warmed observation buffer.
pub fn plan(
    world: &OccupancyWorld,
    tracker: &TrackerState,
    buffer: &ObservationBuffer,
    fov_field: Arc<ScalarField3>,
    robot_field: Arc<ScalarField3>,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    let mut planner = Planner::new(config.clone(), fov_field, robot_field)?;
    planner.plan(world, tracker, buffer, buffer.timestamp())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softplus_inverse(y: f64) -> f64 {
    let y = y.max(1e-12);
    y + (-(-y).exp_m1()).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn pack(waypoints: &[Vec3], yaws: &[f64], durations: &[f64], min_duration: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(5 * waypoints.len());
    for w in waypoints {
        x.extend(w.iter());
    }
    x.extend(yaws);
    x.extend(durations.iter().map(|t| softplus_inverse(t - min_duration)));
    x
}

fn unpack(x: &[f64], m: usize, min_duration: f64) -> (Vec<Vec3>, Vec<f64>, Vec<f64>) {
    let wp = (0..m).map(|i| Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])).collect();
    let ys = x[3 * m..4 * m].to_vec();
    let ts = x[4 * m..5 * m].iter().map(|s| softplus(*s) + min_duration).collect();
    (wp, ys, ts)
}

/// Previous plan resampled on the new time grid, `elapsed` seconds later.
fn warm_point(prev: &MincoTrajectory, elapsed: f64, m: usize, cfg: &PlannerConfig, yaw: f64) -> Option<Vec<f64>> {
    if prev.segments() != m || !(elapsed >= 0.0) {
        return None;
    }
    let mut wp = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut reference = yaw;
    for k in 1..=m {
        let s = prev.eval(elapsed + k as f64 * cfg.interval);
        reference = unwrap_near(s.yaw, reference);
        wp.push(s.position);
        ys.push(reference);
    }
    Some(pack(&wp, &ys, &vec![cfg.interval; m], cfg.min_duration))
}

fn straight_line(tracker: &TrackerState, goal: Option<Vec3>, m: usize, interval: f64) -> MincoTrajectory {
    let goal = goal.filter(|g| g.iter().all(|v| v.is_finite())).unwrap_or(tracker.position);
    let wp: Vec<Vec3> = (1..=m).map(|k| tracker.position.lerp(&goal, k as f64 / m as f64)).collect();
    minco_map(&tracker.boundary(), &Rates::default(), &wp, &vec![tracker.yaw; m], &vec![interval; m])
        .expect("straight line through finite points")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_round_trip() {
        for y in [1e-6, 0.01, 0.49, 1.0, 5.0, 40.0] {
            assert!((softplus(softplus_inverse(y)) - y).abs() <= 1e-12 * y.max(1.0));
        }
        assert!((sigmoid(0.3) - (softplus(0.3 + 1e-6) - softplus(0.3 - 1e-6)) / 2e-6).abs() < 1e-8);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let wp = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 1.0)];
        let x = pack(&wp, &[0.1, 0.2], &[0.5, 0.3], 0.01);
        let (w, y, t) = unpack(&x, 2, 0.01);
        assert_eq!(w, wp);
        assert_eq!(y, vec![0.1, 0.2]);
        assert!((t[0] - 0.5).abs() < 1e-12 && (t[1] - 0.3).abs() < 1e-12);
    }
}

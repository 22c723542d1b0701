//! Deterministic closed-loop tracking simulation.
//!
//! The tracker follows its latest plan exactly; the target follows a
//! script. Each tick perceives, records, updates the detection history, and
//! replans.

mod library;
mod scenario;
mod trace;

use std::sync::Arc;

pub use library::{builtin, builtin_names};
pub use scenario::{
    generate_forest, polyline_distance, CameraSpec, ForestSpec, ObstacleEvent, PerceptionSpec, RobotSpec, Scenario,
    ShapeSpec, TargetScript, TrackerStart, WorldSpec, PLACEMENT_ATTEMPTS,
};
pub use trace::{compute_metrics, MeanStd, Metrics, TraceRow, TrackingTrace, CSV_HEADER, METRICS_SCHEMA_VERSION};

use crate::error::Result;
use crate::field::{FovParams, ScalarField3};
use crate::geometry::{Vec3, YawPose};
use crate::minco::MincoTrajectory;
use crate::planner::{PlanResult, PlanStatus, Planner, PlannerConfig, TrackerState};
use crate::prediction::DetectionHistory;
use crate::world::OccupancyWorld;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Perception {
    pub in_fov: bool,
    pub occluded: bool,
    pub detected: bool,
}

/// Target inside the view cone and range, and an unobstructed ray from the
/// camera to the target center.
pub fn perceive(world: &OccupancyWorld, pose: &YawPose, target: &Vec3, fov: &FovParams, max_range: f64) -> Perception {
    let b = pose.to_body(target);
    let in_fov = b.x > 0.0
        && b.y.abs() <= b.x * fov.tan_half_alpha()
        && b.z.abs() <= b.x * fov.tan_half_beta()
        && b.norm() <= max_range;
    let occluded = !world.line_of_sight(&pose.position, target);
    Perception {
        in_fov,
        occluded,
        detected: in_fov && !occluded,
    }
}

/// Running simulation of one scenario.
pub struct Simulation {
    scenario: Scenario,
    base_world: OccupancyWorld,
    world: OccupancyWorld,
    active_events: Vec<bool>,
    fov: FovParams,
    planner: Planner,
    history: DetectionHistory,
    start: TrackerState,
    plan: Option<(f64, MincoTrajectory)>,
    last: Option<PlanResult>,
    tick: usize,
    ticks: usize,
    trace: TrackingTrace,
}

impl Simulation {
    pub fn new(
        scenario: &Scenario,
        config: &PlannerConfig,
        fov_field: Arc<ScalarField3>,
        robot_field: Arc<ScalarField3>,
    ) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        let fov = *fov_field
            .fov()
            .ok_or_else(|| crate::Error::InvalidParameter("first field must be a field-of-view field".into()))?;
        let base_world = scenario.build_world()?;
        let planner = Planner::new(config.clone(), fov_field, robot_field)?;

        let s0 = scenario.tracker_start();
        let start = TrackerState::at_rest(Vec3::from(s0.position), s0.yaw);

        // the target has been watched at rest for one window before time zero
        let mut history = DetectionHistory::new(config.interval, config.prediction_intervals)?;
        let window = config.interval * config.prediction_intervals as f64;
        let dt = 1.0 / scenario.rate;
        let pre = (window / dt).ceil() as i64;
        for k in (1..=pre).rev() {
            history.push(-(k as f64) * dt, scenario.target.position(-(k as f64) * dt));
        }

        let mut sim = Self {
            scenario: scenario.clone(),
            world: base_world.clone(),
            base_world,
            active_events: vec![false; scenario.events.len()],
            fov,
            planner,
            history,
            start,
            plan: None,
            last: None,
            tick: 0,
            ticks: (scenario.duration * scenario.rate).round() as usize,
            trace: TrackingTrace::default(),
        };
        sim.sync_events(0.0)?;
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.scenario.rate
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    pub fn finished(&self) -> bool {
        self.tick >= self.ticks
    }

    pub fn world(&self) -> &OccupancyWorld {
        &self.world
    }

    pub fn target_position(&self) -> Vec3 {
        self.scenario.target.position(self.time())
    }

    pub fn tracker_state(&self) -> TrackerState {
        match &self.plan {
            // a tracker that runs off the end of its plan hovers there
            Some((t0, traj)) if self.time() - t0 >= traj.total_duration() => {
                let end = traj.eval(traj.total_duration());
                TrackerState::at_rest(end.position, end.yaw)
            }
            Some((t0, traj)) => TrackerState::on_trajectory(traj, self.time() - t0),
            None => self.start,
        }
    }

    pub fn perceive(&self) -> Perception {
        perceive(
            &self.world,
            &self.tracker_state().pose(),
            &self.target_position(),
            &self.fov,
            self.scenario.perception.max_range,
        )
    }

    /// Result of the most recent successful planning cycle.
    pub fn last_plan(&self) -> Option<&PlanResult> {
        self.last.as_ref()
    }

    pub fn trace(&self) -> &TrackingTrace {
        &self.trace
    }

    pub fn into_trace(self) -> TrackingTrace {
        self.trace
    }

    fn sync_events(&mut self, t: f64) -> Result<()> {
        let now: Vec<bool> = self.scenario.events.iter().map(|e| e.active(t)).collect();
        if now != self.active_events {
            let mut world = self.base_world.clone();
            for (e, on) in self.scenario.events.iter().zip(&now) {
                if *on {
                    world.insert(&e.shape.to_shape())?;
                }
            }
            self.world = world;
            self.active_events = now;
        }
        Ok(())
    }

    /// Runs one tick: perceive, record, update the history, replan, advance.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        self.sync_events(t)?;
        let tracker = self.tracker_state();
        let target = self.target_position();
        let seen = self.perceive();
        if seen.detected || self.scenario.perception.broadcast {
            self.history.push(t, target);
        }

        let mut row = TraceRow {
            time: t,
            position: tracker.position,
            yaw: tracker.yaw,
            velocity: tracker.velocity,
            target,
            detected: seen.detected,
            occluded: seen.occluded,
            in_fov: seen.in_fov,
            path_us: 0,
            optimize_us: 0,
            status: None,
        };
        match self.history.buffer().and_then(|b| self.planner.plan(&self.world, &tracker, &b, t)) {
            Ok(r) if r.status == PlanStatus::Unsafe => {
                row.path_us = r.path_us.max(1);
                row.optimize_us = r.optimize_us.max(1);
                row.status = Some(r.status);
            }
            Ok(r) => {
                row.path_us = r.path_us.max(1);
                row.optimize_us = r.optimize_us.max(1);
                row.status = Some(r.status);
                self.plan = Some((t, r.trajectory.clone()));
                self.last = Some(r);
            }
            Err(e) => {
                log::warn!("planning failed at t={t:.2}: {e}");
                row.status = Some(PlanStatus::Degraded);
            }
        }
        self.trace.rows.push(row);
        self.tick += 1;
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        while !self.finished() {
            self.step()?;
        }
        Ok(())
    }
}

/// Builds the fields the scenario asks for.
pub fn scenario_fields(scenario: &Scenario) -> Result<(Arc<ScalarField3>, Arc<ScalarField3>)> {
    Ok((Arc::new(scenario.camera.build_field()?), Arc::new(scenario.robot.build_field()?)))
}

pub fn run_scenario(
    scenario: &Scenario,
    config: &PlannerConfig,
    fov_field: Arc<ScalarField3>,
    robot_field: Arc<ScalarField3>,
) -> Result<(TrackingTrace, Metrics)> {
    let mut sim = Simulation::new(scenario, config, fov_field, robot_field)?;
    sim.run()?;
    let trace = sim.into_trace();
    let metrics = compute_metrics(&trace)?;
    Ok((trace, metrics))
}

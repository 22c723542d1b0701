//! Built-in scenarios.

use super::scenario::*;
use crate::planner::PlannerConfig;

pub fn builtin_names() -> &'static [&'static str] {
    &["open-field", "random-forest", "sharp-turn", "approach-tracker", "overhang", "door-closure"]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let s = match name {
        "open-field" => open_field(),
        "random-forest" => random_forest(),
        "sharp-turn" => sharp_turn(),
        "approach-tracker" => approach_tracker(),
        "overhang" => overhang(),
        "door-closure" => door_closure(),
        _ => return None,
    };
    Some(s)
}

fn base(name: &str, duration: f64, min: [f64; 3], max: [f64; 3], target: TargetScript) -> Scenario {
    Scenario {
        name: name.into(),
        duration,
        rate: 10.0,
        seed: 1,
        world: WorldSpec {
            min,
            max,
            resolution: 0.2,
            obstacles: Vec::new(),
            forest: None,
            floor: Some(0.0),
        },
        target,
        tracker: None,
        perception: PerceptionSpec::default(),
        camera: CameraSpec::default(),
        robot: RobotSpec::default(),
        planner: PlannerConfig::default(),
        events: Vec::new(),
    }
}

fn open_field() -> Scenario {
    base(
        "open-field",
        40.0,
        [-12.0, -12.0, 0.0],
        [12.0, 12.0, 4.0],
        TargetScript::Circle {
            center: [0.0, 0.0, 1.0],
            radius: 6.0,
            speed: 1.0,
        },
    )
}

/// Closed figure-eight of two tangent circles through the forest. The
/// turn radius is wide enough for a tracker at the preferred distance on the
/// outside of a turn to stay under its speed limit.
fn figure_eight() -> Vec<[f64; 3]> {
    let (r, n) = (4.5, 32);
    let mut pts = Vec::with_capacity(2 * n);
    for (cx, sign) in [(r, 1.0), (-r, -1.0)] {
        for k in 0..n {
            let a = sign * std::f64::consts::TAU * k as f64 / n as f64;
            let base = if sign > 0.0 { std::f64::consts::PI } else { 0.0 };
            pts.push([cx + r * (base + a).cos(), r * (base + a).sin(), 1.0]);
        }
    }
    pts
}

fn random_forest() -> Scenario {
    let mut s = base(
        "random-forest",
        120.0,
        [-12.0, -12.0, 0.0],
        [12.0, 12.0, 4.0],
        TargetScript::Path {
            waypoints: figure_eight(),
            speeds: vec![1.0],
            closed: true,
        },
    );
    s.world.forest = Some(ForestSpec {
        count: 40,
        min: [-10.0, -10.0],
        max: [10.0, 10.0],
        radius: [0.2, 0.5],
        height: [2.5, 4.0],
        clearance: 0.5,
    });
    s.perception.broadcast = true;
    s
}

fn sharp_turn() -> Scenario {
    base(
        "sharp-turn",
        20.0,
        [-6.0, -6.0, 0.0],
        [14.0, 10.0, 4.0],
        TargetScript::Path {
            waypoints: vec![[0.0, 0.0, 1.0], [8.0, 0.0, 1.0], [3.0, 5.0, 1.0], [3.0, 9.0, 1.0]],
            speeds: vec![1.2],
            closed: false,
        },
    )
}

fn approach_tracker() -> Scenario {
    let mut s = base(
        "approach-tracker",
        16.0,
        [-12.0, -6.0, 0.0],
        [8.0, 6.0, 4.0],
        TargetScript::Path {
            waypoints: vec![[4.0, 0.0, 1.0], [-8.0, 0.5, 1.0]],
            speeds: vec![1.0],
            closed: false,
        },
    );
    s.tracker = Some(TrackerStart {
        position: [1.5, 0.0, 1.0],
        yaw: 0.0,
    });
    s
}

/// Target dips under a low ceiling and climbs out again.
fn overhang() -> Scenario {
    let mut s = base(
        "overhang",
        26.0,
        [-4.0, -5.0, 0.0],
        [20.0, 5.0, 4.0],
        TargetScript::Path {
            waypoints: vec![
                [0.0, 0.0, 1.5],
                [3.0, 0.0, 1.5],
                [4.5, 0.0, 0.9],
                [9.5, 0.0, 0.9],
                [11.0, 0.0, 1.5],
                [16.0, 0.0, 1.5],
            ],
            speeds: vec![0.8],
            closed: false,
        },
    );
    s.world.obstacles.push(ShapeSpec::Box {
        min: [4.0, -3.0, 1.6],
        max: [10.0, 3.0, 3.2],
    });
    s
}

/// A door panel slides shut between tracker and target for two seconds.
fn door_closure() -> Scenario {
    let mut s = base(
        "door-closure",
        20.0,
        [-4.0, -7.0, 0.0],
        [16.0, 7.0, 4.0],
        TargetScript::Path {
            waypoints: vec![[0.0, 0.0, 1.0], [14.0, 0.0, 1.0]],
            speeds: vec![0.8],
            closed: false,
        },
    );
    s.events.push(ObstacleEvent {
        start: 9.0,
        end: Some(11.0),
        shape: ShapeSpec::Box {
            min: [6.0, -1.5, 0.0],
            max: [6.4, 1.5, 3.0],
        },
    });
    s
}

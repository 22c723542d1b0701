//! Property checks over randomly drawn inputs.

mod common;

use common::fov_field;
use fovtrack::field::FovParams;
use fovtrack::geometry::horizontal_projection;
use fovtrack::minco::{minco_map, BoundaryState, Rates};
use fovtrack::path::{arc_search, ArcSearch};
use fovtrack::prediction::{fit_prediction, ObservationBuffer};
use fovtrack::sim::perceive;
use fovtrack::world::{OccupancyWorld, Shape};
use fovtrack::{Vec3, YawPose};
use proptest::prelude::*;

fn v3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-4.0f64..4.0).prop_map(Vec3::from)
}

fn pillars(centers: &[[f64; 2]]) -> OccupancyWorld {
    let mut w = OccupancyWorld::with_bounds(Vec3::new(-8.0, -8.0, 0.0), Vec3::new(8.0, 8.0, 3.0), 0.1).unwrap();
    for c in centers {
        w.insert(&Shape::Cylinder {
            center: *c,
            radius: 0.3,
            z_min: 0.0,
            z_max: 3.0,
        })
        .unwrap();
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn minco_passes_through_waypoints_and_keeps_the_head_state(
        start in v3(),
        vel in v3(),
        wps in prop::collection::vec(v3(), 1..6),
        yaw in -3.0f64..3.0,
        durs in prop::collection::vec(0.2f64..1.5, 6),
    ) {
        let m = wps.len();
        let head = BoundaryState { position: start, yaw, rates: Rates { velocity: vel * 0.3, ..Rates::default() } };
        let yaws: Vec<f64> = (0..m).map(|i| yaw + 0.1 * i as f64).collect();
        let tr = minco_map(&head, &Rates::default(), &wps, &yaws, &durs[..m]).unwrap();
        let s0 = tr.eval(0.0);
        prop_assert!((s0.position - start).norm() < 1e-9);
        prop_assert!((s0.velocity - vel * 0.3).norm() < 1e-9);
        let mut t = 0.0;
        for i in 0..m {
            t += durs[i];
            let s = tr.eval(t);
            prop_assert!((s.position - wps[i]).norm() < 1e-8, "waypoint {}", i);
            prop_assert!((s.yaw - yaws[i]).abs() < 1e-8);
        }
        prop_assert!(tr.jerk_energy().0 >= 0.0);
    }

    #[test]
    fn prediction_holds_still_past_the_horizon(
        pts in prop::collection::vec(v3(), 3),
        extra in 0.0f64..5.0,
    ) {
        let c = fit_prediction(&ObservationBuffer::new(0.5, pts, 0.0).unwrap()).unwrap();
        let h = c.horizon();
        prop_assert_eq!(c.eval(h + extra), c.eval(h));
    }

    #[test]
    fn fov_field_is_bounded_and_vanishes_outside_the_pyramid(p in prop::array::uniform3(-2.0f64..5.0)) {
        let fov = FovParams::standard();
        let f = fov_field();
        let p = Vec3::from(p);
        let v = f.query(&p).value;
        prop_assert!(v >= 0.0 && v <= f.max_value() + 1e-12);
        if !fov.contains(&p) {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn arc_search_keeps_range_and_sight(
        centers in prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), 0..8),
        angle in -3.1f64..3.1,
    ) {
        let w = pillars(&centers);
        let target = Vec3::new(0.0, 0.0, 1.0);
        prop_assume!(!w.is_occupied(&target));
        let c = target + Vec3::new(angle.cos(), angle.sin(), 0.0) * 2.5;
        if let Ok(p) = arc_search(&target, &c, &w, &ArcSearch::default()) {
            prop_assert!(w.line_of_sight(&p, &target));
            prop_assert!((horizontal_projection(&(p - target)).norm() - 2.5).abs() < 1e-9);
            prop_assert!((p.z - c.z).abs() < 1e-12);
        }
    }

    #[test]
    fn detection_requires_view_and_sight(
        centers in prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), 0..8),
        pos in prop::array::uniform3(-4.0f64..4.0),
        target in prop::array::uniform3(-4.0f64..4.0),
        yaw in -3.1f64..3.1,
    ) {
        let w = pillars(&centers);
        let (mut pos, mut target) = (Vec3::from(pos), Vec3::from(target));
        pos.z = pos.z.abs().min(2.5) + 0.2;
        target.z = target.z.abs().min(2.5) + 0.2;
        let fov = FovParams::standard();
        let seen = perceive(&w, &YawPose::new(pos, yaw), &target, &fov, 10.0);
        prop_assert_eq!(seen.detected, seen.in_fov && !seen.occluded);
        prop_assert_eq!(seen.occluded, !w.line_of_sight(&pos, &target));
    }
}

//! Top-down SVG of a run: obstacles, target path, tracker path, and the
//! ticks where the target was not detected.

use std::fmt::Write as _;

use fovtrack::sim::{Scenario, TrackingTrace};
use fovtrack::world::Shape;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;

struct Frame {
    x_min: f64,
    y_max: f64,
    scale: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.x_min) * self.scale, MARGIN + (self.y_max - y) * self.scale)
    }
}

fn polyline(s: &mut String, f: &Frame, pts: impl Iterator<Item = (f64, f64)>, stroke: &str, width: f64) {
    let pts: Vec<String> = pts
        .map(|(x, y)| {
            let (a, b) = f.map(x, y);
            format!("{a:.2},{b:.2}")
        })
        .collect();
    if pts.len() > 1 {
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }
}

fn shape(s: &mut String, f: &Frame, sh: &Shape, style: &str) {
    match sh {
        &Shape::Box { min, max } => {
            let (x0, y0) = f.map(min.x, max.y);
            let (x1, y1) = f.map(max.x, min.y);
            writeln!(
                s,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
                x1 - x0,
                y1 - y0
            )
            .unwrap();
        }
        &Shape::Cylinder { center, radius, .. } => {
            let (cx, cy) = f.map(center[0], center[1]);
            writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" {style}/>"#, radius * f.scale).unwrap();
        }
        Shape::Points(pts) => {
            for p in pts {
                let (cx, cy) = f.map(p.x, p.y);
                writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="1.5" {style}/>"#).unwrap();
            }
        }
    }
}

pub fn trajectory_svg(scenario: &Scenario, shapes: &[Shape], trace: &TrackingTrace) -> String {
    let (min, max) = (scenario.world.min, scenario.world.max);
    let scale = (WIDTH - 2.0 * MARGIN) / (max[0] - min[0]);
    let height = (max[1] - min[1]) * scale + 2.0 * MARGIN;
    let f = Frame {
        x_min: min[0],
        y_max: max[1],
        scale,
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{:.0}" viewBox="0 0 {WIDTH:.0} {:.0}">"#,
        height + 20.0,
        height + 20.0
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (x0, y0) = f.map(min[0], max[1]);
    let (x1, y1) = f.map(max[0], min[1]);
    writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    )
    .unwrap();

    for sh in shapes {
        shape(&mut s, &f, sh, r##"fill="#888888" stroke="#555555""##);
    }
    for e in &scenario.events {
        shape(
            &mut s,
            &f,
            &e.shape.to_shape(),
            r##"fill="none" stroke="#e08000" stroke-dasharray="4 3" stroke-width="2""##,
        );
    }

    polyline(&mut s, &f, trace.rows.iter().map(|r| (r.target.x, r.target.y)), "#1f77b4", 2.0);
    polyline(&mut s, &f, trace.rows.iter().map(|r| (r.position.x, r.position.y)), "#2ca02c", 1.5);
    for r in trace.rows.iter().filter(|r| !r.detected) {
        let (cx, cy) = f.map(r.position.x, r.position.y);
        let color = if r.occluded { "#d62728" } else { "#9467bd" };
        writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2" fill="{color}"/>"#).unwrap();
    }
    if let Some(r) = trace.rows.first() {
        let (cx, cy) = f.map(r.position.x, r.position.y);
        writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="none" stroke="black"/>"#).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.0}" font-family="sans-serif" font-size="12">{}: target blue, tracker green, occluded red, out of view purple</text>"#,
        height + 10.0,
        scenario.name
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

//! Histogram of the target position in the tracker's body frame, rendered
//! as an SVG heatmap with the view triangle drawn on top.

use std::fmt::Write as _;

use fovtrack::field::FovParams;
use fovtrack::sim::{TraceRow, TrackingTrace};
use fovtrack::YawPose;

/// Color ramp, low to high. Seven stops sampled from viridis.
pub const RAMP: [[u8; 3]; 7] = [
    [0x44, 0x01, 0x54],
    [0x44, 0x39, 0x83],
    [0x31, 0x68, 0x8e],
    [0x21, 0x91, 0x8c],
    [0x35, 0xb7, 0x79],
    [0x90, 0xd7, 0x43],
    [0xfd, 0xe7, 0x25],
];

/// Linear interpolation along [`RAMP`] for `s` in `[0, 1]`.
pub fn ramp_color(s: f64) -> [u8; 3] {
    let s = s.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (s.floor() as usize).min(RAMP.len() - 2);
    let f = s - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        let (a, b) = (RAMP[i][k] as f64, RAMP[i + 1][k] as f64);
        c[k] = (a + (b - a) * f).round() as u8;
    }
    c
}

/// Target position in the tracker body frame, horizontal components.
pub fn body_xy(row: &TraceRow) -> (f64, f64) {
    let b = YawPose::new(row.position, row.yaw).to_body(&row.target);
    (b.x, b.y)
}

/// Horizontal view triangle: apex at the camera, depth `D`.
pub fn in_triangle(fov: &FovParams, x: f64, y: f64) -> bool {
    x > 0.0 && x <= fov.depth && y.abs() <= x * fov.tan_half_alpha()
}

/// Regular 2-D histogram over `[x_min, x_min + nx*bin) x [y_min, y_min + ny*bin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub x_min: f64,
    pub y_min: f64,
    pub bin: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major in y: `counts[iy * nx + ix]`.
    pub counts: Vec<u64>,
    /// Samples that fell outside the grid.
    pub dropped: u64,
}

impl Heatmap {
    pub fn new(x_min: f64, y_min: f64, bin: f64, nx: usize, ny: usize) -> Self {
        Self {
            x_min,
            y_min,
            bin,
            nx,
            ny,
            counts: vec![0; nx * ny],
            dropped: 0,
        }
    }

    /// Grid covering the view triangle with some room behind and around it.
    pub fn for_fov(fov: &FovParams, bin: f64) -> Self {
        let reach = (1.5 * fov.depth).ceil();
        let half = fov.depth.ceil();
        let nx = ((reach + 1.0) / bin).round() as usize;
        let ny = ((2.0 * half) / bin).round() as usize;
        Self::new(-1.0, -half, bin, nx, ny)
    }

    pub fn bin_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.x_min) / self.bin).floor();
        let fy = ((y - self.y_min) / self.bin).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn add(&mut self, x: f64, y: f64) {
        match self.bin_of(x, y) {
            Some((ix, iy)) => self.counts[iy * self.nx + ix] += 1,
            None => self.dropped += 1,
        }
    }

    pub fn add_trace(&mut self, trace: &TrackingTrace) {
        for r in &trace.rows {
            let (x, y) = body_xy(r);
            self.add(x, y);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.dropped
    }

    /// Bin counts as `x,y,count` rows at bin centers, nonzero bins only.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,count\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = self.counts[iy * self.nx + ix];
                if c > 0 {
                    let (x, y) = self.center(ix, iy);
                    writeln!(s, "{x:.4},{y:.4},{c}").unwrap();
                }
            }
        }
        s
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x_min + (ix as f64 + 0.5) * self.bin,
            self.y_min + (iy as f64 + 0.5) * self.bin,
        )
    }

    /// Heatmap with body x pointing right and body y pointing up.
    pub fn to_svg(&self, fov: &FovParams) -> String {
        let px = (600.0 / self.nx.max(self.ny) as f64).max(1.0);
        let (w, h) = (self.nx as f64 * px, self.ny as f64 * px);
        let y_max = self.y_min + self.ny as f64 * self.bin;
        let to_screen = |x: f64, y: f64| ((x - self.x_min) / self.bin * px, (y_max - y) / self.bin * px);
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{:.0}" viewBox="0 0 {w:.0} {:.0}">"#,
            h + 24.0,
            h + 24.0
        )
        .unwrap();
        let [r, g, b] = ramp_color(0.0);
        writeln!(s, r#"<rect width="{w:.0}" height="{h:.0}" fill="rgb({r},{g},{b})"/>"#).unwrap();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = self.counts[iy * self.nx + ix];
                if c == 0 {
                    continue;
                }
                let [r, g, b] = ramp_color(c as f64 / peak);
                let (sx, sy) = to_screen(self.x_min + ix as f64 * self.bin, self.y_min + (iy + 1) as f64 * self.bin);
                writeln!(
                    s,
                    r#"<rect x="{sx:.2}" y="{sy:.2}" width="{px:.2}" height="{px:.2}" fill="rgb({r},{g},{b})"/>"#
                )
                .unwrap();
            }
        }

        let half = fov.depth * fov.tan_half_alpha();
        let pts = [(0.0, 0.0), (fov.depth, half), (fov.depth, -half)]
            .map(|(x, y)| to_screen(x, y))
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .join(" ");
        writeln!(s, r#"<polygon points="{pts}" fill="none" stroke="white" stroke-width="2"/>"#).unwrap();
        let (dx, dy) = to_screen(fov.distance, 0.0);
        writeln!(s, r#"<circle cx="{dx:.2}" cy="{dy:.2}" r="3" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="4" y="{:.0}" font-family="sans-serif" font-size="12">{} samples, peak {} per {:.2} m bin</text>"#,
            h + 16.0,
            self.total(),
            peak as u64,
            self.bin
        )
        .unwrap();
        s.push_str("</svg>\n");
        s
    }
}

/// Share of detected ticks whose body-frame target lies in the view triangle.
pub fn detected_in_triangle(traces: &[TrackingTrace], fov: &FovParams) -> (usize, usize) {
    let detected: Vec<&TraceRow> = traces.iter().flat_map(|t| &t.rows).filter(|r| r.detected).collect();
    let inside = detected
        .iter()
        .filter(|r| {
            let (x, y) = body_xy(r);
            in_triangle(fov, x, y)
        })
        .count();
    (inside, detected.len())
}

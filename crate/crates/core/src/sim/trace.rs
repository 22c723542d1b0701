//! Per-tick tracking records, CSV export, and the summary metrics.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, normalize_yaw, Vec3};
use crate::planner::PlanStatus;

pub const CSV_HEADER: &str = "t,px,py,pz,yaw,tx,ty,tz,detected,occluded,in_fov,t_path_us,t_opt_us";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub position: Vec3,
    pub yaw: f64,
    pub velocity: Vec3,
    pub target: Vec3,
    pub detected: bool,
    pub occluded: bool,
    pub in_fov: bool,
    /// Planning stage timings of the cycle started at this tick.
    pub path_us: u64,
    pub optimize_us: u64,
    /// `None` when no plan was attempted at this tick.
    pub status: Option<PlanStatus>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackingTrace {
    pub rows: Vec<TraceRow>,
}

impl TrackingTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV text. Timing columns are written as zero unless `timings` is
    /// set, so traces of identical runs compare byte for byte.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut s = String::with_capacity(96 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let (tp, to) = if timings { (r.path_us, r.optimize_us) } else { (0, 0) };
            writeln!(
                s,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{}",
                r.time,
                r.position.x,
                r.position.y,
                r.position.z,
                normalize_yaw(r.yaw),
                r.target.x,
                r.target.y,
                r.target.z,
                u8::from(r.detected),
                u8::from(r.occluded),
                u8::from(r.in_fov),
                tp,
                to
            )
            .expect("write to string");
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W, timings: bool) -> Result<()> {
        w.write_all(self.to_csv(timings).as_bytes())?;
        Ok(())
    }

    /// Reads a trace written by [`TrackingTrace::to_csv`]. Velocities and
    /// plan statuses are not stored and come back empty.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != CSV_HEADER {
                    return Err(Error::Scenario(format!("unexpected trace header: {line}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 13 {
                return Err(Error::Scenario(format!("trace line {} has {} fields", i + 1, f.len())));
            }
            let num = |k: usize| -> Result<f64> {
                f[k].trim()
                    .parse()
                    .map_err(|_| Error::Scenario(format!("trace line {}: bad number {:?}", i + 1, f[k])))
            };
            let flag = |k: usize| -> Result<bool> {
                match f[k].trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Scenario(format!("trace line {}: bad flag {other:?}", i + 1))),
                }
            };
            rows.push(TraceRow {
                time: num(0)?,
                position: Vec3::new(num(1)?, num(2)?, num(3)?),
                yaw: num(4)?,
                velocity: Vec3::zeros(),
                target: Vec3::new(num(5)?, num(6)?, num(7)?),
                detected: flag(8)?,
                occluded: flag(9)?,
                in_fov: flag(10)?,
                path_us: num(11)? as u64,
                optimize_us: num(12)? as u64,
                status: None,
            });
        }
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub ticks: usize,
    /// Tracker-to-target distance, meters.
    pub tracking_distance: MeanStd,
    /// Wrapped difference between yaw and target bearing, radians.
    pub angle_error: MeanStd,
    /// Percent of ticks with the line of sight blocked.
    pub occlusion_rate: f64,
    /// Percent of ticks occluded or outside the view.
    pub failure_rate: f64,
    /// Stage timings over ticks that planned, milliseconds.
    pub path_ms: MeanStd,
    pub optimize_ms: MeanStd,
    pub total_ms: MeanStd,
    /// Ticks that produced no usable new plan.
    pub planner_failures: usize,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

pub fn compute_metrics(trace: &TrackingTrace) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let rows = &trace.rows;
    let n = rows.len() as f64;
    let td = MeanStd::of(rows.iter().map(|r| (r.position - r.target).norm()));
    let ae = MeanStd::of(rows.iter().map(|r| {
        let d = r.target - r.position;
        angle_diff(r.yaw, d.y.atan2(d.x)).abs()
    }));
    let occluded = rows.iter().filter(|r| r.occluded).count() as f64;
    let failed = rows.iter().filter(|r| r.occluded || !r.in_fov).count() as f64;
    let planned: Vec<&TraceRow> = rows.iter().filter(|r| r.path_us > 0 || r.optimize_us > 0 || r.status.is_some()).collect();
    Ok(Metrics {
        schema_version: METRICS_SCHEMA_VERSION,
        ticks: rows.len(),
        tracking_distance: td,
        angle_error: ae,
        occlusion_rate: 100.0 * occluded / n,
        failure_rate: 100.0 * failed / n,
        path_ms: MeanStd::of(planned.iter().map(|r| r.path_us as f64 / 1e3)),
        optimize_ms: MeanStd::of(planned.iter().map(|r| r.optimize_us as f64 / 1e3)),
        total_ms: MeanStd::of(planned.iter().map(|r| (r.path_us + r.optimize_us) as f64 / 1e3)),
        planner_failures: rows.iter().filter(|r| matches!(r.status, Some(PlanStatus::Degraded | PlanStatus::Unsafe))).count(),
    })
}

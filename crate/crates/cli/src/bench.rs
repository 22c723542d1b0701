//! Planning-time report over a batch of runs.

use std::fmt::Write as _;

use fovtrack::sim::{MeanStd, TrackingTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub runs: usize,
    /// Planning cycles aggregated across all runs.
    pub cycles: usize,
    /// Prediction and initial path, milliseconds.
    pub path: MeanStd,
    pub optimize: MeanStd,
    pub total: MeanStd,
}

impl TimingReport {
    /// Aggregates every tick that planned, across all traces.
    pub fn from_traces(traces: &[TrackingTrace]) -> Self {
        let planned: Vec<_> = traces
            .iter()
            .flat_map(|t| &t.rows)
            .filter(|r| r.status.is_some())
            .collect();
        Self {
            runs: traces.len(),
            cycles: planned.len(),
            path: MeanStd::of(planned.iter().map(|r| r.path_us as f64 / 1e3)),
            optimize: MeanStd::of(planned.iter().map(|r| r.optimize_us as f64 / 1e3)),
            total: MeanStd::of(planned.iter().map(|r| (r.path_us + r.optimize_us) as f64 / 1e3)),
        }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<22} {:>10} {:>10}", "stage", "mean (ms)", "std (ms)").unwrap();
        for (name, v) in [("path generation", self.path), ("optimization", self.optimize), ("total", self.total)] {
            writeln!(s, "{name:<22} {:>10.3} {:>10.3}", v.mean, v.std).unwrap();
        }
        writeln!(s, "{} planning cycles over {} runs", self.cycles, self.runs).unwrap();
        s
    }

    pub fn to_json(&self) -> String {
        let ms = |v: MeanStd| serde_json::json!({ "mean": v.mean, "std": v.std });
        let j = serde_json::json!({
            "runs": self.runs,
            "cycles": self.cycles,
            "path_ms": ms(self.path),
            "optimize_ms": ms(self.optimize),
            "total_ms": ms(self.total),
        });
        serde_json::to_string_pretty(&j).expect("json")
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use fovtrack::field::{build_fov_esdf, load_field, save_field, FovParams, ScalarField3};
use fovtrack::sim::{compute_metrics, run_scenario, CameraSpec, Metrics, RobotSpec, Scenario, TrackingTrace};
use fovtrack::Vec3;

use crate::heatmap::{detected_in_triangle, Heatmap};
use crate::plot::trajectory_svg;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            _ => Err(format!("unknown format `{s}` (expected csv, json or svg)")),
        }
    }
}

/// Parses `KEY=VAL` for `--weights`.
pub fn parse_weight(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VAL, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("{k}: weight must be finite and non-negative"));
    }
    Ok((k.trim().to_string(), v))
}

/// Loads a scenario file and applies command-line overrides.
pub fn load_scenario(path: &Path, seed: Option<u64>, weights: &[(String, f64)]) -> CliResult<Scenario> {
    let mut s = Scenario::load(path).map_err(CliError::config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    for (k, v) in weights {
        if !s.planner.weights.set(k, *v) {
            return Err(CliError::Config(format!("unknown weight `{k}`")));
        }
    }
    s.validate().map_err(CliError::config)?;
    Ok(s)
}

type Fields = (Arc<ScalarField3>, Arc<ScalarField3>);

/// Fields shared by every run with the same camera and robot.
pub struct FieldCache {
    esdf: Option<Arc<ScalarField3>>,
    built: Vec<(CameraSpec, RobotSpec, Fields)>,
}

impl FieldCache {
    /// `esdf` replaces the camera field of every scenario; its view
    /// parameters must match each scenario's camera.
    pub fn new(esdf: Option<&Path>) -> CliResult<Self> {
        let esdf = match esdf {
            Some(p) => {
                let f = load_field(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                if f.fov().is_none() {
                    return Err(CliError::Config(format!("{} is not a field-of-view field", p.display())));
                }
                Some(Arc::new(f))
            }
            None => None,
        };
        Ok(Self { esdf, built: Vec::new() })
    }

    pub fn get(&mut self, s: &Scenario) -> CliResult<Fields> {
        if let Some((_, _, f)) = self.built.iter().find(|(c, r, _)| *c == s.camera && *r == s.robot) {
            return Ok(f.clone());
        }
        let fov_field = match &self.esdf {
            Some(f) => {
                let want = s.camera.fov().map_err(CliError::config)?;
                let have = f.fov().expect("checked on load");
                let same = (want.alpha - have.alpha).abs() < 1e-9
                    && (want.beta - have.beta).abs() < 1e-9
                    && (want.distance - have.distance).abs() < 1e-9;
                if !same {
                    return Err(CliError::Config(format!(
                        "field file camera ({:.2} x {:.2} deg, {} m) does not match scenario `{}`",
                        have.alpha.to_degrees(),
                        have.beta.to_degrees(),
                        have.distance,
                        s.name
                    )));
                }
                f.clone()
            }
            None => Arc::new(s.camera.build_field().map_err(CliError::config)?),
        };
        let robot = Arc::new(s.robot.build_field().map_err(CliError::config)?);
        let fields = (fov_field, robot);
        self.built.push((s.camera, s.robot, fields.clone()));
        Ok(fields)
    }
}

/// Runs scenarios on up to `jobs` worker threads; results keep input order.
pub fn run_batch(runs: &[(Scenario, Fields)], jobs: usize) -> Vec<CliResult<(TrackingTrace, Metrics)>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<(TrackingTrace, Metrics)>>>> =
        Mutex::new((0..runs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, runs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((s, (fov, robot))) = runs.get(i) else { break };
                log::info!("running {} (seed {})", s.name, s.seed);
                let r = run_scenario(s, &s.planner, fov.clone(), robot.clone()).map_err(CliError::runtime);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every run finished")).collect()
}

pub struct EsdfArgs {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub distance: f64,
    pub resolution: f64,
    pub out: PathBuf,
}

/// Builds and writes the field; returns the report printed by the binary.
pub fn build_esdf(a: &EsdfArgs) -> CliResult<String> {
    let fov = FovParams::from_degrees(a.alpha_deg, a.beta_deg, a.distance).map_err(CliError::config)?;
    if !(a.resolution > 0.0) || !a.resolution.is_finite() {
        return Err(CliError::Config(format!("resolution must be positive, got {}", a.resolution)));
    }
    let field = build_fov_esdf(&fov, a.resolution).map_err(CliError::config)?;
    save_field(&field, &a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    let axial = field.query(&Vec3::new(fov.distance, 0.0, 0.0)).value;
    Ok(format!(
        "wrote {}\ndepth D      {:.4} m\nmax value    {:.4} m\nvalue at d   {:.4} m\nmemory       {} bytes\n",
        a.out.display(),
        fov.depth,
        field.max_value(),
        axial,
        field.memory_bytes()
    ))
}

pub struct SimulateArgs {
    pub scenarios: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub esdf: Option<PathBuf>,
    pub weights: Vec<(String, f64)>,
    pub formats: Vec<Format>,
    pub jobs: usize,
    pub record_timings: bool,
}

/// Runs every scenario and writes its artifacts. A single scenario writes
/// into `out`; several write into `out/<scenario name>`.
pub fn simulate(a: &SimulateArgs) -> CliResult<Vec<(String, Metrics)>> {
    if a.scenarios.is_empty() {
        return Err(CliError::Config("no scenario given".into()));
    }
    let formats = if a.formats.is_empty() { vec![Format::Csv, Format::Json, Format::Svg] } else { a.formats.clone() };
    let mut cache = FieldCache::new(a.esdf.as_deref())?;
    let mut runs = Vec::with_capacity(a.scenarios.len());
    for p in &a.scenarios {
        let s = load_scenario(p, a.seed, &a.weights)?;
        let f = cache.get(&s)?;
        runs.push((s, f));
    }
    let dirs: Vec<PathBuf> = if runs.len() == 1 {
        vec![a.out.clone()]
    } else {
        let mut names: Vec<String> = Vec::new();
        for (s, _) in &runs {
            let mut n = s.name.clone();
            let mut k = 2;
            while names.contains(&n) {
                n = format!("{}-{k}", s.name);
                k += 1;
            }
            names.push(n);
        }
        names.iter().map(|n| a.out.join(n)).collect()
    };

    let results = run_batch(&runs, a.jobs);
    let mut summary = Vec::new();
    for (((s, _), dir), r) in runs.iter().zip(&dirs).zip(results) {
        let (trace, metrics) = r?;
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        for f in &formats {
            let (name, text) = match f {
                Format::Csv => ("trace.csv", trace.to_csv(a.record_timings)),
                Format::Json => ("metrics.json", metrics.to_json()),
                Format::Svg => {
                    let shapes = s.static_shapes().map_err(CliError::runtime)?;
                    ("trajectory.svg", trajectory_svg(s, &shapes, &trace))
                }
            };
            write(&dir.join(name), &text)?;
        }
        summary.push((s.name.clone(), metrics));
    }
    Ok(summary)
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn read_trace(path: &Path) -> CliResult<TrackingTrace> {
    let file = fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    TrackingTrace::read_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub struct HeatmapArgs {
    pub traces: Vec<PathBuf>,
    pub out: PathBuf,
    pub bin: f64,
    pub fov: FovParams,
    pub formats: Vec<Format>,
}

/// Writes `heatmap.svg` (and `heatmap.csv` / `heatmap.json` when asked);
/// returns the detected-in-triangle tally.
pub fn heatmap(a: &HeatmapArgs) -> CliResult<(usize, usize)> {
    if a.traces.is_empty() {
        return Err(CliError::Config("no trace given".into()));
    }
    if !(a.bin > 0.0) || !a.bin.is_finite() {
        return Err(CliError::Config(format!("bin size must be positive, got {}", a.bin)));
    }
    let traces = a.traces.iter().map(|p| read_trace(p)).collect::<CliResult<Vec<_>>>()?;
    if traces.iter().all(|t| t.is_empty()) {
        return Err(CliError::Config("traces are empty".into()));
    }
    let mut h = Heatmap::for_fov(&a.fov, a.bin);
    for t in &traces {
        h.add_trace(t);
    }
    let (inside, detected) = detected_in_triangle(&traces, &a.fov);

    let formats = if a.formats.is_empty() { vec![Format::Svg] } else { a.formats.clone() };
    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    for f in formats {
        match f {
            Format::Svg => write(&a.out.join("heatmap.svg"), &h.to_svg(&a.fov))?,
            Format::Csv => write(&a.out.join("heatmap.csv"), &h.to_csv())?,
            Format::Json => {
                let j = serde_json::json!({
                    "samples": h.total(),
                    "dropped": h.dropped,
                    "bin": h.bin,
                    "detected": detected,
                    "detected_in_view_triangle": inside,
                });
                write(&a.out.join("heatmap.json"), &serde_json::to_string_pretty(&j).expect("json"))?;
            }
        }
    }
    Ok((inside, detected))
}

/// Metrics of a trace file, for traces produced elsewhere.
pub fn trace_metrics(path: &Path) -> CliResult<Metrics> {
    compute_metrics(&read_trace(path)?).map_err(CliError::config)
}

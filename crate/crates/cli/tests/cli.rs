//! Runs the `fovtrack` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fovtrack::field::{load_field, FovParams};
use fovtrack::sim::{builtin, TraceRow, TrackingTrace};
use fovtrack::Vec3;
use fovtrack_cli::heatmap::Heatmap;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fovtrack"));
    c.env_remove("EVA_LOG");
    c
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Writes a built-in scenario, shortened to `duration` seconds.
fn scenario_file(dir: &Path, name: &str, duration: f64) -> PathBuf {
    let mut s = builtin(name).unwrap();
    s.duration = duration;
    let p = dir.join(format!("{name}.toml"));
    fs::write(&p, s.to_toml()).unwrap();
    p
}

#[test]
fn build_esdf_defaults_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let text = ok(bin().args(["build-esdf", "--out"]).arg(&a).output().unwrap());
    assert!(text.contains("depth D      3.4061 m"), "{text}");

    let f = load_field(&a).unwrap();
    let fov = f.fov().unwrap();
    let axial = f.query(&Vec3::new(2.5, 0.0, 0.0)).value;
    let exact = 2.5 * (0.5 * fov.beta).sin();
    assert!((exact - 0.9061).abs() < 1e-4);
    assert!((axial - exact).abs() <= 0.05 * 3f64.sqrt(), "{axial}");

    let b = dir.path().join("b.bin");
    ok(bin().args(["build-esdf", "--out"]).arg(&b).output().unwrap());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn degenerate_camera_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["build-esdf", "--alpha", "0", "--out"])
        .arg(dir.path().join("x.bin"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.bin").exists());
}

#[test]
fn bad_inputs_exit_with_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().args(["simulate", "--scenario", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let s = scenario_file(dir.path(), "open-field", 1.0);
    let unknown = bin().args(["simulate", "--weights", "nonsense=1", "--scenario"]).arg(&s).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let malformed = bin().args(["simulate", "--weights", "lambda_o", "--scenario"]).arg(&s).output().unwrap();
    assert_eq!(malformed.status.code(), Some(2));

    let garbage = dir.path().join("garbage.toml");
    fs::write(&garbage, "name = 3\n").unwrap();
    let parse = bin().args(["simulate", "--scenario"]).arg(&garbage).output().unwrap();
    assert_eq!(parse.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "open-field", 1.0);
    let file = dir.path().join("plain");
    fs::write(&file, "").unwrap();
    let out = bin().args(["simulate", "--scenario"]).arg(&s).arg("--out").arg(file.join("sub")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn open_field_writes_artifacts_without_failures() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "open-field", 40.0);
    let out = dir.path().join("run");
    ok(bin().args(["simulate", "--scenario"]).arg(&s).arg("--out").arg(&out).output().unwrap());
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["failure_rate"], 0.0);
    assert_eq!(metrics["schema_version"], 1);
    assert_eq!(metrics["ticks"], 400);
    let svg = fs::read_to_string(out.join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), fovtrack::sim::CSV_HEADER);
    assert_eq!(csv.lines().count(), 401);
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "random-forest", 12.0);
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        ok(bin()
            .args(["simulate", "--format", "csv", "--seed", seed, "--scenario"])
            .arg(&s)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap());
        assert!(!out.join("metrics.json").exists());
        fs::read(out.join("trace.csv")).unwrap()
    };
    let a = run("7", "a");
    let b = run("7", "b");
    let c = run("8", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn weight_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "sharp-turn", 6.0);
    let run = |extra: &[&str], sub: &str| {
        let out = dir.path().join(sub);
        ok(bin()
            .args(["simulate", "--format", "csv", "--scenario"])
            .arg(&s)
            .args(extra)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap());
        fs::read(out.join("trace.csv")).unwrap()
    };
    let base = run(&[], "base");
    assert_eq!(base, run(&["--weights", "v1=2"], "same"));
    // the target runs at 1.2 m/s
    assert_ne!(base, run(&["--weights", "v1=0.8"], "slow"));
}

fn row(position: Vec3, yaw: f64, target: Vec3) -> TraceRow {
    TraceRow {
        time: 0.0,
        position,
        yaw,
        velocity: Vec3::zeros(),
        target,
        detected: true,
        occluded: false,
        in_fov: true,
        path_us: 0,
        optimize_us: 0,
        status: None,
    }
}

fn write_trace(path: &Path, rows: Vec<TraceRow>) {
    let mut t = TrackingTrace { rows };
    for (k, r) in t.rows.iter_mut().enumerate() {
        r.time = k as f64 * 0.1;
    }
    fs::write(path, t.to_csv(false)).unwrap();
}

fn heatmap_counts(dir: &Path, traces: &[&Path]) -> Vec<(String, u64)> {
    ok(bin().arg("heatmap").args(traces).args(["--format", "csv", "--format", "svg", "--out"]).arg(dir).output().unwrap());
    assert!(dir.join("heatmap.svg").exists());
    fs::read_to_string(dir.join("heatmap.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (xy, c) = l.rsplit_once(',').unwrap();
            (xy.to_string(), c.parse().unwrap())
        })
        .collect()
}

#[test]
fn fixed_body_target_is_a_delta() {
    let dir = tempfile::tempdir().unwrap();
    let rows = (0..50)
        .map(|k| {
            let yaw = 0.37 * k as f64 - 3.0;
            let p = Vec3::new(0.3 * k as f64, -0.2 * k as f64, 1.0);
            // body (2.55, 0.05) sits in the middle of one 0.1 m bin
            let (c, s) = (yaw.cos(), yaw.sin());
            let (bx, by) = (2.55, 0.05);
            row(p, yaw, p + Vec3::new(c * bx - s * by, s * bx + c * by, 0.0))
        })
        .collect();
    let trace = dir.path().join("t.csv");
    write_trace(&trace, rows);
    let counts = heatmap_counts(dir.path(), &[&trace]);
    assert_eq!(counts, vec![("2.5500,0.0500".to_string(), 50)]);
}

#[test]
fn heatmap_of_two_traces_is_the_sum() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |n: usize, phase: f64| -> Vec<TraceRow> {
        (0..n)
            .map(|k| {
                let a = phase + 0.1 * k as f64;
                row(Vec3::new(0.0, 0.0, 1.0), 0.3 * a.sin(), Vec3::new(2.5 + a.cos(), 1.5 * a.sin(), 1.0))
            })
            .collect()
    };
    let (a, b) = (mk(80, 0.0), mk(120, 1.3));
    let (pa, pb, pab) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("ab.csv"));
    write_trace(&pa, a.clone());
    write_trace(&pb, b.clone());
    write_trace(&pab, a.into_iter().chain(b).collect());

    let both = heatmap_counts(&dir.path().join("both"), &[&pa, &pb]);
    let union = heatmap_counts(&dir.path().join("union"), &[&pab]);
    assert_eq!(both, union);

    let mut sum = std::collections::BTreeMap::new();
    for p in [&pa, &pb] {
        let sub = dir.path().join(p.file_stem().unwrap());
        for (k, c) in heatmap_counts(&sub, &[p]) {
            *sum.entry(k).or_insert(0) += c;
        }
    }
    let both: std::collections::BTreeMap<_, _> = both.into_iter().collect();
    assert_eq!(both, sum);
    assert_eq!(both.values().sum::<u64>(), 200);
}

#[test]
fn empty_heatmap_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    fs::write(&p, format!("{}\n", fovtrack::sim::CSV_HEADER)).unwrap();
    let out = bin().arg("heatmap").arg(&p).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

/// Detected ticks in the view triangle, straight from the CSV text.
fn recount(csv: &str, alpha: f64, depth: f64) -> (usize, usize) {
    let (mut inside, mut detected) = (0, 0);
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if v[8] != 1.0 {
            continue;
        }
        detected += 1;
        let (dx, dy, yaw) = (v[5] - v[1], v[6] - v[2], v[4]);
        let fwd = dx * yaw.cos() + dy * yaw.sin();
        let side = -dx * yaw.sin() + dy * yaw.cos();
        if fwd > 0.0 && fwd <= depth && side.abs() <= fwd * (alpha / 2.0).tan() {
            inside += 1;
        }
    }
    (inside, detected)
}

#[test]
fn forest_run_keeps_detected_targets_in_the_view_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "random-forest", 120.0);
    let out = dir.path().join("run");
    ok(bin().args(["simulate", "--format", "csv", "--scenario"]).arg(&s).arg("--out").arg(&out).output().unwrap());
    let trace = out.join("trace.csv");
    let text = ok(bin().arg("heatmap").arg(&trace).args(["--format", "json", "--scenario"]).arg(&s).arg("--out").arg(&out).output().unwrap());
    assert!(text.contains("view triangle"));

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("heatmap.json")).unwrap()).unwrap();
    let fov = FovParams::standard();
    let (inside, detected) = recount(&fs::read_to_string(&trace).unwrap(), fov.alpha, fov.depth);
    assert_eq!(summary["detected"], detected);
    assert_eq!(summary["detected_in_view_triangle"], inside);
    assert!(inside as f64 >= 0.8 * detected as f64, "{inside} of {detected}");
}

#[test]
fn bench_covers_every_cycle_of_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "sharp-turn", 5.0);
    let out = dir.path().join("bench");
    let text = ok(bin()
        .args(["bench", "--seed", "1", "--seed", "2", "--seed", "3", "--jobs", "2", "--scenario"])
        .arg(&s)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    assert!(text.contains("optimization"), "{text}");
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    assert_eq!(j["runs"], 3);
    assert_eq!(j["cycles"], 150);
    assert!(j["optimize_ms"]["mean"].as_f64().unwrap() > 0.0);
    assert!(fs::read_to_string(out.join("bench.txt")).unwrap().contains("150 planning cycles over 3 runs"));
}

#[test]
fn grid_binning_matches_direct_placement() {
    let fov = FovParams::standard();
    let mut h = Heatmap::for_fov(&fov, 0.25);
    h.add(0.01, 0.01);
    h.add(-5.0, 0.0);
    let (ix, iy) = h.bin_of(0.01, 0.01).unwrap();
    assert_eq!(h.counts[iy * h.nx + ix], 1);
    assert_eq!(h.dropped, 1);
    assert_eq!(h.total(), 2);
}

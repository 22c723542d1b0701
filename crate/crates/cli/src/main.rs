use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fovtrack::field::FovParams;
use fovtrack::sim::{builtin, builtin_names, TrackingTrace};
use fovtrack_cli::bench::TimingReport;
use fovtrack_cli::commands::{self, EsdfArgs, FieldCache, Format, HeatmapArgs, SimulateArgs};
use fovtrack_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "fovtrack", version, about = "Visibility-aware tracking planner: fields, simulation, plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the field-of-view distance field and write it to a file.
    BuildEsdf {
        /// Horizontal field of view, degrees.
        #[arg(long, default_value_t = 69.4)]
        alpha: f64,
        /// Vertical field of view, degrees.
        #[arg(long, default_value_t = 42.5)]
        beta: f64,
        /// Preferred observation distance, meters.
        #[arg(long, default_value_t = 2.5)]
        distance: f64,
        /// Voxel edge, meters.
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,
        #[arg(long, default_value = "fov_esdf.bin")]
        out: PathBuf,
    },
    /// Run scenarios and write trace.csv, metrics.json and trajectory.svg.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// csv, json or svg; repeatable. Default: all three.
        #[arg(long = "format")]
        formats: Vec<Format>,
        /// Write measured planning times into the trace instead of zeros.
        #[arg(long)]
        record_timings: bool,
    },
    /// Histogram of the target position in the tracker's view.
    Heatmap {
        /// Trace CSV files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Scenario whose camera defines the view triangle (default camera otherwise).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Bin edge, meters.
        #[arg(long, default_value_t = 0.1)]
        bin: f64,
        /// svg, csv or json; repeatable. Default: svg.
        #[arg(long = "format")]
        formats: Vec<Format>,
    },
    /// Planning-time statistics over scenarios and seeds.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Seeds to run each scenario with; repeatable. Default: the scenario's own.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Directory for bench.txt / bench.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "format")]
        formats: Vec<Format>,
    },
    /// Write the built-in scenarios as scenario files.
    ExportScenarios {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; repeatable.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<PathBuf>,
    /// Precomputed field-of-view field to use instead of building one.
    #[arg(long)]
    esdf: Option<PathBuf>,
    /// Cost weight override KEY=VAL, e.g. lambda_o=50; repeatable.
    #[arg(long = "weights", value_parser = commands::parse_weight)]
    weights: Vec<(String, f64)>,
    /// Worker threads for batches.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::BuildEsdf {
            alpha,
            beta,
            distance,
            resolution,
            out,
        } => {
            let report = commands::build_esdf(&EsdfArgs {
                alpha_deg: alpha,
                beta_deg: beta,
                distance,
                resolution,
                out,
            })?;
            print!("{report}");
        }
        Command::Simulate {
            run,
            out,
            seed,
            formats,
            record_timings,
        } => {
            let summary = commands::simulate(&SimulateArgs {
                scenarios: run.scenarios,
                out,
                seed,
                esdf: run.esdf,
                weights: run.weights,
                formats,
                jobs: run.jobs,
                record_timings,
            })?;
            for (name, m) in summary {
                println!(
                    "{name}: TD {:.2} ± {:.2} m, AE {:.3} ± {:.3} rad, OR {:.2}%, FR {:.2}%, optimize {:.2} ms",
                    m.tracking_distance.mean,
                    m.tracking_distance.std,
                    m.angle_error.mean,
                    m.angle_error.std,
                    m.occlusion_rate,
                    m.failure_rate,
                    m.optimize_ms.mean
                );
            }
        }
        Command::Heatmap {
            traces,
            scenario,
            out,
            bin,
            formats,
        } => {
            let fov = match scenario {
                Some(p) => commands::load_scenario(&p, None, &[])?.camera.fov().map_err(CliError::config)?,
                None => FovParams::standard(),
            };
            let (inside, detected) = commands::heatmap(&HeatmapArgs {
                traces,
                out,
                bin,
                fov,
                formats,
            })?;
            let share = if detected > 0 { 100.0 * inside as f64 / detected as f64 } else { 0.0 };
            println!("detected ticks in the view triangle: {inside} of {detected} ({share:.1}%)");
        }
        Command::Bench {
            run,
            seeds,
            out,
            formats,
        } => {
            let mut cache = FieldCache::new(run.esdf.as_deref())?;
            let mut runs = Vec::new();
            for p in &run.scenarios {
                let base = commands::load_scenario(p, None, &run.weights)?;
                let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds.clone() };
                for seed in seeds {
                    let mut s = base.clone();
                    s.seed = seed;
                    let f = cache.get(&s)?;
                    runs.push((s, f));
                }
            }
            let traces = commands::run_batch(&runs, run.jobs)
                .into_iter()
                .map(|r| r.map(|(t, _)| t))
                .collect::<CliResult<Vec<TrackingTrace>>>()?;
            let report = TimingReport::from_traces(&traces);
            print!("{}", report.table());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
                let formats = if formats.is_empty() { vec![Format::Csv, Format::Json] } else { formats };
                for f in formats {
                    match f {
                        Format::Json => commands::write(&dir.join("bench.json"), &report.to_json())?,
                        Format::Csv | Format::Svg => commands::write(&dir.join("bench.txt"), &report.table())?,
                    }
                }
            }
        }
        Command::ExportScenarios { out } => {
            std::fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
            for name in builtin_names() {
                let s = builtin(name).expect("listed builtin");
                let path = out.join(format!("{name}.toml"));
                commands::write(&path, &s.to_toml())?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EVA_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fovtrack: {e}");
            e.exit_code()
        }
    }
}

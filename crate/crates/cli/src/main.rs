use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddcacc::datagen::{AccController, DataBatch, PlatoonController};
use ddcacc::experiment::{
    collect, compute_metrics, emit_plots, evaluate, read_trajectory_csv, run_experiment,
    synthesize_variant, write_config_echo, write_json, write_metrics_csv, write_trajectory,
    write_variant_artifacts, ControllerFile, ExperimentConfig, ExperimentError, ExperimentReport,
    PlotSeries, Window, EXIT_CONFIG, EXIT_DIVERGED,
};
use log::{info, warn};

/// Data-driven CACC experiments: collect data under ACC, learn a
/// controller, and compare the two in simulation.
#[derive(Debug, Parser)]
#[command(name = "ddcacc", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment TOML file; the built-in case is used when absent.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the parameter-draw seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the artifact directory.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    /// Largest sub-platoon per SDP; replaces the configured sizes.
    #[arg(long, global = true)]
    split: Option<usize>,
    /// Drive-cycle CSV (`time_s,speed_mps`) replacing the bundled cycle.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Solve sub-platoons and simulate controllers concurrently.
    #[arg(long, global = true)]
    parallel: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Case {
    Case1,
    Case2,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive the platoon under ACC and record the data batch.
    Collect,
    /// Learn controllers from a recorded batch.
    Synthesize {
        /// Batch written by `collect`; defaults to `<output>/batch.json`.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Simulate a learned controller, or ACC, over the whole profile.
    Simulate {
        /// Controller written by `synthesize`.
        #[arg(long, required_unless_present = "acc")]
        controller: Option<PathBuf>,
        /// Simulate the ACC baseline instead.
        #[arg(long, conflicts_with = "controller")]
        acc: bool,
    },
    /// Full pipeline for one of the built-in cases.
    Run {
        #[arg(value_enum)]
        case: Case,
    },
    /// Windowed metrics of recorded trajectories.
    Metrics {
        /// Trajectory CSVs; each is labelled by its file stem.
        #[arg(long = "trajectory", required = true)]
        trajectories: Vec<PathBuf>,
        /// Window start (s); the end of the hold when absent.
        #[arg(long)]
        window_start: Option<f64>,
    },
    /// Velocity-deviation and gap plots of recorded trajectories.
    Plot {
        /// Trajectory CSVs; the first is drawn solid.
        #[arg(long = "trajectory", required = true)]
        trajectories: Vec<PathBuf>,
    },
}

fn configure(g: &Global, case: Case) -> Result<ExperimentConfig, ExperimentError> {
    let mut c = match (&g.config, case) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Case::Case1) => ExperimentConfig::case1(),
        (None, Case::Case2) => ExperimentConfig::case2(),
    };
    if let Some(seed) = g.seed {
        c.seed = seed;
    }
    if let Some(dir) = &g.output_dir {
        c.output_dir = dir.clone();
    }
    if let Some(size) = g.split {
        c.synthesis.max_subplatoon_sizes = vec![size];
    }
    if let Some(file) = &g.profile {
        c.profile.file = Some(file.clone());
    }
    c.parallel |= g.parallel;
    c.validate()?;
    Ok(c)
}

fn output_dir(c: &ExperimentConfig) -> Result<&Path, ExperimentError> {
    fs::create_dir_all(&c.output_dir)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", c.output_dir.display())))?;
    Ok(&c.output_dir)
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "trajectory".into(),
        |s| {
            s.to_string_lossy()
                .trim_start_matches("trajectory_")
                .to_string()
        },
    )
}

fn summarize(report: &ExperimentReport) {
    for v in &report.variants {
        println!(
            "{:<12} {:<20} {:>7.1} s  ρ(Ā) {:?}",
            v.name,
            v.status(),
            v.solve_seconds,
            v.groups
                .iter()
                .map(|g| g.spectral_radius)
                .collect::<Vec<_>>()
        );
    }
    for m in &report.metrics {
        println!(
            "{:<18} rms v {:.3?}  rms h {:.3?}  min gap {:.2}",
            m.controller,
            m.rms_velocity_deviation,
            m.rms_spacing_error,
            m.min_gap.unwrap_or(f64::NAN)
        );
    }
    for (c, reason) in &report.failures {
        println!("{c}: {reason}");
    }
    println!("artifacts in {}", report.output_dir.display());
}

fn execute(cli: &Cli) -> Result<i32, ExperimentError> {
    let g = &cli.global;
    match &cli.command {
        Command::Run { case } => {
            let report = run_experiment(&configure(g, *case)?)?;
            summarize(&report);
            Ok(report.exit_code())
        }
        Command::Collect => {
            let c = configure(g, Case::Case1)?;
            let resolved = c.resolve()?;
            let dir = output_dir(&c)?;
            write_config_echo(&dir.join("config.csv"), &resolved)?;
            let collection = collect(&resolved, &c.profile.load()?)?;
            write_json(&dir.join("batch.json"), &collection.batch)?;
            write_trajectory(&dir.join("trajectory_collect.csv"), &collection.trajectory)?;
            println!(
                "batch {} ({} samples)",
                collection.batch.hash(),
                collection.batch.samples()
            );
            Ok(0)
        }
        Command::Synthesize { batch } => {
            let c = configure(g, Case::Case1)?;
            let resolved = c.resolve()?;
            let dir = output_dir(&c)?;
            let path = batch.clone().unwrap_or_else(|| dir.join("batch.json"));
            let text = fs::read_to_string(&path)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            let batch: DataBatch = serde_json::from_str(&text)?;
            let mut sizes = c.synthesis.max_subplatoon_sizes.clone();
            if sizes.is_empty() {
                sizes.push(resolved.spec.n());
            }
            let out = dir.join("synthesis");
            fs::create_dir_all(&out)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", out.display())))?;
            let mut code = 0;
            for size in sizes {
                let v = synthesize_variant(&resolved, &batch, size)?;
                for f in write_variant_artifacts(&out, &resolved, &batch, &v)? {
                    info!("wrote {}", f.display());
                }
                println!(
                    "{:<12} {:<20} {:>7.1} s",
                    v.name,
                    v.status(),
                    v.solve_seconds
                );
                if !v.feasible() {
                    code = ddcacc::experiment::EXIT_INFEASIBLE;
                }
            }
            Ok(code)
        }
        Command::Simulate { controller, acc } => {
            let c = configure(g, Case::Case1)?;
            let resolved = c.resolve()?;
            let dir = output_dir(&c)?;
            let profile = c.profile.load()?;
            let collection = collect(&resolved, &profile)?;
            let (name, mut ctrl): (String, Box<dyn PlatoonController>) = match (controller, acc) {
                (_, true) => (
                    "acc".into(),
                    Box::new(AccController::new(
                        &resolved.spec,
                        c.acc.gains(),
                        c.acc.nominal_mass,
                        None,
                    )),
                ),
                (Some(path), false) => {
                    let file = ControllerFile::load(path)?;
                    if file.batch_hash != collection.batch.hash() {
                        warn!("controller was learned from a different batch than this configuration produces");
                    }
                    file.bundle.validate(resolved.spec.n())?;
                    (format!("cacc_{}", file.variant), Box::new(file.bundle))
                }
                (None, false) => unreachable!("clap requires a controller or --acc"),
            };
            match evaluate(&resolved, &profile, &collection, ctrl.as_mut()) {
                Ok(t) => {
                    let path = write_trajectory(&dir.join(format!("trajectory_{name}.csv")), &t)?;
                    println!(
                        "{}: min gap {:.2} m",
                        path.display(),
                        t.min_gap().unwrap_or(f64::NAN)
                    );
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{name}: {e}");
                    Ok(EXIT_DIVERGED)
                }
            }
        }
        Command::Metrics {
            trajectories,
            window_start,
        } => {
            let c = configure(g, Case::Case1)?;
            let resolved = c.resolve()?;
            let window = Window::from(window_start.unwrap_or_else(|| resolved.window_start()));
            let mut reports = Vec::new();
            for path in trajectories {
                let file = fs::File::open(path)
                    .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
                let samples = read_trajectory_csv(file, c.platoon.t_s)?;
                let mut m = compute_metrics(&samples, window, &label(path))?;
                m.status = "recorded".into();
                reports.push(m);
            }
            let dir = output_dir(&c)?;
            let path = dir.join("metrics.csv");
            let file = fs::File::create(&path)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            write_metrics_csv(&reports, file)?;
            write_metrics_csv(&reports, std::io::stdout())?;
            Ok(0)
        }
        Command::Plot { trajectories } => {
            let c = configure(g, Case::Case1)?;
            let mut loaded = Vec::new();
            for path in trajectories {
                let file = fs::File::open(path)
                    .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
                loaded.push((
                    label(path).to_uppercase(),
                    read_trajectory_csv(file, c.platoon.t_s)?,
                ));
            }
            let series: Vec<PlotSeries> =
                loaded.iter().map(|(l, s)| PlotSeries::new(l, s)).collect();
            for f in emit_plots(&series, c.platoon.h_star, output_dir(&c)?)? {
                println!("{}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = execute(&cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}

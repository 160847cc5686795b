use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use super::artifacts::{write_config_echo, ControllerFile, SynthesisArtifact};
use super::config::{ExperimentConfig, ResolvedExperiment};
use super::metrics::{compute_metrics, write_metrics_csv, MetricsReport, Window};
use super::plot::{emit_plots, PlotSeries};
use super::{ExperimentError, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK};
use crate::datagen::{
    check_richness, collect_data, AccController, Collection, DataBatch, DataError,
    HighFidelitySimulator, PlatoonController, ReferenceProfile, RichnessReport, Trajectory,
};
use crate::dynamics::disturbance_bound;
use crate::runtime::ControllerBundle;
use crate::synthesis::{
    disturbance_matrix, solve_sdp, split_subplatoons, verify_closed_loop, ClosedLoopDiagnostics,
    SynthesisError, SynthesisProblem, SynthesisResult,
};

/// One sub-platoon's synthesis inside a variant.
#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub range: std::ops::Range<usize>,
    pub delta: f64,
    pub n_z: usize,
    pub n_u: usize,
    /// Feasible synthesis with its closed-loop check.
    #[serde(skip)]
    pub solution: Option<(SynthesisResult, ClosedLoopDiagnostics)>,
    pub status: String,
    pub error: Option<String>,
    pub solve_seconds: f64,
    pub spectral_radius: Option<f64>,
}

/// A controller built from one `max_subplatoon_size`.
#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub name: String,
    pub max_size: usize,
    pub groups: Vec<GroupReport>,
    /// Present when every group is feasible.
    #[serde(skip)]
    pub bundle: Option<ControllerBundle>,
    pub solve_seconds: f64,
}

impl VariantReport {
    pub fn feasible(&self) -> bool {
        self.bundle.is_some()
    }

    /// Worst group status, `optimal` when all are.
    pub fn status(&self) -> String {
        self.groups
            .iter()
            .find(|g| g.solution.is_none())
            .or_else(|| self.groups.iter().find(|g| g.status != "optimal"))
            .map_or_else(|| "optimal".to_string(), |g| g.status.clone())
    }
}

/// Result of simulating one controller over the remaining profile.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub controller: String,
    /// Collection segment followed by the evaluated segment.
    pub trajectory: Result<Trajectory, DataError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub output_dir: PathBuf,
    pub richness: RichnessReport,
    pub batch_hash: String,
    pub variants: Vec<VariantReport>,
    pub metrics: Vec<MetricsReport>,
    /// Evaluations that ended early, as `(controller, reason)`.
    pub failures: Vec<(String, String)>,
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentReport {
    /// 3 if any evaluation diverged, else 2 if any synthesis was infeasible.
    pub fn exit_code(&self) -> i32 {
        if !self.failures.is_empty() {
            EXIT_DIVERGED
        } else if self.variants.iter().any(|v| !v.feasible()) {
            EXIT_INFEASIBLE
        } else {
            EXIT_OK
        }
    }

    pub fn metrics_for(&self, controller: &str) -> Option<&MetricsReport> {
        self.metrics.iter().find(|m| m.controller == controller)
    }

    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// `monolithic` when one group covers the platoon, else `split<k>`.
pub fn variant_name(max_size: usize, n: usize) -> String {
    if max_size >= n {
        "monolithic".into()
    } else {
        format!("split{max_size}")
    }
}

/// Forms the platoon under ACC and records the data batch.
pub fn collect(
    resolved: &ResolvedExperiment,
    profile: &ReferenceProfile,
) -> Result<Collection, ExperimentError> {
    Ok(collect_data(
        &resolved.spec,
        profile,
        &resolved.initial,
        &resolved.collection_options(),
    )?)
}

fn synthesize_group(
    resolved: &ResolvedExperiment,
    batch: &DataBatch,
    range: std::ops::Range<usize>,
    group_spec: &crate::dynamics::PlatoonSpec,
) -> Result<GroupReport, ExperimentError> {
    let cfg = &resolved.config.synthesis;
    let sub = batch.restrict(&resolved.spec, range.clone())?;
    let bound = disturbance_bound(&resolved.boxes[range.clone()], group_spec)?;
    let delta = match cfg.delta_override {
        Some(d) => d,
        None if range.start > 0 => bound.delta * cfg.boundary_delta_factor,
        None => bound.delta,
    };
    let problem = SynthesisProblem::from_batch(&sub, delta)?;
    let started = Instant::now();
    let outcome = solve_sdp(&problem, &cfg.solver);
    let elapsed = started.elapsed().as_secs_f64();
    let mut report = GroupReport {
        range: range.clone(),
        delta,
        n_z: sub.layout.n_z(),
        n_u: sub.u0.nrows(),
        solution: None,
        status: String::new(),
        error: None,
        solve_seconds: elapsed,
        spectral_radius: None,
    };
    match outcome {
        Ok(result) => {
            let w0 = sub
                .w0
                .as_ref()
                .ok_or_else(|| ExperimentError::Config("batch has no disturbance record".into()))?;
            let d = disturbance_matrix(&sub.layout, sub.t_s);
            let diag =
                verify_closed_loop(&sub.z0, &sub.x1, w0, &d, &result.p, &result.y, &result.g2)?;
            info!(
                "vehicles {}..={}: {} with γ = {:.4}, ρ(Ā) = {:.4}, {:.1} s",
                range.start + 1,
                range.end,
                result.status,
                result.gamma,
                diag.spectral_radius,
                result.solve_seconds
            );
            report.status = result.status.clone();
            report.solve_seconds = result.solve_seconds;
            report.spectral_radius = Some(diag.spectral_radius);
            report.solution = Some((result, diag));
        }
        Err(e @ SynthesisError::RankDeficient(_)) => return Err(e.into()),
        Err(e) => {
            warn!("vehicles {}..={}: {e}", range.start + 1, range.end);
            report.status = match &e {
                SynthesisError::Infeasible { status, .. } => status.clone(),
                _ => "error".into(),
            };
            report.error = Some(e.to_string());
        }
    }
    Ok(report)
}

/// Splits the platoon into groups of at most `max_size` and solves one SDP
/// per group. Infeasible groups leave the variant without a controller.
pub fn synthesize_variant(
    resolved: &ResolvedExperiment,
    batch: &DataBatch,
    max_size: usize,
) -> Result<VariantReport, ExperimentError> {
    let richness = check_richness(&batch.z0);
    if !richness.passed {
        return Err(SynthesisError::RankDeficient(richness).into());
    }
    let groups = split_subplatoons(&resolved.spec, max_size)?;
    let reports: Vec<Result<GroupReport, ExperimentError>> = if resolved.config.parallel
        && groups.len() > 1
    {
        std::thread::scope(|s| {
            let handles: Vec<_> = groups
                .iter()
                .map(|g| s.spawn(|| synthesize_group(resolved, batch, g.range.clone(), &g.spec)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("synthesis thread panicked"))
                .collect()
        })
    } else {
        groups
            .iter()
            .map(|g| synthesize_group(resolved, batch, g.range.clone(), &g.spec))
            .collect()
    };
    let groups: Vec<GroupReport> = reports.into_iter().collect::<Result<_, _>>()?;
    let bundle = if groups.iter().all(|g| g.solution.is_some()) {
        let gains = groups
            .iter()
            .map(|g| {
                (
                    g.range.clone(),
                    g.solution.as_ref().expect("checked").0.k.clone(),
                )
            })
            .collect();
        Some(
            ControllerBundle::new(&resolved.spec, gains)?
                .with_clamp(resolved.config.evaluation.clamp),
        )
    } else {
        None
    };
    Ok(VariantReport {
        name: variant_name(max_size, resolved.spec.n()),
        max_size,
        solve_seconds: groups.iter().map(|g| g.solve_seconds).sum(),
        groups,
        bundle,
    })
}

/// Runs `controller` from the end of the collection to the end of the
/// profile. Gaps may close: the run continues so the minimum gap is
/// reported rather than aborting.
pub fn evaluate(
    resolved: &ResolvedExperiment,
    profile: &ReferenceProfile,
    collection: &Collection,
    controller: &mut dyn PlatoonController,
) -> Result<Trajectory, DataError> {
    let sim = HighFidelitySimulator::new(&resolved.spec, profile, &resolved.initial)
        .with_collision_abort(false);
    let start = &collection.trajectory.end;
    let steps = sim.max_steps().saturating_sub(start.step);
    let segment = sim.run(start, steps, controller)?;
    let mut full = collection.trajectory.clone();
    full.extend(segment)?;
    Ok(full)
}

fn acc_baseline(resolved: &ResolvedExperiment) -> AccController {
    let c = &resolved.config.acc;
    AccController::new(&resolved.spec, c.gains(), c.nominal_mass, None)
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<PathBuf, ExperimentError> {
    let file = fs::File::create(path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    t.write_csv(std::io::BufWriter::new(file))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, ExperimentError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// Writes one certificate per feasible group and, when the whole variant is
/// feasible, its controller file.
pub fn write_variant_artifacts(
    dir: &Path,
    resolved: &ResolvedExperiment,
    batch: &DataBatch,
    v: &VariantReport,
) -> Result<Vec<PathBuf>, ExperimentError> {
    create_dir(dir)?;
    let seed = resolved.config.seed;
    let mut written = Vec::new();
    for (g, group) in v.groups.iter().enumerate() {
        if let Some((result, diag)) = &group.solution {
            let sub = batch.restrict(&resolved.spec, group.range.clone())?;
            let art = SynthesisArtifact::new(
                result,
                diag,
                &sub,
                group,
                &resolved.config.synthesis.solver,
                seed,
            );
            written.push(write_json(
                &dir.join(format!("{}_group{}.json", v.name, g + 1)),
                &art,
            )?);
        }
    }
    if let Some(bundle) = &v.bundle {
        let file = ControllerFile {
            variant: v.name.clone(),
            batch_hash: batch.hash(),
            seed,
            bundle: bundle.clone(),
        };
        written.push(write_json(
            &dir.join(format!("controller_{}.json", v.name)),
            &file,
        )?);
    }
    Ok(written)
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
}

/// Full pipeline: collect, synthesize every configured variant, evaluate
/// ACC and each controller, and write artifacts under `output_dir`.
///
/// The first configured variant is primary: its trajectory and plots sit
/// at the top level, the others under `variants/<name>/`. Infeasible
/// synthesis still yields a report; check [`ExperimentReport::exit_code`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let resolved = config.resolve()?;
    let out = &config.output_dir;
    create_dir(out)?;
    let mut artifacts = vec![write_config_echo(&out.join("config.csv"), &resolved)?];
    let profile = config.profile.load()?;
    let collection = collect(&resolved, &profile)?;
    let batch = &collection.batch;
    let richness = check_richness(&batch.z0);
    info!(
        "collected {} samples, rank(Z0) = {} of {}",
        richness.samples, richness.rank, richness.n_z
    );
    if !richness.passed {
        return Err(SynthesisError::RankDeficient(richness).into());
    }
    let batch_hash = batch.hash();

    let n = resolved.spec.n();
    let mut sizes = config.synthesis.max_subplatoon_sizes.clone();
    if sizes.is_empty() {
        sizes.push(n);
    }
    let mut variants = Vec::with_capacity(sizes.len());
    for &size in &sizes {
        let v = synthesize_variant(&resolved, batch, size)?;
        if variants.iter().any(|o: &VariantReport| o.name == v.name) {
            continue;
        }
        variants.push(v);
    }

    let synth_dir = out.join("synthesis");
    for v in &variants {
        artifacts.extend(write_variant_artifacts(&synth_dir, &resolved, batch, v)?);
    }

    // ACC first, then every feasible variant in configuration order.
    let mut jobs: Vec<(String, Box<dyn PlatoonController + Send>)> =
        vec![("acc".into(), Box::new(acc_baseline(&resolved)))];
    for v in &variants {
        if let Some(b) = &v.bundle {
            jobs.push((format!("cacc_{}", v.name), Box::new(b.clone())));
        }
    }
    let run = |(name, mut c): (String, Box<dyn PlatoonController + Send>)| Evaluation {
        trajectory: evaluate(&resolved, &profile, &collection, c.as_mut()),
        controller: name,
    };
    let evaluations: Vec<Evaluation> = if config.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs.into_iter().map(|j| s.spawn(|| run(j))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation thread panicked"))
                .collect()
        })
    } else {
        jobs.into_iter().map(run).collect()
    };

    let window = Window::from(resolved.window_start());
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    let primary = variants.first().map(|v| format!("cacc_{}", v.name));
    for e in &evaluations {
        let traj = match &e.trajectory {
            Ok(t) => t,
            Err(err) => {
                warn!("{}: {err}", e.controller);
                failures.push((e.controller.clone(), err.to_string()));
                continue;
            }
        };
        let mut m = compute_metrics(&traj.samples, window, &e.controller)?;
        let variant = variants
            .iter()
            .find(|v| format!("cacc_{}", v.name) == e.controller);
        m.status = variant.map_or_else(|| "baseline".to_string(), VariantReport::status);
        m.solve_seconds = variant.map(|v| v.solve_seconds);
        metrics.push(m);

        let dir = if e.controller == "acc" || Some(&e.controller) == primary.as_ref() {
            out.clone()
        } else {
            let d = out
                .join("variants")
                .join(e.controller.trim_start_matches("cacc_"));
            create_dir(&d)?;
            artifacts.push(write_config_echo(&d.join("config.csv"), &resolved)?);
            d
        };
        let file = if e.controller == "acc" {
            "trajectory_acc.csv"
        } else {
            "trajectory_cacc.csv"
        };
        artifacts.push(write_trajectory(&dir.join(file), traj)?);
    }
    let path = out.join("metrics.csv");
    let file = fs::File::create(&path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    write_metrics_csv(&metrics, std::io::BufWriter::new(file))?;
    artifacts.push(path);

    let trajectory_of = |name: &str| {
        evaluations
            .iter()
            .find(|e| e.controller == name)
            .and_then(|e| e.trajectory.as_ref().ok())
    };
    let mut series = Vec::new();
    if let Some(name) = &primary {
        if let Some(t) = trajectory_of(name) {
            series.push(PlotSeries::new("CACC", &t.samples));
        }
    }
    if let Some(t) = trajectory_of("acc") {
        series.push(PlotSeries::new("ACC", &t.samples));
    }
    if !series.is_empty() {
        artifacts.extend(emit_plots(&series, resolved.spec.h_star(), out)?);
    }

    let report = ExperimentReport {
        name: config.name.clone(),
        output_dir: out.clone(),
        richness,
        batch_hash,
        variants,
        metrics,
        failures,
        artifacts,
    };
    write_json(&out.join("synthesis").join("report.json"), &report)?;
    Ok(report)
}

/// Four automated vehicles; monolithic and pairwise controllers unless the
/// configuration says otherwise.
pub fn run_case1(config: Option<&ExperimentConfig>) -> Result<ExperimentReport, ExperimentError> {
    run_experiment(config.unwrap_or(&ExperimentConfig::case1()))
}

/// Automated, human-driven, automated; one controller for all three.
pub fn run_case2(config: Option<&ExperimentConfig>) -> Result<ExperimentReport, ExperimentError> {
    run_experiment(config.unwrap_or(&ExperimentConfig::case2()))
}

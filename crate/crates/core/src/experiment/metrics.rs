use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::datagen::Sample;
use crate::dynamics::{ErrorState, VehicleState};

/// Time interval `[start, end]` over which metrics are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn from(start: f64) -> Self {
        Self {
            start,
            end: f64::INFINITY,
        }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start - 1e-9 && t <= self.end + 1e-9
    }
}

/// Scalar summary of one controller's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub controller: String,
    /// Synthesis status behind the controller, `baseline` for ACC.
    pub status: String,
    pub window: Window,
    pub samples: usize,
    /// Per vehicle, m/s.
    pub rms_velocity_deviation: Vec<f64>,
    /// Per gap between consecutive vehicles, m.
    pub rms_spacing_error: Vec<f64>,
    /// Smallest distance between consecutive vehicles, m.
    pub min_gap: Option<f64>,
    /// Largest effort magnitude, N.
    pub max_abs_effort: f64,
    /// Wall time of the syntheses behind the controller. Informational; not
    /// written to the metrics file.
    #[serde(skip)]
    pub solve_seconds: Option<f64>,
}

/// Windowed RMS errors and extrema of a recorded run.
pub fn compute_metrics(
    samples: &[Sample],
    window: Window,
    controller: &str,
) -> Result<MetricsReport, ExperimentError> {
    let inside: Vec<&Sample> = samples.iter().filter(|s| window.contains(s.t)).collect();
    let Some(first) = inside.first() else {
        return Err(ExperimentError::EmptyWindow(window.start, window.end));
    };
    let n = first.states.len();
    let count = inside.len() as f64;
    let rms = |f: &dyn Fn(&Sample) -> f64| {
        (inside.iter().map(|s| f(s).powi(2)).sum::<f64>() / count).sqrt()
    };
    let rms_velocity_deviation = (0..n).map(|i| rms(&|s| s.errors[i].v_err)).collect();
    let rms_spacing_error = (1..n).map(|i| rms(&|s| s.errors[i].h_err)).collect();
    let min_gap = inside
        .iter()
        .flat_map(|s| s.states.windows(2).map(|w| w[0].p - w[1].p))
        .reduce(f64::min);
    let max_abs_effort = inside
        .iter()
        .flat_map(|s| s.u.iter().map(|u| u.abs()))
        .fold(0.0, f64::max);
    Ok(MetricsReport {
        controller: controller.to_string(),
        status: String::new(),
        window,
        samples: inside.len(),
        rms_velocity_deviation,
        rms_spacing_error,
        min_gap,
        max_abs_effort,
        solve_seconds: None,
    })
}

/// Long-format CSV: `controller,status,metric,index,value`. Indices are
/// 1-based vehicles for velocity, 1-based followers for gaps.
pub fn write_metrics_csv<W: Write>(
    reports: &[MetricsReport],
    out: W,
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ExperimentError::Io(e.to_string());
    w.write_record(["controller", "status", "metric", "index", "value"])
        .map_err(io)?;
    for r in reports {
        let mut row = |metric: &str, index: usize, value: f64| {
            w.write_record([
                &r.controller,
                &r.status,
                metric,
                &index.to_string(),
                &value.to_string(),
            ])
        };
        for (i, v) in r.rms_velocity_deviation.iter().enumerate() {
            row("rms_velocity_deviation", i + 1, *v).map_err(io)?;
        }
        for (i, v) in r.rms_spacing_error.iter().enumerate() {
            row("rms_spacing_error", i + 2, *v).map_err(io)?;
        }
        if let Some(g) = r.min_gap {
            row("min_gap", 0, g).map_err(io)?;
        }
        row("max_abs_effort", 0, r.max_abs_effort).map_err(io)?;
        row("window_start", 0, r.window.start).map_err(io)?;
        row("samples", 0, r.samples as f64).map_err(io)?;
    }
    w.flush().map_err(|e| ExperimentError::Io(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    vehicle: usize,
    p: f64,
    v: f64,
    a: f64,
    u: f64,
    h_err: f64,
    v_err: f64,
    w: f64,
}

/// Reads a trajectory written by `Trajectory::write_csv`.
pub fn read_trajectory_csv<R: Read>(input: R, t_s: f64) -> Result<Vec<Sample>, ExperimentError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut samples: Vec<Sample> = Vec::new();
    for (k, row) in reader.deserialize::<Row>().enumerate() {
        let r = row.map_err(|e| ExperimentError::Io(format!("trajectory row {}: {e}", k + 2)))?;
        let new_step = samples.last().is_none_or(|s| s.t != r.t);
        if new_step {
            if r.vehicle != 1 {
                return Err(ExperimentError::Io(format!(
                    "trajectory row {}: expected vehicle 1",
                    k + 2
                )));
            }
            samples.push(Sample {
                step: (r.t / t_s).round() as usize,
                t: r.t,
                states: Vec::new(),
                errors: Vec::new(),
                u: Vec::new(),
                w: Vec::new(),
            });
        }
        let s = samples.last_mut().expect("pushed above");
        if r.vehicle != s.states.len() + 1 {
            return Err(ExperimentError::Io(format!(
                "trajectory row {}: vehicles out of order",
                k + 2
            )));
        }
        s.states.push(VehicleState::new(r.p, r.v, r.a));
        s.errors.push(ErrorState {
            h_err: r.h_err,
            v_err: r.v_err,
            a: r.a,
        });
        s.u.push(r.u);
        s.w.push(r.w);
    }
    if let Some(n) = samples.first().map(|s| s.states.len()) {
        if samples.iter().any(|s| s.states.len() != n) {
            return Err(ExperimentError::Io(
                "trajectory has a varying vehicle count".into(),
            ));
        }
    }
    Ok(samples)
}

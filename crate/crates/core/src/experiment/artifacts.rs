use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ResolvedExperiment;
use super::pipeline::GroupReport;
use super::ExperimentError;
use crate::datagen::DataBatch;
use crate::runtime::ControllerBundle;
use crate::synthesis::{
    Attempt, CertificateResiduals, ClosedLoopDiagnostics, SynthesisResult, SynthesisSettings,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n_x: usize,
    pub n_z: usize,
    pub n_u: usize,
    pub samples: usize,
}

/// One sub-platoon's certificate on disk. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisArtifact {
    /// Platoon indices `[start, end)` of the sub-platoon.
    pub range: std::ops::Range<usize>,
    #[serde(rename = "K", with = "crate::matrix_serde::row_major")]
    pub k: DMatrix<f64>,
    #[serde(rename = "P", with = "crate::matrix_serde::row_major")]
    pub p: DMatrix<f64>,
    #[serde(rename = "Y", with = "crate::matrix_serde::row_major")]
    pub y: DMatrix<f64>,
    #[serde(rename = "G2", with = "crate::matrix_serde::row_major")]
    pub g2: DMatrix<f64>,
    pub gamma: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
    pub dims: Dimensions,
    pub batch_hash: String,
    pub seed: u64,
    pub status: String,
    pub objective: f64,
    pub spectral_radius: f64,
    pub residuals: CertificateResiduals,
    pub attempts: Vec<Attempt>,
    /// Wall time, informational only.
    pub solve_seconds: f64,
}

impl SynthesisArtifact {
    pub fn new(
        result: &SynthesisResult,
        diag: &ClosedLoopDiagnostics,
        batch: &DataBatch,
        group: &GroupReport,
        settings: &SynthesisSettings,
        seed: u64,
    ) -> Self {
        Self {
            range: group.range.clone(),
            k: result.k.clone(),
            p: result.p.clone(),
            y: result.y.clone(),
            g2: result.g2.clone(),
            gamma: result.gamma,
            epsilon1: result.epsilon1,
            epsilon2: result.epsilon2,
            lambda1: settings.lambda1,
            lambda2: settings.lambda2,
            delta: group.delta,
            dims: Dimensions {
                n_x: batch.layout.n_x(),
                n_z: batch.layout.n_z(),
                n_u: batch.u0.nrows(),
                samples: batch.samples(),
            },
            batch_hash: batch.hash(),
            seed,
            status: result.status.clone(),
            objective: result.objective,
            spectral_radius: diag.spectral_radius,
            residuals: result.residuals.clone(),
            attempts: result.attempts.clone(),
            solve_seconds: result.solve_seconds,
        }
    }
}

/// A deployable controller with the data it was learned from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    pub variant: String,
    pub batch_hash: String,
    pub seed: u64,
    pub bundle: ControllerBundle,
}

impl ControllerFile {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, v)| flatten(&key(&(i + 1).to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Every resolved setting as `key,value` rows, including the drawn vehicle
/// parameters. Arrays are indexed from 1.
pub fn config_echo(resolved: &ResolvedExperiment) -> Vec<(String, String)> {
    let value = serde_json::to_value(resolved).expect("configuration serializes");
    let mut out = Vec::new();
    flatten("", &value, &mut out);
    out
}

pub fn write_config_echo(
    path: &Path,
    resolved: &ResolvedExperiment,
) -> Result<PathBuf, ExperimentError> {
    let io = |e: csv::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["key", "value"]).map_err(io)?;
    for (k, v) in config_echo(resolved) {
        w.write_record([k, v]).map_err(io)?;
    }
    w.flush()
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

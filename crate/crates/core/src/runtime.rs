//! Closed-loop application of learned gains, `u = K Z(x)` per sub-platoon.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{ControlFault, PlatoonController};
use crate::dynamics::{LiftLayout, PlatoonSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("{0}")]
    Invalid(String),
    #[error("non-finite control for vehicle {}", .0.vehicle + 1)]
    Fault(ControlFault),
}

/// Gain of one sub-platoon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGroup {
    /// Platoon indices `[start, end)` whose error states feed this gain.
    pub range: Range<usize>,
    /// `n_u × n_z` of the sub-platoon.
    #[serde(with = "crate::matrix_serde::row_major")]
    pub k: DMatrix<f64>,
    pub layout: LiftLayout,
    /// Platoon indices of the automated vehicles driven by each row of `k`.
    pub inputs: Vec<usize>,
}

/// Deployed controller for a whole platoon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerBundle {
    pub t_s: f64,
    pub groups: Vec<ControllerGroup>,
    /// Automated vehicles in platoon order; outputs follow this order.
    pub automated: Vec<usize>,
    /// Symmetric effort limit (N). Exploratory only; off by default.
    #[serde(default)]
    pub clamp: Option<f64>,
}

impl ControllerBundle {
    /// Bundle from consecutive groups `(range, K)` covering `spec`.
    pub fn new(
        spec: &PlatoonSpec,
        groups: Vec<(Range<usize>, DMatrix<f64>)>,
    ) -> Result<Self, RuntimeError> {
        let mut out = Vec::with_capacity(groups.len());
        for (range, k) in groups {
            let sub = spec
                .subrange(range.start, range.end)
                .map_err(|e| RuntimeError::Invalid(e.to_string()))?;
            let layout = LiftLayout::for_spec(&sub);
            let inputs: Vec<usize> = sub
                .av_indices()
                .into_iter()
                .map(|i| i + range.start)
                .collect();
            out.push(ControllerGroup {
                range,
                k,
                layout,
                inputs,
            });
        }
        let bundle = Self {
            t_s: spec.t_s(),
            groups: out,
            automated: spec.av_indices(),
            clamp: None,
        };
        bundle.validate(spec.n())?;
        Ok(bundle)
    }

    pub fn with_clamp(mut self, limit: Option<f64>) -> Self {
        self.clamp = limit;
        self
    }

    /// Groups must tile `0..n` in order and every gain must match its
    /// sub-platoon's dimensions.
    pub fn validate(&self, n: usize) -> Result<(), RuntimeError> {
        let mut next = 0;
        for g in &self.groups {
            if g.range.start != next || g.range.end <= g.range.start {
                return Err(RuntimeError::Invalid(format!(
                    "groups must tile the platoon; found {:?} after vehicle {next}",
                    g.range
                )));
            }
            next = g.range.end;
            if g.layout.n_vehicles() != g.range.len() {
                return Err(RuntimeError::Invalid(
                    "layout does not match group size".into(),
                ));
            }
            if g.k.shape() != (g.inputs.len(), g.layout.n_z()) {
                return Err(RuntimeError::Invalid(format!(
                    "gain for {:?} is {:?}, expected {:?}",
                    g.range,
                    g.k.shape(),
                    (g.inputs.len(), g.layout.n_z())
                )));
            }
        }
        if next != n {
            return Err(RuntimeError::Invalid(format!(
                "groups cover {next} of {n} vehicles"
            )));
        }
        Ok(())
    }

    /// Efforts for every automated vehicle, in platoon order.
    pub fn cacc_control(&self, x: &[f64]) -> Result<Vec<f64>, RuntimeError> {
        let mut out = vec![0.0; self.automated.len()];
        self.apply(x, &mut out).map_err(RuntimeError::Fault)?;
        Ok(out)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<(), ControlFault> {
        for g in &self.groups {
            let slice = &x[3 * g.range.start..3 * g.range.end];
            if let Some(i) = slice.iter().position(|v| !v.is_finite()) {
                return Err(ControlFault {
                    vehicle: g.range.start + i / 3,
                });
            }
            let z = g
                .layout
                .lift(slice)
                .expect("slice length matches the layout");
            let u: DVector<f64> = &g.k * z;
            for (row, &vehicle) in g.inputs.iter().enumerate() {
                let mut v = u[row];
                if !v.is_finite() {
                    return Err(ControlFault { vehicle });
                }
                if let Some(limit) = self.clamp {
                    v = v.clamp(-limit, limit);
                }
                let slot = self
                    .automated
                    .iter()
                    .position(|&a| a == vehicle)
                    .expect("inputs are automated vehicles");
                out[slot] = v;
            }
        }
        Ok(())
    }
}

impl PlatoonController for ControllerBundle {
    fn control(&mut self, _step: usize, x: &[f64], out: &mut [f64]) -> Result<(), ControlFault> {
        self.apply(x, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{HvParams, Vehicle, VehicleParams};

    fn four() -> PlatoonSpec {
        PlatoonSpec::automated(&[VehicleParams::nominal(); 4], 20.0, 20.0, 0.05).unwrap()
    }

    fn gain(rows: usize, cols: usize, seed: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |r, c| {
            ((r * 31 + c * 17 + seed) % 13) as f64 - 6.0
        })
    }

    #[test]
    fn zero_state_zero_effort() {
        let b = ControllerBundle::new(&four(), vec![(0..4, gain(4, 20, 1))]).unwrap();
        assert_eq!(b.cacc_control(&[0.0; 12]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_split_is_monolithic() {
        let k = gain(4, 20, 2);
        let b = ControllerBundle::new(&four(), vec![(0..4, k.clone())]).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 - 5.0) * 0.3).collect();
        let z = LiftLayout::for_spec(&four()).lift(&x).unwrap();
        let direct = &k * z;
        assert_eq!(b.cacc_control(&x).unwrap(), direct.as_slice());
    }

    #[test]
    fn split_is_local() {
        let b = ControllerBundle::new(
            &four(),
            vec![(0..2, gain(2, 10, 3)), (2..4, gain(2, 10, 4))],
        )
        .unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let mut y = x.clone();
        y[0] += 5.0;
        y[4] -= 2.0;
        let (a, c) = (b.cacc_control(&x).unwrap(), b.cacc_control(&y).unwrap());
        assert_eq!(a[2..], c[2..]);
        assert_ne!(a[..2], c[..2]);
    }

    #[test]
    fn mixed_outputs_skip_human() {
        let av = VehicleParams::nominal();
        let spec = PlatoonSpec::new(
            vec![
                Vehicle::Automated(av),
                Vehicle::Human(HvParams::reference()),
                Vehicle::Automated(av),
            ],
            20.0,
            20.0,
            0.05,
        )
        .unwrap();
        let b = ControllerBundle::new(&spec, vec![(0..3, gain(2, 13, 5))]).unwrap();
        assert_eq!(b.groups[0].inputs, vec![0, 2]);
        assert_eq!(b.cacc_control(&[1.0; 9]).unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_bundles() {
        assert!(ControllerBundle::new(&four(), vec![(0..4, gain(4, 19, 1))]).is_err());
        assert!(ControllerBundle::new(&four(), vec![(0..2, gain(2, 10, 1))]).is_err());
    }

    #[test]
    fn non_finite_state_faults() {
        let b = ControllerBundle::new(&four(), vec![(0..4, gain(4, 20, 1))]).unwrap();
        let mut x = [0.0; 12];
        x[7] = f64::NAN;
        assert!(matches!(
            b.cacc_control(&x),
            Err(RuntimeError::Fault(ControlFault { vehicle: 2 }))
        ));
    }

    #[test]
    fn clamp_limits_effort() {
        let b = ControllerBundle::new(&four(), vec![(0..4, gain(4, 20, 1) * 1e6)])
            .unwrap()
            .with_clamp(Some(100.0));
        let u = b.cacc_control(&[1.0; 12]).unwrap();
        assert!(u.iter().all(|v| v.abs() <= 100.0));
    }
}

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::profile::ReferenceProfile;
use super::DataError;
use crate::dynamics::{
    av_derivative, build_system, hv_derivative, true_disturbance, ErrorState, LiftedSystem,
    PlatoonSpec, Vehicle, VehicleState,
};

/// A controller could not produce a finite effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlFault {
    pub vehicle: usize,
}

/// Maps the stacked error state to efforts for the automated vehicles.
pub trait PlatoonController {
    /// Writes one effort (N) per automated vehicle, in platoon order.
    fn control(&mut self, step: usize, x: &[f64], out: &mut [f64]) -> Result<(), ControlFault>;
}

/// Everything recorded at one sample instant. `u` and `w` are the values
/// applied over the following sample interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub states: Vec<VehicleState>,
    pub errors: Vec<ErrorState>,
    /// Effort per vehicle; zero for human drivers.
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// Where a simulation segment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStart {
    pub step: usize,
    pub states: Vec<VehicleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t_s: f64,
    pub samples: Vec<Sample>,
    /// State after the last recorded interval.
    pub end: SimStart,
    pub end_errors: Vec<ErrorState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a segment that starts where this one ends.
    pub fn extend(&mut self, next: Trajectory) -> Result<(), DataError> {
        if next.samples.first().map(|s| s.step) != Some(self.end.step) && !next.samples.is_empty() {
            return Err(DataError::Validation(
                "trajectory segments are not contiguous".into(),
            ));
        }
        self.samples.extend(next.samples);
        self.end = next.end;
        self.end_errors = next.end_errors;
        Ok(())
    }

    /// Smallest bumper-to-bumper distance between consecutive real vehicles.
    pub fn min_gap(&self) -> Option<f64> {
        self.samples
            .iter()
            .flat_map(|s| s.states.windows(2).map(|w| w[0].p - w[1].p))
            .reduce(f64::min)
    }

    /// Writes `t,vehicle,p,v,a,u,h_err,v_err,w`, one row per vehicle per
    /// sample. Vehicles are numbered from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "vehicle", "p", "v", "a", "u", "h_err", "v_err", "w"])
            .map_err(|e| DataError::Io(e.to_string()))?;
        for s in &self.samples {
            for i in 0..s.states.len() {
                let st = &s.states[i];
                let er = &s.errors[i];
                w.write_record(&[
                    s.t.to_string(),
                    (i + 1).to_string(),
                    st.p.to_string(),
                    st.v.to_string(),
                    st.a.to_string(),
                    s.u[i].to_string(),
                    er.h_err.to_string(),
                    er.v_err.to_string(),
                    s.w[i].to_string(),
                ])
                .map_err(|e| DataError::Io(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))
    }
}

fn flatten(errors: &[ErrorState]) -> Vec<f64> {
    errors
        .iter()
        .flat_map(|e| [e.h_err, e.v_err, e.a])
        .collect()
}

fn unflatten(x: &[f64]) -> Vec<ErrorState> {
    x.chunks_exact(3)
        .map(|c| ErrorState {
            h_err: c[0],
            v_err: c[1],
            a: c[2],
        })
        .collect()
}

/// Magnitude beyond which a state is treated as diverged.
const DIVERGENCE_LIMIT: f64 = 1e9;

fn check_finite(t: f64, states: &[VehicleState]) -> Result<(), DataError> {
    for (i, s) in states.iter().enumerate() {
        if !s.is_finite() || s.v.abs() > DIVERGENCE_LIMIT || s.a.abs() > DIVERGENCE_LIMIT {
            return Err(DataError::Divergence { t, vehicle: i + 1 });
        }
    }
    Ok(())
}

fn check_gaps(t: f64, states: &[VehicleState]) -> Result<(), DataError> {
    for i in 1..states.len() {
        let gap = states[i - 1].p - states[i].p;
        if gap <= 0.0 {
            return Err(DataError::Collision {
                t,
                vehicle: i + 1,
                gap,
            });
        }
    }
    Ok(())
}

/// Continuous nonlinear platoon integrated with classical RK4.
///
/// Efforts are held constant over each sample interval. Errors are taken
/// against the profile's instantaneous speed and a virtual leader that
/// starts `h*` ahead of the head vehicle.
#[derive(Debug, Clone)]
pub struct HighFidelitySimulator<'a> {
    spec: &'a PlatoonSpec,
    profile: &'a ReferenceProfile,
    leader_origin: f64,
    substeps: usize,
    abort_on_collision: bool,
}

impl<'a> HighFidelitySimulator<'a> {
    pub fn new(
        spec: &'a PlatoonSpec,
        profile: &'a ReferenceProfile,
        initial: &[VehicleState],
    ) -> Self {
        Self {
            spec,
            profile,
            leader_origin: initial.first().map_or(0.0, |s| s.p) + spec.h_star(),
            substeps: 10,
            abort_on_collision: true,
        }
    }

    /// With `false`, vehicles are point masses that may overlap; the
    /// trajectory then records negative gaps instead of failing.
    pub fn with_collision_abort(mut self, abort: bool) -> Self {
        self.abort_on_collision = abort;
        self
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    /// Number of samples that fit in the profile.
    pub fn max_steps(&self) -> usize {
        (self.profile.duration() / self.spec.t_s() + 1e-9).floor() as usize
    }

    pub fn leader_position(&self, t: f64) -> Result<f64, DataError> {
        Ok(self.leader_origin + self.profile.position_at(t)?)
    }

    pub fn errors(&self, t: f64, states: &[VehicleState]) -> Result<Vec<ErrorState>, DataError> {
        let v_ref = self.profile.speed_at(t);
        let mut pred = self.leader_position(t)?;
        Ok(states
            .iter()
            .map(|s| {
                let e = ErrorState {
                    h_err: pred - s.p - self.spec.h_star(),
                    v_err: s.v - v_ref,
                    a: s.a,
                };
                pred = s.p;
                e
            })
            .collect())
    }

    fn disturbances(&self, t: f64, states: &[VehicleState]) -> Vec<f64> {
        let v_ref = self.profile.speed_at(t);
        self.spec
            .vehicles()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let gap = if i == 0 {
                    f64::NAN
                } else {
                    states[i - 1].p - states[i].p
                };
                true_disturbance(v, gap, v_ref)
            })
            .collect()
    }

    fn derivative(&self, states: &[VehicleState], u: &[f64], out: &mut [VehicleState]) {
        for (i, v) in self.spec.vehicles().iter().enumerate() {
            let d = match v {
                Vehicle::Automated(p) => av_derivative(&states[i], p, u[i]),
                Vehicle::Human(p) => {
                    let d = hv_derivative(&states[i], &states[i - 1], p);
                    [states[i].v, d[1], d[2]]
                }
            };
            out[i] = VehicleState::new(d[0], d[1], d[2]);
        }
    }

    fn rk4(&self, states: &mut [VehicleState], u: &[f64], h: f64) {
        let n = states.len();
        let mut k = [
            vec![VehicleState::default(); n],
            vec![VehicleState::default(); n],
            vec![VehicleState::default(); n],
            vec![VehicleState::default(); n],
        ];
        let mut tmp = states.to_vec();
        let axpy = |base: &[VehicleState], d: &[VehicleState], c: f64, out: &mut [VehicleState]| {
            for i in 0..base.len() {
                out[i] = VehicleState::new(
                    base[i].p + c * d[i].p,
                    base[i].v + c * d[i].v,
                    base[i].a + c * d[i].a,
                );
            }
        };
        self.derivative(states, u, &mut k[0]);
        axpy(states, &k[0], 0.5 * h, &mut tmp);
        self.derivative(&tmp, u, &mut k[1]);
        axpy(states, &k[1], 0.5 * h, &mut tmp);
        self.derivative(&tmp, u, &mut k[2]);
        axpy(states, &k[2], h, &mut tmp);
        self.derivative(&tmp, u, &mut k[3]);
        for i in 0..n {
            let s = &mut states[i];
            s.p += h / 6.0 * (k[0][i].p + 2.0 * k[1][i].p + 2.0 * k[2][i].p + k[3][i].p);
            s.v += h / 6.0 * (k[0][i].v + 2.0 * k[1][i].v + 2.0 * k[2][i].v + k[3][i].v);
            s.a += h / 6.0 * (k[0][i].a + 2.0 * k[1][i].a + 2.0 * k[2][i].a + k[3][i].a);
        }
    }

    /// Simulates `steps` sample intervals from `start`.
    pub fn run(
        &self,
        start: &SimStart,
        steps: usize,
        controller: &mut dyn PlatoonController,
    ) -> Result<Trajectory, DataError> {
        let n = self.spec.n();
        if start.states.len() != n {
            return Err(DataError::Validation(format!(
                "{} initial states for {} vehicles",
                start.states.len(),
                n
            )));
        }
        let t_s = self.spec.t_s();
        let av = self.spec.av_indices();
        let mut states = start.states.clone();
        let mut samples = Vec::with_capacity(steps);
        let mut effort = vec![0.0; av.len()];
        let h = t_s / self.substeps as f64;
        for step in start.step..start.step + steps {
            let t = step as f64 * t_s;
            check_finite(t, &states)?;
            if self.abort_on_collision {
                check_gaps(t, &states)?;
            }
            let errors = self.errors(t, &states)?;
            let x = flatten(&errors);
            controller
                .control(step, &x, &mut effort)
                .map_err(|f| DataError::ControllerFault {
                    t,
                    vehicle: f.vehicle + 1,
                })?;
            let mut u = vec![0.0; n];
            for (k, &i) in av.iter().enumerate() {
                u[i] = effort[k];
            }
            let w = self.disturbances(t, &states);
            samples.push(Sample {
                step,
                t,
                states: states.clone(),
                errors,
                u: u.clone(),
                w,
            });
            for _ in 0..self.substeps {
                self.rk4(&mut states, &u, h);
            }
        }
        let end_step = start.step + steps;
        let t_end = end_step as f64 * t_s;
        check_finite(t_end, &states)?;
        if self.abort_on_collision {
            check_gaps(t_end, &states)?;
        }
        Ok(Trajectory {
            t_s,
            samples,
            end_errors: self.errors(t_end, &states)?,
            end: SimStart {
                step: end_step,
                states,
            },
        })
    }
}

/// Steps the Euler-discretized polynomial model exactly, at constant `v*`.
///
/// Positions are reconstructed from spacing errors behind a virtual leader
/// that starts `h*` ahead of the head vehicle.
#[derive(Debug, Clone)]
pub struct DesignSimulator<'a> {
    spec: &'a PlatoonSpec,
    system: LiftedSystem,
    leader_origin: f64,
}

impl<'a> DesignSimulator<'a> {
    pub fn new(spec: &'a PlatoonSpec, initial: &[VehicleState]) -> Result<Self, DataError> {
        Ok(Self {
            spec,
            system: build_system(spec)?,
            leader_origin: initial.first().map_or(0.0, |s| s.p) + spec.h_star(),
        })
    }

    pub fn system(&self) -> &LiftedSystem {
        &self.system
    }

    fn leader_position(&self, t: f64) -> f64 {
        self.leader_origin + self.spec.v_star() * t
    }

    pub fn errors(&self, t: f64, states: &[VehicleState]) -> Vec<ErrorState> {
        let mut pred = self.leader_position(t);
        states
            .iter()
            .map(|s| {
                let e = ErrorState {
                    h_err: pred - s.p - self.spec.h_star(),
                    v_err: s.v - self.spec.v_star(),
                    a: s.a,
                };
                pred = s.p;
                e
            })
            .collect()
    }

    fn states_from(&self, t: f64, x: &[f64]) -> Vec<VehicleState> {
        let mut pred = self.leader_position(t);
        x.chunks_exact(3)
            .map(|c| {
                let p = pred - c[0] - self.spec.h_star();
                pred = p;
                VehicleState::new(p, c[1] + self.spec.v_star(), c[2])
            })
            .collect()
    }

    fn disturbances(&self, x: &[f64]) -> Vec<f64> {
        self.spec
            .vehicles()
            .iter()
            .enumerate()
            .map(|(i, v)| true_disturbance(v, x[3 * i] + self.spec.h_star(), self.spec.v_star()))
            .collect()
    }

    pub fn run(
        &self,
        start: &SimStart,
        steps: usize,
        controller: &mut dyn PlatoonController,
    ) -> Result<Trajectory, DataError> {
        let n = self.spec.n();
        if start.states.len() != n {
            return Err(DataError::Validation(format!(
                "{} initial states for {} vehicles",
                start.states.len(),
                n
            )));
        }
        let t_s = self.spec.t_s();
        let av = &self.system.input_vehicles;
        let mut x = DVector::from_vec(flatten(
            &self.errors(start.step as f64 * t_s, &start.states),
        ));
        let mut effort = vec![0.0; av.len()];
        let mut samples = Vec::with_capacity(steps);
        for step in start.step..start.step + steps {
            let t = step as f64 * t_s;
            let states = self.states_from(t, x.as_slice());
            check_finite(t, &states)?;
            controller
                .control(step, x.as_slice(), &mut effort)
                .map_err(|f| DataError::ControllerFault {
                    t,
                    vehicle: f.vehicle + 1,
                })?;
            let w = self.disturbances(x.as_slice());
            let mut u = vec![0.0; n];
            for (k, &i) in av.iter().enumerate() {
                u[i] = effort[k];
            }
            let next = crate::dynamics::step_design_consistent(
                &self.system,
                &x,
                &DVector::from_column_slice(&effort),
                &DVector::from_column_slice(&w),
            )?;
            samples.push(Sample {
                step,
                t,
                states,
                errors: unflatten(x.as_slice()),
                u,
                w,
            });
            x = next;
        }
        let end_step = start.step + steps;
        let t_end = end_step as f64 * t_s;
        let states = self.states_from(t_end, x.as_slice());
        check_finite(t_end, &states)?;
        Ok(Trajectory {
            t_s,
            samples,
            end_errors: unflatten(x.as_slice()),
            end: SimStart {
                step: end_step,
                states,
            },
        })
    }
}

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::acc::{AccController, AccGains, Dither};
use super::profile::ReferenceProfile;
use super::simulate::{DesignSimulator, HighFidelitySimulator, SimStart, Trajectory};
use super::DataError;
use crate::dynamics::{LiftLayout, PlatoonSpec, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionMode {
    /// Steps the Euler design model; the data identity holds exactly.
    DesignConsistent,
    /// Integrates the continuous vehicle models.
    #[default]
    HighFidelity,
}

/// Recorded input, state and lifted-state sequences, one column per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBatch {
    #[serde(with = "crate::matrix_serde::row_major")]
    pub u0: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub x0: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub x1: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde::row_major")]
    pub z0: DMatrix<f64>,
    /// Disturbance sequence. Exact in design-consistent mode; in
    /// high-fidelity mode it is the model disturbance at each sample.
    #[serde(with = "crate::matrix_serde::row_major_option")]
    pub w0: Option<DMatrix<f64>>,
    pub t_s: f64,
    pub layout: LiftLayout,
    pub mode: CollectionMode,
}

impl DataBatch {
    /// Builds a batch from the first `T` intervals of a trajectory.
    pub fn from_trajectory(
        traj: &Trajectory,
        spec: &PlatoonSpec,
        mode: CollectionMode,
    ) -> Result<Self, DataError> {
        let t = traj.len();
        if t == 0 {
            return Err(DataError::Validation("empty trajectory".into()));
        }
        let layout = LiftLayout::for_spec(spec);
        let (n, n_x, n_z) = (spec.n(), layout.n_x(), layout.n_z());
        let av = spec.av_indices();
        let mut x0 = DMatrix::zeros(n_x, t);
        let mut x1 = DMatrix::zeros(n_x, t);
        let mut z0 = DMatrix::zeros(n_z, t);
        let mut u0 = DMatrix::zeros(av.len(), t);
        let mut w0 = DMatrix::zeros(n, t);
        let column = |errors: &[crate::dynamics::ErrorState]| -> Vec<f64> {
            errors
                .iter()
                .flat_map(|e| [e.h_err, e.v_err, e.a])
                .collect()
        };
        for (k, s) in traj.samples.iter().enumerate() {
            let x = column(&s.errors);
            x0.column_mut(k).copy_from_slice(&x);
            layout.lift_into(&x, z0.column_mut(k).as_mut_slice())?;
            for (r, &i) in av.iter().enumerate() {
                u0[(r, k)] = s.u[i];
            }
            w0.column_mut(k).copy_from_slice(&s.w);
            let next = match traj.samples.get(k + 1) {
                Some(s) => column(&s.errors),
                None => column(&traj.end_errors),
            };
            x1.column_mut(k).copy_from_slice(&next);
        }
        Ok(Self {
            u0,
            x0,
            x1,
            z0,
            w0: Some(w0),
            t_s: spec.t_s(),
            layout,
            mode,
        })
    }

    pub fn samples(&self) -> usize {
        self.x0.ncols()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let t = self.samples();
        let (n_x, n_z) = (self.layout.n_x(), self.layout.n_z());
        let mut dims = vec![
            ("X0", self.x0.shape(), (n_x, t)),
            ("X1", self.x1.shape(), (n_x, t)),
            ("Z0", self.z0.shape(), (n_z, t)),
            ("U0", self.u0.shape(), (self.u0.nrows(), t)),
        ];
        if let Some(w) = &self.w0 {
            dims.push(("W0", w.shape(), (self.layout.n_vehicles(), t)));
        }
        for (name, got, want) in dims {
            if got != want {
                return Err(DataError::Validation(format!(
                    "{name} is {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the shapes and little-endian values of every recorded
    /// matrix, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |m: &DMatrix<f64>| {
            h.update((m.nrows() as u64).to_le_bytes());
            h.update((m.ncols() as u64).to_le_bytes());
            for v in m.iter() {
                h.update(v.to_le_bytes());
            }
        };
        feed(&self.u0);
        feed(&self.x0);
        feed(&self.x1);
        feed(&self.z0);
        if let Some(w) = &self.w0 {
            feed(w);
        }
        h.update(self.t_s.to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Rows belonging to the consecutive vehicles `range` of `spec`, laid
    /// out as that sub-platoon's own batch.
    pub fn restrict(&self, spec: &PlatoonSpec, range: Range<usize>) -> Result<Self, DataError> {
        let sub = spec.subrange(range.start, range.end)?;
        let sub_layout = LiftLayout::for_spec(&sub);
        let t = self.samples();
        let x_rows: Vec<usize> = (3 * range.start..3 * range.end).collect();
        let mut z_rows = x_rows.clone();
        for i in range.clone() {
            if let Some(o) = self.layout.monomial_offsets[i] {
                z_rows.extend([o, o + 1]);
            }
        }
        let av = spec.av_indices();
        let u_rows: Vec<usize> = av
            .iter()
            .enumerate()
            .filter(|(_, &i)| range.contains(&i))
            .map(|(r, _)| r)
            .collect();
        let w_rows: Vec<usize> = range.clone().collect();
        let pick = |m: &DMatrix<f64>, rows: &[usize]| {
            DMatrix::from_fn(rows.len(), t, |r, c| m[(rows[r], c)])
        };
        Ok(Self {
            u0: pick(&self.u0, &u_rows),
            x0: pick(&self.x0, &x_rows),
            x1: pick(&self.x1, &x_rows),
            z0: pick(&self.z0, &z_rows),
            w0: self.w0.as_ref().map(|w| pick(w, &w_rows)),
            t_s: self.t_s,
            layout: sub_layout,
            mode: self.mode,
        })
    }

    /// Largest entry of `|X1 − (A Z0 + B U0 + D W0)|`.
    pub fn model_residual(&self, sys: &crate::dynamics::LiftedSystem) -> Option<f64> {
        let w = self.w0.as_ref()?;
        let r = &self.x1 - (&sys.a * &self.z0 + &sys.b * &self.u0 + &sys.d * w);
        Some(r.amax())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichnessReport {
    pub rank: usize,
    pub n_z: usize,
    pub samples: usize,
    pub largest_singular_value: f64,
    pub smallest_singular_value: f64,
    pub passed: bool,
}

/// Numerical row rank of `Z0` with tolerance `max(dim) · ε · σ_max`.
pub fn check_richness(z0: &DMatrix<f64>) -> RichnessReport {
    let (n_z, t) = z0.shape();
    let sv = if n_z == 0 || t == 0 {
        Vec::new()
    } else {
        let mut s: Vec<f64> = z0
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    let largest = sv.first().copied().unwrap_or(0.0);
    let tol = n_z.max(t) as f64 * f64::EPSILON * largest;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let smallest = if sv.len() == n_z {
        sv.last().copied().unwrap_or(0.0)
    } else {
        0.0
    };
    RichnessReport {
        rank,
        n_z,
        samples: t,
        largest_singular_value: largest,
        smallest_singular_value: smallest,
        passed: n_z > 0 && rank == n_z,
    }
}

/// How data are gathered under the ACC baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionOptions {
    pub mode: CollectionMode,
    /// Number of sample intervals `T`.
    pub samples: usize,
    pub gains: AccGains,
    /// Mass the controller assumes when converting acceleration to effort.
    pub nominal_mass: f64,
    pub dither: Option<Dither>,
}

impl Default for CollectionOptions {
    fn default() -> Self {
        Self {
            mode: CollectionMode::HighFidelity,
            samples: 500,
            gains: AccGains::default(),
            nominal_mass: 1500.0,
            dither: Some(Dither {
                amplitude: 1.0,
                seed: 0,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Collection {
    pub batch: DataBatch,
    pub trajectory: Trajectory,
}

/// Runs the ACC baseline from `initial` for `T` intervals and records the
/// data sequences. A collision rejects the run.
pub fn collect_data(
    spec: &PlatoonSpec,
    profile: &ReferenceProfile,
    initial: &[VehicleState],
    options: &CollectionOptions,
) -> Result<Collection, DataError> {
    if options.samples == 0 {
        return Err(DataError::Validation(
            "at least one sample is required".into(),
        ));
    }
    let mut acc = AccController::new(spec, options.gains, options.nominal_mass, options.dither);
    let start = SimStart {
        step: 0,
        states: initial.to_vec(),
    };
    let trajectory = match options.mode {
        CollectionMode::HighFidelity => {
            let sim = HighFidelitySimulator::new(spec, profile, initial);
            if sim.max_steps() < options.samples {
                return Err(DataError::Validation(format!(
                    "profile lasts {} s, collection needs {} s",
                    profile.duration(),
                    options.samples as f64 * spec.t_s()
                )));
            }
            sim.run(&start, options.samples, &mut acc)?
        }
        CollectionMode::DesignConsistent => {
            DesignSimulator::new(spec, initial)?.run(&start, options.samples, &mut acc)?
        }
    };
    let batch = DataBatch::from_trajectory(&trajectory, spec, options.mode)?;
    Ok(Collection { batch, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_system, HvParams, Vehicle, VehicleParams};

    fn two_av() -> PlatoonSpec {
        PlatoonSpec::automated(&[VehicleParams::nominal(); 2], 20.0, 20.0, 0.05).unwrap()
    }

    fn init2() -> Vec<VehicleState> {
        vec![
            VehicleState::new(40.0, 20.0, 0.0),
            VehicleState::new(25.0, 18.0, 0.0),
        ]
    }

    fn design_batch(t: usize) -> DataBatch {
        let spec = two_av();
        let profile = ReferenceProfile::constant(20.0, 100.0).unwrap();
        let opts = CollectionOptions {
            mode: CollectionMode::DesignConsistent,
            samples: t,
            ..Default::default()
        };
        collect_data(&spec, &profile, &init2(), &opts)
            .unwrap()
            .batch
    }

    #[test]
    fn design_identity_and_shift() {
        let b = design_batch(200);
        b.validate().unwrap();
        let sys = build_system(&two_av()).unwrap();
        assert!(b.model_residual(&sys).unwrap() <= 1e-10);
        for k in 0..b.samples() - 1 {
            assert_eq!(b.x1.column(k), b.x0.column(k + 1));
        }
    }

    #[test]
    fn richness() {
        let b = design_batch(200);
        let r = check_richness(&b.z0);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.rank, 10);
        let short = design_batch(9);
        assert!(!check_richness(&short.z0).passed);
        let mut zero_row = b.z0.clone();
        zero_row.row_mut(3).fill(0.0);
        assert!(!check_richness(&zero_row).passed);
    }

    #[test]
    fn hash_is_deterministic_and_sensitive() {
        let a = design_batch(50);
        let b = design_batch(50);
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.u0[(0, 0)] += 1e-12;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn restriction_picks_rows() {
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
        let profile = ReferenceProfile::constant(20.0, 100.0).unwrap();
        let init =
            [(45.0, 20.0), (20.0, 15.0), (0.0, 20.0)].map(|(p, v)| VehicleState::new(p, v, 0.0));
        let b = collect_data(
            &spec,
            &profile,
            &init,
            &CollectionOptions {
                samples: 40,
                ..Default::default()
            },
        )
        .unwrap()
        .batch;
        assert_eq!(b.u0.nrows(), 2);
        assert_eq!(b.z0.nrows(), 13);
        let tail = b.restrict(&spec, 2..3).unwrap();
        assert_eq!(tail.z0.nrows(), 5);
        assert_eq!(tail.u0.row(0), b.u0.row(1));
        assert_eq!(tail.z0.row(3), b.z0.row(11));
        assert!(b.restrict(&spec, 1..3).is_err());
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::vehicle::{build_av_error_blocks, build_hv_error_blocks, HvParams, VehicleParams};
use super::ModelError;

/// One platoon member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Vehicle {
    Automated(VehicleParams),
    Human(HvParams),
}

impl Vehicle {
    pub fn is_automated(&self) -> bool {
        matches!(self, Vehicle::Automated(_))
    }
}

/// Ordered platoon with its operating point. Vehicle 0 follows the virtual
/// leader and must be automated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonSpec {
    vehicles: Vec<Vehicle>,
    h_star: f64,
    v_star: f64,
    t_s: f64,
}

impl PlatoonSpec {
    pub fn new(
        vehicles: Vec<Vehicle>,
        h_star: f64,
        v_star: f64,
        t_s: f64,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            vehicles,
            h_star,
            v_star,
            t_s,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Platoon of automated vehicles only.
    pub fn automated(
        params: &[VehicleParams],
        h_star: f64,
        v_star: f64,
        t_s: f64,
    ) -> Result<Self, ModelError> {
        Self::new(
            params.iter().copied().map(Vehicle::Automated).collect(),
            h_star,
            v_star,
            t_s,
        )
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.vehicles.first() {
            None => return Err(ModelError::EmptyPlatoon),
            Some(Vehicle::Human(_)) => return Err(ModelError::HumanLeader),
            Some(Vehicle::Automated(_)) => {}
        }
        for v in &self.vehicles {
            match v {
                Vehicle::Automated(p) => p.validate()?,
                Vehicle::Human(p) => p.validate()?,
            }
        }
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "t_s",
                value: self.t_s,
            });
        }
        if !(self.h_star.is_finite() && self.h_star > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "h_star",
                value: self.h_star,
            });
        }
        if !(self.v_star.is_finite() && self.v_star >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "v_star",
                value: self.v_star,
            });
        }
        Ok(())
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn n(&self) -> usize {
        self.vehicles.len()
    }

    pub fn n_av(&self) -> usize {
        self.vehicles.iter().filter(|v| v.is_automated()).count()
    }

    pub fn h_star(&self) -> f64 {
        self.h_star
    }

    pub fn v_star(&self) -> f64 {
        self.v_star
    }

    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    /// Indices of automated vehicles, in platoon order.
    pub fn av_indices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.vehicles[i].is_automated())
            .collect()
    }

    pub fn hv_indices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| !self.vehicles[i].is_automated())
            .collect()
    }

    /// Consecutive sub-range `[start, end)` as a standalone platoon. The
    /// first vehicle of the range becomes the head.
    pub fn subrange(&self, start: usize, end: usize) -> Result<Self, ModelError> {
        if start >= end || end > self.n() {
            return Err(ModelError::DimensionMismatch {
                what: "sub-platoon range",
                expected: self.n(),
                got: end,
            });
        }
        Self::new(
            self.vehicles[start..end].to_vec(),
            self.h_star,
            self.v_star,
            self.t_s,
        )
    }
}

/// Position of every vehicle's entries inside the stacked error state `x`
/// and the lifted vector `Z = [x; Q(x)]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftLayout {
    /// Offset of the `(ṽ·a, ṽ²)` pair in `Z` for each vehicle; `None` for
    /// human drivers.
    pub monomial_offsets: Vec<Option<usize>>,
}

impl LiftLayout {
    pub fn for_spec(spec: &PlatoonSpec) -> Self {
        let n_x = 3 * spec.n();
        let mut next = n_x;
        let monomial_offsets = spec
            .vehicles()
            .iter()
            .map(|v| {
                v.is_automated().then(|| {
                    let o = next;
                    next += 2;
                    o
                })
            })
            .collect();
        Self { monomial_offsets }
    }

    pub fn n_vehicles(&self) -> usize {
        self.monomial_offsets.len()
    }

    pub fn n_x(&self) -> usize {
        3 * self.n_vehicles()
    }

    pub fn n_z(&self) -> usize {
        self.n_x() + 2 * self.monomial_offsets.iter().flatten().count()
    }

    /// `Z(x)` for a stacked error state.
    pub fn lift(&self, x: &[f64]) -> Result<DVector<f64>, ModelError> {
        let mut z = DVector::zeros(self.n_z());
        self.lift_into(x, z.as_mut_slice())?;
        Ok(z)
    }

    pub fn lift_into(&self, x: &[f64], z: &mut [f64]) -> Result<(), ModelError> {
        if x.len() != self.n_x() {
            return Err(ModelError::DimensionMismatch {
                what: "error state",
                expected: self.n_x(),
                got: x.len(),
            });
        }
        if z.len() != self.n_z() {
            return Err(ModelError::DimensionMismatch {
                what: "lifted state",
                expected: self.n_z(),
                got: z.len(),
            });
        }
        z[..x.len()].copy_from_slice(x);
        for (i, off) in self.monomial_offsets.iter().enumerate() {
            if let Some(o) = *off {
                let v = x[3 * i + 1];
                let a = x[3 * i + 2];
                z[o] = v * a;
                z[o + 1] = v * v;
            }
        }
        Ok(())
    }
}

/// Polynomial error system of a platoon, continuous and Euler-discretized.
///
/// Continuous: `ẋ = A_c Z(x) + B_c u + D_c w`. Discrete:
/// `x⁺ = A Z(x) + B u + D w` with `A = [I 0] + t_s A_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSystem {
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
    pub d_c: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub t_s: f64,
    pub layout: LiftLayout,
    /// Platoon index of the vehicle driven by each input column.
    pub input_vehicles: Vec<usize>,
}

impl LiftedSystem {
    pub fn n_x(&self) -> usize {
        self.layout.n_x()
    }

    pub fn n_z(&self) -> usize {
        self.layout.n_z()
    }

    pub fn n_u(&self) -> usize {
        self.input_vehicles.len()
    }

    pub fn n_w(&self) -> usize {
        self.layout.n_vehicles()
    }
}

/// Continuous part of the platoon's polynomial error system. The head's
/// predecessor coupling is omitted since its reference tracks `v*` exactly.
pub fn assemble_polynomial_system(spec: &PlatoonSpec) -> Result<LiftedSystem, ModelError> {
    spec.validate()?;
    let layout = LiftLayout::for_spec(spec);
    let (n, n_x, n_z) = (spec.n(), layout.n_x(), layout.n_z());
    let input_vehicles = spec.av_indices();
    let mut a_c = DMatrix::zeros(n_x, n_z);
    let mut b_c = DMatrix::zeros(n_x, input_vehicles.len());
    let mut d_c = DMatrix::zeros(n_x, n);
    let mut col = 0;
    for (i, vehicle) in spec.vehicles().iter().enumerate() {
        let r = 3 * i;
        d_c[(r + 2, i)] = 1.0;
        match vehicle {
            Vehicle::Automated(p) => {
                let blk = build_av_error_blocks(p, spec.v_star());
                a_c.fixed_view_mut::<3, 3>(r, r).copy_from(&blk.a);
                if i > 0 {
                    a_c.fixed_view_mut::<3, 3>(r, r - 3).copy_from(&blk.c);
                }
                let o = layout.monomial_offsets[i].expect("automated vehicle has monomials");
                a_c.fixed_view_mut::<3, 2>(r, o).copy_from(&blk.e);
                b_c.fixed_view_mut::<3, 1>(r, col).copy_from(&blk.b);
                col += 1;
            }
            Vehicle::Human(p) => {
                let blk = build_hv_error_blocks(p);
                a_c.fixed_view_mut::<3, 3>(r, r).copy_from(&blk.a);
                // Validation guarantees i > 0 here.
                a_c.fixed_view_mut::<3, 3>(r, r - 3).copy_from(&blk.c);
            }
        }
    }
    Ok(LiftedSystem {
        a: DMatrix::zeros(0, 0),
        b: DMatrix::zeros(0, 0),
        d: DMatrix::zeros(0, 0),
        a_c,
        b_c,
        d_c,
        t_s: f64::NAN,
        layout,
        input_vehicles,
    })
}

/// Forward-Euler discretization of the continuous matrices in place.
pub fn discretize(sys: &mut LiftedSystem, t_s: f64) -> Result<(), ModelError> {
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "t_s",
            value: t_s,
        });
    }
    let (n_x, n_z) = (sys.a_c.nrows(), sys.a_c.ncols());
    let mut a = &sys.a_c * t_s;
    for i in 0..n_x.min(n_z) {
        a[(i, i)] += 1.0;
    }
    sys.a = a;
    sys.b = &sys.b_c * t_s;
    sys.d = &sys.d_c * t_s;
    sys.t_s = t_s;
    Ok(())
}

/// Continuous assembly followed by discretization at the platoon's sample time.
pub fn build_system(spec: &PlatoonSpec) -> Result<LiftedSystem, ModelError> {
    let mut sys = assemble_polynomial_system(spec)?;
    discretize(&mut sys, spec.t_s())?;
    Ok(sys)
}

/// `x⁺ = A Z(x) + B u + D w`.
pub fn step_design_consistent(
    sys: &LiftedSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>, ModelError> {
    for (what, expected, got) in [
        ("control", sys.n_u(), u.len()),
        ("disturbance", sys.n_w(), w.len()),
    ] {
        if expected != got {
            return Err(ModelError::DimensionMismatch {
                what,
                expected,
                got,
            });
        }
    }
    let z = sys.layout.lift(x.as_slice())?;
    Ok(&sys.a * z + &sys.b * u + &sys.d * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mixed() -> PlatoonSpec {
        let av = VehicleParams::nominal();
        PlatoonSpec::new(
            vec![
                Vehicle::Automated(av),
                Vehicle::Human(HvParams::reference()),
                Vehicle::Automated(av),
            ],
            20.0,
            20.0,
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn single_av_dims() {
        let spec = PlatoonSpec::automated(&[VehicleParams::nominal()], 20.0, 20.0, 0.05).unwrap();
        let sys = build_system(&spec).unwrap();
        assert_eq!(sys.a_c.shape(), (3, 5));
        assert_eq!(sys.n_z(), 5);
        assert_eq!(sys.a[(0, 1)], -0.05);
        assert_eq!(sys.a[(0, 0)], 1.0);
    }

    #[test]
    fn four_av_dims() {
        let spec =
            PlatoonSpec::automated(&[VehicleParams::nominal(); 4], 20.0, 20.0, 0.05).unwrap();
        let sys = build_system(&spec).unwrap();
        assert_eq!((sys.n_x(), sys.n_u(), sys.n_w(), sys.n_z()), (12, 4, 4, 20));
        // Head carries no predecessor coupling; follower 1 does.
        assert_eq!(sys.a_c[(3, 1)], 1.0);
        assert_eq!(
            sys.a_c
                .view((0, 0), (3, 3))
                .iter()
                .filter(|v| **v == 1.0)
                .count(),
            1
        );
    }

    #[test]
    fn mixed_dims_and_layout() {
        let spec = mixed();
        let sys = build_system(&spec).unwrap();
        assert_eq!((sys.n_x(), sys.n_u(), sys.n_w(), sys.n_z()), (9, 2, 3, 13));
        assert_eq!(sys.layout.monomial_offsets, vec![Some(9), None, Some(11)]);
        assert_eq!(sys.input_vehicles, vec![0, 2]);
        assert_relative_eq!(sys.a_c[(5, 1)], 0.4 / 0.7, max_relative = 1e-12);
        assert!(sys.b_c.row(5).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn human_leader_rejected() {
        let r = PlatoonSpec::new(
            vec![Vehicle::Human(HvParams::reference())],
            20.0,
            20.0,
            0.05,
        );
        assert!(matches!(r, Err(ModelError::HumanLeader)));
        assert!(matches!(
            PlatoonSpec::new(vec![], 20.0, 20.0, 0.05),
            Err(ModelError::EmptyPlatoon)
        ));
    }

    #[test]
    fn lift_examples() {
        let spec = PlatoonSpec::automated(&[VehicleParams::nominal()], 20.0, 20.0, 0.05).unwrap();
        let layout = LiftLayout::for_spec(&spec);
        assert_eq!(
            layout.lift(&[1.0, 2.0, 3.0]).unwrap().as_slice(),
            &[1.0, 2.0, 3.0, 6.0, 4.0]
        );
        assert!(layout.lift(&[0.0; 3]).unwrap().iter().all(|v| *v == 0.0));
        assert!(layout.lift(&[0.0; 4]).is_err());
        let mixed = LiftLayout::for_spec(&mixed());
        assert_eq!(mixed.lift(&[1.0; 9]).unwrap().len(), 13);
    }

    #[test]
    fn discretization_limits() {
        let spec =
            PlatoonSpec::automated(&[VehicleParams::nominal(); 2], 20.0, 20.0, 0.05).unwrap();
        let mut sys = assemble_polynomial_system(&spec).unwrap();
        discretize(&mut sys, 1e-300).unwrap();
        assert!(sys.b.amax() < 1e-290 && sys.d.amax() < 1e-290);
        assert!(discretize(&mut sys, 0.0).is_err());
    }

    #[test]
    fn one_step_by_hand() {
        let p = VehicleParams::nominal();
        let spec = PlatoonSpec::automated(&[p], 20.0, 20.0, 0.05).unwrap();
        let sys = build_system(&spec).unwrap();
        let (h, v, a, u, w) = (1.0, 2.0, 3.0, 150.0, -1.0);
        let x1 = step_design_consistent(
            &sys,
            &DVector::from_vec(vec![h, v, a]),
            &DVector::from_element(1, u),
            &DVector::from_element(1, w),
        )
        .unwrap();
        let r = 0.77 / 3000.0;
        let jerk = -2.0 * r * 20.0 / 0.2 * v
            - (1.0 + 2.0 * 0.2 * r * 20.0) / 0.2 * a
            - 2.0 * r * v * a
            - r / 0.2 * v * v
            + u / 300.0
            + w;
        assert_relative_eq!(x1[0], h - 0.05 * v, max_relative = 1e-14);
        assert_relative_eq!(x1[1], v + 0.05 * a, max_relative = 1e-14);
        assert_relative_eq!(x1[2], a + 0.05 * jerk, max_relative = 1e-12);
    }
}

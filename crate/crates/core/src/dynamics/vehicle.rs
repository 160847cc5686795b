use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Physical parameters of an automated vehicle's longitudinal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Engine time constant (s).
    pub tau: f64,
    /// Specific mass of the air.
    pub air_density: f64,
    /// Cross-sectional area (m²).
    pub frontal_area: f64,
    pub drag_coefficient: f64,
    /// Mechanical drag (N).
    pub mechanical_drag: f64,
    /// Mass (kg).
    pub mass: f64,
}

impl VehicleParams {
    pub fn new(
        tau: f64,
        air_density: f64,
        frontal_area: f64,
        drag_coefficient: f64,
        mechanical_drag: f64,
        mass: f64,
    ) -> Result<Self, ModelError> {
        let p = Self {
            tau,
            air_density,
            frontal_area,
            drag_coefficient,
            mechanical_drag,
            mass,
        };
        p.validate()?;
        Ok(p)
    }

    /// Nominal passenger-car parameters used throughout the experiments.
    pub fn nominal() -> Self {
        Self {
            tau: 0.2,
            air_density: 1.0,
            frontal_area: 2.2,
            drag_coefficient: 0.35,
            mechanical_drag: 150.0,
            mass: 1500.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    pub(crate) fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("tau", self.tau),
            ("air_density", self.air_density),
            ("frontal_area", self.frontal_area),
            ("drag_coefficient", self.drag_coefficient),
            ("mechanical_drag", self.mechanical_drag),
            ("mass", self.mass),
        ]
    }

    pub(crate) fn from_named(values: [f64; 6]) -> Self {
        Self {
            tau: values[0],
            air_density: values[1],
            frontal_area: values[2],
            drag_coefficient: values[3],
            mechanical_drag: values[4],
            mass: values[5],
        }
    }

    /// Parameters multiplied factor-wise, in the order τ, σ, M, c, d, m.
    pub fn scaled(&self, factors: [f64; 6]) -> Result<Self, ModelError> {
        let named = self.named();
        let p = Self::from_named(std::array::from_fn(|i| named[i].1 * factors[i]));
        p.validate()?;
        Ok(p)
    }

    /// Air resistance coefficient `R = σ·M·c / (2m)` (1/m).
    pub fn air_resistance(&self) -> f64 {
        self.air_density * self.frontal_area * self.drag_coefficient / (2.0 * self.mass)
    }

    /// Drift term of the jerk equation, `f(v, a)`.
    pub fn drift_jerk(&self, v: f64, a: f64) -> f64 {
        let r = self.air_resistance();
        -(a + r * v * v + self.mechanical_drag / self.mass) / self.tau - 2.0 * r * v * a
    }
}

/// Car-following parameters of a human-driven vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvParams {
    /// Headway gain (1/s).
    pub alpha: f64,
    /// Relative-velocity gain (1/s).
    pub beta: f64,
    /// Driver-vehicle lag (s).
    pub tau: f64,
    /// Gap below which the driver wants to stop (m).
    pub h_stop: f64,
    /// Gap above which the driver wants maximum speed (m).
    pub h_go: f64,
    pub v_max: f64,
}

impl HvParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        tau: f64,
        h_stop: f64,
        h_go: f64,
        v_max: f64,
    ) -> Result<Self, ModelError> {
        let p = Self {
            alpha,
            beta,
            tau,
            h_stop,
            h_go,
            v_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// Driver model used for the mixed-platoon experiments.
    pub fn reference() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.4,
            tau: 0.7,
            h_stop: 5.0,
            h_go: 50.0,
            v_max: 40.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("tau", self.tau),
            ("h_stop", self.h_stop),
            ("h_go", self.h_go),
            ("v_max", self.v_max),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        if self.h_stop >= self.h_go {
            return Err(ModelError::InvalidParameter {
                name: "h_go",
                value: self.h_go,
            });
        }
        Ok(())
    }
}

/// Longitudinal state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub p: f64,
    pub v: f64,
    pub a: f64,
}

impl VehicleState {
    pub fn new(p: f64, v: f64, a: f64) -> Self {
        Self { p, v, a }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite() && self.a.is_finite()
    }
}

/// Platooning error coordinates of one vehicle: spacing error, velocity
/// error and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    pub h_err: f64,
    pub v_err: f64,
    pub a: f64,
}

pub fn air_resistance(params: &VehicleParams) -> f64 {
    params.air_resistance()
}

/// Time derivative `(ṗ, v̇, ȧ)` of an automated vehicle under effort `u`.
pub fn av_derivative(state: &VehicleState, params: &VehicleParams, u: f64) -> [f64; 3] {
    [
        state.v,
        state.a,
        params.drift_jerk(state.v, state.a) + u / (params.tau * params.mass),
    ]
}

/// Spacing-dependent desired speed of a human driver.
pub fn range_policy(h: f64, params: &HvParams) -> f64 {
    if h <= params.h_stop {
        0.0
    } else if h >= params.h_go {
        params.v_max
    } else {
        let s = (h - params.h_stop) / (params.h_go - params.h_stop);
        0.5 * params.v_max * (1.0 - (PI * s).cos())
    }
}

/// Time derivative `(ḣ, v̇, ȧ)` of a human-driven vehicle following `pred`.
pub fn hv_derivative(state: &VehicleState, pred: &VehicleState, params: &HvParams) -> [f64; 3] {
    let h = pred.p - state.p;
    let jerk = (params.alpha * (range_policy(h, params) - state.v)
        + params.beta * (pred.v - state.v)
        - state.a)
        / params.tau;
    [pred.v - state.v, state.a, jerk]
}

/// Error-system blocks of an automated vehicle linearized about `v*`,
/// with the quadratic remainder kept in `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvErrorBlocks {
    pub a: Matrix3<f64>,
    /// Coupling to the predecessor's error state.
    pub c: Matrix3<f64>,
    /// Coefficients of the monomials `(ṽ·a, ṽ²)`.
    pub e: Matrix3x2<f64>,
    pub b: Vector3<f64>,
    pub d: Vector3<f64>,
}

pub fn build_av_error_blocks(params: &VehicleParams, v_star: f64) -> AvErrorBlocks {
    let r = params.air_resistance();
    let tau = params.tau;
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0, -1.0, 0.0,
        0.0, 0.0, 1.0,
        0.0, -2.0 * r * v_star / tau, -(1.0 + 2.0 * tau * r * v_star) / tau,
    );
    let mut c = Matrix3::zeros();
    c[(0, 1)] = 1.0;
    let mut e = Matrix3x2::zeros();
    e[(2, 0)] = -2.0 * r;
    e[(2, 1)] = -r / tau;
    AvErrorBlocks {
        a,
        c,
        e,
        b: Vector3::new(0.0, 0.0, 1.0 / (tau * params.mass)),
        d: Vector3::new(0.0, 0.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HvErrorBlocks {
    pub a: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub d: Vector3<f64>,
}

pub fn build_hv_error_blocks(params: &HvParams) -> HvErrorBlocks {
    let tau = params.tau;
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0, -1.0, 0.0,
        0.0, 0.0, 1.0,
        0.0, -(params.alpha + params.beta) / tau, -1.0 / tau,
    );
    let mut c = Matrix3::zeros();
    c[(0, 1)] = 1.0;
    c[(2, 1)] = params.beta / tau;
    HvErrorBlocks {
        a,
        c,
        d: Vector3::new(0.0, 0.0, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn air_resistance_values() {
        let p = VehicleParams::nominal();
        assert_relative_eq!(air_resistance(&p), 0.77 / 3000.0, max_relative = 1e-14);
        let unit = VehicleParams::new(1.0, 2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(unit.air_resistance(), 1.0);
        let heavy = VehicleParams { mass: 3000.0, ..p };
        assert_relative_eq!(
            heavy.air_resistance(),
            0.5 * p.air_resistance(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(VehicleParams::new(0.2, 0.0, 2.2, 0.35, 150.0, 1500.0).is_err());
        assert!(VehicleParams::new(-0.2, 1.0, 2.2, 0.35, 150.0, 1500.0).is_err());
        assert!(HvParams::new(0.2, 0.4, 0.7, 50.0, 5.0, 40.0).is_err());
    }

    #[test]
    fn av_at_rest_with_drag_cancelled() {
        let p = VehicleParams::nominal();
        let d = av_derivative(&VehicleState::default(), &p, p.mechanical_drag);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!(d[2].abs() < 1e-15);
    }

    #[test]
    fn av_coasting_jerk() {
        let p = VehicleParams::nominal();
        let v = 17.0;
        let d = av_derivative(&VehicleState::new(0.0, v, 0.0), &p, 0.0);
        let r = p.air_resistance();
        assert_relative_eq!(
            d[2],
            -(r * v * v + p.mechanical_drag / p.mass) / p.tau,
            max_relative = 1e-14
        );
    }

    #[test]
    fn av_jerk_hand_evaluated() {
        // R = 0.77/3000; f(20, 1) = −(1 + R·400 + 0.1)/0.2 − 2·R·20
        //   = −1.2026666…/0.2 − 0.0102666… = −6.0236
        let p = VehicleParams::nominal();
        let d = av_derivative(&VehicleState::new(0.0, 20.0, 1.0), &p, 0.0);
        assert_relative_eq!(d[2], -6.0236, max_relative = 1e-12);
    }

    #[test]
    fn av_equilibrium_effort() {
        let p = VehicleParams::nominal();
        let v_star = 20.0;
        let u = -p.tau * p.mass * p.drift_jerk(v_star, 0.0);
        let d = av_derivative(&VehicleState::new(0.0, v_star, 0.0), &p, u);
        assert!(d[2].abs() < 1e-12);
    }

    #[test]
    fn range_policy_points() {
        let p = HvParams::reference();
        assert_eq!(range_policy(p.h_stop, &p), 0.0);
        assert_eq!(range_policy(p.h_go, &p), p.v_max);
        assert_relative_eq!(range_policy(27.5, &p), 20.0, max_relative = 1e-12);
        assert_eq!(range_policy(-3.0, &p), 0.0);
        assert_eq!(range_policy(500.0, &p), p.v_max);
    }

    #[test]
    fn hv_equilibria() {
        let p = HvParams::reference();
        let free = hv_derivative(
            &VehicleState::new(0.0, p.v_max, 0.0),
            &VehicleState::new(p.h_go + 10.0, p.v_max, 0.0),
            &p,
        );
        assert_eq!(free, [0.0, 0.0, 0.0]);
        let stop = hv_derivative(
            &VehicleState::new(0.0, 0.0, 0.0),
            &VehicleState::new(p.h_stop - 1.0, 0.0, 0.0),
            &p,
        );
        assert_eq!(stop, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn hv_midpoint_jerk() {
        let p = HvParams::reference();
        let d = hv_derivative(
            &VehicleState::new(0.0, 15.0, 0.0),
            &VehicleState::new(27.5, 20.0, 0.0),
            &p,
        );
        assert_relative_eq!(d[0], 5.0);
        assert_relative_eq!(
            d[2],
            (0.2 * (20.0 - 15.0) + 0.4 * 5.0) / 0.7,
            max_relative = 1e-12
        );
    }

    #[test]
    fn av_block_entries() {
        let p = VehicleParams::nominal();
        let blk = build_av_error_blocks(&p, 20.0);
        assert_eq!(blk.a[(0, 1)], -1.0);
        assert_eq!(blk.c[(0, 1)], 1.0);
        let r = 0.77 / 3000.0;
        assert_relative_eq!(
            blk.a[(2, 2)],
            -(1.0 + 2.0 * 0.2 * r * 20.0) / 0.2,
            max_relative = 1e-12
        );
        assert_relative_eq!(blk.b[2], 1.0 / 300.0, max_relative = 1e-12);
        assert_relative_eq!(blk.e[(2, 0)], -2.0 * r, max_relative = 1e-12);
        assert_relative_eq!(blk.e[(2, 1)], -r / 0.2, max_relative = 1e-12);
        assert_eq!(blk.c.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn hv_block_entries() {
        let p = HvParams::reference();
        let blk = build_hv_error_blocks(&p);
        assert_relative_eq!(blk.a[(2, 1)], -0.6 / 0.7, max_relative = 1e-12);
        assert_relative_eq!(blk.c[(2, 1)], 0.4 / 0.7, max_relative = 1e-12);
        assert_relative_eq!(blk.a[(2, 2)], -1.0 / 0.7, max_relative = 1e-12);
    }

    #[test]
    fn hv_block_zero_gains() {
        // Zero gains fail validation, so build the struct directly.
        let p = HvParams {
            alpha: 0.0,
            beta: 0.0,
            ..HvParams::reference()
        };
        let blk = build_hv_error_blocks(&p);
        assert_eq!(blk.a[(2, 1)], 0.0);
        assert_eq!(blk.c[(2, 1)], 0.0);
        assert_relative_eq!(blk.a[(2, 2)], -1.0 / 0.7);
    }
}

use serde::{Deserialize, Serialize};

use super::platoon::{PlatoonSpec, Vehicle};
use super::vehicle::{range_policy, HvParams, VehicleParams};
use super::ModelError;

/// Interval bounds on one automated vehicle's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: VehicleParams,
    pub nominal: VehicleParams,
    pub upper: VehicleParams,
}

impl ParamBox {
    pub fn new(
        lower: VehicleParams,
        nominal: VehicleParams,
        upper: VehicleParams,
    ) -> Result<Self, ModelError> {
        let b = Self {
            lower,
            nominal,
            upper,
        };
        b.validate()?;
        Ok(b)
    }

    /// Zero-width box.
    pub fn exact(p: VehicleParams) -> Self {
        Self {
            lower: p,
            nominal: p,
            upper: p,
        }
    }

    /// `nominal · (1 ± fraction)` on every parameter.
    pub fn relative(nominal: VehicleParams, fraction: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(ModelError::InvalidParameter {
                name: "fraction",
                value: fraction,
            });
        }
        let scale = |s: f64| VehicleParams::from_named(nominal.named().map(|(_, v)| v * s));
        Self::new(scale(1.0 - fraction), nominal, scale(1.0 + fraction))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.lower.validate()?;
        let (lo, nom, hi) = (self.lower.named(), self.nominal.named(), self.upper.named());
        for k in 0..lo.len() {
            if !(lo[k].1 <= nom[k].1 && nom[k].1 <= hi[k].1) {
                return Err(ModelError::InvalidParameter {
                    name: nom[k].0,
                    value: nom[k].1,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &VehicleParams) -> bool {
        let (lo, v, hi) = (self.lower.named(), p.named(), self.upper.named());
        (0..lo.len()).all(|k| lo[k].1 <= v[k].1 && v[k].1 <= hi[k].1)
    }

    /// Largest air resistance coefficient over the box.
    pub fn air_resistance_upper(&self) -> f64 {
        self.upper.air_density * self.upper.frontal_area * self.upper.drag_coefficient
            / (2.0 * self.lower.mass)
    }
}

/// Interval bounds on a human driver's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvBox {
    pub lower: HvParams,
    pub upper: HvParams,
}

impl HvBox {
    pub fn exact(p: HvParams) -> Self {
        Self { lower: p, upper: p }
    }
}

/// Bounds for one platoon member, matching the platoon's vehicle kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VehicleBox {
    Automated(ParamBox),
    Human(HvBox),
}

impl VehicleBox {
    /// Zero-width box around the vehicle's own parameters.
    pub fn exact(v: &Vehicle) -> Self {
        match v {
            Vehicle::Automated(p) => VehicleBox::Automated(ParamBox::exact(*p)),
            Vehicle::Human(p) => VehicleBox::Human(HvBox::exact(*p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceBound {
    pub per_vehicle: Vec<f64>,
    /// Largest entry of `per_vehicle`.
    pub delta: f64,
}

pub fn av_disturbance_bound(b: &ParamBox, v_star: f64) -> f64 {
    (b.upper.mass * b.air_resistance_upper() * v_star * v_star + b.upper.mechanical_drag)
        / (b.lower.tau * b.lower.mass)
}

pub fn hv_disturbance_bound(b: &HvBox, v_star: f64) -> f64 {
    b.upper.alpha * v_star.max(b.upper.v_max - v_star) / b.lower.tau
}

pub fn disturbance_bound(
    boxes: &[VehicleBox],
    spec: &PlatoonSpec,
) -> Result<DisturbanceBound, ModelError> {
    if boxes.is_empty() {
        return Err(ModelError::EmptyPlatoon);
    }
    if boxes.len() != spec.n() {
        return Err(ModelError::DimensionMismatch {
            what: "parameter boxes",
            expected: spec.n(),
            got: boxes.len(),
        });
    }
    let mut per_vehicle = Vec::with_capacity(boxes.len());
    for (b, v) in boxes.iter().zip(spec.vehicles()) {
        let d = match (b, v) {
            (VehicleBox::Automated(b), Vehicle::Automated(_)) => {
                av_disturbance_bound(b, spec.v_star())
            }
            (VehicleBox::Human(b), Vehicle::Human(_)) => hv_disturbance_bound(b, spec.v_star()),
            _ => return Err(ModelError::BoxKindMismatch),
        };
        per_vehicle.push(d);
    }
    let delta = per_vehicle.iter().fold(0.0f64, |m, &d| m.max(d));
    Ok(DisturbanceBound { per_vehicle, delta })
}

/// Constant disturbance of an automated vehicle's error dynamics.
pub fn av_true_disturbance(p: &VehicleParams, v_star: f64) -> f64 {
    -(p.mass * p.air_resistance() * v_star * v_star + p.mechanical_drag) / (p.tau * p.mass)
}

/// Gap-dependent disturbance of a human driver's error dynamics.
pub fn hv_true_disturbance(p: &HvParams, gap: f64, v_star: f64) -> f64 {
    p.alpha * (range_policy(gap, p) - v_star) / p.tau
}

/// Disturbance acting on `vehicle`; `gap` is only read for human drivers.
pub fn true_disturbance(vehicle: &Vehicle, gap: f64, v_star: f64) -> f64 {
    match vehicle {
        Vehicle::Automated(p) => av_true_disturbance(p, v_star),
        Vehicle::Human(p) => hv_true_disturbance(p, gap, v_star),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_box_bound_matches_nominal_disturbance() {
        let p = VehicleParams::nominal();
        let spec = PlatoonSpec::automated(&[p], 20.0, 20.0, 0.05).unwrap();
        let b = disturbance_bound(&[VehicleBox::Automated(ParamBox::exact(p))], &spec).unwrap();
        let oracle = (1500.0 * (0.77 / 3000.0) * 400.0 + 150.0) / (0.2 * 1500.0);
        assert_relative_eq!(b.delta, oracle, max_relative = 1e-12);
        assert_relative_eq!(av_true_disturbance(&p, 20.0), -oracle, max_relative = 1e-12);
        assert_relative_eq!(oracle, 1.013_333_333_333_333_3, max_relative = 1e-12);
    }

    #[test]
    fn human_bound() {
        let p = HvParams::reference();
        assert_relative_eq!(
            hv_disturbance_bound(&HvBox::exact(p), 20.0),
            0.2 * 20.0 / 0.7,
            max_relative = 1e-12
        );
        assert!(hv_true_disturbance(&p, 27.5, 20.0).abs() < 1e-12);
    }

    #[test]
    fn box_kind_mismatch() {
        let p = VehicleParams::nominal();
        let spec = PlatoonSpec::automated(&[p], 20.0, 20.0, 0.05).unwrap();
        let r = disturbance_bound(
            &[VehicleBox::Human(HvBox::exact(HvParams::reference()))],
            &spec,
        );
        assert!(matches!(r, Err(ModelError::BoxKindMismatch)));
        assert!(matches!(
            disturbance_bound(&[], &spec),
            Err(ModelError::EmptyPlatoon)
        ));
    }

    #[test]
    fn relative_box_bounds() {
        let b = ParamBox::relative(VehicleParams::nominal(), 0.1).unwrap();
        assert!(b.contains(&VehicleParams::nominal()));
        assert_relative_eq!(b.lower.mass, 1350.0);
        assert!(ParamBox::relative(VehicleParams::nominal(), 1.5).is_err());
    }
}

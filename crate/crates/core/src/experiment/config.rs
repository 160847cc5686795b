use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::datagen::{
    load_drive_cycle, us06, AccGains, CollectionMode, CollectionOptions, Dither, DriveCycleOptions,
    ReferenceProfile, SpeedUnit,
};
use crate::dynamics::{
    HvBox, HvParams, ParamBox, PlatoonSpec, Vehicle, VehicleBox, VehicleParams, VehicleState,
};
use crate::synthesis::SynthesisSettings;

/// One vehicle of the configured platoon, with its initial `(p, v, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VehicleConfig {
    /// Nominal parameters; the true ones are drawn around them.
    Automated {
        initial: [f64; 3],
        #[serde(default = "VehicleParams::nominal")]
        nominal: VehicleParams,
    },
    Human {
        initial: [f64; 3],
        #[serde(default = "HvParams::reference")]
        params: HvParams,
    },
}

impl VehicleConfig {
    pub fn initial(&self) -> VehicleState {
        let [p, v, a] = match self {
            VehicleConfig::Automated { initial, .. } | VehicleConfig::Human { initial, .. } => {
                *initial
            }
        };
        VehicleState::new(p, v, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonConfig {
    pub h_star: f64,
    pub v_star: f64,
    pub t_s: f64,
    pub vehicles: Vec<VehicleConfig>,
}

/// Uniform relative deviation of every automated-vehicle parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Each parameter is scaled by `1 + U(−fraction, fraction)`.
    pub fraction: f64,
    /// Relative half-width of the parameter box the disturbance bound
    /// assumes around the nominal values.
    pub box_fraction: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            fraction: 0.1,
            box_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccConfig {
    pub k_p: f64,
    pub k_v: f64,
    /// Mass the controller assumes when converting acceleration to effort.
    pub nominal_mass: f64,
}

impl Default for AccConfig {
    fn default() -> Self {
        let g = AccGains::default();
        Self {
            k_p: g.k_p,
            k_v: g.k_v,
            nominal_mass: 1500.0,
        }
    }
}

impl AccConfig {
    pub fn gains(&self) -> AccGains {
        AccGains {
            k_p: self.k_p,
            k_v: self.k_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectionConfig {
    /// Number of sample intervals `T`.
    pub samples: usize,
    pub mode: CollectionMode,
    /// Half-width of the uniform probing noise (m/s²); zero disables it.
    pub dither_amplitude: f64,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            mode: CollectionMode::HighFidelity,
            dither_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// `time_s,speed_mps` CSV; the bundled US06 cycle when absent.
    pub file: Option<PathBuf>,
    pub hold_duration: f64,
    pub hold_speed: f64,
    pub ramp: f64,
    pub unit: SpeedUnit,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        let d = DriveCycleOptions::default();
        Self {
            file: None,
            hold_duration: d.hold_duration,
            hold_speed: d.hold_speed,
            ramp: d.ramp,
            unit: d.unit,
        }
    }
}

impl ProfileConfig {
    pub fn options(&self) -> DriveCycleOptions {
        DriveCycleOptions {
            hold_duration: self.hold_duration,
            hold_speed: self.hold_speed,
            ramp: self.ramp,
            unit: self.unit,
        }
    }

    pub fn load(&self) -> Result<ReferenceProfile, ExperimentError> {
        Ok(match &self.file {
            Some(path) => load_drive_cycle(path, &self.options())?,
            None => us06(&self.options())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// One controller per entry; a size of at least `n` is monolithic.
    /// Empty means a single monolithic controller.
    pub max_subplatoon_sizes: Vec<usize>,
    /// Replaces the computed disturbance bound.
    pub delta_override: Option<f64>,
    /// Multiplies `δ` of every sub-platoon that does not contain the head.
    pub boundary_delta_factor: f64,
    pub solver: SynthesisSettings,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            max_subplatoon_sizes: Vec::new(),
            delta_override: None,
            boundary_delta_factor: 1.0,
            solver: SynthesisSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Start of the metrics window (s); the end of the hold when absent.
    pub window_start: Option<f64>,
    /// Symmetric effort limit for the learned controller (N). Exploratory.
    pub clamp: Option<f64>,
}

/// Everything one experiment needs. All defaults are embedded, so an empty
/// file plus a platoon section is a complete configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Drives the parameter draw; the dither uses `seed + 1`.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Solve sub-platoons and simulate controllers on separate threads.
    #[serde(default)]
    pub parallel: bool,
    pub platoon: PlatoonConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub acc: AccConfig,
    #[serde(default)]
    pub collection: CollectionConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Four automated vehicles, monolithic and pairwise controllers.
    pub fn case1() -> Self {
        let av = |p: f64, v: f64| VehicleConfig::Automated {
            initial: [p, v, 0.0],
            nominal: VehicleParams::nominal(),
        };
        Self {
            name: "case1".into(),
            seed: default_seed(),
            output_dir: PathBuf::from("out/case1"),
            parallel: false,
            platoon: PlatoonConfig {
                h_star: 20.0,
                v_star: 20.0,
                t_s: 0.05,
                vehicles: vec![
                    av(65.0, 20.0),
                    av(40.0, 15.0),
                    av(25.0, 18.0),
                    av(0.0, 15.0),
                ],
            },
            perturbation: PerturbationConfig::default(),
            acc: AccConfig::default(),
            collection: CollectionConfig::default(),
            profile: ProfileConfig::default(),
            synthesis: SynthesisConfig {
                max_subplatoon_sizes: vec![4, 2],
                ..Default::default()
            },
            evaluation: EvaluationConfig::default(),
        }
    }

    /// Automated, human-driven, automated; one monolithic controller.
    pub fn case2() -> Self {
        let mut c = Self::case1();
        c.name = "case2".into();
        c.output_dir = PathBuf::from("out/case2");
        c.platoon.vehicles = vec![
            VehicleConfig::Automated {
                initial: [45.0, 20.0, 0.0],
                nominal: VehicleParams::nominal(),
            },
            VehicleConfig::Human {
                initial: [20.0, 15.0, 0.0],
                params: HvParams::reference(),
            },
            VehicleConfig::Automated {
                initial: [0.0, 20.0, 0.0],
                nominal: VehicleParams::nominal(),
            },
        ];
        c.synthesis.max_subplatoon_sizes = vec![3];
        c
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let c: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.platoon.vehicles.is_empty() {
            return bad("the platoon has no vehicles".into());
        }
        if self.collection.samples < 1 {
            return bad("collection.samples must be at least 1".into());
        }
        if self.collection.dither_amplitude.is_nan() || self.collection.dither_amplitude < 0.0 {
            return bad("collection.dither_amplitude must be nonnegative".into());
        }
        let p = &self.perturbation;
        if !((0.0..1.0).contains(&p.fraction) && (0.0..1.0).contains(&p.box_fraction)) {
            return bad("perturbation fractions must lie in [0, 1)".into());
        }
        if p.fraction > p.box_fraction {
            return bad(
                "perturbation.fraction exceeds box_fraction; the disturbance bound would not hold"
                    .into(),
            );
        }
        if self.synthesis.max_subplatoon_sizes.contains(&0) {
            return bad("synthesis.max_subplatoon_sizes must be positive".into());
        }
        if self.synthesis.boundary_delta_factor.is_nan()
            || self.synthesis.boundary_delta_factor < 1.0
        {
            return bad("synthesis.boundary_delta_factor must be at least 1".into());
        }
        if let Some(d) = self.synthesis.delta_override {
            if !(d.is_finite() && d >= 0.0) {
                return bad(format!(
                    "synthesis.delta_override = {d} must be nonnegative"
                ));
            }
        }
        if let Some(path) = &self.profile.file {
            if !path.is_file() {
                return Err(ExperimentError::Io(format!(
                    "profile file {} does not exist",
                    path.display()
                )));
            }
        }
        if let Some(c) = self.evaluation.clamp {
            if c.is_nan() || c <= 0.0 {
                return bad("evaluation.clamp must be positive".into());
            }
        }
        // Structural checks on the platoon itself.
        self.nominal_spec()?;
        Ok(())
    }

    fn nominal_spec(&self) -> Result<PlatoonSpec, ExperimentError> {
        let vehicles = self
            .platoon
            .vehicles
            .iter()
            .map(|v| match v {
                VehicleConfig::Automated { nominal, .. } => Vehicle::Automated(*nominal),
                VehicleConfig::Human { params, .. } => Vehicle::Human(*params),
            })
            .collect();
        let p = &self.platoon;
        Ok(PlatoonSpec::new(vehicles, p.h_star, p.v_star, p.t_s)?)
    }

    /// Draws the true parameters and fixes every derived quantity.
    pub fn resolve(&self) -> Result<ResolvedExperiment, ExperimentError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let f = self.perturbation.fraction;
        let mut vehicles = Vec::with_capacity(self.platoon.vehicles.len());
        let mut boxes = Vec::with_capacity(self.platoon.vehicles.len());
        for v in &self.platoon.vehicles {
            match v {
                VehicleConfig::Automated { nominal, .. } => {
                    let factors: [f64; 6] =
                        std::array::from_fn(|_| 1.0 + f * rng.random_range(-1.0..=1.0));
                    vehicles.push(Vehicle::Automated(nominal.scaled(factors)?));
                    boxes.push(VehicleBox::Automated(ParamBox::relative(
                        *nominal,
                        self.perturbation.box_fraction,
                    )?));
                }
                VehicleConfig::Human { params, .. } => {
                    vehicles.push(Vehicle::Human(*params));
                    boxes.push(VehicleBox::Human(HvBox::exact(*params)));
                }
            }
        }
        let p = &self.platoon;
        let spec = PlatoonSpec::new(vehicles, p.h_star, p.v_star, p.t_s)?;
        Ok(ResolvedExperiment {
            config: self.clone(),
            initial: self
                .platoon
                .vehicles
                .iter()
                .map(VehicleConfig::initial)
                .collect(),
            spec,
            boxes,
        })
    }
}

/// A configuration with its parameter draw applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub spec: PlatoonSpec,
    pub boxes: Vec<VehicleBox>,
    pub initial: Vec<VehicleState>,
}

impl ResolvedExperiment {
    pub fn collection_options(&self) -> CollectionOptions {
        let c = &self.config;
        CollectionOptions {
            mode: c.collection.mode,
            samples: c.collection.samples,
            gains: c.acc.gains(),
            nominal_mass: c.acc.nominal_mass,
            dither: (c.collection.dither_amplitude > 0.0).then_some(Dither {
                amplitude: c.collection.dither_amplitude,
                seed: c.seed.wrapping_add(1),
            }),
        }
    }

    pub fn window_start(&self) -> f64 {
        self.config
            .evaluation
            .window_start
            .unwrap_or(self.config.profile.hold_duration)
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::simulate::{ControlFault, PlatoonController};
use crate::dynamics::PlatoonSpec;

/// Constant-gap PD law acting on spacing error and relative velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccGains {
    pub k_p: f64,
    pub k_v: f64,
}

impl Default for AccGains {
    fn default() -> Self {
        Self {
            k_p: 0.23,
            k_v: 0.74,
        }
    }
}

impl AccGains {
    /// Commanded acceleration for spacing error `h_err` and relative
    /// velocity `v_pred - v`.
    pub fn command(&self, h_err: f64, relative_velocity: f64) -> f64 {
        self.k_p * h_err + self.k_v * relative_velocity
    }

    pub fn is_degenerate(&self) -> bool {
        self.k_p == 0.0 && self.k_v == 0.0
    }
}

/// Zero-mean uniform probing noise added to the ACC effort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dither {
    /// Half-width of the noise as an acceleration (m/s²); the effort noise
    /// is this times the nominal mass.
    pub amplitude: f64,
    pub seed: u64,
}

/// ACC for every automated vehicle. Effort is `m_nom · a_cmd`, plus dither.
#[derive(Debug, Clone)]
pub struct AccController {
    gains: AccGains,
    nominal_mass: f64,
    av_indices: Vec<usize>,
    dither: Option<(f64, ChaCha8Rng)>,
}

impl AccController {
    pub fn new(
        spec: &PlatoonSpec,
        gains: AccGains,
        nominal_mass: f64,
        dither: Option<Dither>,
    ) -> Self {
        Self {
            gains,
            nominal_mass,
            av_indices: spec.av_indices(),
            dither: dither
                .filter(|d| d.amplitude > 0.0)
                .map(|d| (d.amplitude, ChaCha8Rng::seed_from_u64(d.seed))),
        }
    }

    pub fn gains(&self) -> AccGains {
        self.gains
    }
}

impl PlatoonController for AccController {
    fn control(&mut self, _step: usize, x: &[f64], out: &mut [f64]) -> Result<(), ControlFault> {
        for (slot, &i) in out.iter_mut().zip(&self.av_indices) {
            let v_pred = if i == 0 { 0.0 } else { x[3 * (i - 1) + 1] };
            let a_cmd = self.gains.command(x[3 * i], v_pred - x[3 * i + 1]);
            let mut u = self.nominal_mass * a_cmd;
            if let Some((amp, rng)) = self.dither.as_mut() {
                u += *amp * self.nominal_mass * rng.random_range(-1.0..=1.0);
            }
            if !u.is_finite() {
                return Err(ControlFault { vehicle: i });
            }
            *slot = u;
        }
        Ok(())
    }
}

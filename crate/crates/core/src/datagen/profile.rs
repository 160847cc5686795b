use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

const US06_CSV: &str = include_str!("../../data/us06.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Each sample's speed holds until the next sample.
    ZeroOrderHold,
    #[default]
    Linear,
}

/// Desired platoon speed over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    times: Vec<f64>,
    speeds: Vec<f64>,
    mode: Interpolation,
    /// Integral of speed from 0 to each sample time.
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl ReferenceProfile {
    pub fn new(times: Vec<f64>, speeds: Vec<f64>, mode: Interpolation) -> Result<Self, DataError> {
        if times.is_empty() || times.len() != speeds.len() {
            return Err(DataError::Validation(format!(
                "profile needs matching nonempty time/speed columns, got {} and {}",
                times.len(),
                speeds.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(DataError::Validation(format!(
                "profile must start at t = 0, starts at {}",
                times[0]
            )));
        }
        if let Some(k) = times.windows(2).position(|w| w[1].is_nan() || w[1] <= w[0]) {
            return Err(DataError::Validation(format!(
                "profile times must increase strictly (sample {} at t = {})",
                k + 1,
                times[k + 1]
            )));
        }
        if let Some(s) = speeds.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(DataError::Validation(format!(
                "profile speed {s} is negative or not finite"
            )));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for k in 1..times.len() {
            let dt = times[k] - times[k - 1];
            let area = match mode {
                Interpolation::ZeroOrderHold => speeds[k - 1] * dt,
                Interpolation::Linear => 0.5 * (speeds[k - 1] + speeds[k]) * dt,
            };
            cumulative.push(cumulative[k - 1] + area);
        }
        Ok(Self {
            times,
            speeds,
            mode,
            cumulative,
        })
    }

    /// Constant speed over `[0, duration]`.
    pub fn constant(speed: f64, duration: f64) -> Result<Self, DataError> {
        Self::new(
            vec![0.0, duration],
            vec![speed, speed],
            Interpolation::Linear,
        )
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn mode(&self) -> Interpolation {
        self.mode
    }

    pub fn peak_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0f64, |m, &s| m.max(s))
    }

    /// Index `k` with `times[k] <= t < times[k+1]`, clamped to the last interval.
    fn segment(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.times.len().saturating_sub(2))
    }

    /// Speed at `t`; held at the end values outside the profile.
    pub fn speed_at(&self, t: f64) -> f64 {
        if self.times.len() == 1 || t <= 0.0 {
            return self.speeds[0];
        }
        if t >= self.duration() {
            return *self.speeds.last().expect("nonempty");
        }
        let k = self.segment(t);
        match self.mode {
            Interpolation::ZeroOrderHold => self.speeds[k],
            Interpolation::Linear => {
                let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
                self.speeds[k] + s * (self.speeds[k + 1] - self.speeds[k])
            }
        }
    }

    /// Distance covered by the reference between 0 and `t`.
    pub fn position_at(&self, t: f64) -> Result<f64, DataError> {
        const SLACK: f64 = 1e-9;
        if !(t >= -SLACK && t <= self.duration() + SLACK) {
            return Err(DataError::Validation(format!(
                "t = {t} outside profile [0, {}]",
                self.duration()
            )));
        }
        let t = t.clamp(0.0, self.duration());
        if self.times.len() == 1 {
            return Ok(0.0);
        }
        let k = self.segment(t);
        let dt = t - self.times[k];
        let area = match self.mode {
            Interpolation::ZeroOrderHold => self.speeds[k] * dt,
            Interpolation::Linear => 0.5 * (self.speeds[k] + self.speed_at(t)) * dt,
        };
        Ok(self.cumulative[k] + area)
    }

    /// Restores the integral table after deserialization.
    pub fn rebuild(self) -> Result<Self, DataError> {
        Self::new(self.times, self.speeds, self.mode)
    }
}

/// Position of the virtual vehicle the platoon head follows, relative to
/// its starting point.
pub fn virtual_leader_position(profile: &ReferenceProfile, t: f64) -> Result<f64, DataError> {
    profile.position_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedUnit {
    #[default]
    MetersPerSecond,
    KilometersPerHour,
    MilesPerHour,
}

impl SpeedUnit {
    pub fn to_mps(self, value: f64) -> f64 {
        match self {
            SpeedUnit::MetersPerSecond => value,
            SpeedUnit::KilometersPerHour => value / 3.6,
            SpeedUnit::MilesPerHour => value * 0.447_04,
        }
    }
}

/// How a drive cycle is placed after the constant-speed lead-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCycleOptions {
    /// Length of the constant-speed segment before the cycle starts (s).
    pub hold_duration: f64,
    pub hold_speed: f64,
    /// Final part of the hold over which speed blends linearly into the
    /// cycle's first sample (s). Positive; clipped to the hold duration.
    pub ramp: f64,
    /// Unit of the speed column.
    pub unit: SpeedUnit,
}

impl Default for DriveCycleOptions {
    fn default() -> Self {
        Self {
            hold_duration: 75.0,
            hold_speed: 20.0,
            ramp: 10.0,
            unit: SpeedUnit::MetersPerSecond,
        }
    }
}

pub fn load_drive_cycle(
    path: &Path,
    options: &DriveCycleOptions,
) -> Result<ReferenceProfile, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    parse_drive_cycle(&text, options)
}

/// The bundled SFTP-US06 cycle (600 s at 1 Hz).
pub fn us06(options: &DriveCycleOptions) -> Result<ReferenceProfile, DataError> {
    parse_drive_cycle(US06_CSV, options)
}

/// Parses `time_s,speed_mps` CSV text and prepends the hold segment.
pub fn parse_drive_cycle(
    text: &str,
    options: &DriveCycleOptions,
) -> Result<ReferenceProfile, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "speed_mps" {
        return Err(DataError::Parse {
            line: 1,
            message: format!(
                "expected header 'time_s,speed_mps', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut cycle_t = Vec::new();
    let mut cycle_v = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64, DataError> {
            record
                .get(i)
                .ok_or_else(|| DataError::Parse {
                    line,
                    message: "expected 2 fields".into(),
                })?
                .parse::<f64>()
                .map_err(|e| DataError::Parse {
                    line,
                    message: format!("'{}': {e}", &record[i]),
                })
        };
        if record.len() != 2 {
            return Err(DataError::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        cycle_t.push(field(0)?);
        cycle_v.push(options.unit.to_mps(field(1)?));
    }
    if cycle_t.is_empty() {
        return Err(DataError::Validation("drive cycle has no samples".into()));
    }
    if let Some(k) = cycle_t
        .windows(2)
        .position(|w| w[1].is_nan() || w[1] <= w[0])
    {
        return Err(DataError::Validation(format!(
            "drive cycle time is not strictly increasing at data row {} (t = {})",
            k + 2,
            cycle_t[k + 1]
        )));
    }
    let t0 = cycle_t[0];
    let hold = options.hold_duration;
    if !(hold.is_finite() && hold >= 0.0) {
        return Err(DataError::Validation(format!(
            "hold duration {hold} must be nonnegative"
        )));
    }
    let mut times = Vec::with_capacity(cycle_t.len() + 2);
    let mut speeds = Vec::with_capacity(cycle_t.len() + 2);
    if hold > 0.0 {
        if !(options.ramp.is_finite() && options.ramp > 0.0) {
            return Err(DataError::Validation(
                "ramp must be positive when a hold is present".into(),
            ));
        }
        let ramp = options.ramp.min(hold);
        times.push(0.0);
        speeds.push(options.hold_speed);
        if ramp < hold {
            times.push(hold - ramp);
            speeds.push(options.hold_speed);
        }
    }
    for (&t, &v) in cycle_t.iter().zip(&cycle_v) {
        times.push(hold + (t - t0));
        speeds.push(v);
    }
    ReferenceProfile::new(times, speeds, Interpolation::Linear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_integral() {
        let p = ReferenceProfile::constant(20.0, 100.0).unwrap();
        assert_relative_eq!(virtual_leader_position(&p, 75.0).unwrap(), 1500.0);
        assert_eq!(virtual_leader_position(&p, 0.0).unwrap(), 0.0);
        assert!(virtual_leader_position(&p, 101.0).is_err());
    }

    #[test]
    fn piecewise_zoh_integral() {
        let p = ReferenceProfile::new(
            vec![0.0, 10.0, 20.0],
            vec![10.0, 20.0, 20.0],
            Interpolation::ZeroOrderHold,
        )
        .unwrap();
        assert_relative_eq!(virtual_leader_position(&p, 20.0).unwrap(), 300.0);
        assert_relative_eq!(virtual_leader_position(&p, 15.0).unwrap(), 200.0);
        assert_eq!(p.speed_at(9.99), 10.0);
    }

    #[test]
    fn linear_integral_is_trapezoid() {
        let p =
            ReferenceProfile::new(vec![0.0, 10.0], vec![0.0, 10.0], Interpolation::Linear).unwrap();
        assert_relative_eq!(p.position_at(10.0).unwrap(), 50.0);
        assert_relative_eq!(p.position_at(5.0).unwrap(), 12.5);
        assert_relative_eq!(p.speed_at(2.5), 2.5);
    }

    #[test]
    fn invalid_profiles() {
        assert!(
            ReferenceProfile::new(vec![0.0, 0.0], vec![1.0, 1.0], Interpolation::Linear).is_err()
        );
        assert!(
            ReferenceProfile::new(vec![0.0, 1.0], vec![1.0, -1.0], Interpolation::Linear).is_err()
        );
        assert!(ReferenceProfile::new(vec![], vec![], Interpolation::Linear).is_err());
    }

    #[test]
    fn two_row_cycle_with_hold() {
        let p = parse_drive_cycle(
            "time_s,speed_mps\n0,20\n10,20\n",
            &DriveCycleOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(p.duration(), 85.0);
        for t in [0.0, 10.0, 72.0, 80.0, 85.0] {
            assert_eq!(p.speed_at(t), 20.0);
        }
    }

    #[test]
    fn ramp_blends_into_cycle() {
        let p = parse_drive_cycle(
            "time_s,speed_mps\n0,0\n10,10\n",
            &DriveCycleOptions::default(),
        )
        .unwrap();
        assert_eq!(p.speed_at(65.0), 20.0);
        assert_relative_eq!(p.speed_at(70.0), 10.0);
        assert_eq!(p.speed_at(75.0), 0.0);
    }

    #[test]
    fn unit_conversion() {
        let opts = DriveCycleOptions {
            hold_duration: 0.0,
            unit: SpeedUnit::KilometersPerHour,
            ..Default::default()
        };
        let p = parse_drive_cycle("time_s,speed_mps\n0,36\n1,72\n", &opts).unwrap();
        assert_relative_eq!(p.speed_at(0.0), 10.0);
        assert_relative_eq!(p.speed_at(1.0), 20.0);
    }

    #[test]
    fn malformed_inputs() {
        let opts = DriveCycleOptions::default();
        assert!(matches!(
            parse_drive_cycle("0,20\n10,20\n", &opts),
            Err(DataError::Parse { line: 1, .. })
        ));
        match parse_drive_cycle("time_s,speed_mps\n0,20\n1,abc\n", &opts) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_drive_cycle("time_s,speed_mps\n0,20\n0,20\n", &opts),
            Err(DataError::Validation(_))
        ));
    }

    #[test]
    fn bundled_us06() {
        let p = us06(&DriveCycleOptions {
            hold_duration: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_relative_eq!(p.duration(), 600.0);
        assert!((p.peak_speed() * 3.6 - 129.2).abs() < 0.5);
    }
}

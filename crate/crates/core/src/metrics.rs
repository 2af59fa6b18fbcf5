//! Drive power, locomotion efficiency, cost of transport, and the two error
//! statistics used to compare simulated and measured velocity grids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::ActuationPattern;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("power must be positive to compute efficiency")]
    ZeroPower,
    #[error("cost of transport is undefined at zero velocity")]
    ZeroVelocity,
    #[error("mass and gravity must be positive")]
    NonPositiveLoad,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series are empty")]
    Empty,
    #[error("a series has zero variance")]
    DegenerateSeries,
}

/// Drive-stage power as an affine function of the summed duty ratios.
///
/// Computation/telemetry power is tracked separately and is not part of the
/// stage power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// W
    pub stage_quiescent: f64,
    /// W per unit of (D_L + D_R)
    pub per_duty_slope: f64,
    /// W
    pub compute_power: f64,
    /// V
    pub battery_voltage: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            stage_quiescent: 0.0,
            per_duty_slope: 0.5111,
            compute_power: 0.740,
            battery_voltage: 7.4,
        }
    }
}

impl PowerModel {
    pub fn is_valid(&self) -> bool {
        [
            self.stage_quiescent,
            self.per_duty_slope,
            self.compute_power,
            self.battery_voltage,
        ]
        .iter()
        .all(|x| *x >= 0.0 && x.is_finite())
    }

    /// Stage power recovered from a measured average battery current.
    pub fn stage_power_from_current(&self, current_a: f64) -> f64 {
        current_a * self.battery_voltage - self.compute_power
    }
}

pub fn stage_power(pattern: &ActuationPattern, pm: &PowerModel) -> f64 {
    pm.stage_quiescent + pm.per_duty_slope * (pattern.duty_left + pattern.duty_right)
}

/// Locomotion efficiency in cm/s per W.
pub fn efficiency(velocity: f64, power: f64) -> Result<f64, MetricsError> {
    if !(power > 0.0) {
        return Err(MetricsError::ZeroPower);
    }
    Ok(100.0 * velocity.abs() / power)
}

/// `P / (m g |v|)`.
pub fn cost_of_transport(
    power: f64,
    mass: f64,
    velocity: f64,
    gravity: f64,
) -> Result<f64, MetricsError> {
    if !(mass > 0.0 && gravity > 0.0) {
        return Err(MetricsError::NonPositiveLoad);
    }
    if velocity == 0.0 {
        return Err(MetricsError::ZeroVelocity);
    }
    Ok(power / (mass * gravity * velocity.abs()))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Root-mean-square difference of two equal-length series.
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / x.len() as f64).sqrt())
}

/// Pearson correlation coefficient of two equal-length series.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    if x.len() < 2 {
        return Err(MetricsError::DegenerateSeries);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::DegenerateSeries);
    }
    // rounding can push |r| a hair past 1 for perfectly linear data
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

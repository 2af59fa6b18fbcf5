//! Two-channel square-wave drive patterns.
//!
//! Both channels share one frequency. The left channel rises at the start of
//! every period; the right channel is the same kind of pulse train delayed by
//! `phase_deg / 360` of a period. Edges are linear ramps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest drive frequency the onboard driver supports, Hz.
pub const MAX_FREQUENCY_HZ: f64 = 30.0;

#[derive(Debug, Error, PartialEq)]
pub enum ActuationError {
    #[error("{field} = {value} is out of range ({rule})")]
    InvalidRange {
        field: &'static str,
        value: f64,
        rule: &'static str,
    },
    #[error("grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Left,
    Right,
}

impl Channel {
    /// Channel wired to actuator `index`; actuators past the second are not driven.
    pub fn for_actuator(index: usize) -> Option<Self> {
        match index {
            0 => Some(Channel::Left),
            1 => Some(Channel::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuationPattern {
    pub frequency: f64,
    pub phase_deg: f64,
    pub duty_left: f64,
    pub duty_right: f64,
    pub v_high: f64,
    pub rise_time: f64,
    pub fall_time: f64,
}

impl Default for ActuationPattern {
    fn default() -> Self {
        Self {
            frequency: 16.0,
            phase_deg: 0.0,
            duty_left: 0.0,
            duty_right: 0.0,
            v_high: 300.0,
            rise_time: 0.002,
            fall_time: 0.002,
        }
    }
}

impl ActuationPattern {
    pub fn new(frequency: f64, phase_deg: f64, duty_left: f64, duty_right: f64) -> Self {
        Self {
            frequency,
            phase_deg,
            duty_left,
            duty_right,
            ..Self::default()
        }
    }

    pub fn left_only(frequency: f64, duty: f64) -> Self {
        Self::new(frequency, 0.0, duty, 0.0)
    }

    pub fn right_only(frequency: f64, duty: f64) -> Self {
        Self::new(frequency, 0.0, 0.0, duty)
    }

    /// Ideal square wave: zero rise and fall time.
    pub fn ideal(mut self) -> Self {
        self.rise_time = 0.0;
        self.fall_time = 0.0;
        self
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn duty(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Left => self.duty_left,
            Channel::Right => self.duty_right,
        }
    }

    /// Rising-edge delay of `channel` relative to the left channel, s.
    pub fn edge_offset(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Left => 0.0,
            Channel::Right => self.phase_deg / 360.0 * self.period(),
        }
    }

    /// Pattern for the robot reflected about its midpoint: channels swap and
    /// the right-lags-left phase changes sign.
    pub fn mirrored(&self) -> Self {
        Self {
            duty_left: self.duty_right,
            duty_right: self.duty_left,
            phase_deg: (360.0 - self.phase_deg).rem_euclid(360.0),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ActuationError> {
        let check = |ok: bool, field, value, rule| {
            if ok {
                Ok(())
            } else {
                Err(ActuationError::InvalidRange { field, value, rule })
            }
        };
        check(
            self.frequency > 0.0 && self.frequency <= MAX_FREQUENCY_HZ,
            "frequency",
            self.frequency,
            "0 < f ≤ 30 Hz",
        )?;
        check(
            (0.0..360.0).contains(&self.phase_deg),
            "phase_deg",
            self.phase_deg,
            "0 ≤ phase < 360",
        )?;
        check(
            (0.0..=1.0).contains(&self.duty_left),
            "duty_left",
            self.duty_left,
            "0 ≤ duty ≤ 1",
        )?;
        check(
            (0.0..=1.0).contains(&self.duty_right),
            "duty_right",
            self.duty_right,
            "0 ≤ duty ≤ 1",
        )?;
        check(
            self.v_high >= 0.0 && self.v_high.is_finite(),
            "v_high",
            self.v_high,
            "v_high ≥ 0",
        )?;
        check(
            self.rise_time >= 0.0,
            "rise_time",
            self.rise_time,
            "rise_time ≥ 0",
        )?;
        check(
            self.fall_time >= 0.0,
            "fall_time",
            self.fall_time,
            "fall_time ≥ 0",
        )
    }

    /// Drive voltage on `channel` at time `t` (s, `t ≥ 0`).
    pub fn voltage_at(&self, channel: Channel, t: f64) -> f64 {
        let duty = self.duty(channel);
        if duty <= 0.0 {
            return 0.0;
        }
        if duty >= 1.0 {
            return self.v_high;
        }
        let period = self.period();
        let tau = (t - self.edge_offset(channel)).rem_euclid(period);
        let current = self.pulse(tau, duty * period);
        // A fall ramp may spill past the end of the period into the next one.
        let tail = self.pulse(tau + period, duty * period);
        current.max(tail)
    }

    /// One pulse that rises at 0 and starts falling at `high`, evaluated at `tau`.
    fn pulse(&self, tau: f64, high: f64) -> f64 {
        let v = self.v_high;
        // Rise is clipped at the falling edge, giving a triangle when high < rise_time.
        let peak = if self.rise_time > high {
            v * high / self.rise_time
        } else {
            v
        };
        if tau < high {
            if tau < self.rise_time {
                v * tau / self.rise_time
            } else {
                v
            }
        } else {
            let since = tau - high;
            if self.fall_time <= 0.0 {
                0.0
            } else {
                (peak - v * since / self.fall_time).max(0.0)
            }
        }
    }

    /// Cycle-averaged drive voltage on `channel`, ignoring ramp overlap
    /// across period boundaries.
    pub fn mean_voltage(&self, channel: Channel) -> f64 {
        let duty = self.duty(channel);
        if duty <= 0.0 {
            return 0.0;
        }
        if duty >= 1.0 {
            return self.v_high;
        }
        let period = self.period();
        let high = duty * period;
        let v = self.v_high;
        let area = if self.rise_time <= high {
            v * (high - self.rise_time) + 0.5 * v * self.rise_time + 0.5 * v * self.fall_time
        } else {
            let peak = v * high / self.rise_time;
            0.5 * peak * high + 0.5 * peak * (peak / v) * self.fall_time
        };
        area / period
    }
}

/// Axis values for a sweep over actuation patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub freqs: Vec<f64>,
    pub phases: Vec<f64>,
    pub duties_left: Vec<f64>,
    pub duties_right: Vec<f64>,
}

impl GridAxes {
    pub fn len(&self) -> usize {
        self.freqs.len() * self.phases.len() * self.duties_left.len() * self.duties_right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patterns(
        &self,
        template: &ActuationPattern,
    ) -> Result<Vec<ActuationPattern>, ActuationError> {
        pattern_grid_from(
            &self.freqs,
            &self.phases,
            &self.duties_left,
            &self.duties_right,
            template,
        )
    }
}

/// Cartesian product of the axes in lexicographic (f, Φ, D_L, D_R) order.
pub fn pattern_grid(
    freqs: &[f64],
    phases: &[f64],
    duties_left: &[f64],
    duties_right: &[f64],
) -> Result<Vec<ActuationPattern>, ActuationError> {
    pattern_grid_from(
        freqs,
        phases,
        duties_left,
        duties_right,
        &ActuationPattern::default(),
    )
}

/// [`pattern_grid`] with voltage level and ramps taken from `template`.
pub fn pattern_grid_from(
    freqs: &[f64],
    phases: &[f64],
    duties_left: &[f64],
    duties_right: &[f64],
    template: &ActuationPattern,
) -> Result<Vec<ActuationPattern>, ActuationError> {
    for (name, axis) in [
        ("freqs", freqs),
        ("phases", phases),
        ("duties_left", duties_left),
        ("duties_right", duties_right),
    ] {
        if axis.is_empty() {
            return Err(ActuationError::EmptyAxis(name));
        }
    }
    let mut out =
        Vec::with_capacity(freqs.len() * phases.len() * duties_left.len() * duties_right.len());
    for &frequency in freqs {
        for &phase_deg in phases {
            for &duty_left in duties_left {
                for &duty_right in duties_right {
                    let p = ActuationPattern {
                        frequency,
                        phase_deg,
                        duty_left,
                        duty_right,
                        ..*template
                    };
                    p.validate()?;
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn left_channel_square_wave() {
        let p = ActuationPattern::new(10.0, 0.0, 0.6, 0.0).ideal();
        assert_eq!(p.voltage_at(Channel::Left, 0.05), 300.0);
        assert_eq!(p.voltage_at(Channel::Left, 0.07), 0.0);
        // default ramps do not reach the mid-pulse sample
        let ramped = ActuationPattern::new(10.0, 0.0, 0.6, 0.0);
        assert_eq!(ramped.voltage_at(Channel::Left, 0.05), 300.0);
    }

    #[test]
    fn right_edge_offset() {
        let p = ActuationPattern::new(16.0, 72.0, 0.0, 0.3).ideal();
        let offset = p.edge_offset(Channel::Right);
        assert!((offset - 0.0125).abs() < 1e-15);
        assert_eq!(p.voltage_at(Channel::Right, 0.0124), 0.0);
        assert_eq!(p.voltage_at(Channel::Right, 0.0126), 300.0);
    }

    #[test]
    fn degenerate_duties() {
        let zero = ActuationPattern::new(12.0, 0.0, 0.0, 1.0);
        for i in 0..1000 {
            let t = i as f64 * 1.3e-3;
            assert_eq!(zero.voltage_at(Channel::Left, t), 0.0);
            assert_eq!(zero.voltage_at(Channel::Right, t), 300.0);
        }
    }

    #[test]
    fn ramps_are_linear_and_triangular_when_short() {
        let p = ActuationPattern::new(10.0, 0.0, 0.5, 0.0);
        assert!((p.voltage_at(Channel::Left, 0.001) - 150.0).abs() < 1e-9);
        assert!((p.voltage_at(Channel::Left, 0.051) - 150.0).abs() < 1e-9);
        // 1 ms high time with 2 ms rise: peaks at half voltage
        let tri = ActuationPattern::new(10.0, 0.0, 0.01, 0.0);
        assert!((tri.voltage_at(Channel::Left, 0.001) - 150.0).abs() < 1e-9);
        assert!((tri.voltage_at(Channel::Left, 0.0015) - 75.0).abs() < 1e-9);
        assert_eq!(tri.voltage_at(Channel::Left, 0.0021), 0.0);
    }

    #[test]
    fn fall_tail_wraps_into_next_period() {
        let p = ActuationPattern::new(10.0, 0.0, 0.99, 0.0);
        // falling edge at 0.099, 2 ms fall: still 50% high at 0.1 + 0.0 (start of next period)
        assert!((p.voltage_at(Channel::Left, 0.1) - 150.0).abs() < 1e-6);
    }

    #[test]
    fn grid_order_and_size() {
        let freqs = linspace_step(8.0, 26.0, 2.0);
        let phases = linspace_step(0.0, 324.0, 36.0);
        let duties = linspace_step(0.0, 0.9, 0.1);
        assert_eq!((freqs.len(), phases.len(), duties.len()), (10, 10, 10));
        assert_eq!(
            pattern_grid(&freqs, &phases, &duties, &duties)
                .unwrap()
                .len(),
            10_000
        );

        assert_eq!(
            pattern_grid(&[16.0], &[0.0], &[0.6], &[0.0]).unwrap().len(),
            1
        );
        let g = pattern_grid(&[8.0, 26.0], &[0.0], &[0.5], &[0.5]).unwrap();
        assert_eq!(g[0].frequency, 8.0);
        assert_eq!(g[1].frequency, 26.0);

        let g = pattern_grid(&[10.0], &[0.0, 36.0], &[0.1, 0.2], &[0.3, 0.4]).unwrap();
        let keys: Vec<_> = g
            .iter()
            .map(|p| (p.phase_deg, p.duty_left, p.duty_right))
            .collect();
        assert_eq!(keys[1], (0.0, 0.1, 0.4));
        assert_eq!(keys[2], (0.0, 0.2, 0.3));
        assert_eq!(keys[4], (36.0, 0.1, 0.3));
    }

    #[test]
    fn grid_rejects_out_of_range() {
        assert!(matches!(
            pattern_grid(&[31.0], &[0.0], &[0.5], &[0.5]),
            Err(ActuationError::InvalidRange {
                field: "frequency",
                ..
            })
        ));
        assert!(pattern_grid(&[10.0], &[360.0], &[0.5], &[0.5]).is_err());
        assert!(pattern_grid(&[10.0], &[0.0], &[1.2], &[0.5]).is_err());
        assert_eq!(
            pattern_grid(&[], &[0.0], &[0.5], &[0.5]),
            Err(ActuationError::EmptyAxis("freqs"))
        );
    }

    #[test]
    fn mirrored_pattern() {
        let p = ActuationPattern::new(16.0, 72.0, 0.6, 0.3);
        let m = p.mirrored();
        assert_eq!((m.duty_left, m.duty_right, m.phase_deg), (0.3, 0.6, 288.0));
        assert_eq!(
            ActuationPattern::new(16.0, 0.0, 0.6, 0.0)
                .mirrored()
                .phase_deg,
            0.0
        );
        assert_eq!(m.mirrored(), p);
    }

    fn brute_mean(p: &ActuationPattern, ch: Channel) -> f64 {
        let n = 200_000;
        let period = p.period();
        // start one period in so the wrapped tail of the previous pulse is included
        (0..n)
            .map(|i| p.voltage_at(ch, period + (i as f64 + 0.5) / n as f64 * period))
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn mean_voltage_matches_sampling() {
        for duty in [0.005, 0.1, 0.45, 0.9] {
            let p = ActuationPattern::new(14.0, 0.0, duty, 0.0);
            assert!((p.mean_voltage(Channel::Left) - brute_mean(&p, Channel::Left)).abs() < 1e-2);
        }
    }

    proptest! {
        #[test]
        fn periodic(f in 1.0f64..30.0, d in 0.0f64..=1.0, phase in 0.0f64..360.0, k in 1.0f64..20.0, frac in 0.0f64..1.0) {
            let p = ActuationPattern::new(f, phase, d, d);
            let t = (k + frac) / f;
            for ch in [Channel::Left, Channel::Right] {
                let a = p.voltage_at(ch, t);
                let b = p.voltage_at(ch, t + p.period());
                // ramp slope × rounding of the folded time
                prop_assert!((a - b).abs() <= 1e-6);
                prop_assert!((0.0..=p.v_high).contains(&a));
            }
            let ideal = p.ideal();
            // away from edges the ideal wave repeats bit for bit
            let tau = frac / f;
            if (tau - d / f).abs() > 1e-9 && tau > 1e-9 {
                prop_assert_eq!(ideal.voltage_at(Channel::Left, t), ideal.voltage_at(Channel::Left, t + ideal.period()));
            }
        }

        #[test]
        fn zero_phase_channels_agree(f in 1.0f64..30.0, d in 0.0f64..=1.0, t in 0.0f64..5.0) {
            let p = ActuationPattern::new(f, 0.0, d, d);
            prop_assert_eq!(p.voltage_at(Channel::Left, t), p.voltage_at(Channel::Right, t));
        }

        #[test]
        fn ideal_mean_is_duty_times_level(f in 1.0f64..30.0, d in 0.0f64..=1.0, v in 1.0f64..1500.0) {
            let p = ActuationPattern { v_high: v, ..ActuationPattern::new(f, 0.0, d, 0.0).ideal() };
            let mean = p.mean_voltage(Channel::Left);
            prop_assert!((mean - d * v).abs() <= 1e-12 * (d * v).max(1e-300));
        }
    }
}

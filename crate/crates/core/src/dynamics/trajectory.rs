use std::io::{self, Write};

use super::contact::{contact_forces, ContactParams};
use super::integrator::Stepper;
use super::state::BodyState;
use super::{DynamicsError, IntegratorParams, Protocol};
use crate::actuation::ActuationPattern;
use crate::format::sig6;
use crate::robot::ChainModel;

/// Minimum number of whole drive periods in a velocity measurement window.
pub const MIN_WINDOW_PERIODS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootSample {
    /// World x of the ground contact point, m.
    pub x: f64,
    pub normal: f64,
    pub tangential: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub x_com: f64,
    pub z_com: f64,
    pub joint_angles: Vec<f64>,
    pub feet: Vec<FootSample>,
}

/// Samples recorded every `sample_stride` steps, starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub sample_stride: usize,
    /// Start of the velocity measurement window, s.
    pub measure_from: f64,
    pub samples: Vec<Sample>,
    /// Final full state.
    pub final_state: Option<BodyState>,
}

impl Trajectory {
    /// Trajectory built from a center-of-mass track alone.
    pub fn from_com_track(times: &[f64], x_com: &[f64], measure_from: f64) -> Self {
        let dt = if times.len() > 1 {
            times[1] - times[0]
        } else {
            0.0
        };
        Self {
            dt,
            sample_stride: 1,
            measure_from,
            samples: times
                .iter()
                .zip(x_com)
                .map(|(&time, &x)| Sample {
                    time,
                    x_com: x,
                    z_com: 0.0,
                    joint_angles: Vec::new(),
                    feet: Vec::new(),
                })
                .collect(),
            final_state: None,
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    /// Center-of-mass x at `t`, linear between samples.
    pub fn x_com_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        let idx = s.partition_point(|p| p.time <= t);
        if idx == 0 {
            return s[0].x_com;
        }
        if idx >= s.len() {
            return s[s.len() - 1].x_com;
        }
        let (a, b) = (&s[idx - 1], &s[idx]);
        let w = (t - a.time) / (b.time - a.time);
        a.x_com + w * (b.x_com - a.x_com)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let joints = self.samples.first().map_or(0, |s| s.joint_angles.len());
        let feet = self.samples.first().map_or(0, |s| s.feet.len());
        let mut header = vec!["t".to_string(), "x_com".into(), "z_com".into()];
        header.extend((1..=joints).map(|i| format!("theta_{i}")));
        for f in 1..=feet {
            header.push(format!("foot{f}_x"));
            header.push(format!("foot{f}_N"));
            header.push(format!("foot{f}_Ft"));
        }
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![sig6(s.time), sig6(s.x_com), sig6(s.z_com)];
            row.extend(s.joint_angles.iter().map(|&a| sig6(a)));
            for f in &s.feet {
                row.push(sig6(f.x));
                row.push(sig6(f.normal));
                row.push(sig6(f.tangential));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn sample(state: &BodyState, chain: &ChainModel, feet: impl Iterator<Item = FootSample>) -> Sample {
    let com = state.center_of_mass(chain);
    Sample {
        time: state.time,
        x_com: com[0],
        z_com: com[1],
        joint_angles: state.joint_angles(),
        feet: feet.collect(),
    }
}

/// Simulate the chain from rest on flat ground under `pattern` for the
/// whole protocol.
pub fn simulate(
    chain: &ChainModel,
    pattern: &ActuationPattern,
    protocol: &Protocol,
    integ: &IntegratorParams,
    contacts: &ContactParams,
) -> Result<Trajectory, DynamicsError> {
    integ.validate()?;
    pattern
        .validate()
        .map_err(|e| DynamicsError::InvalidInput(e.to_string()))?;
    if !contacts.is_valid() {
        return Err(DynamicsError::InvalidInput(
            "contact parameters must be ≥ 0".into(),
        ));
    }
    let steps = (protocol.duration() / integ.dt).round() as usize;
    let mut state = BodyState::resting(chain);
    let mut stepper = Stepper::new(chain, contacts, integ);

    let mut samples = Vec::with_capacity(steps / integ.sample_stride + 2);
    let initial = contact_forces(&state, chain, contacts);
    samples.push(sample(
        &state,
        chain,
        initial.iter().map(|f| FootSample {
            x: f.contact_x,
            normal: f.normal,
            tangential: f.tangential,
        }),
    ));

    for n in 1..=steps {
        stepper.advance(&mut state, pattern)?;
        // keep time on the step grid instead of accumulating rounding
        state.time = n as f64 * integ.dt;
        if n % integ.sample_stride == 0 || n == steps {
            let forces = stepper.last_foot_forces();
            samples.push(sample(
                &state,
                chain,
                forces.iter().map(|f| FootSample {
                    x: f.contact_x,
                    normal: f.normal,
                    tangential: f.tangential,
                }),
            ));
        }
    }

    Ok(Trajectory {
        dt: integ.dt,
        sample_stride: integ.sample_stride,
        measure_from: protocol.transient_s,
        samples,
        final_state: Some(state),
    })
}

/// Mean center-of-mass velocity over the largest whole number of drive
/// periods after `traj.measure_from`. Positive is leftward.
pub fn steady_state_velocity(
    traj: &Trajectory,
    pattern: &ActuationPattern,
) -> Result<f64, DynamicsError> {
    let period = pattern.period();
    let window = traj.duration() - traj.measure_from;
    let periods = (window / period + 1e-9).floor().max(0.0) as usize;
    if periods < MIN_WINDOW_PERIODS {
        return Err(DynamicsError::WindowTooShort {
            periods,
            required: MIN_WINDOW_PERIODS,
        });
    }
    let t0 = traj.measure_from;
    let t1 = t0 + periods as f64 * period;
    Ok((traj.x_com_at(t1) - traj.x_com_at(t0)) / (t1 - t0))
}

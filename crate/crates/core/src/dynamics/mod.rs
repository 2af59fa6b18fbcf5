//! Planar articulated-chain dynamics: spring-motor joints, gravity and
//! penalty ground contact with regularized Coulomb friction.

mod contact;
mod integrator;
mod state;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contact::{contact_forces, foot_kinematics, ContactParams, FootForce, FootKinematics};
pub use integrator::{step, Stepper};
pub use state::{perp, root_link, BodyState, Frame, LinkPose, Vec2};
pub use trajectory::{
    simulate, steady_state_velocity, FootSample, Sample, Trajectory, MIN_WINDOW_PERIODS,
};

use crate::actuation::Channel;
use crate::robot::{ChainModel, MaterialParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("numerical blowup at t = {time:.6} s; reduce the time step")]
    NumericalBlowup { time: f64 },
    #[error("contact forces did not converge at t = {time:.6} s; reduce the time step")]
    ContactNotConverged { time: f64 },
    #[error("measurement window covers {periods} periods; at least {required} needed")]
    WindowTooShort { periods: usize, required: usize },
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorParams {
    /// s
    pub dt: f64,
    /// m/s², acting along -z.
    pub gravity: f64,
    /// Steps between recorded trajectory samples.
    pub sample_stride: usize,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            gravity: 9.8,
            sample_stride: 10,
        }
    }
}

/// Largest step known to be stable with the default contact stiffness.
pub const MAX_STABLE_DT: f64 = 2e-4;

impl IntegratorParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::InvalidInput(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(DynamicsError::InvalidInput(
                "sample_stride must be ≥ 1".into(),
            ));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(DynamicsError::InvalidInput("gravity must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Warning text when `dt` exceeds the documented stability bound for
    /// the given contact stiffness.
    pub fn stability_warning(&self, contacts: &ContactParams) -> Option<String> {
        let stiff = contacts.normal_stiffness >= ContactParams::default().normal_stiffness;
        (stiff && self.dt > MAX_STABLE_DT).then(|| {
            format!(
                "dt = {} s exceeds the {} s stability bound for normal stiffness {} N/m",
                self.dt, MAX_STABLE_DT, contacts.normal_stiffness
            )
        })
    }
}

/// Simulated drive protocol: settle for `transient_s`, then measure for `measure_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub transient_s: f64,
    pub measure_s: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            transient_s: 5.0,
            measure_s: 5.0,
        }
    }
}

impl Protocol {
    pub fn duration(&self) -> f64 {
        self.transient_s + self.measure_s
    }
}

/// Joint torque: spring, damper and voltage drive.
pub fn joint_torque(theta: f64, omega: f64, volts: f64, materials: &MaterialParams) -> f64 {
    -materials.torsional_stiffness * theta - materials.joint_damping * omega
        + materials.voltage_torque_gain * volts
}

/// Joint angles at which the voltage torque balances the springs, ignoring
/// gravity and contact.
pub fn static_equilibrium(chain: &ChainModel, v_left: f64, v_right: f64) -> Vec<f64> {
    chain
        .joints
        .iter()
        .map(|j| {
            let volts = match Channel::for_actuator(j.channel) {
                Some(Channel::Left) => v_left,
                Some(Channel::Right) => v_right,
                None => 0.0,
            };
            j.voltage_gain * volts / j.stiffness
        })
        .collect()
}

/// Breakdown of the mechanical energy of a state, J.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub kinetic: f64,
    pub gravitational: f64,
    pub elastic: f64,
    pub contact: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravitational + self.elastic + self.contact
    }
}

/// Kinetic, gravitational, joint-spring and contact-penalty energy.
pub fn mechanical_energy(
    state: &BodyState,
    chain: &ChainModel,
    contacts: &ContactParams,
    gravity: f64,
) -> Energy {
    let frame = state.frame(chain);
    let mut e = Energy::default();
    let mut add_body = |host: usize, along: f64, up: f64, mass: f64, inertia: f64| {
        let r = frame.offset(host, along, up);
        let p = frame.point(host, r);
        let vel = frame.point_velocity(host, r, &state.v);
        let w = state.v[2 + host];
        e.kinetic += 0.5 * mass * (vel[0] * vel[0] + vel[1] * vel[1]) + 0.5 * inertia * w * w;
        e.gravitational += mass * gravity * p[1];
    };
    for (i, l) in chain.links.iter().enumerate() {
        add_body(i, l.length / 2.0, 0.0, l.mass, l.inertia);
    }
    for f in &chain.feet {
        add_body(f.host, f.along, -f.depth, f.mass, f.inertia);
    }
    for (theta, j) in state.joint_angles().iter().zip(&chain.joints) {
        e.elastic += 0.5 * j.stiffness * theta * theta;
    }
    for k in foot_kinematics(state, chain) {
        e.contact += 0.5 * contacts.normal_stiffness * k.penetration * k.penetration;
    }
    e
}

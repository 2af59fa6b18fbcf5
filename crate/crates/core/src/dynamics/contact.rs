//! Penalty ground contact with regularized Coulomb friction at the feet.

use serde::{Deserialize, Serialize};

use super::state::{BodyState, Frame};
use crate::robot::ChainModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// N/m
    pub normal_stiffness: f64,
    /// N·s/m
    pub normal_damping: f64,
    pub friction_coefficient: f64,
    /// Slip speed below which friction is linear in slip velocity, m/s.
    pub stiction_velocity: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            normal_stiffness: 5000.0,
            normal_damping: 5.0,
            friction_coefficient: 0.36,
            stiction_velocity: 1e-3,
        }
    }
}

impl ContactParams {
    pub fn is_valid(&self) -> bool {
        [
            self.normal_stiffness,
            self.normal_damping,
            self.friction_coefficient,
            self.stiction_velocity,
        ]
        .iter()
        .all(|x| *x >= 0.0 && x.is_finite())
    }

    /// Normal force for penetration depth `p ≥ 0` and penetration rate `p_dot`.
    pub fn normal_force(&self, p: f64, p_dot: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        (self.normal_stiffness * p + self.normal_damping * p_dot).max(0.0)
    }

    /// Friction force on a contact sliding at `slip` m/s under normal load `normal`.
    pub fn friction_force(&self, normal: f64, slip: f64) -> f64 {
        let limit = self.friction_coefficient * normal;
        if self.stiction_velocity <= 0.0 {
            return if slip == 0.0 {
                0.0
            } else {
                -limit * slip.signum()
            };
        }
        -limit * (slip / self.stiction_velocity).clamp(-1.0, 1.0)
    }

    /// Slope of the friction law inside the stiction band, N·s/m.
    pub fn stick_damping(&self, normal: f64) -> f64 {
        if self.stiction_velocity <= 0.0 {
            return 0.0;
        }
        self.friction_coefficient * normal / self.stiction_velocity
    }
}

/// Force acting on one foot, with the world x of its ground contact point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootForce {
    pub contact_x: f64,
    pub normal: f64,
    pub tangential: f64,
}

/// Penetration depth, penetration rate and slip velocity of every foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootKinematics {
    pub contact_x: f64,
    pub penetration: f64,
    pub penetration_rate: f64,
    pub slip: f64,
}

pub fn foot_kinematics(state: &BodyState, chain: &ChainModel) -> Vec<FootKinematics> {
    let frame = state.frame(chain);
    foot_kinematics_in(&frame, chain, &state.v)
}

pub(crate) fn foot_kinematics_in(
    frame: &Frame,
    chain: &ChainModel,
    v: &[f64],
) -> Vec<FootKinematics> {
    chain
        .feet
        .iter()
        .map(|foot| {
            let r = frame.foot_contact_offset(foot);
            let p = frame.point(foot.host, r);
            let vel = frame.point_velocity(foot.host, r, v);
            FootKinematics {
                contact_x: p[0],
                penetration: (-p[1]).max(0.0),
                penetration_rate: -vel[1],
                slip: vel[0],
            }
        })
        .collect()
}

/// Contact forces on every foot evaluated at `state`.
pub fn contact_forces(
    state: &BodyState,
    chain: &ChainModel,
    params: &ContactParams,
) -> Vec<FootForce> {
    foot_kinematics(state, chain)
        .into_iter()
        .map(|k| {
            let normal = params.normal_force(k.penetration, k.penetration_rate);
            FootForce {
                contact_x: k.contact_x,
                normal,
                tangential: params.friction_force(normal, k.slip),
            }
        })
        .collect()
}

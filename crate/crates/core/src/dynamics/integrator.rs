//! Fixed-step semi-implicit Euler for the chain.
//!
//! Each step solves for the new velocities first and then advances positions
//! with them. The stiff terms are taken at the end of the step: the joint
//! spring-dampers, the penalty normal force and the friction law inside the
//! stiction band. This keeps the short-link modes and foot impacts stable and
//! dissipative at the default step. Gravity and velocity-product terms use the
//! state at the start of the step.

use nalgebra::{DMatrix, DVector};

use super::contact::{foot_kinematics_in, ContactParams, FootForce};
use super::state::{BodyState, Frame, Vec2};
use super::{DynamicsError, IntegratorParams};
use crate::actuation::{ActuationPattern, Channel};
use crate::robot::ChainModel;

/// Coordinates beyond this magnitude are treated as a blowup.
const BLOWUP_LIMIT: f64 = 1e3;
const MAX_CONTACT_PASSES: usize = 30;
/// Passes stop once the friction load matches the solved normal force to this many newtons.
const LOAD_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone)]
struct Element {
    host: usize,
    along: f64,
    up: f64,
    mass: f64,
    inertia: f64,
}

/// Generalized coordinates that move a point on `host`.
fn columns(frame: &Frame, host: usize) -> Vec<usize> {
    let mut cols = vec![0, 1];
    cols.extend(frame.path(host).map(|j| 2 + j));
    cols.sort_unstable();
    cols
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slip {
    Stick,
    Slide(i8),
}

/// Reusable per-run buffers around an immutable chain.
pub struct Stepper<'a> {
    chain: &'a ChainModel,
    contacts: ContactParams,
    integ: IntegratorParams,
    elements: Vec<Element>,
    element_cols: Vec<Vec<usize>>,
    foot_cols: Vec<Vec<usize>>,
    frame: Frame,
    jac: Vec<Vec2>,
    foot_jac: Vec<Vec<Vec2>>,
    forces: Vec<FootForce>,
}

impl<'a> Stepper<'a> {
    pub fn new(chain: &'a ChainModel, contacts: &ContactParams, integ: &IntegratorParams) -> Self {
        let mut elements: Vec<Element> = chain
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| Element {
                host: i,
                along: l.length / 2.0,
                up: 0.0,
                mass: l.mass,
                inertia: l.inertia,
            })
            .collect();
        elements.extend(chain.feet.iter().map(|f| Element {
            host: f.host,
            along: f.along,
            up: -f.depth,
            mass: f.mass,
            inertia: f.inertia,
        }));
        let dof = chain.links.len() + 2;
        let frame = Frame::new(chain);
        let element_cols = elements.iter().map(|e| columns(&frame, e.host)).collect();
        let foot_cols = chain.feet.iter().map(|f| columns(&frame, f.host)).collect();
        Self {
            chain,
            contacts: *contacts,
            integ: *integ,
            elements,
            element_cols,
            foot_cols,
            frame,
            jac: vec![[0.0; 2]; dof],
            foot_jac: vec![vec![[0.0; 2]; dof]; chain.feet.len()],
            forces: Vec::with_capacity(chain.feet.len()),
        }
    }

    /// Forces applied to the feet during the most recent step.
    pub fn last_foot_forces(&self) -> &[FootForce] {
        &self.forces
    }

    /// Advance `state` by one step under `pattern`.
    pub fn advance(
        &mut self,
        state: &mut BodyState,
        pattern: &ActuationPattern,
    ) -> Result<(), DynamicsError> {
        let chain = self.chain;
        let dof = state.q.len();
        let dt = self.integ.dt;
        let g = self.integ.gravity;
        self.frame.update(chain, &state.q);

        let mut mass = DMatrix::<f64>::zeros(dof, dof);
        let mut force = DVector::<f64>::zeros(dof);

        for (e, cols) in self.elements.iter().zip(&self.element_cols) {
            let r = self.frame.offset(e.host, e.along, e.up);
            self.frame.jacobian(e.host, r, &mut self.jac);
            let bias = self.frame.bias_acceleration(e.host, r, &state.v);
            let f = [-e.mass * bias[0], -e.mass * (g + bias[1])];
            for (ia, &a) in cols.iter().enumerate() {
                let ja = self.jac[a];
                force[a] += ja[0] * f[0] + ja[1] * f[1];
                for &b in &cols[ia..] {
                    let jb = self.jac[b];
                    mass[(a, b)] += e.mass * (ja[0] * jb[0] + ja[1] * jb[1]);
                }
            }
            mass[(2 + e.host, 2 + e.host)] += e.inertia;
        }
        for a in 0..dof {
            for b in 0..a {
                mass[(a, b)] = mass[(b, a)];
            }
        }

        let mut system = mass.clone();
        for (k, joint) in chain.joints.iter().enumerate() {
            let (i, j) = (2 + k, 3 + k);
            let theta = state.q[j] - state.q[i];
            let volts = Channel::for_actuator(joint.channel)
                .map(|ch| pattern.voltage_at(ch, state.time))
                .unwrap_or(0.0);
            let tau = -joint.stiffness * theta + joint.voltage_gain * volts;
            force[j] += tau;
            force[i] -= tau;
            let w = dt * dt * joint.stiffness + dt * joint.damping;
            system[(i, i)] += w;
            system[(j, j)] += w;
            system[(i, j)] -= w;
            system[(j, i)] -= w;
        }

        let kin = foot_kinematics_in(&self.frame, chain, &state.v);
        let nfeet = chain.feet.len();
        // signed penetration: negative while the foot is above the ground
        let mut depth = Vec::with_capacity(nfeet);
        let mut active = Vec::with_capacity(nfeet);
        let mut load = Vec::with_capacity(nfeet);
        let mut regimes = Vec::with_capacity(nfeet);
        for (fi, foot) in chain.feet.iter().enumerate() {
            let r = self.frame.foot_contact_offset(foot);
            let p = -self.frame.point(foot.host, r)[1];
            self.frame.jacobian(foot.host, r, &mut self.foot_jac[fi]);
            let k = kin[fi];
            let predicted = self.contacts.normal_stiffness * (p + dt * k.penetration_rate)
                + self.contacts.normal_damping * k.penetration_rate;
            let on = p + dt * k.penetration_rate > 0.0 && predicted > 0.0;
            depth.push(p);
            active.push(on);
            load.push(if on { predicted } else { 0.0 });
            regimes.push(if k.slip.abs() <= self.contacts.stiction_velocity {
                Slip::Stick
            } else {
                Slip::Slide(k.slip.signum() as i8)
            });
        }

        let momentum = &mass * DVector::from_column_slice(&state.v);
        let rhs_base = momentum + force * dt;
        let (kn, cn) = (self.contacts.normal_stiffness, self.contacts.normal_damping);

        // Active-set passes: the normal force acts at the end-of-step
        // penetration, and the friction law is resolved against that load.
        let mut v_new = None;
        let mut applied = vec![0.0; nfeet];
        let mut flips = vec![0usize; nfeet];
        let mut grazing = vec![false; nfeet];
        let mut regime_flips = vec![0usize; nfeet];
        let mut regime_locked = vec![false; nfeet];
        for _ in 0..MAX_CONTACT_PASSES {
            let mut lhs = system.clone();
            let mut rhs = rhs_base.clone();
            for fi in 0..nfeet {
                let jac = &self.foot_jac[fi];
                let cols = &self.foot_cols[fi];
                if active[fi] {
                    let c = dt * (kn * dt + cn);
                    for &a in cols {
                        rhs[a] += dt * kn * depth[fi] * jac[a][1];
                        for &b in cols {
                            lhs[(a, b)] += c * jac[a][1] * jac[b][1];
                        }
                    }
                }
                if load[fi] <= 0.0 {
                    continue;
                }
                match regimes[fi] {
                    Slip::Stick => {
                        let c = dt * self.contacts.stick_damping(load[fi]);
                        for &a in cols {
                            for &b in cols {
                                lhs[(a, b)] += c * jac[a][0] * jac[b][0];
                            }
                        }
                    }
                    Slip::Slide(s) => {
                        let f = -self.contacts.friction_coefficient * load[fi] * s as f64;
                        for &a in cols {
                            rhs[a] += dt * jac[a][0] * f;
                        }
                    }
                }
            }
            let solved = lhs
                .cholesky()
                .map(|c| c.solve(&rhs))
                .ok_or(DynamicsError::NumericalBlowup { time: state.time })?;

            let mut changed = false;
            for fi in 0..nfeet {
                let jac = &self.foot_jac[fi];
                let cols = &self.foot_cols[fi];
                let rate: f64 = -cols.iter().map(|&a| jac[a][1] * solved[a]).sum::<f64>();
                let normal = kn * (depth[fi] + dt * rate) + cn * rate;
                applied[fi] = if active[fi] { normal } else { 0.0 };

                // The damping term makes the normal force jump at touchdown,
                // so a grazing foot can have no consistent state. It is left
                // out of contact, which costs at most ½·k·p² of energy with p
                // far below the step's travel.
                let want_active = !grazing[fi] && depth[fi] + dt * rate > 0.0 && normal > 0.0;
                if want_active != active[fi] {
                    flips[fi] += 1;
                    if flips[fi] > 2 {
                        grazing[fi] = true;
                    }
                    active[fi] = want_active && !grazing[fi];
                    changed = true;
                }
                let want_load = if active[fi] { normal.max(0.0) } else { 0.0 };
                if (want_load - load[fi]).abs() > LOAD_TOLERANCE {
                    changed = true;
                }
                load[fi] = want_load;

                let slip: f64 = cols.iter().map(|&a| jac[a][0] * solved[a]).sum();
                let want = if slip.abs() <= self.contacts.stiction_velocity {
                    Slip::Stick
                } else {
                    Slip::Slide(slip.signum() as i8)
                };
                let consistent = match (regimes[fi], want) {
                    (Slip::Stick, Slip::Stick) => true,
                    (Slip::Slide(s), Slip::Slide(w)) => s == w,
                    _ => false,
                };
                if !consistent && !regime_locked[fi] {
                    regime_flips[fi] += 1;
                    // settle a cycling foot on the bounded sliding force
                    if regime_flips[fi] > 4 {
                        regime_locked[fi] = true;
                        regimes[fi] = Slip::Slide(if slip >= 0.0 { 1 } else { -1 });
                    } else {
                        regimes[fi] = want;
                    }
                    changed = true;
                }
            }
            if !changed {
                v_new = Some(solved);
                break;
            }
        }
        let v_new = v_new.ok_or(DynamicsError::ContactNotConverged { time: state.time })?;

        self.forces.clear();
        for fi in 0..nfeet {
            let slip: f64 = self.foot_cols[fi]
                .iter()
                .map(|&a| self.foot_jac[fi][a][0] * v_new[a])
                .sum();
            let tangential = if load[fi] <= 0.0 {
                0.0
            } else {
                match regimes[fi] {
                    Slip::Stick => -self.contacts.stick_damping(load[fi]) * slip,
                    Slip::Slide(s) => -self.contacts.friction_coefficient * load[fi] * s as f64,
                }
            };
            self.forces.push(FootForce {
                contact_x: kin[fi].contact_x,
                normal: applied[fi],
                tangential,
            });
        }

        for i in 0..dof {
            state.v[i] = v_new[i];
            state.q[i] += dt * v_new[i];
        }
        state.time += dt;

        let bad = state.q.iter().chain(state.v.iter()).any(|x| !x.is_finite())
            || state.q.iter().any(|x| x.abs() > BLOWUP_LIMIT);
        if bad {
            return Err(DynamicsError::NumericalBlowup { time: state.time });
        }
        Ok(())
    }
}

/// One integration step from `state`.
pub fn step(
    state: &BodyState,
    chain: &ChainModel,
    pattern: &ActuationPattern,
    contacts: &ContactParams,
    integ: &IntegratorParams,
) -> Result<BodyState, DynamicsError> {
    let mut next = state.clone();
    Stepper::new(chain, contacts, integ).advance(&mut next, pattern)?;
    Ok(next)
}

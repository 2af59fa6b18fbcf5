//! Reduced-coordinate state of the planar chain and the kinematics built on it.
//!
//! Generalized coordinates are `[x, z, φ_0, …, φ_{n-1}]`: the world position
//! of the center of the root link (the middle link, `n / 2`) followed by the
//! absolute angle of every link. Adjacent links share an endpoint by
//! construction, so chain connectivity is exact rather than enforced by a
//! solver. Rooting at the middle keeps the discrete update symmetric under
//! reflecting the robot end for end.
//!
//! World frame: `x` points toward the robot's left end (leftward travel is
//! positive), `z` points up, the ground is `z = 0`. A flat robot has every
//! link angle equal to π, i.e. the chain runs from its left end toward `-x`.
//! With that convention a positive joint angle bends the body concave down.

use std::f64::consts::PI;

use crate::robot::ChainModel;

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct BodyState {
    pub time: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

/// Center pose and velocity of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPose {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
}

impl BodyState {
    /// Flat pose with the feet touching the ground and everything at rest.
    pub fn resting(chain: &ChainModel) -> Self {
        let n = chain.links.len();
        let lift = chain
            .feet
            .iter()
            .map(|f| f.depth + f.radius)
            .fold(0.0, f64::max);
        let root = &chain.links[root_link(chain)];
        let mut q = vec![PI; n + 2];
        q[0] = -(root.start + root.length / 2.0);
        q[1] = lift;
        Self {
            time: 0.0,
            q,
            v: vec![0.0; n + 2],
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn link_angle(&self, i: usize) -> f64 {
        self.q[2 + i]
    }

    pub fn joint_angles(&self) -> Vec<f64> {
        self.q[2..].windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn joint_rates(&self) -> Vec<f64> {
        self.v[2..].windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn frame(&self, chain: &ChainModel) -> Frame {
        let mut frame = Frame::new(chain);
        frame.update(chain, &self.q);
        frame
    }

    pub fn link_poses(&self, chain: &ChainModel) -> Vec<LinkPose> {
        let frame = self.frame(chain);
        chain
            .links
            .iter()
            .enumerate()
            .map(|(i, link)| {
                let r = frame.offset(i, link.length / 2.0, 0.0);
                let p = frame.point(i, r);
                let vel = frame.point_velocity(i, r, &self.v);
                LinkPose {
                    x: p[0],
                    z: p[1],
                    theta: self.q[2 + i],
                    vx: vel[0],
                    vz: vel[1],
                    omega: self.v[2 + i],
                }
            })
            .collect()
    }

    /// Center of mass over links and feet.
    pub fn center_of_mass(&self, chain: &ChainModel) -> Vec2 {
        let frame = self.frame(chain);
        frame.center_of_mass(chain)
    }
}

/// Index of the link whose center carries the base coordinates.
pub fn root_link(chain: &ChainModel) -> usize {
    chain.links.len() / 2
}

/// Link directions and left-end positions for one configuration.
#[derive(Debug, Clone, Default)]
pub struct Frame {
    /// Unit vector along each link, from its left end to its right end.
    pub axis: Vec<Vec2>,
    /// World position of each link's left end.
    pub start: Vec<Vec2>,
    /// For each link, the left end as `root center + Σ w·axis_j`.
    paths: Vec<Vec<(usize, f64)>>,
}

#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    [-v[1], v[0]]
}

impl Frame {
    pub fn new(chain: &ChainModel) -> Self {
        let n = chain.links.len();
        let root = root_link(chain);
        let half = chain.links[root].length / 2.0;
        let paths = (0..n)
            .map(|h| {
                if h > root {
                    let mut path = vec![(root, half)];
                    path.extend((root + 1..h).map(|j| (j, chain.links[j].length)));
                    path
                } else {
                    let mut path = vec![(root, -half)];
                    path.extend((h..root).rev().map(|j| (j, -chain.links[j].length)));
                    path
                }
            })
            .collect();
        Self {
            axis: Vec::with_capacity(n),
            start: Vec::with_capacity(n),
            paths,
        }
    }

    /// Links whose angle moves points on `host`, including `host` itself.
    pub fn path(&self, host: usize) -> impl Iterator<Item = usize> + '_ {
        let extra = self.paths[host]
            .iter()
            .all(|&(j, _)| j != host)
            .then_some(host);
        self.paths[host].iter().map(|&(j, _)| j).chain(extra)
    }

    pub fn update(&mut self, chain: &ChainModel, q: &[f64]) {
        let n = chain.links.len();
        self.axis.clear();
        self.axis.extend((0..n).map(|i| {
            let (s, c) = q[2 + i].sin_cos();
            [c, s]
        }));
        self.start.clear();
        for path in &self.paths {
            let mut p = [q[0], q[1]];
            for &(j, w) in path {
                p[0] += w * self.axis[j][0];
                p[1] += w * self.axis[j][1];
            }
            self.start.push(p);
        }
    }

    /// World offset from link `host`'s left end of a point `along` the link
    /// and `up` above it (body-up is `-perp(axis)`).
    #[inline]
    pub fn offset(&self, host: usize, along: f64, up: f64) -> Vec2 {
        let u = self.axis[host];
        [along * u[0] + up * u[1], along * u[1] - up * u[0]]
    }

    #[inline]
    pub fn point(&self, host: usize, r: Vec2) -> Vec2 {
        let s = self.start[host];
        [s[0] + r[0], s[1] + r[1]]
    }

    /// Fill `out` (length = dof) with the 2×dof Jacobian of a point rigidly
    /// attached to `host` at world offset `r`, column by column.
    pub fn jacobian(&self, host: usize, r: Vec2, out: &mut [Vec2]) {
        out.fill([0.0, 0.0]);
        out[0] = [1.0, 0.0];
        out[1] = [0.0, 1.0];
        for &(j, w) in &self.paths[host] {
            let d = perp(self.axis[j]);
            out[2 + j][0] += w * d[0];
            out[2 + j][1] += w * d[1];
        }
        let d = perp(r);
        out[2 + host][0] += d[0];
        out[2 + host][1] += d[1];
    }

    pub fn point_velocity(&self, host: usize, r: Vec2, v: &[f64]) -> Vec2 {
        let mut vel = [v[0], v[1]];
        for &(j, w) in &self.paths[host] {
            let d = perp(self.axis[j]);
            vel[0] += w * v[2 + j] * d[0];
            vel[1] += w * v[2 + j] * d[1];
        }
        let d = perp(r);
        vel[0] += d[0] * v[2 + host];
        vel[1] += d[1] * v[2 + host];
        vel
    }

    /// Velocity-product part of a point's acceleration (`J̇ v`).
    pub fn bias_acceleration(&self, host: usize, r: Vec2, v: &[f64]) -> Vec2 {
        let mut acc = [0.0, 0.0];
        for &(j, w) in &self.paths[host] {
            let w2 = w * v[2 + j] * v[2 + j];
            acc[0] -= w2 * self.axis[j][0];
            acc[1] -= w2 * self.axis[j][1];
        }
        let w2 = v[2 + host] * v[2 + host];
        acc[0] -= r[0] * w2;
        acc[1] -= r[1] * w2;
        acc
    }

    /// World offset of the lowest point of a foot cylinder from its host's left end.
    pub fn foot_contact_offset(&self, foot: &crate::robot::CompiledFoot) -> Vec2 {
        let c = self.offset(foot.host, foot.along, -foot.depth);
        [c[0], c[1] - foot.radius]
    }

    pub fn center_of_mass(&self, chain: &ChainModel) -> Vec2 {
        let mut acc = [0.0, 0.0];
        let mut mass = 0.0;
        for (i, link) in chain.links.iter().enumerate() {
            let p = self.point(i, self.offset(i, link.length / 2.0, 0.0));
            acc[0] += link.mass * p[0];
            acc[1] += link.mass * p[1];
            mass += link.mass;
        }
        for foot in &chain.feet {
            let p = self.point(foot.host, self.offset(foot.host, foot.along, -foot.depth));
            acc[0] += foot.mass * p[0];
            acc[1] += foot.mass * p[1];
            mass += foot.mass;
        }
        [acc[0] / mass, acc[1] / mass]
    }
}

//! Declarative robot description and its compilation into a link/joint chain.
//!
//! A robot is a row of piezoelectric actuators laid end to end. Each actuator
//! is discretized into `links_per_actuator` short rigid links joined by
//! torsional spring-motor joints; where two actuators meet, the last link of
//! one and the first link of the next are merged into a single junction link.
//! Component weights are described per 1 cm cell along the body and are
//! apportioned onto the links they overlap.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mass of one of the two onboard batteries, kg.
pub const BATTERY_UNIT_MASS: f64 = 0.0062;
/// Total mass of the default two-actuator robot, kg.
pub const DEFAULT_TOTAL_MASS: f64 = 0.0445;

const MASS_TOLERANCE: f64 = 1e-12;
const LENGTH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("invalid robot config: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("failed to read robot config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse robot config: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A single failed rule, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// N·m per rad, per joint.
    pub torsional_stiffness: f64,
    /// N·m·s per rad, per joint.
    pub joint_damping: f64,
    /// N·m per volt.
    pub voltage_torque_gain: f64,
    /// Pa. Metadata only.
    pub young_modulus_actuator: f64,
    /// Pa. Metadata only.
    pub young_modulus_substrate: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            torsional_stiffness: 0.32,
            joint_damping: 0.005,
            voltage_torque_gain: 1.0667e-4,
            young_modulus_actuator: 30e9,
            young_modulus_substrate: 190e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorSpec {
    pub length: f64,
    pub links_per_actuator: usize,
    pub width: f64,
    pub drive_voltage: f64,
}

impl Default for ActuatorSpec {
    fn default() -> Self {
        Self {
            length: 0.100,
            links_per_actuator: 6,
            width: 0.020,
            drive_voltage: 300.0,
        }
    }
}

/// Mass laid out in fixed-length cells from the left end of the body.
///
/// `cell_masses` holds the base (non-battery) mass per cell; `battery_mass`
/// is spread evenly over the cells selected by the robot's battery position.
/// `total_mass` is the declared budget: cells + batteries + feet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightProfile {
    pub cell_length: f64,
    pub cell_masses: Vec<f64>,
    pub battery_mass: f64,
    pub total_mass: f64,
}

impl WeightProfile {
    /// Uniform base mass over `cells` cells, with the batteries and the given
    /// foot mass deducted from `total_mass`.
    pub fn uniform(cells: usize, total_mass: f64, battery_mass: f64, feet_mass: f64) -> Self {
        let base = (total_mass - battery_mass - feet_mass) / cells as f64;
        Self {
            cell_length: 0.01,
            cell_masses: vec![base; cells],
            battery_mass,
            total_mass,
        }
    }

    pub fn declared_sum(&self, feet_mass: f64) -> f64 {
        self.cell_masses.iter().sum::<f64>() + self.battery_mass + feet_mass
    }
}

impl Default for WeightProfile {
    fn default() -> Self {
        let feet = FootSpec::default();
        Self::uniform(
            20,
            DEFAULT_TOTAL_MASS,
            2.0 * BATTERY_UNIT_MASS,
            feet.mass * feet.positions_along_body.len() as f64,
        )
    }
}

/// Rigid cylindrical feet hanging below the body.
///
/// `height` is the distance from the body line to the bottom of the
/// cylinder; the cylinder axis sits `height - radius` below the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootSpec {
    pub positions_along_body: Vec<f64>,
    pub radius: f64,
    pub height: f64,
    pub mass: f64,
}

impl FootSpec {
    pub fn total_mass(&self) -> f64 {
        self.mass * self.positions_along_body.len() as f64
    }
}

impl Default for FootSpec {
    fn default() -> Self {
        Self {
            positions_along_body: vec![0.015, 0.185],
            radius: 0.004,
            height: 0.010,
            mass: 0.001,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BatteryPosition {
    #[default]
    P1,
    P2,
    P3,
    Custom(Vec<usize>),
}

impl BatteryPosition {
    /// Short label used in result tables, e.g. `P1` or `custom:3;4`.
    pub fn label(&self) -> String {
        match self {
            BatteryPosition::P1 => "P1".into(),
            BatteryPosition::P2 => "P2".into(),
            BatteryPosition::P3 => "P3".into(),
            BatteryPosition::Custom(cells) => {
                let cells: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
                format!("custom:{}", cells.join(";"))
            }
        }
    }

    pub fn parse_label(label: &str) -> Option<Self> {
        match label {
            "P1" => Some(BatteryPosition::P1),
            "P2" => Some(BatteryPosition::P2),
            "P3" => Some(BatteryPosition::P3),
            other => {
                let rest = other.strip_prefix("custom:")?;
                if rest.is_empty() {
                    return Some(BatteryPosition::Custom(Vec::new()));
                }
                rest.split(';')
                    .map(|c| c.parse().ok())
                    .collect::<Option<Vec<usize>>>()
                    .map(BatteryPosition::Custom)
            }
        }
    }
}

/// Cell indices carrying the batteries for a position.
///
/// The defaults assume the 20-cell two-actuator body: P1 sits over the right
/// actuator, P2 straddles the junction, P3 sits near the left end.
pub fn battery_cells(position: &BatteryPosition) -> BTreeSet<usize> {
    match position {
        BatteryPosition::P1 => (13..=16).collect(),
        BatteryPosition::P2 => (9..=12).collect(),
        BatteryPosition::P3 => (2..=5).collect(),
        BatteryPosition::Custom(cells) => cells.iter().copied().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub actuators: Vec<ActuatorSpec>,
    #[serde(default)]
    pub materials: MaterialParams,
    #[serde(default)]
    pub weight_profile: WeightProfile,
    #[serde(default)]
    pub feet: FootSpec,
    #[serde(default)]
    pub battery_position: BatteryPosition,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            actuators: vec![ActuatorSpec::default(); 2],
            materials: MaterialParams::default(),
            weight_profile: WeightProfile::default(),
            feet: FootSpec::default(),
            battery_position: BatteryPosition::P1,
        }
    }
}

impl RobotConfig {
    /// Robot with `n` default actuators, a uniform weight profile with no
    /// batteries, and one foot under each end actuator.
    pub fn uniform(n: usize, total_mass: f64) -> Self {
        let actuator = ActuatorSpec::default();
        let body = actuator.length * n as f64;
        let inset = FootSpec::default().positions_along_body[0];
        let feet = FootSpec {
            positions_along_body: vec![inset, body - inset],
            ..FootSpec::default()
        };
        let cells = (body / 0.01).round() as usize;
        Self {
            actuators: vec![actuator; n],
            materials: MaterialParams::default(),
            weight_profile: WeightProfile::uniform(cells, total_mass, 0.0, feet.total_mass()),
            feet,
            battery_position: BatteryPosition::Custom(Vec::new()),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, RobotError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, RobotError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RobotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot config serializes")
    }

    pub fn body_length(&self) -> f64 {
        self.actuators.iter().map(|a| a.length).sum()
    }

    /// Links after merging each pair of adjacent actuator ends.
    pub fn link_count(&self) -> usize {
        let per: usize = self.actuators.iter().map(|a| a.links_per_actuator).sum();
        per.saturating_sub(self.actuators.len().saturating_sub(1))
    }

    pub fn declared_total_mass(&self) -> f64 {
        self.weight_profile.total_mass
    }
}

/// Check every config invariant. An empty list means the config is valid.
pub fn validate(config: &RobotConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    if config.actuators.is_empty() {
        out.push(Violation::new("actuators", "at least one actuator"));
    }
    for (i, a) in config.actuators.iter().enumerate() {
        let field = |name: &str| format!("actuators[{i}].{name}");
        if a.links_per_actuator < 2 {
            out.push(Violation::new(
                field("links_per_actuator"),
                "links_per_actuator ≥ 2",
            ));
        }
        if !(a.length > 0.0 && a.length.is_finite()) {
            out.push(Violation::new(field("length"), "length > 0"));
        }
        if !(a.width >= 0.0 && a.width.is_finite()) {
            out.push(Violation::new(field("width"), "width ≥ 0"));
        }
        if !(a.drive_voltage >= 0.0 && a.drive_voltage.is_finite()) {
            out.push(Violation::new(field("drive_voltage"), "drive_voltage ≥ 0"));
        }
    }

    let m = &config.materials;
    if !(m.torsional_stiffness > 0.0 && m.torsional_stiffness.is_finite()) {
        out.push(Violation::new(
            "materials.torsional_stiffness",
            "torsional_stiffness > 0",
        ));
    }
    if !(m.joint_damping >= 0.0 && m.joint_damping.is_finite()) {
        out.push(Violation::new(
            "materials.joint_damping",
            "joint_damping ≥ 0",
        ));
    }
    if !m.voltage_torque_gain.is_finite() {
        out.push(Violation::new(
            "materials.voltage_torque_gain",
            "voltage_torque_gain finite",
        ));
    }

    let body = config.body_length();
    let w = &config.weight_profile;
    if !(w.cell_length > 0.0) {
        out.push(Violation::new(
            "weight_profile.cell_length",
            "cell_length > 0",
        ));
    } else if (w.cell_length * w.cell_masses.len() as f64 - body).abs() > LENGTH_TOLERANCE {
        out.push(Violation::new(
            "weight_profile.cell_masses",
            "cells must cover the body length exactly",
        ));
    }
    if w.cell_masses.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
        out.push(Violation::new(
            "weight_profile.cell_masses",
            "all cell masses ≥ 0",
        ));
    }
    if !(w.battery_mass >= 0.0 && w.battery_mass.is_finite()) {
        out.push(Violation::new(
            "weight_profile.battery_mass",
            "battery_mass ≥ 0",
        ));
    }
    let declared = w.declared_sum(config.feet.total_mass());
    if (declared - w.total_mass).abs() > MASS_TOLERANCE {
        out.push(Violation::new(
            "weight_profile.total_mass",
            format!(
                "cells + batteries + feet = {declared} kg, declared {}",
                w.total_mass
            ),
        ));
    }
    if !(w.total_mass > 0.0) {
        out.push(Violation::new(
            "weight_profile.total_mass",
            "total_mass > 0",
        ));
    }

    let cells = battery_cells(&config.battery_position);
    if cells.iter().any(|&c| c >= w.cell_masses.len()) {
        out.push(Violation::new(
            "battery_position",
            "battery cell index outside the body",
        ));
    }
    if cells.is_empty() && w.battery_mass > 0.0 {
        out.push(Violation::new(
            "battery_position",
            "battery mass needs at least one battery cell",
        ));
    }

    let f = &config.feet;
    if f.positions_along_body.is_empty() {
        out.push(Violation::new(
            "feet.positions_along_body",
            "at least one foot",
        ));
    }
    if f.positions_along_body.windows(2).any(|p| p[1] <= p[0]) {
        out.push(Violation::new(
            "feet.positions_along_body",
            "positions strictly increasing",
        ));
    }
    for &p in &f.positions_along_body {
        if p > body || !p.is_finite() {
            out.push(Violation::new(
                "feet.positions_along_body",
                "foot position exceeds body length",
            ));
        } else if p < 0.0 {
            out.push(Violation::new(
                "feet.positions_along_body",
                "foot position negative",
            ));
        }
    }
    if !(f.radius > 0.0) {
        out.push(Violation::new("feet.radius", "radius > 0"));
    }
    if !(f.height >= f.radius) {
        out.push(Violation::new("feet.height", "height ≥ radius"));
    }
    if !(f.mass >= 0.0 && f.mass.is_finite()) {
        out.push(Violation::new("feet.mass", "mass ≥ 0"));
    }

    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    /// Distance of the link's left end from the body's left end, m.
    pub start: f64,
    pub length: f64,
    pub mass: f64,
    /// About the link center, kg·m².
    pub inertia: f64,
}

/// Spring-motor joint between link `index - 1` and link `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub stiffness: f64,
    pub damping: f64,
    pub voltage_gain: f64,
    /// Actuator index driving this joint.
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledFoot {
    pub host: usize,
    /// Distance from the host link's left end along the link, m.
    pub along: f64,
    /// Depth of the cylinder axis below the body line, m.
    pub depth: f64,
    pub radius: f64,
    pub mass: f64,
    pub inertia: f64,
}

/// Immutable simulation model produced by [`compile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub links: Vec<Link>,
    /// `joints[k]` connects `links[k]` and `links[k + 1]`.
    pub joints: Vec<Joint>,
    pub feet: Vec<CompiledFoot>,
    pub total_mass: f64,
    pub channels: usize,
}

impl ChainModel {
    pub fn body_length(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    pub fn joints_on_channel(&self, channel: usize) -> impl Iterator<Item = usize> + '_ {
        self.joints
            .iter()
            .enumerate()
            .filter(move |(_, j)| j.channel == channel)
            .map(|(i, _)| i)
    }

    pub fn compiled_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum::<f64>()
            + self.feet.iter().map(|f| f.mass).sum::<f64>()
    }
}

/// Compile a validated config into a chain of links, joints and feet.
pub fn compile(config: &RobotConfig) -> Result<ChainModel, RobotError> {
    let violations = validate(config);
    if !violations.is_empty() {
        return Err(RobotError::InvalidConfig(violations));
    }

    let m = &config.materials;
    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(config.link_count());
    let mut joints = Vec::new();
    let mut cursor = 0.0;
    for (channel, act) in config.actuators.iter().enumerate() {
        let seg = act.length / act.links_per_actuator as f64;
        let mut first = 0;
        if let Some(last) = spans.last_mut() {
            // Junction: the previous actuator's last link absorbs this one's first.
            last.1 += seg;
            first = 1;
        }
        for i in first..act.links_per_actuator {
            spans.push((cursor + seg * i as f64, seg));
        }
        for _ in 1..act.links_per_actuator {
            joints.push(Joint {
                stiffness: m.torsional_stiffness,
                damping: m.joint_damping,
                voltage_gain: m.voltage_torque_gain,
                channel,
            });
        }
        cursor += act.length;
    }

    let w = &config.weight_profile;
    let mut cells = w.cell_masses.clone();
    let batt = battery_cells(&config.battery_position);
    if !batt.is_empty() {
        let share = w.battery_mass / batt.len() as f64;
        for &c in &batt {
            cells[c] += share;
        }
    }

    let mut links: Vec<Link> = spans
        .iter()
        .map(|&(start, length)| Link {
            start,
            length,
            mass: 0.0,
            inertia: 0.0,
        })
        .collect();

    // Each cell's mass goes to the links it overlaps, in proportion to overlap.
    for (c, &mass) in cells.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let lo = c as f64 * w.cell_length;
        let hi = lo + w.cell_length;
        let shares: Vec<(usize, f64)> = links
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                let overlap = (hi.min(l.start + l.length) - lo.max(l.start)).max(0.0);
                (overlap > 0.0).then_some((i, overlap))
            })
            .collect();
        let covered: f64 = shares.iter().map(|s| s.1).sum();
        for (i, overlap) in shares {
            links[i].mass += mass * overlap / covered;
        }
    }
    for l in &mut links {
        l.inertia = l.mass * l.length * l.length / 12.0;
    }

    let f = &config.feet;
    let feet = f
        .positions_along_body
        .iter()
        .map(|&s| {
            let host = links
                .iter()
                .position(|l| s < l.start + l.length)
                .unwrap_or(links.len() - 1);
            CompiledFoot {
                host,
                along: s - links[host].start,
                depth: f.height - f.radius,
                radius: f.radius,
                mass: f.mass,
                inertia: 0.5 * f.mass * f.radius * f.radius,
            }
        })
        .collect();

    let chain = ChainModel {
        links,
        joints,
        feet,
        total_mass: w.total_mass,
        channels: config.actuators.len(),
    };
    debug_assert!((chain.compiled_mass() - chain.total_mass).abs() <= MASS_TOLERANCE);
    Ok(chain)
}

//! Planar dynamics and actuation-pattern search for multi-actuator
//! piezoelectric sheet robots.
//!
//! Each piezoelectric actuator is modeled as a row of short rigid links
//! joined by torsional spring-motor joints whose torque follows the drive
//! voltage. Feet are rigid cylinders pressing on a penalty ground with
//! Coulomb friction. On top of the simulator sit a drive-pattern generator,
//! power and cost-of-transport metrics, parallel resumable parameter sweeps,
//! and simulation-versus-measurement error statistics.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod cli;
pub mod compare;
pub mod dynamics;
pub mod format;
pub mod metrics;
pub mod robot;
pub mod sweep;

/// Version string recorded in sweep outputs and run manifests.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

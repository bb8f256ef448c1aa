//! Relative configuration recovery for small underwater robot swarms.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the whole numerical
//! pipeline:
//!
//! - [`geom`]: positions, headings, distance matrices and configurations.
//! - [`sim`]: seeded ground-truth trajectories and noisy heartbeat rounds.
//! - [`trilat`]: the speed-meter method. Gauge-fixed enumeration of the
//!   reflection candidates of a four-robot constellation, then selection of
//!   the candidate consistent with a known motion.
//! - [`optim`]: the compass method. Heading-sign, distance-bound and
//!   speed-bound inequalities over planar coordinates across several steps,
//!   minimized by multi-start local search or a pruned grid search.
//! - [`extend`]: multilateration of the remaining robots from a solved
//!   constellation, and fusion of constellations computed from different
//!   origin robots.
//! - [`metrics`]: frame-aligned error metrics against ground truth.
//!
//! All units are SI. The planar `x` axis points north and headings are
//! measured counterclockwise from it.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod extend;
pub mod geom;
mod math;
pub mod metrics;
pub mod optim;
pub mod sim;
pub mod trilat;

pub use geom::{
    euclidean_distance, project_to_plane, wrap_angle, Configuration, DistanceMatrix, Heading,
    Position2, Position3, RobotId, Timestamp,
};

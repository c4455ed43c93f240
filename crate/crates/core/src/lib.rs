//! Bearing-only guidance of a unicycle agent to the Fermat–Weber point of a
//! set of weighted beacons.
//!
//! The numerical layers are [`geometry`], [`fwlp`] (reference solver),
//! [`dynamics`], [`control`] (the bearing-only laws), [`lyapunov`] (runtime
//! certificates) and [`sim`] (closed-loop execution). The command-line front
//! end lives in [`cli`] with its file formats in [`scenario`] and [`log`].

// `!(x > y)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod fwlp;
pub mod geometry;
pub mod log;
pub mod lyapunov;
pub mod plot;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{BeaconSet, Mat2, Vec2};

//! Sketch-driven spatial instruction maps and mobile base placement.
//!
//! Sketched image regions are back-projected through a depth camera into
//! point sets ([`geometry`]), fit as energy-based membership maps
//! ([`sim`]), and used as objective and constraint for choosing where a
//! mobile manipulator should stand ([`solver`]).

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod format;
pub mod geometry;
pub mod kinematics;
pub mod samples;
pub mod sim;
pub mod solver;

pub use nalgebra;
pub use error::{Error, Result};
pub use geometry::{CameraModel, DepthGrid, Label, PointSet, Sketch};
pub use samples::Samples;
pub use sim::{EnergyFunction, EnergyModel, TrainConfig};

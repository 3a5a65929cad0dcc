//! Boundary encircling for differential-drive robots.
//!
//! * [`boundary`] fits sampled boundary points with polar-angle Fourier series.
//! * [`guidance`] builds the guiding vector field and reference control.
//! * [`safety`] filters the reference through a CBF quadratic program.
//! * [`sim`] integrates the unicycle kinematics in closed loop.

pub mod boundary;
pub mod guidance;
pub mod safety;
pub mod sim;

/// Planar vector in meters (or meters per second).
pub type Vec2 = nalgebra::Vector2<f64>;

pub use boundary::{AngleDomain, BoundaryModel, FitReport, FourierCurve, Segment, Winding};
pub use guidance::{ErrorSign, GuidanceParams};
pub use safety::{CbfParams, Obstacle};
pub use sim::{RobotGeometry, RobotState, SimConfig, StepRecord, World};

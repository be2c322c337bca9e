//! Herding of large groups of repulsive agents by a few robotic herders.
//!
//! The evaders are non-cooperative: each one is driven purely by repulsion
//! from the herders and from the other evaders, which makes the input enter
//! the dynamics nonlinearly. The controller treats the implicit relation
//! `h(x, u) = 0` as a dynamical system and steers the herder velocities so
//! that `h` decays, while a per-step assignment stage (convex hull, K-means
//! over the hull vertices, furthest member per cluster) picks which evaders
//! are directly controlled.
//!
//! All numerical code is generic over the scalar type via [`scalar::Real`];
//! the aliases at the crate root bind everything to `f64`, which is what the
//! CLI and the test suites use.

pub mod assignment;
pub mod clustering;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod scalar;
pub mod simulator;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the core types.
pub type Point2 = geometry::Point2<f64>;
pub type WorldState = dynamics::WorldState<f64>;
pub type EvaderModel = dynamics::EvaderModel<f64>;
pub type ControllerConfig = controller::ControllerConfig<f64>;
pub type Reference = controller::Reference<f64>;
pub type Clustering = clustering::Clustering<f64>;
pub type Assignment = assignment::Assignment<f64>;
pub type SimConfig = simulator::SimConfig<f64>;
pub type RunLog = simulator::RunLog<f64>;
pub type MetricReport = metrics::MetricReport<f64>;
pub type SweepSpec = sweep::SweepSpec<f64>;

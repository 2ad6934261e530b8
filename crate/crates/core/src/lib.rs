//! Configuring programmable wireless environments with an interpretable,
//! layered neural network.
//!
//! Walls coated with programmable metasurface tiles are modeled as network
//! layers and tiles as nodes; line-of-sight power transfers between walls are
//! links. Training tunes each tile's virtual surface normal so that the power
//! emitted by a transmitter is delivered to a receiver. The learned angles are
//! then turned into per-tile functions and checked with a 2D ray tracer
//! against specular propagation and a greedy ray-routing baseline.

pub mod configurators;
pub mod geometry;
pub mod learner;
pub mod netbuild;
pub mod pipeline;
pub mod raytracer;
pub mod report;
pub mod scenario;
pub mod svg;

pub use geometry::Vec2;
pub use netbuild::{build_layered_net, LayeredNet, NodeId};
pub use scenario::Scenario;

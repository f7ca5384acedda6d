//! Language-guided local navigation.
//!
//! A natural-language instruction is split into navigation and behavioral
//! parts. Behavioral rules become an image-aligned cost map that an
//! egocentric model-predictive planner consumes alongside LiDAR obstacles,
//! while a landmark detector supplies the goal. Everything runs offline
//! against a deterministic 2D simulator with oracle perception; live
//! model backends are reachable through [`gateway`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmap;
pub mod exec;
pub mod gateway;
pub mod geometry;
pub mod instruction;
pub mod landmark;
pub mod metrics;
pub mod planner;
pub mod runner;
pub mod scenario;
pub mod simulator;

pub use exec::Exec;
pub use geometry::{wrap_angle, CameraModel, EgocentricGoal, Point2, Pose2D};

//! Pose tracking for tensegrity robots from an overhead RGB-D camera and
//! on-board cable-length sensors.
//!
//! Each frame alternates a per-rod point registration step with a joint
//! constrained optimization over all endcap positions that fuses the cable
//! measurements and enforces rod length, rod separation and ground
//! clearance.

// Validation writes `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod perception;
pub mod robot_model;
mod seed;
pub mod sim;
pub mod solver;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{Correspondence, RigidPose, Rotation, Segment, Vec3};
pub use perception::{CameraIntrinsics, GroundPlane, ObservedFrame, Roi};
pub use robot_model::{EndcapModel, HsvRange, TensegrityTopology};
pub use seed::derive_seed;
pub use solver::{NlpProblem, SolverConfig, SolverResult};
pub use tracker::{Ablation, Tracker, TrackerConfig, TrackerMode, TrackerState};

//! Reason-act navigation engine over a 2-D desk-scale simulator.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`world`]: occupancy grid with room semantics, geodesic planning, synthetic floorplans.
//! - [`kinematics`]: poses, the four motion primitives, trajectory records.
//! - [`orchestrator`]: the reason/act rollout loop over a pluggable policy backend.
//! - [`data_engine`]: ground-truth and DAgger-style collection, key-node detection.
//! - [`supervision`]: multi-turn reasoning conversations and training-sample emission.
//! - [`metrics`]: NE, SR, OS, SPL and nDTW.

pub mod data_engine;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod metrics;
pub mod navigation;
pub mod orchestrator;
pub mod remote;
pub mod seeds;
pub mod supervision;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Point, Rect};
pub use kinematics::{
    ActionPrimitive, Mode, Pose, SegmentTag, StepAction, StepRecord, TerminatedBy, Trajectory,
};
pub use world::{Episode, SceneWorld};

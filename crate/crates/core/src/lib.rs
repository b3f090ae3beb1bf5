//! Incremental preemptive RANSAC for online relocation.
//!
//! A robot with no initial pose builds a local feature map from scratch
//! ([`local_map`]) and matches it against an a-priori landmark map
//! ([`global_map`]) by scoring a fixed budget of feature-hypothesis pairs
//! per viewpoint ([`preemption`], [`hypothesis`]). [`relocalizer`] ties the
//! pieces together; [`environment`] simulates worlds with landmark churn.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod config;
pub mod environment;
pub mod geometry;
pub mod global_map;
pub mod hypothesis;
pub mod local_map;
pub mod preemption;
pub mod quadtree;
pub mod relocalizer;
pub mod rng;

pub use config::{Retirement, Scheme, SchemeConfig};
pub use environment::{
    generate_world, Command, Landmark, Observation, OdometryMeasurement, OdometryModel, SensorModel,
    TrajectoryParams, World, WorldParams,
};
pub use geometry::{Point2, Pose2, Rect};
pub use global_map::GlobalMap;
pub use hypothesis::{best_hypothesis, Hypothesis, HypothesisId};
pub use local_map::{FeatureId, LocalMap};
pub use relocalizer::{Estimate, Relocalizer, StepReport};

//! Simulation benchmark for incremental RANSAC relocation: trials, sweeps,
//! and the file formats they read and write.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod results;
pub mod sweep;
pub mod trial;
pub mod world_io;

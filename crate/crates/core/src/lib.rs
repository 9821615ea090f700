//! Grounding of referring expressions against multi-view RGB-D observations.
//!
//! An instruction is parsed into an object graph ([`phrase`]), per-frame
//! detections are lifted into a bird's-eye occupancy grid ([`geometry`]),
//! accumulated per caption graph and clustered into unique instances
//! ([`aggregation`]), and the instruction graph is compared against those
//! instances to confirm, report a mismatch, ask which one, or report that
//! nothing was found ([`discriminator`]). [`simulator`] produces labeled
//! synthetic episodes and [`eval`] scores the pipeline on them.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod config;
pub mod dataset;
pub mod discriminator;
pub mod eval;
pub mod geometry;
pub mod graph;
pub mod kv;
pub mod phrase;
pub mod pipeline;
pub mod seeds;
pub mod simulator;

pub use aggregation::{InstanceRecord, Session};
pub use config::PipelineConfig;
pub use discriminator::{DialogueState, GroundingOutcome};
pub use graph::ObjectGraph;
pub use pipeline::Pipeline;

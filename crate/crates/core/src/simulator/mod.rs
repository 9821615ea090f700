//! Synthetic rooms of axis-aligned boxes, camera trajectories, ray-cast depth,
//! ground-truth detections with captions, detector error models and
//! instruction generation with oracle labels.

mod episode;
mod language;
mod noise;
mod render;
mod room;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;

pub use episode::{build_episode, fp_bank, Episode, Frame};
pub use language::{caption_graph, emit_instructions, oracle_instances, Instruction, InstructionKind, VERB_TEMPLATES};
pub use noise::{apply_errors, ErrorConfig, FpMode, NoiseColumn};
pub use render::{gt_detections, render, render_depth, Hit, Render};
pub use room::{derive_relations, generate_room, Copies, RelationFact, RelationMap, RoomSpec, SceneObject};
pub use trajectory::plan_trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("could not place {class} ({placed} of {requested} placed) after {attempts} attempts")]
    Placement {
        class: String,
        placed: u32,
        requested: u32,
        attempts: u32,
    },
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("too many copies of {class}: {count} (at most 5)")]
    TooManyCopies { class: String, count: u32 },
    #[error("no room with every object visible after {0} attempts")]
    Visibility(u32),
    #[error("invalid simulator setting: {0}")]
    Config(String),
}

/// Relative footprint of a palette class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

/// A palette entry: class name, size range in meters and whether small
/// objects may rest on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSpec {
    pub name: &'static str,
    pub size: SizeClass,
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub supporter: bool,
}

const fn spec(name: &'static str, size: SizeClass, min: [f64; 3], max: [f64; 3], supporter: bool) -> ClassSpec {
    ClassSpec {
        name,
        size,
        min,
        max,
        supporter,
    }
}

use SizeClass::{Large, Medium, Small};

pub const PALETTE: &[ClassSpec] = &[
    spec("table", Large, [1.0, 0.7, 0.72], [1.4, 0.9, 0.78], true),
    spec("dining table", Large, [1.4, 0.8, 0.74], [1.8, 1.0, 0.78], true),
    spec("coffee table", Large, [0.8, 0.5, 0.40], [1.1, 0.6, 0.45], true),
    spec("counter", Large, [1.2, 0.5, 0.88], [1.6, 0.6, 0.92], true),
    spec("desk", Large, [1.0, 0.6, 0.72], [1.3, 0.7, 0.76], true),
    spec("sofa", Large, [1.6, 0.8, 0.80], [2.0, 0.9, 0.90], false),
    spec("bed", Large, [1.8, 1.4, 0.50], [2.0, 1.6, 0.60], false),
    spec("shelf", Large, [0.8, 0.3, 1.00], [1.0, 0.4, 1.20], false),
    spec("chair", Medium, [0.45, 0.45, 0.80], [0.50, 0.50, 0.90], false),
    spec("stool", Medium, [0.35, 0.35, 0.60], [0.40, 0.40, 0.70], false),
    spec("bin", Medium, [0.30, 0.30, 0.40], [0.35, 0.35, 0.50], false),
    spec("box", Medium, [0.35, 0.35, 0.30], [0.45, 0.45, 0.40], false),
    spec("plant", Medium, [0.35, 0.35, 0.60], [0.45, 0.45, 0.90], false),
    spec("lamp", Medium, [0.30, 0.30, 1.00], [0.35, 0.35, 1.20], false),
    spec("cup", Small, [0.12, 0.12, 0.12], [0.14, 0.14, 0.15], false),
    spec("mug", Small, [0.12, 0.12, 0.11], [0.14, 0.14, 0.13], false),
    spec("bowl", Small, [0.18, 0.18, 0.08], [0.22, 0.22, 0.10], false),
    spec("bottle", Small, [0.09, 0.09, 0.26], [0.11, 0.11, 0.32], false),
    spec("vase", Small, [0.13, 0.13, 0.25], [0.16, 0.16, 0.32], false),
    spec("book", Small, [0.20, 0.15, 0.04], [0.25, 0.18, 0.06], false),
    spec("laptop", Small, [0.32, 0.22, 0.02], [0.36, 0.25, 0.03], false),
];

pub const COLORS: &[&str] = &[
    "red", "black", "white", "blue", "green", "yellow", "brown", "gray", "orange", "pink", "purple",
];
pub const MATERIALS: &[&str] = &["plastic", "wooden", "metal", "glass", "ceramic", "fabric", "leather"];

pub fn class_spec(name: &str) -> Option<&'static ClassSpec> {
    PALETTE.iter().find(|c| c.name == name)
}

/// Classes that can be copied for counting: everything small or medium.
pub fn countable_classes() -> Vec<&'static str> {
    PALETTE.iter().filter(|c| c.size != Large).map(|c| c.name).collect()
}

/// One object hypothesis in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub caption: String,
    /// Absent for injected false positives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub room_width: f64,
    pub room_depth: f64,
    pub wall_height: f64,
    /// Keep-out band along the walls where no object is placed.
    pub margin: f64,
    /// Minimum L-infinity distance between same-class centroids.
    pub separation: f64,
    pub tau_near: f64,
    pub max_attempts: u32,
    pub room_retries: u32,
    pub n_supporters: u32,
    pub n_large: u32,
    pub n_medium: u32,
    pub n_small: u32,
    /// Give same-class copies pairwise distinct (color, material).
    pub distinct_copies: bool,
    pub frame_width: u32,
    pub frame_height: u32,
    pub focal: f64,
    pub n_waypoints: u32,
    pub camera_height: f64,
    pub camera_pitch_deg: f64,
    pub yaw_jitter_deg: f64,
    pub min_pixels: u32,
    pub mismatch_rate: f64,
    pub instructions_per_room: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            room_width: 6.0,
            room_depth: 6.0,
            wall_height: 2.5,
            margin: 0.7,
            separation: 1.0,
            tau_near: 0.75,
            max_attempts: 200,
            room_retries: 40,
            n_supporters: 2,
            n_large: 1,
            n_medium: 2,
            n_small: 3,
            distinct_copies: true,
            frame_width: 128,
            frame_height: 128,
            focal: 110.0,
            n_waypoints: 20,
            camera_height: 1.4,
            camera_pitch_deg: 30.0,
            yaw_jitter_deg: 5.0,
            min_pixels: 25,
            mismatch_rate: 0.25,
            instructions_per_room: 5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("room_width", self.room_width),
            ("room_depth", self.room_depth),
            ("wall_height", self.wall_height),
            ("tau_near", self.tau_near),
            ("focal", self.focal),
            ("camera_height", self.camera_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.margin >= 0.0) || !(self.separation >= 0.0) {
            return Err(SimError::Config("margin and separation must be >= 0".into()));
        }
        if self.n_waypoints < 4 {
            return Err(SimError::Config("waypoints must be >= 4".into()));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(SimError::Config("frame size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mismatch_rate) {
            return Err(SimError::Config("mismatch_rate must lie in [0, 1]".into()));
        }
        if self.max_attempts == 0 || self.room_retries == 0 {
            return Err(SimError::Config("attempt limits must be >= 1".into()));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> crate::geometry::CameraIntrinsics {
        crate::geometry::CameraIntrinsics::centered(self.focal, self.frame_width, self.frame_height)
            .expect("validated frame size")
    }
}

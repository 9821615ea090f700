//! Pipeline configuration as a flat `key = value` document.
//!
//! Every tunable constant of the pipeline is a key. Keys absent from a file
//! keep their defaults; unknown or repeated keys are rejected. Errors name the
//! key and, when it came from a file, its line.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::aggregation::{CellMass, FusionMode, RegionParams};
use crate::discriminator::QueryTemplates;
use crate::kv;
use crate::simulator::{ErrorConfig, FpMode, SimConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Separator for list-valued keys such as the query phrase lists.
pub const LIST_SEP: char = '|';

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub cell_size: f64,
    /// Band along the walls left out of the grid, meters.
    pub grid_inset: f64,
    pub sigma_frac: f64,
    pub pixel_stride: u32,
    /// Scale each detection's cell weights to sum to one before accumulating.
    pub unit_detections: bool,
    pub region: RegionParams,
    /// Lexicon file; the built-in lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// External tagger command line; the lexicon tagger when absent.
    pub tagger_command: Option<String>,
    pub tagger_timeout_ms: u64,
    pub templates: QueryTemplates,
    pub sim: SimConfig,
    pub errors: ErrorConfig,
    /// Rooms per instance count in a generated dataset.
    pub rooms: u32,
    /// Instance counts of the focus class, one episode per room and count.
    pub counts: Vec<u32>,
    /// (episode, instruction) pairs scored for dialogue metrics; 0 means all.
    pub dialogue_pairs: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            cell_size: 0.05,
            grid_inset: 0.1,
            sigma_frac: 0.25,
            pixel_stride: 1,
            unit_detections: true,
            region: RegionParams {
                gamma: 0.1,
                fusion: FusionMode::Overlap,
                mass: CellMass::Evidence,
                ..RegionParams::default()
            },
            lexicon: None,
            tagger_command: None,
            tagger_timeout_ms: 2000,
            templates: QueryTemplates::default(),
            sim: SimConfig {
                n_waypoints: 30,
                ..SimConfig::default()
            },
            errors: ErrorConfig::default(),
            rooms: 50,
            counts: vec![1, 2, 3],
            dialogue_pairs: 100,
        }
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("expected a number, found {v:?}"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found {v:?}")),
    }
}

fn phrases(v: &str) -> Vec<String> {
    kv::list(v, LIST_SEP)
}

fn optional(v: &str) -> Option<String> {
    (!v.is_empty()).then(|| v.to_string())
}

impl PipelineConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let entries = kv::parse(text).map_err(|e| ConfigError {
            line: Some(e.line),
            key: None,
            message: e.message,
        })?;
        let mut cfg = Self::default();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for e in &entries {
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == e.key) {
                return Err(ConfigError {
                    line: Some(e.line),
                    key: Some(e.key.clone()),
                    message: format!("repeated key (first set on line {first})"),
                });
            }
            seen.push((e.key.clone(), e.line));
            cfg.set(&e.key, &e.value).map_err(|message| ConfigError {
                line: Some(e.line),
                key: Some(e.key.clone()),
                message,
            })?;
        }
        cfg.validate().map_err(|mut err| {
            if let Some(key) = &err.key {
                err.line = seen.iter().find(|(k, _)| k == key).map(|(_, l)| *l);
            }
            err
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_text(&text)
    }

    /// Sets one key from its text value. Ranges are checked by `validate`.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let s = &mut self.sim;
        let e = &mut self.errors;
        match key {
            "seed" => self.seed = num(v)?,
            "cell_size" => self.cell_size = num(v)?,
            "grid_inset" => self.grid_inset = num(v)?,
            "sigma_frac" => self.sigma_frac = num(v)?,
            "pixel_stride" => self.pixel_stride = num(v)?,
            "unit_detections" => self.unit_detections = flag(v)?,
            "region_dx" => self.region.dx = num(v)?,
            "region_dy" => self.region.dy = num(v)?,
            "gamma" => self.region.gamma = num(v)?,
            "fusion" => self.region.fusion = v.parse()?,
            "cell_mass" => self.region.mass = v.parse()?,
            "lexicon" => self.lexicon = optional(v).map(PathBuf::from),
            "tagger_command" => self.tagger_command = optional(v),
            "tagger_timeout_ms" => self.tagger_timeout_ms = num(v)?,
            "mismatch_suffixes" => self.templates.mismatch_suffixes = phrases(v),
            "wh_suffixes" => self.templates.wh_suffixes = phrases(v),
            "acknowledgements" => self.templates.acknowledgements = phrases(v),
            "room_width" => s.room_width = num(v)?,
            "room_depth" => s.room_depth = num(v)?,
            "wall_height" => s.wall_height = num(v)?,
            "margin" => s.margin = num(v)?,
            "separation" => s.separation = num(v)?,
            "tau_near" => s.tau_near = num(v)?,
            "max_attempts" => s.max_attempts = num(v)?,
            "room_retries" => s.room_retries = num(v)?,
            "n_supporters" => s.n_supporters = num(v)?,
            "n_large" => s.n_large = num(v)?,
            "n_medium" => s.n_medium = num(v)?,
            "n_small" => s.n_small = num(v)?,
            "distinct_copies" => s.distinct_copies = flag(v)?,
            "frame_width" => s.frame_width = num(v)?,
            "frame_height" => s.frame_height = num(v)?,
            "focal" => s.focal = num(v)?,
            "n_waypoints" => s.n_waypoints = num(v)?,
            "camera_height" => s.camera_height = num(v)?,
            "camera_pitch_deg" => s.camera_pitch_deg = num(v)?,
            "yaw_jitter_deg" => s.yaw_jitter_deg = num(v)?,
            "min_pixels" => s.min_pixels = num(v)?,
            "mismatch_rate" => s.mismatch_rate = num(v)?,
            "instructions_per_room" => s.instructions_per_room = num(v)?,
            "mu_c" => e.mu_c = num(v)?,
            "sigma_c" => e.sigma_c = num(v)?,
            "mu_s" => e.mu_s = num(v)?,
            "sigma_s" => e.sigma_s = num(v)?,
            "p_fn" => e.p_fn = num(v)?,
            "p_fp" => e.p_fp = num(v)?,
            "fp_mode" => {
                e.fp_mode = match v {
                    "per-frame" => FpMode::PerFrame,
                    "per-detection" => FpMode::PerDetection,
                    _ => return Err(format!("expected per-frame or per-detection, found {v:?}")),
                }
            }
            "rooms" => self.rooms = num(v)?,
            "counts" => self.counts = kv::list(v, ',').iter().map(|c| num(c)).collect::<Result<_, _>>()?,
            "dialogue_pairs" => self.dialogue_pairs = num(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: &str| ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: message.to_string(),
        };
        let positive = [("cell_size", self.cell_size), ("sigma_frac", self.sigma_frac)];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(key, "must be > 0"));
            }
        }
        if !(self.grid_inset >= 0.0 && 2.0 * self.grid_inset < self.sim.room_width.min(self.sim.room_depth)) {
            return Err(bad("grid_inset", "must be >= 0 and leave part of the room"));
        }
        if self.pixel_stride == 0 {
            return Err(bad("pixel_stride", "must be >= 1"));
        }
        if self.region.dx == 0 {
            return Err(bad("region_dx", "must be >= 1"));
        }
        if self.region.dy == 0 {
            return Err(bad("region_dy", "must be >= 1"));
        }
        if !(self.region.gamma > 0.0 && self.region.gamma < 1.0) {
            return Err(bad("gamma", "must lie strictly between 0 and 1"));
        }
        if self.tagger_timeout_ms == 0 {
            return Err(bad("tagger_timeout_ms", "must be >= 1"));
        }
        for (key, list) in [
            ("mismatch_suffixes", &self.templates.mismatch_suffixes),
            ("wh_suffixes", &self.templates.wh_suffixes),
            ("acknowledgements", &self.templates.acknowledgements),
        ] {
            if list.is_empty() {
                return Err(bad(key, "needs at least one phrase"));
            }
        }
        if let Err(e) = self.sim.validate() {
            let msg = e.to_string();
            let key = SIM_KEYS
                .iter()
                .find(|k| msg.contains(**k))
                .copied()
                .unwrap_or("simulator");
            return Err(bad(key, &msg));
        }
        if let Err(e) = self.errors.validate() {
            let msg = e.to_string();
            let key = ERROR_KEYS
                .iter()
                .find(|k| msg.contains(**k))
                .copied()
                .unwrap_or("errors");
            return Err(bad(key, &msg));
        }
        if self.counts.is_empty() || self.counts.iter().any(|&c| c == 0 || c > 5) {
            return Err(bad("counts", "needs one or more counts between 1 and 5"));
        }
        if self.rooms == 0 {
            return Err(bad("rooms", "must be >= 1"));
        }
        Ok(())
    }

    /// The full configuration as a document `from_text` reads back unchanged.
    pub fn to_text(&self) -> String {
        let s = &self.sim;
        let e = &self.errors;
        let join = |xs: &[String]| xs.join(&format!(" {LIST_SEP} "));
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("cell_size", self.cell_size.to_string());
        kv("unit_detections", self.unit_detections.to_string());
        kv("grid_inset", self.grid_inset.to_string());
        kv("sigma_frac", self.sigma_frac.to_string());
        kv("pixel_stride", self.pixel_stride.to_string());
        kv("region_dx", self.region.dx.to_string());
        kv("region_dy", self.region.dy.to_string());
        kv("gamma", self.region.gamma.to_string());
        kv("fusion", self.region.fusion.as_str().to_string());
        kv("cell_mass", self.region.mass.as_str().to_string());
        kv(
            "lexicon",
            self.lexicon
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("tagger_command", self.tagger_command.clone().unwrap_or_default());
        kv("tagger_timeout_ms", self.tagger_timeout_ms.to_string());
        kv("mismatch_suffixes", join(&self.templates.mismatch_suffixes));
        kv("wh_suffixes", join(&self.templates.wh_suffixes));
        kv("acknowledgements", join(&self.templates.acknowledgements));
        kv("room_width", s.room_width.to_string());
        kv("room_depth", s.room_depth.to_string());
        kv("wall_height", s.wall_height.to_string());
        kv("margin", s.margin.to_string());
        kv("separation", s.separation.to_string());
        kv("tau_near", s.tau_near.to_string());
        kv("max_attempts", s.max_attempts.to_string());
        kv("room_retries", s.room_retries.to_string());
        kv("n_supporters", s.n_supporters.to_string());
        kv("n_large", s.n_large.to_string());
        kv("n_medium", s.n_medium.to_string());
        kv("n_small", s.n_small.to_string());
        kv("distinct_copies", s.distinct_copies.to_string());
        kv("frame_width", s.frame_width.to_string());
        kv("frame_height", s.frame_height.to_string());
        kv("focal", s.focal.to_string());
        kv("n_waypoints", s.n_waypoints.to_string());
        kv("camera_height", s.camera_height.to_string());
        kv("camera_pitch_deg", s.camera_pitch_deg.to_string());
        kv("yaw_jitter_deg", s.yaw_jitter_deg.to_string());
        kv("min_pixels", s.min_pixels.to_string());
        kv("mismatch_rate", s.mismatch_rate.to_string());
        kv("instructions_per_room", s.instructions_per_room.to_string());
        kv("mu_c", e.mu_c.to_string());
        kv("sigma_c", e.sigma_c.to_string());
        kv("mu_s", e.mu_s.to_string());
        kv("sigma_s", e.sigma_s.to_string());
        kv("p_fn", e.p_fn.to_string());
        kv("p_fp", e.p_fp.to_string());
        kv(
            "fp_mode",
            match e.fp_mode {
                FpMode::PerFrame => "per-frame",
                FpMode::PerDetection => "per-detection",
            }
            .to_string(),
        );
        kv("rooms", self.rooms.to_string());
        kv(
            "counts",
            self.counts.iter().map(u32::to_string).collect::<Vec<_>>().join(", "),
        );
        kv("dialogue_pairs", self.dialogue_pairs.to_string());
        out
    }
}

const SIM_KEYS: &[&str] = &[
    "room_width",
    "room_depth",
    "wall_height",
    "tau_near",
    "focal",
    "camera_height",
    "mismatch_rate",
];
const ERROR_KEYS: &[&str] = &["p_fn", "p_fp", "sigma_c", "sigma_s"];

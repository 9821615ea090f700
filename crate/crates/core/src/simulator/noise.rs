//! Detector error models: centroid shift, shape distortion, false negatives
//! and false positives.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Detection, SimError};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpMode {
    /// At most one injection per frame, with probability `p_fp`.
    PerFrame,
    /// One injection per real detection, each with probability `p_fp`.
    PerDetection,
}

/// Named error-model combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseColumn {
    None,
    Cs,
    CsSd,
    CsSdFn,
    Fp,
}

impl NoiseColumn {
    pub const ALL: [NoiseColumn; 5] = [
        NoiseColumn::None,
        NoiseColumn::Cs,
        NoiseColumn::CsSd,
        NoiseColumn::CsSdFn,
        NoiseColumn::Fp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseColumn::None => "none",
            NoiseColumn::Cs => "cs",
            NoiseColumn::CsSd => "cs+sd",
            NoiseColumn::CsSdFn => "cs+sd+fn",
            NoiseColumn::Fp => "fp",
        }
    }
}

impl fmt::Display for NoiseColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown noise column {s:?} (none, cs, cs+sd, cs+sd+fn, fp)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorConfig {
    pub mu_c: f64,
    pub sigma_c: f64,
    pub mu_s: f64,
    pub sigma_s: f64,
    pub p_fn: f64,
    pub p_fp: f64,
    pub fp_mode: FpMode,
    pub centroid_shift: bool,
    pub shape_distortion: bool,
    pub false_negatives: bool,
    pub false_positives: bool,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        Self {
            mu_c: 0.2,
            sigma_c: 0.04,
            mu_s: 0.2,
            sigma_s: 0.04,
            p_fn: 0.15,
            p_fp: 0.15,
            fp_mode: FpMode::PerFrame,
            centroid_shift: false,
            shape_distortion: false,
            false_negatives: false,
            false_positives: false,
        }
    }
}

impl ErrorConfig {
    /// Same parameters with only the models of `column` switched on.
    pub fn with_column(&self, column: NoiseColumn) -> Self {
        let (cs, sd, fneg, fpos) = match column {
            NoiseColumn::None => (false, false, false, false),
            NoiseColumn::Cs => (true, false, false, false),
            NoiseColumn::CsSd => (true, true, false, false),
            NoiseColumn::CsSdFn => (true, true, true, false),
            NoiseColumn::Fp => (false, false, false, true),
        };
        Self {
            centroid_shift: cs,
            shape_distortion: sd,
            false_negatives: fneg,
            false_positives: fpos,
            ..*self
        }
    }

    pub fn is_identity(&self) -> bool {
        !(self.centroid_shift || self.shape_distortion || self.false_negatives || self.false_positives)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [("p_fn", self.p_fn), ("p_fp", self.p_fp)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, s) in [("sigma_c", self.sigma_c), ("sigma_s", self.sigma_s)] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(SimError::Config(format!("{name} must be > 0")));
            }
        }
        if !self.mu_c.is_finite() || !self.mu_s.is_finite() {
            return Err(SimError::Config("means must be finite".into()));
        }
        Ok(())
    }
}

/// Pixel offset of a centroid shift: magnitude `N(mu_c, sigma_c) * sqrt(area)`
/// in a uniformly chosen quadrant at a uniform angle within it.
pub(crate) fn centroid_shift(bbox: &BoundingBox, cfg: &ErrorConfig, rng: &mut impl Rng) -> (f64, f64) {
    let magnitude = Normal::new(cfg.mu_c, cfg.sigma_c).expect("validated sigma").sample(rng) * bbox.area().sqrt();
    let quadrant = rng.random_range(0..4) as f64;
    let angle = quadrant * FRAC_PI_2 + rng.random_range(0.0..FRAC_PI_2);
    (magnitude * angle.cos(), magnitude * angle.sin())
}

/// Scale factor `1 +/- |N(mu_s, sigma_s)|` with a uniform sign.
pub(crate) fn shape_factor(cfg: &ErrorConfig, rng: &mut impl Rng) -> f64 {
    let delta = Normal::new(cfg.mu_s, cfg.sigma_s)
        .expect("validated sigma")
        .sample(rng)
        .abs();
    if rng.random_bool(0.5) {
        1.0 + delta
    } else {
        (1.0 - delta).max(0.0)
    }
}

/// Applies the enabled error models to one frame's detections. Injected
/// false positives come from `fp_bank` and carry no ground-truth id; every
/// box is clamped to the frame and dropped if nothing is left.
pub fn apply_errors(
    detections: &[Detection],
    width: u32,
    height: u32,
    fp_bank: &[Detection],
    cfg: &ErrorConfig,
    rng: &mut impl Rng,
) -> Vec<Detection> {
    let mut out = Vec::with_capacity(detections.len() + 1);
    for det in detections {
        if cfg.false_negatives && rng.random_bool(cfg.p_fn) {
            continue;
        }
        let mut b = det.bbox;
        if cfg.centroid_shift {
            let (du, dv) = centroid_shift(&b, cfg, rng);
            b = BoundingBox {
                u_min: b.u_min + du,
                v_min: b.v_min + dv,
                u_max: b.u_max + du,
                v_max: b.v_max + dv,
            };
        }
        if cfg.shape_distortion {
            let s = shape_factor(cfg, rng);
            let (uc, vc) = b.center();
            b = BoundingBox::from_center(uc, vc, b.width() * s, b.height() * s);
        }
        if let Some(b) = b.clamped(width, height) {
            out.push(Detection {
                bbox: b,
                caption: det.caption.clone(),
                gt_id: det.gt_id,
            });
        }
        if cfg.false_positives && cfg.fp_mode == FpMode::PerDetection && rng.random_bool(cfg.p_fp) {
            out.extend(inject(fp_bank, width, height, rng));
        }
    }
    if cfg.false_positives && cfg.fp_mode == FpMode::PerFrame && rng.random_bool(cfg.p_fp) {
        out.extend(inject(fp_bank, width, height, rng));
    }
    out
}

fn inject(bank: &[Detection], width: u32, height: u32, rng: &mut impl Rng) -> Option<Detection> {
    let d = bank.choose(rng)?;
    Some(Detection {
        bbox: d.bbox.clamped(width, height)?,
        caption: d.caption.clone(),
        gt_id: None,
    })
}

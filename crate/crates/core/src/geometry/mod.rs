//! Pinhole back-projection, rigid world transform, Gaussian soft-mask
//! weighting and bird's-eye-view binning.
//!
//! Conventions: camera frame is x right, y down, z along the optical axis.
//! World frame is z up, so the bird's-eye view keeps (x, y). Pixel (u, v)
//! denotes the pixel *center* at integer coordinates; a frame of width `w`
//! covers u in [-0.5, w - 0.5].

mod depth;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use depth::{DepthFrame, DEPTH_MAGIC};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),
    #[error("invalid pose: {0}")]
    Pose(String),
    #[error("invalid bounding box: {0}")]
    BoundingBox(String),
    #[error("invalid depth {0}")]
    InvalidDepth(f64),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("depth file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the frame center.
    pub fn centered(f: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::Intrinsics("focal lengths must be > 0".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::Intrinsics("empty frame".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::Intrinsics("principal point outside the frame".into()));
        }
        Ok(())
    }

    /// Camera-frame direction through pixel (u, v), scaled so its z component is 1.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const POSE_TOLERANCE: f64 = 1e-6;

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(ortho <= POSE_TOLERANCE) {
            return Err(GeometryError::Pose(format!(
                "rotation is not orthonormal (error {ortho:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > POSE_TOLERANCE {
            return Err(GeometryError::Pose(format!("rotation determinant {det}")));
        }
        if translation.iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::Pose("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Camera at `position` looking along heading `yaw` (radians from +x
    /// toward +y) tilted down by `pitch` radians, with no roll.
    pub fn looking(position: Vector3<f64>, yaw: f64, pitch: f64) -> Self {
        let forward = Vector3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), -pitch.sin());
        let right = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
        let down = forward.cross(&right);
        Self {
            rotation: Matrix3::from_columns(&[right, down, forward]),
            translation: position,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Homogeneous 4x4 matrix `[R t; 0 1]` in row-major order.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t[0],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t[1],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[2],
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_row_major(m: &[f64]) -> Result<Self, GeometryError> {
        if m.len() != 16 {
            return Err(GeometryError::Pose(format!("expected 16 numbers, got {}", m.len())));
        }
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(GeometryError::Pose("last row must be 0 0 0 1".into()));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vector3::new(m[3], m[7], m[11]))
    }
}

/// Axis-aligned pixel rectangle. A pixel belongs to the box when its center
/// lies inside `[u_min, u_max] x [v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoundingBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Result<Self, GeometryError> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        if ![u_min, v_min, u_max, v_max].iter().all(|x| x.is_finite()) {
            return Err(GeometryError::BoundingBox("non-finite coordinate".into()));
        }
        if !(u_min < u_max && v_min < v_max) {
            return Err(GeometryError::BoundingBox(format!("degenerate box {b:?}")));
        }
        Ok(b)
    }

    /// Tight box around pixel centers `[u0, u1] x [v0, v1]`, inclusive.
    pub fn around_pixels(u0: u32, v0: u32, u1: u32, v1: u32) -> Self {
        Self {
            u_min: u0 as f64 - 0.5,
            v_min: v0 as f64 - 0.5,
            u_max: u1 as f64 + 0.5,
            v_max: v1 as f64 + 0.5,
        }
    }

    pub fn from_center(uc: f64, vc: f64, width: f64, height: f64) -> Self {
        Self {
            u_min: uc - width / 2.0,
            v_min: vc - height / 2.0,
            u_max: uc + width / 2.0,
            v_max: vc + height / 2.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }

    /// Intersection with the frame, or `None` when nothing is left.
    pub fn clamped(&self, width: u32, height: u32) -> Option<BoundingBox> {
        let b = BoundingBox {
            u_min: self.u_min.max(-0.5),
            v_min: self.v_min.max(-0.5),
            u_max: self.u_max.min(width as f64 - 0.5),
            v_max: self.v_max.min(height as f64 - 0.5),
        };
        (b.u_min < b.u_max && b.v_min < b.v_max).then_some(b)
    }

    /// Inclusive pixel index ranges covered by the box within a frame.
    pub fn pixel_range(&self, width: u32, height: u32) -> Option<((u32, u32), (u32, u32))> {
        let u0 = self.u_min.ceil().max(0.0);
        let v0 = self.v_min.ceil().max(0.0);
        let u1 = self.u_max.floor().min(width as f64 - 1.0);
        let v1 = self.v_max.floor().min(height as f64 - 1.0);
        (u0 <= u1 && v0 <= v1).then_some(((u0 as u32, u1 as u32), (v0 as u32, v1 as u32)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub d1: u32,
    pub d2: u32,
}

/// Grid cell index along x (`x`) and y (`y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, d1: u32, d2: u32) -> Result<Self, GeometryError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(GeometryError::Grid("cell_size must be > 0".into()));
        }
        if d1 == 0 || d2 == 0 {
            return Err(GeometryError::Grid("grid dimensions must be >= 1".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell_size,
            d1,
            d2,
        })
    }

    /// Smallest grid with the given cell size covering `[x0, x1] x [y0, y1]`.
    pub fn covering(x0: f64, y0: f64, x1: f64, y1: f64, cell_size: f64) -> Result<Self, GeometryError> {
        let d1 = ((x1 - x0) / cell_size).ceil().max(1.0) as u32;
        let d2 = ((y1 - y0) / cell_size).ceil().max(1.0) as u32;
        Self::new(x0, y0, cell_size, d1, d2)
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let gx = ((x - self.origin_x) / self.cell_size).floor();
        let gy = ((y - self.origin_y) / self.cell_size).floor();
        let inside = gx >= 0.0 && gy >= 0.0 && gx < self.d1 as f64 && gy < self.d2 as f64;
        inside.then_some(Cell {
            x: gx as u32,
            y: gy as u32,
        })
    }

    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            self.origin_x + (cell.x as f64 + 0.5) * self.cell_size,
            self.origin_y + (cell.y as f64 + 0.5) * self.cell_size,
        )
    }
}

/// Camera-frame point for pixel (u, v) at z-depth `d`.
pub fn backproject(u: f64, v: f64, d: f64, k: &CameraIntrinsics) -> Result<Vector3<f64>, GeometryError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(GeometryError::InvalidDepth(d));
    }
    Ok(Vector3::new((u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d))
}

pub fn to_world(p_cam: &Vector3<f64>, pose: &Pose) -> Vector3<f64> {
    pose.transform(p_cam)
}

/// 2D Gaussian centered on the box center, with the `1 / (2 su sv)` prefactor.
pub fn soft_mask_weight(u: f64, v: f64, bbox: &BoundingBox, sigma_u: f64, sigma_v: f64) -> f64 {
    let (uc, vc) = bbox.center();
    let du = (u - uc) / sigma_u;
    let dv = (v - vc) / sigma_v;
    (-0.5 * (du * du + dv * dv)).exp() / (2.0 * sigma_u * sigma_v)
}

pub fn bbox_to_weighted_cloud(
    bbox: &BoundingBox,
    depth: &DepthFrame,
    k: &CameraIntrinsics,
    pose: &Pose,
    sigma_frac: f64,
) -> Vec<WeightedPoint> {
    bbox_to_weighted_cloud_strided(bbox, depth, k, pose, sigma_frac, 1)
}

/// Like [`bbox_to_weighted_cloud`] but samples every `stride`-th pixel in each direction.
pub fn bbox_to_weighted_cloud_strided(
    bbox: &BoundingBox,
    depth: &DepthFrame,
    k: &CameraIntrinsics,
    pose: &Pose,
    sigma_frac: f64,
    stride: u32,
) -> Vec<WeightedPoint> {
    let Some(b) = bbox.clamped(depth.width(), depth.height()) else {
        return Vec::new();
    };
    let Some(((u0, u1), (v0, v1))) = b.pixel_range(depth.width(), depth.height()) else {
        return Vec::new();
    };
    let sigma_u = sigma_frac * b.width();
    let sigma_v = sigma_frac * b.height();
    let stride = stride.max(1) as usize;

    let mut out = Vec::with_capacity(((u1 - u0 + 1) * (v1 - v0 + 1)) as usize);
    for v in (v0..=v1).step_by(stride) {
        for u in (u0..=u1).step_by(stride) {
            let d = depth.get(u, v) as f64;
            let Ok(p_cam) = backproject(u as f64, v as f64, d, k) else {
                continue;
            };
            let p = to_world(&p_cam, pose);
            out.push(WeightedPoint {
                x: p.x,
                y: p.y,
                z: p.z,
                weight: soft_mask_weight(u as f64, v as f64, &b, sigma_u, sigma_v),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellObservation {
    pub cell: Cell,
    /// Mean weight of the points binned into this cell.
    pub weight: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BevProjection {
    /// Sorted by cell (x, then y).
    pub cells: Vec<CellObservation>,
    pub dropped: usize,
}

impl BevProjection {
    /// Rescales the cell weights to sum to one, so that every detection casts
    /// the same total vote however large or close its box is.
    pub fn into_unit_mass(mut self) -> Self {
        let total: f64 = self.cells.iter().map(|c| c.weight).sum();
        if total > 0.0 {
            self.cells.iter_mut().for_each(|c| c.weight /= total);
        }
        self
    }
}

pub fn voxelize_bev(points: &[WeightedPoint], grid: &GridSpec) -> BevProjection {
    let mut bins: BTreeMap<Cell, (f64, u32)> = BTreeMap::new();
    let mut dropped = 0;
    for p in points {
        match grid.cell_of(p.x, p.y) {
            Some(cell) => {
                let e = bins.entry(cell).or_insert((0.0, 0));
                e.0 += p.weight;
                e.1 += 1;
            }
            None => dropped += 1,
        }
    }
    BevProjection {
        cells: bins
            .into_iter()
            .map(|(cell, (sum, count))| CellObservation {
                cell,
                weight: sum / count as f64,
                count,
            })
            .collect(),
        dropped,
    }
}

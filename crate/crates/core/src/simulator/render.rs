//! Ray casting against axis-aligned boxes.
//!
//! The camera ray through a pixel is scaled so its camera-frame z component is
//! one, which makes the ray parameter at a hit equal to the z-depth.

use std::collections::BTreeMap;

use super::{Detection, RoomSpec};
use crate::geometry::{BoundingBox, CameraIntrinsics, DepthFrame, Pose};

const WALL_THICKNESS: f64 = 0.1;
const EPS: f64 = 1e-9;

/// What a pixel's ray hit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Nothing,
    Structure,
    Object(u32),
}

pub struct Render {
    pub depth: DepthFrame,
    pub hits: Vec<Hit>,
}

struct Solid {
    min: [f64; 3],
    max: [f64; 3],
    hit: Hit,
}

fn solids(room: &RoomSpec) -> Vec<Solid> {
    let (w, d, h, t) = (room.width, room.depth, room.wall_height, WALL_THICKNESS);
    let structure = |min: [f64; 3], max: [f64; 3]| Solid {
        min,
        max,
        hit: Hit::Structure,
    };
    let mut out = vec![
        structure([-t, -t, -t], [w + t, d + t, 0.0]),
        structure([-t, -t, 0.0], [0.0, d + t, h]),
        structure([w, -t, 0.0], [w + t, d + t, h]),
        structure([-t, -t, 0.0], [w + t, 0.0, h]),
        structure([-t, d, 0.0], [w + t, d + t, h]),
    ];
    out.extend(room.objects.iter().map(|o| Solid {
        min: o.min,
        max: o.max,
        hit: Hit::Object(o.id),
    }));
    out
}

/// Entry parameter of the ray into the box, if it enters in front of the origin.
fn slab(origin: &[f64; 3], dir: &[f64; 3], min: &[f64; 3], max: &[f64; 3]) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..3 {
        if dir[i].abs() < 1e-15 {
            if origin[i] < min[i] || origin[i] > max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let (a, b) = ((min[i] - origin[i]) * inv, (max[i] - origin[i]) * inv);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
        if t0 > t1 {
            return None;
        }
    }
    (t0 > EPS).then_some(t0)
}

pub fn render(room: &RoomSpec, pose: &Pose, k: &CameraIntrinsics) -> Render {
    let boxes = solids(room);
    render_solids(&boxes, pose, k)
}

fn render_solids(boxes: &[Solid], pose: &Pose, k: &CameraIntrinsics) -> Render {
    let origin: [f64; 3] = (*pose.translation()).into();
    let r = pose.rotation();
    let mut depth = DepthFrame::filled(k.width, k.height, 0.0);
    let mut hits = vec![Hit::Nothing; (k.width * k.height) as usize];
    for v in 0..k.height {
        for u in 0..k.width {
            let dir: [f64; 3] = (r * k.ray(u as f64, v as f64)).into();
            let mut best = (f64::INFINITY, Hit::Nothing);
            for b in boxes {
                if let Some(t) = slab(&origin, &dir, &b.min, &b.max) {
                    if t < best.0 {
                        best = (t, b.hit);
                    }
                }
            }
            if best.1 != Hit::Nothing {
                depth.set(u, v, best.0 as f32);
                hits[(v * k.width + u) as usize] = best.1;
            }
        }
    }
    Render { depth, hits }
}

pub fn render_depth(room: &RoomSpec, pose: &Pose, k: &CameraIntrinsics) -> DepthFrame {
    render(room, pose, k).depth
}

/// Tight boxes around each object's visible pixels, for objects with at least
/// `min_pixels` of them, in object id order. `caption` supplies the text.
pub fn gt_detections(render: &Render, width: u32, min_pixels: u32, caption: impl Fn(u32) -> String) -> Vec<Detection> {
    // id -> (u0, v0, u1, v1, count)
    let mut extent: BTreeMap<u32, (u32, u32, u32, u32, u32)> = BTreeMap::new();
    for (i, hit) in render.hits.iter().enumerate() {
        if let Hit::Object(id) = hit {
            let (u, v) = (i as u32 % width, i as u32 / width);
            let e = extent.entry(*id).or_insert((u, v, u, v, 0));
            e.0 = e.0.min(u);
            e.1 = e.1.min(v);
            e.2 = e.2.max(u);
            e.3 = e.3.max(v);
            e.4 += 1;
        }
    }
    extent
        .into_iter()
        .filter(|(_, e)| e.4 >= min_pixels)
        .map(|(id, (u0, v0, u1, v1, _))| Detection {
            bbox: BoundingBox::around_pixels(u0, v0, u1, v1),
            caption: caption(id),
            gt_id: Some(id),
        })
        .collect()
}

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RoomSpec, SimConfig};
use crate::geometry::Pose;

const PERIMETER_INSET: f64 = 0.4;
const INTERIOR_JITTER: f64 = 0.25;

/// Three quarters of the waypoints walk an inset loop along the walls, the
/// rest are jittered interior points. Every pose faces the room center,
/// perturbed by a seeded yaw jitter, at the configured height and pitch.
pub fn plan_trajectory(room: &RoomSpec, cfg: &SimConfig, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n_waypoints.max(4) as usize;
    let n_interior = n / 4;
    let n_loop = n - n_interior;

    let (w, d) = (room.width, room.depth);
    let inset_w = (w - 2.0 * PERIMETER_INSET).max(0.0);
    let inset_d = (d - 2.0 * PERIMETER_INSET).max(0.0);
    let perimeter = 2.0 * (inset_w + inset_d);
    let phase: f64 = rng.random_range(0.0..1.0);

    let mut points = Vec::with_capacity(n);
    for i in 0..n_loop {
        let s = ((i as f64 + phase) / n_loop as f64) * perimeter;
        let (a, b) = (inset_w, inset_d);
        let (x, y) = if s < a {
            (s, 0.0)
        } else if s < a + b {
            (a, s - a)
        } else if s < 2.0 * a + b {
            (2.0 * a + b - s, b)
        } else {
            (0.0, perimeter - s)
        };
        points.push((PERIMETER_INSET + x, PERIMETER_INSET + y));
    }
    // Interior points on a ring halfway between the center and the loop.
    for i in 0..n_interior {
        let a = 2.0 * PI * (i as f64 + rng.random_range(0.0..1.0)) / n_interior as f64;
        let r = 0.25 * w.min(d) + rng.random_range(-INTERIOR_JITTER..INTERIOR_JITTER);
        points.push((w / 2.0 + r * a.cos(), d / 2.0 + r * a.sin()));
    }

    let pitch = cfg.camera_pitch_deg.to_radians();
    let jitter = cfg.yaw_jitter_deg.to_radians();
    points
        .into_iter()
        .map(|(x, y)| {
            let (cx, cy) = (w / 2.0 - x, d / 2.0 - y);
            let base = if cx.hypot(cy) < 1e-6 { FRAC_PI_2 } else { cy.atan2(cx) };
            let yaw = base + rng.random_range(-jitter..=jitter);
            Pose::looking(Vector3::new(x, y, cfg.camera_height), yaw, pitch)
        })
        .collect()
}

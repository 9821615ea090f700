use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{
    caption_graph, derive_relations, emit_instructions, generate_room, gt_detections, plan_trajectory, render, Copies,
    Detection, Instruction, RoomSpec, SimConfig, SimError,
};
use crate::geometry::{CameraIntrinsics, DepthFrame, Pose};
use crate::phrase::realize;
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u32,
    pub pose: Pose,
    pub depth: DepthFrame,
    pub detections: Vec<Detection>,
}

/// A room, the frames observed along one trajectory through it, a bank of
/// detections from a different room for false-positive injection, and the
/// labeled instructions.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub seed: u64,
    pub room: RoomSpec,
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<Frame>,
    pub visible: BTreeSet<u32>,
    pub fp_bank: Vec<Detection>,
    pub instructions: Vec<Instruction>,
}

fn observe(room: &RoomSpec, poses: &[Pose], cfg: &SimConfig) -> Vec<Frame> {
    let k = cfg.intrinsics();
    let relations = derive_relations(room, cfg.tau_near);
    poses
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let r = render(room, pose, &k);
            let detections = gt_detections(&r, k.width, cfg.min_pixels, |id| {
                realize(&caption_graph(room, &relations, id))
            });
            Frame {
                index: i as u32,
                pose: *pose,
                depth: r.depth,
                detections,
            }
        })
        .collect()
}

/// Generates rooms from seeds derived from `seed` until one is placeable and
/// every object in it is detected in at least one frame.
pub fn build_episode(seed: u64, cfg: &SimConfig, copies: &Copies) -> Result<Episode, SimError> {
    cfg.validate()?;
    let mut last_err = SimError::Visibility(cfg.room_retries);
    for attempt in 0..cfg.room_retries as u64 {
        let room = match generate_room(seeds::derive(seed, "room", attempt), cfg, copies) {
            Ok(r) => r,
            Err(e @ SimError::Placement { .. }) => {
                last_err = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        let poses = plan_trajectory(&room, cfg, seeds::derive(seed, "trajectory", attempt));
        let frames = observe(&room, &poses, cfg);
        let visible: BTreeSet<u32> = frames
            .iter()
            .flat_map(|f| f.detections.iter().filter_map(|d| d.gt_id))
            .collect();
        if visible.len() != room.objects.len() {
            last_err = SimError::Visibility(cfg.room_retries);
            continue;
        }

        let relations = derive_relations(&room, cfg.tau_near);
        let mut rng = seeds::rng(seed, "instructions", 0);
        let mut instructions = emit_instructions(&room, &relations, &visible, cfg.mismatch_rate, &mut rng);
        if cfg.instructions_per_room > 0 {
            instructions.shuffle(&mut rng);
            instructions.truncate(cfg.instructions_per_room as usize);
        }
        return Ok(Episode {
            seed,
            intrinsics: cfg.intrinsics(),
            fp_bank: fp_bank(seed, cfg)?,
            room,
            frames,
            visible,
            instructions,
        });
    }
    Err(last_err)
}

/// Detections observed in a room generated from a seed unrelated to the
/// episode's own rooms.
pub fn fp_bank(seed: u64, cfg: &SimConfig) -> Result<Vec<Detection>, SimError> {
    let bank_cfg = SimConfig {
        n_waypoints: 8,
        ..cfg.clone()
    };
    let mut last_err = SimError::Visibility(cfg.room_retries);
    for attempt in 0..cfg.room_retries as u64 {
        match generate_room(seeds::derive(seed, "fp-bank", attempt), &bank_cfg, &Copies::new()) {
            Ok(room) => {
                let poses = plan_trajectory(&room, &bank_cfg, seeds::derive(seed, "fp-trajectory", attempt));
                return Ok(observe(&room, &poses, &bank_cfg)
                    .into_iter()
                    .flat_map(|f| f.detections)
                    .collect());
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{backproject, to_world};
    use crate::simulator::Hit;

    #[test]
    fn episodes_are_deterministic_and_fully_visible() {
        let cfg = SimConfig::default();
        let copies: Copies = [("mug".to_string(), 2)].into();
        let a = build_episode(4, &cfg, &copies).unwrap();
        let b = build_episode(4, &cfg, &copies).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.visible.len(), a.room.objects.len());
        assert_eq!(a.room.count_of("mug"), 2);
        assert!(!a.fp_bank.is_empty());
        assert!(a.instructions.len() <= cfg.instructions_per_room as usize);
    }

    // Back-projecting every visible object pixel with the true pose lands
    // inside that object's box, inflated by one grid cell.
    #[test]
    fn depth_is_consistent_with_geometry() {
        let cfg = SimConfig::default();
        let room = generate_room(2, &cfg, &Copies::new()).unwrap();
        let k = cfg.intrinsics();
        let poses = plan_trajectory(&room, &cfg, 2);
        let tol = 0.05;
        for pose in poses.iter().take(4) {
            let r = render(&room, pose, &k);
            for (i, hit) in r.hits.iter().enumerate() {
                let Hit::Object(id) = hit else { continue };
                let (u, v) = (i as u32 % k.width, i as u32 / k.width);
                let p = to_world(
                    &backproject(u as f64, v as f64, r.depth.get(u, v) as f64, &k).unwrap(),
                    pose,
                );
                let o = room.object(*id).unwrap();
                for a in 0..3 {
                    assert!(p[a] >= o.min[a] - tol && p[a] <= o.max[a] + tol);
                }
            }
        }
    }
}

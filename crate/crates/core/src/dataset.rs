//! Episodes with evaluation labels, in memory and on disk.
//!
//! A dataset directory holds `dataset.json` (the episode list) and one
//! directory per episode:
//!
//! - `episode.jsonl`: one record per frame with index, row-major pose,
//!   intrinsics, detections and the name of its depth file
//! - `frame_%05d.depth`: depth frames
//! - `room.json`: the ground-truth scene, focus class and visible ids
//! - `instructions.jsonl`: instructions with expected states, oracle
//!   instances and query seeds
//! - `fp_bank.jsonl`: detections available for false-positive injection

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::InstanceRecord;
use crate::config::PipelineConfig;
use crate::discriminator::DialogueState;
use crate::geometry::{CameraIntrinsics, DepthFrame, GeometryError, Pose};
use crate::graph::ObjectGraph;
use crate::seeds;
use crate::simulator::{
    build_episode, countable_classes, derive_relations, oracle_instances, Copies, Detection, Episode, Frame,
    InstructionKind, RoomSpec, SimError,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Depth { path: PathBuf, source: GeometryError },
    #[error("episode {episode}: {source}")]
    Simulation { episode: String, source: SimError },
    #[error("{0}: no instruction labels")]
    MissingLabels(PathBuf),
}

impl DatasetError {
    pub fn is_io(&self) -> bool {
        matches!(self, DatasetError::Io { .. })
    }
}

/// Which room an episode shows and how many copies of its focus class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub name: String,
    pub seed: u64,
    pub focus: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub id: u32,
    pub graph: ObjectGraph,
    pub centroid: [f64; 2],
}

impl OracleInstance {
    pub fn record(&self) -> InstanceRecord {
        InstanceRecord {
            graph: self.graph.clone(),
            regions: Vec::new(),
            centroid: self.centroid,
            score: 1.0,
            contributors: Vec::new(),
        }
    }
}

/// An instruction with everything needed to score a grounding of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstruction {
    pub text: String,
    pub kind: InstructionKind,
    pub gold: ObjectGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u32>,
    pub expected: DialogueState,
    /// Ground-truth instances of the gold root class.
    pub oracle: Vec<OracleInstance>,
    pub query_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeData {
    pub spec: EpisodeSpec,
    pub room: RoomSpec,
    pub visible: BTreeSet<u32>,
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<Frame>,
    pub fp_bank: Vec<Detection>,
    pub instructions: Vec<LabeledInstruction>,
}

impl EpisodeData {
    pub fn from_episode(spec: EpisodeSpec, episode: Episode, tau_near: f64) -> Self {
        let relations = derive_relations(&episode.room, tau_near);
        let instructions = episode
            .instructions
            .iter()
            .enumerate()
            .map(|(i, ins)| LabeledInstruction {
                text: ins.text.clone(),
                kind: ins.kind,
                gold: ins.gold.clone(),
                target: ins.target,
                expected: ins.expected,
                oracle: oracle_instances(&episode.room, &relations, &episode.visible, &ins.gold.root)
                    .into_iter()
                    .map(|(id, r)| OracleInstance {
                        id,
                        graph: r.graph,
                        centroid: r.centroid,
                    })
                    .collect(),
                query_seed: seeds::derive(spec.seed, "query", i as u64),
            })
            .collect();
        EpisodeData {
            spec,
            room: episode.room,
            visible: episode.visible,
            intrinsics: episode.intrinsics,
            frames: episode.frames,
            fp_bank: episode.fp_bank,
            instructions,
        }
    }

    pub fn true_count(&self) -> u32 {
        self.room.count_of(&self.spec.focus) as u32
    }

    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        create_dir(dir)?;
        let mut lines = Vec::with_capacity(self.frames.len());
        for f in &self.frames {
            let name = depth_name(f.index);
            let path = dir.join(&name);
            f.depth.save(&path).map_err(|source| depth_err(&path, source))?;
            lines.push(FrameRecord {
                index: f.index,
                pose: f.pose.to_row_major().to_vec(),
                intrinsics: self.intrinsics,
                detections: f.detections.clone(),
                depth: name,
            });
        }
        write_jsonl(&dir.join("episode.jsonl"), &lines)?;
        let room = RoomRecord {
            spec: self.spec.clone(),
            visible: self.visible.iter().copied().collect(),
            room: self.room.clone(),
        };
        write_file(&dir.join("room.json"), &to_pretty(&room))?;
        write_jsonl(&dir.join("instructions.jsonl"), &self.instructions)?;
        write_jsonl(&dir.join("fp_bank.jsonl"), &self.fp_bank)
    }

    pub fn read(dir: &Path) -> Result<Self, DatasetError> {
        let room_path = dir.join("room.json");
        let room: RoomRecord = from_json(&room_path, &read_file(&room_path)?)?;
        let frame_path = dir.join("episode.jsonl");
        let records: Vec<FrameRecord> = read_jsonl(&frame_path)?;
        let mut frames = Vec::with_capacity(records.len());
        let mut intrinsics = None;
        for (i, r) in records.into_iter().enumerate() {
            let bad = |message: String| DatasetError::Format {
                path: frame_path.clone(),
                line: i + 1,
                message,
            };
            let pose = Pose::from_row_major(&r.pose).map_err(|e| bad(e.to_string()))?;
            match intrinsics {
                None => intrinsics = Some(r.intrinsics),
                Some(k) if k != r.intrinsics => return Err(bad("intrinsics change between frames".into())),
                Some(_) => {}
            }
            let depth_path = dir.join(&r.depth);
            let depth = DepthFrame::load(&depth_path).map_err(|source| depth_err(&depth_path, source))?;
            if depth.width() != r.intrinsics.width || depth.height() != r.intrinsics.height {
                return Err(bad(format!("{} does not match the frame size", r.depth)));
            }
            frames.push(Frame {
                index: r.index,
                pose,
                depth,
                detections: r.detections,
            });
        }
        let intrinsics = intrinsics.ok_or_else(|| DatasetError::Format {
            path: frame_path.clone(),
            line: 0,
            message: "no frames".into(),
        })?;
        let ins_path = dir.join("instructions.jsonl");
        if !ins_path.exists() {
            return Err(DatasetError::MissingLabels(ins_path));
        }
        Ok(EpisodeData {
            spec: room.spec,
            room: room.room,
            visible: room.visible.into_iter().collect(),
            intrinsics,
            frames,
            fp_bank: read_jsonl(&dir.join("fp_bank.jsonl"))?,
            instructions: read_jsonl(&ins_path)?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    index: u32,
    pose: Vec<f64>,
    intrinsics: CameraIntrinsics,
    detections: Vec<Detection>,
    depth: String,
}

#[derive(Serialize, Deserialize)]
struct RoomRecord {
    #[serde(flatten)]
    spec: EpisodeSpec,
    visible: Vec<u32>,
    room: RoomSpec,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    episodes: Vec<EpisodeSpec>,
}

pub fn depth_name(index: u32) -> String {
    format!("frame_{index:05}.depth")
}

/// One episode per (room, count): room `r` gets a seeded focus class that is
/// copied `count` times.
pub fn plan_dataset(cfg: &PipelineConfig) -> Vec<EpisodeSpec> {
    let classes = countable_classes();
    let mut out = Vec::new();
    for r in 0..cfg.rooms as u64 {
        let focus = *classes.choose(&mut seeds::rng(cfg.seed, "focus", r)).unwrap();
        for &count in &cfg.counts {
            let index = out.len();
            out.push(EpisodeSpec {
                name: format!("episode_{index:05}"),
                seed: seeds::derive(cfg.seed, &format!("episode-{count}"), r),
                focus: focus.to_string(),
                count,
            });
        }
    }
    out
}

pub fn build_one(spec: &EpisodeSpec, cfg: &PipelineConfig) -> Result<EpisodeData, DatasetError> {
    let copies: Copies = [(spec.focus.clone(), spec.count)].into();
    let episode = build_episode(spec.seed, &cfg.sim, &copies).map_err(|source| DatasetError::Simulation {
        episode: spec.name.clone(),
        source,
    })?;
    Ok(EpisodeData::from_episode(spec.clone(), episode, cfg.sim.tau_near))
}

pub fn build_dataset(cfg: &PipelineConfig) -> Result<Vec<EpisodeData>, DatasetError> {
    plan_dataset(cfg).par_iter().map(|s| build_one(s, cfg)).collect()
}

/// Builds and writes episodes one at a time, so memory stays bounded.
pub fn simulate_to(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<EpisodeSpec>, DatasetError> {
    let specs = plan_dataset(cfg);
    create_dir(dir)?;
    specs
        .par_iter()
        .try_for_each(|s| build_one(s, cfg)?.write(&dir.join(&s.name)))?;
    write_manifest(dir, cfg.seed, &specs)?;
    Ok(specs)
}

pub fn write_dataset(dir: &Path, seed: u64, episodes: &[EpisodeData]) -> Result<(), DatasetError> {
    create_dir(dir)?;
    for e in episodes {
        e.write(&dir.join(&e.spec.name))?;
    }
    let specs: Vec<EpisodeSpec> = episodes.iter().map(|e| e.spec.clone()).collect();
    write_manifest(dir, seed, &specs)
}

fn write_manifest(dir: &Path, seed: u64, specs: &[EpisodeSpec]) -> Result<(), DatasetError> {
    let manifest = Manifest {
        seed,
        episodes: specs.to_vec(),
    };
    write_file(&dir.join("dataset.json"), &to_pretty(&manifest))
}

pub fn read_manifest(dir: &Path) -> Result<Vec<EpisodeSpec>, DatasetError> {
    let path = dir.join("dataset.json");
    let m: Manifest = from_json(&path, &read_file(&path)?)?;
    Ok(m.episodes)
}

pub fn read_dataset(dir: &Path) -> Result<Vec<EpisodeData>, DatasetError> {
    read_manifest(dir)?
        .par_iter()
        .map(|s| EpisodeData::read(&dir.join(&s.name)))
        .collect()
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn create_dir(dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn depth_err(path: &Path, source: GeometryError) -> DatasetError {
    match source {
        GeometryError::Io(source) => DatasetError::Io {
            path: path.to_path_buf(),
            source,
        },
        source => DatasetError::Depth {
            path: path.to_path_buf(),
            source,
        },
    }
}

fn from_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, DatasetError> {
    serde_json::from_str(text).map_err(|e| DatasetError::Format {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

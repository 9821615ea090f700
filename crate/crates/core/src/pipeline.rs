//! End-to-end grounding: captions and instructions to graphs, frames to an
//! aggregation session, instances to a dialogue outcome.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::aggregation::{AggregationError, InstanceRecord, Session};
use crate::config::PipelineConfig;
use crate::dataset::EpisodeData;
use crate::discriminator::{ground, DiscriminatorError, GroundingOutcome};
use crate::geometry::{bbox_to_weighted_cloud_strided, voxelize_bev, CellObservation, GeometryError, GridSpec};
use crate::graph::ObjectGraph;
use crate::phrase::{phrase_to_graph_with, ExternalTagger, Lexicon, LexiconError, LexiconTagger, PhraseError};
use crate::seeds;
use crate::simulator::{apply_errors, Detection, ErrorConfig, RoomSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Phrase(#[from] PhraseError),
    #[error("lexicon {path}: {source}")]
    Lexicon { path: String, source: LexiconError },
    #[error("cannot read lexicon {path}: {source}")]
    LexiconIo { path: String, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Discriminator(#[from] DiscriminatorError),
}

pub struct Pipeline {
    config: PipelineConfig,
    lexicon: Lexicon,
    external: Option<Mutex<ExternalTagger>>,
}

/// Counters from streaming one episode into a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObserveStats {
    pub detections: usize,
    /// Detections whose caption did not parse; they carry no evidence.
    pub unparsed: usize,
    pub points: usize,
    pub dropped_points: usize,
}

#[derive(Default)]
struct Evidence<'a> {
    graph: Option<&'a ObjectGraph>,
    cells: Vec<CellObservation>,
    points: usize,
    dropped: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let lexicon = match &config.lexicon {
            None => Lexicon::builtin(),
            Some(path) => {
                let name = path.display().to_string();
                let text = std::fs::read_to_string(path).map_err(|source| PipelineError::LexiconIo {
                    path: name.clone(),
                    source,
                })?;
                Lexicon::from_text(&text).map_err(|source| PipelineError::Lexicon { path: name, source })?
            }
        };
        let external = match &config.tagger_command {
            None => None,
            Some(cmd) => {
                let mut words = cmd.split_whitespace();
                let program = words.next().ok_or(PhraseError::Io("empty tagger command".into()))?;
                let args: Vec<&str> = words.collect();
                let timeout = Duration::from_millis(config.tagger_timeout_ms);
                Some(Mutex::new(ExternalTagger::spawn(program, &args, timeout)?))
            }
        };
        Ok(Self {
            config,
            lexicon,
            external,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn parse(&self, text: &str) -> Result<ObjectGraph, PhraseError> {
        match &self.external {
            Some(t) => phrase_to_graph_with(text, &mut *t.lock().expect("tagger lock")),
            None => phrase_to_graph_with(text, &mut LexiconTagger::new(&self.lexicon)),
        }
    }

    /// Grid over the room floor, short of the walls by `grid_inset` so wall
    /// surfaces seen behind an object fall outside it.
    pub fn grid_for(&self, room: &RoomSpec) -> Result<GridSpec, GeometryError> {
        let m = self.config.grid_inset;
        GridSpec::covering(m, m, room.width - m, room.depth - m, self.config.cell_size)
    }

    /// Streams every frame of `episode` into a fresh session, after passing
    /// its detections through the error models of `noise`. Per-frame clouds
    /// are computed in parallel; accumulation runs in frame order.
    pub fn observe(
        &self,
        episode: &EpisodeData,
        noise: &ErrorConfig,
    ) -> Result<(Session, ObserveStats), PipelineError> {
        let grid = self.grid_for(&episode.room)?;
        let k = &episode.intrinsics;
        let frames: Vec<Vec<Detection>> = episode
            .frames
            .iter()
            .map(|f| {
                if noise.is_identity() {
                    f.detections.clone()
                } else {
                    let mut rng = seeds::rng(episode.spec.seed, "noise", f.index as u64);
                    apply_errors(&f.detections, k.width, k.height, &episode.fp_bank, noise, &mut rng)
                }
            })
            .collect();

        let captions: BTreeSet<&str> = frames.iter().flatten().map(|d| d.caption.as_str()).collect();
        let mut parsed: BTreeMap<&str, Option<ObjectGraph>> = BTreeMap::new();
        for c in captions {
            parsed.insert(c, self.parse(c).ok());
        }

        let per_frame: Vec<Vec<Evidence>> = episode
            .frames
            .par_iter()
            .zip(&frames)
            .map(|(frame, dets)| {
                dets.iter()
                    .map(|d| {
                        let Some(graph) = &parsed[d.caption.as_str()] else {
                            return Evidence::default();
                        };
                        let cloud = bbox_to_weighted_cloud_strided(
                            &d.bbox,
                            &frame.depth,
                            k,
                            &frame.pose,
                            self.config.sigma_frac,
                            self.config.pixel_stride,
                        );
                        let mut bev = voxelize_bev(&cloud, &grid);
                        if self.config.unit_detections {
                            bev = bev.into_unit_mass();
                        }
                        Evidence {
                            graph: Some(graph),
                            cells: bev.cells,
                            points: cloud.len(),
                            dropped: bev.dropped,
                        }
                    })
                    .collect()
            })
            .collect();

        let mut session = Session::new(grid);
        let mut stats = ObserveStats::default();
        for e in per_frame.into_iter().flatten() {
            stats.detections += 1;
            let Some(g) = e.graph else {
                stats.unparsed += 1;
                continue;
            };
            stats.points += e.points;
            stats.dropped_points += e.dropped;
            let oid = session.register_graph(g)?;
            if !e.cells.is_empty() {
                session.accumulate(oid, &e.cells)?;
            }
        }
        Ok((session, stats))
    }

    pub fn instances(&self, session: &Session, root: &str) -> Result<Vec<InstanceRecord>, PipelineError> {
        Ok(session.instances_of(root, &self.config.region)?)
    }

    /// Parses `text` and grounds it against the session.
    pub fn ground(&self, session: &Session, text: &str, seed: u64) -> Result<GroundingOutcome, PipelineError> {
        let g = self.parse(text)?;
        self.ground_graph(session, &g, seed)
    }

    pub fn ground_graph(
        &self,
        session: &Session,
        g: &ObjectGraph,
        seed: u64,
    ) -> Result<GroundingOutcome, PipelineError> {
        let instances = self.instances(session, &g.root)?;
        Ok(ground(g, &instances, &self.config.templates, seed)?)
    }
}

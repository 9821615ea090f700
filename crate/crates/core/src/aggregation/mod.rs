//! Per-graph occupancy accumulation, instance counting and cross-graph fusion.
//!
//! Every distinct canonical caption graph gets an id. For each id the session
//! keeps a sparse map from BEV cell to (running-mean weight, frequency). Weights
//! are summed in 2^-48 fixed point so that the stored state does not depend on
//! the order in which frames arrive.

mod fusion;
mod regions;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, CellObservation, GridSpec};
use crate::graph::ObjectGraph;

pub use fusion::{fuse_across_graphs, Contributor, FusionMode, InstanceRecord};
pub use regions::{merge_regions, Region, RegionGrid, RegionLabels};

const FIXED_SCALE: f64 = (1u64 << 48) as f64;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("unknown object id {0}")]
    UnknownOid(u32),
    #[error("graph is not canonical: {0}")]
    NotCanonical(String),
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
    #[error("region size must be at least one cell")]
    InvalidRegion,
    #[error("gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("session dump: {0}")]
    Dump(String),
}

/// Canonical graph to auto-incremented id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphRegistry {
    ids: BTreeMap<ObjectGraph, u32>,
    graphs: Vec<ObjectGraph>,
}

impl GraphRegistry {
    pub fn register(&mut self, g: &ObjectGraph) -> Result<u32, AggregationError> {
        if !g.is_canonical() {
            return Err(AggregationError::NotCanonical(g.to_string()));
        }
        if let Some(&oid) = self.ids.get(g) {
            return Ok(oid);
        }
        let oid = self.graphs.len() as u32;
        self.ids.insert(g.clone(), oid);
        self.graphs.push(g.clone());
        Ok(oid)
    }

    pub fn get(&self, oid: u32) -> Option<&ObjectGraph> {
        self.graphs.get(oid as usize)
    }

    pub fn lookup(&self, g: &ObjectGraph) -> Option<u32> {
        self.ids.get(g).copied()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Ids whose graph has the given root class, ascending.
    pub fn ids_with_root(&self, root: &str) -> Vec<u32> {
        (0..self.graphs.len() as u32)
            .filter(|&i| self.graphs[i as usize].root == root)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct CellAccum {
    fixed_sum: u128,
    freq: u32,
}

impl CellAccum {
    fn weight(&self) -> f64 {
        self.fixed_sum as f64 / FIXED_SCALE / self.freq as f64
    }
}

/// Stored state of one cell for one id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub cell: Cell,
    pub weight: f64,
    pub freq: u32,
}

/// What a cell contributes to its region's occupancy mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellMass {
    /// The running-mean weight alone.
    #[default]
    Mean,
    /// Mean weight times detection frequency, i.e. the total weight received.
    /// Cells seen in few frames (background, occluders) count for less.
    Evidence,
}

impl CellMass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellMass::Mean => "mean",
            CellMass::Evidence => "evidence",
        }
    }

    fn of(&self, acc: &CellAccum) -> f64 {
        match self {
            CellMass::Mean => acc.weight(),
            CellMass::Evidence => acc.fixed_sum as f64 / FIXED_SCALE,
        }
    }
}

impl std::str::FromStr for CellMass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(CellMass::Mean),
            "evidence" => Ok(CellMass::Evidence),
            _ => Err(format!("unknown cell mass {s:?} (mean, evidence)")),
        }
    }
}

/// Knobs for counting instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    pub dx: u32,
    pub dy: u32,
    pub gamma: f64,
    pub fusion: FusionMode,
    pub mass: CellMass,
}

impl RegionParams {
    pub fn validate(&self) -> Result<(), AggregationError> {
        if self.dx == 0 || self.dy == 0 {
            return Err(AggregationError::InvalidRegion);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AggregationError::InvalidGamma(self.gamma));
        }
        Ok(())
    }
}

impl Default for RegionParams {
    fn default() -> Self {
        Self {
            dx: 10,
            dy: 10,
            gamma: 0.05,
            fusion: FusionMode::default(),
            mass: CellMass::default(),
        }
    }
}

/// One connected group of surviving regions for a single id.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGroup {
    pub regions: Vec<Region>,
    /// Normalized occupancy of each entry of `regions`.
    pub region_scores: Vec<f64>,
    /// Summed normalized occupancy of the member regions.
    pub score: f64,
    /// Weight-weighted mean of member cell centers, world meters.
    pub centroid: [f64; 2],
    /// Sum of weight x freq over member cells.
    pub accumulated: f64,
}

/// Aggregation state of one grounding session. Single writer.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    grid: GridSpec,
    registry: GraphRegistry,
    cells_of: BTreeMap<u32, BTreeSet<Cell>>,
    occupancy: Vec<HashMap<Cell, CellAccum>>,
}

impl Session {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            registry: GraphRegistry::default(),
            cells_of: BTreeMap::new(),
            occupancy: Vec::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn registry(&self) -> &GraphRegistry {
        &self.registry
    }

    pub fn register_graph(&mut self, g: &ObjectGraph) -> Result<u32, AggregationError> {
        let oid = self.registry.register(g)?;
        if self.occupancy.len() <= oid as usize {
            self.occupancy.resize_with(oid as usize + 1, HashMap::new);
        }
        Ok(oid)
    }

    /// Adds one frame's cell observations for `oid`. Each observation bumps
    /// the cell frequency by one and folds its mean weight into the running mean.
    pub fn accumulate(&mut self, oid: u32, cells: &[CellObservation]) -> Result<(), AggregationError> {
        let occ = self
            .occupancy
            .get_mut(oid as usize)
            .ok_or(AggregationError::UnknownOid(oid))?;
        if let Some(bad) = cells.iter().find(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
            return Err(AggregationError::InvalidWeight(bad.weight));
        }
        let listed = self.cells_of.entry(oid).or_default();
        for obs in cells {
            if obs.weight <= 0.0 {
                continue;
            }
            let acc = occ.entry(obs.cell).or_default();
            acc.fixed_sum += (obs.weight * FIXED_SCALE).round() as u128;
            acc.freq += 1;
            listed.insert(obs.cell);
        }
        Ok(())
    }

    /// Cells of `oid` sorted by (x, y).
    pub fn cells(&self, oid: u32) -> Vec<CellState> {
        let Some(occ) = self.occupancy.get(oid as usize) else {
            return Vec::new();
        };
        let mut out: Vec<CellState> = occ
            .iter()
            .map(|(cell, acc)| CellState {
                cell: *cell,
                weight: acc.weight(),
                freq: acc.freq,
            })
            .collect();
        out.sort_by_key(|c| c.cell);
        out
    }

    pub fn cell_state(&self, oid: u32, cell: Cell) -> Option<CellState> {
        let acc = self.occupancy.get(oid as usize)?.get(&cell)?;
        Some(CellState {
            cell,
            weight: acc.weight(),
            freq: acc.freq,
        })
    }

    fn region_dims(&self, dx: u32, dy: u32) -> (u32, u32) {
        (self.grid.d1.div_ceil(dx), self.grid.d2.div_ceil(dy))
    }

    pub fn region_scores(&self, oid: u32, dx: u32, dy: u32) -> Result<RegionGrid, AggregationError> {
        self.region_scores_by(oid, dx, dy, CellMass::Mean)
    }

    pub fn region_scores_by(&self, oid: u32, dx: u32, dy: u32, mass: CellMass) -> Result<RegionGrid, AggregationError> {
        if dx == 0 || dy == 0 {
            return Err(AggregationError::InvalidRegion);
        }
        let occ = self
            .occupancy
            .get(oid as usize)
            .ok_or(AggregationError::UnknownOid(oid))?;
        let (nx, ny) = self.region_dims(dx, dy);
        // Sum in cell order so the float result is reproducible.
        let mut cells: Vec<(&Cell, &CellAccum)> = occ.iter().collect();
        cells.sort_by_key(|(c, _)| **c);
        let mut masses = vec![0.0; nx as usize * ny as usize];
        for (cell, acc) in cells {
            let r = (cell.y / dy) as usize * nx as usize + (cell.x / dx) as usize;
            masses[r] += mass.of(acc);
        }
        Ok(RegionGrid::from_masses(dx, dy, nx, ny, masses))
    }

    pub fn count_instances(&self, oid: u32, params: &RegionParams) -> Result<Vec<InstanceGroup>, AggregationError> {
        params.validate()?;
        let grid = self.region_scores_by(oid, params.dx, params.dy, params.mass)?;
        let labels = merge_regions(&grid, params.gamma);
        let occ = &self.occupancy[oid as usize];

        let mut groups = Vec::with_capacity(labels.count as usize);
        for regions in labels.groups() {
            let members: BTreeSet<Region> = regions.iter().copied().collect();
            let mut cells: Vec<(&Cell, &CellAccum)> = occ
                .iter()
                .filter(|(c, _)| {
                    members.contains(&Region {
                        x: c.x / params.dx,
                        y: c.y / params.dy,
                    })
                })
                .collect();
            cells.sort_by_key(|(c, _)| **c);
            let (mut sx, mut sy, mut sw, mut acc) = (0.0, 0.0, 0.0, 0.0);
            for (cell, a) in cells {
                let w = a.weight();
                let (x, y) = self.grid.cell_center(*cell);
                sx += w * x;
                sy += w * y;
                sw += w;
                acc += w * a.freq as f64;
            }
            let region_scores: Vec<f64> = regions.iter().map(|r| grid.score(*r)).collect();
            groups.push(InstanceGroup {
                score: region_scores.iter().sum(),
                region_scores,
                regions,
                centroid: [sx / sw, sy / sw],
                accumulated: acc,
            });
        }
        Ok(groups)
    }

    /// Unique instances of `root`, fused over every id with that root class.
    pub fn instances_of(&self, root: &str, params: &RegionParams) -> Result<Vec<InstanceRecord>, AggregationError> {
        let mut per_oid = Vec::new();
        for oid in self.registry.ids_with_root(root) {
            let graph = self.registry.get(oid).expect("registered").clone();
            per_oid.push((oid, graph, self.count_instances(oid, params)?));
        }
        Ok(fuse_across_graphs(&per_oid, params.fusion))
    }

    pub fn to_dump(&self) -> String {
        let dump = SessionDump {
            grid: self.grid,
            graphs: self.registry.graphs.clone(),
            occupancy: (0..self.occupancy.len() as u32)
                .map(|oid| {
                    let occ = &self.occupancy[oid as usize];
                    let mut cells: Vec<DumpCell> = occ
                        .iter()
                        .map(|(c, a)| DumpCell {
                            x: c.x,
                            y: c.y,
                            fixed_sum: a.fixed_sum.to_string(),
                            freq: a.freq,
                        })
                        .collect();
                    cells.sort_by_key(|c| (c.x, c.y));
                    cells
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("session dump is serializable")
    }

    pub fn from_dump(text: &str) -> Result<Self, AggregationError> {
        let dump: SessionDump = serde_json::from_str(text).map_err(|e| AggregationError::Dump(e.to_string()))?;
        if dump.graphs.len() != dump.occupancy.len() {
            return Err(AggregationError::Dump(format!(
                "{} graphs but {} occupancy maps",
                dump.graphs.len(),
                dump.occupancy.len()
            )));
        }
        let mut s = Session::new(dump.grid);
        for (oid, (g, cells)) in dump.graphs.iter().zip(dump.occupancy).enumerate() {
            if s.register_graph(g)? != oid as u32 {
                return Err(AggregationError::Dump(format!("duplicate graph {g}")));
            }
            for c in cells {
                let cell = Cell { x: c.x, y: c.y };
                if c.x >= s.grid.d1 || c.y >= s.grid.d2 || c.freq == 0 {
                    return Err(AggregationError::Dump(format!("bad cell ({}, {})", c.x, c.y)));
                }
                let fixed_sum = c
                    .fixed_sum
                    .parse::<u128>()
                    .map_err(|e| AggregationError::Dump(format!("fixed_sum: {e}")))?;
                s.occupancy[oid].insert(
                    cell,
                    CellAccum {
                        fixed_sum,
                        freq: c.freq,
                    },
                );
                s.cells_of.entry(oid as u32).or_default().insert(cell);
            }
        }
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct DumpCell {
    x: u32,
    y: u32,
    fixed_sum: String,
    freq: u32,
}

#[derive(Serialize, Deserialize)]
struct SessionDump {
    grid: GridSpec,
    graphs: Vec<ObjectGraph>,
    occupancy: Vec<Vec<DumpCell>>,
}

//! Max-pool fusion of per-graph instance maps into unique instances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{InstanceGroup, Region};
use crate::graph::ObjectGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contributor {
    pub oid: u32,
    pub graph: ObjectGraph,
    pub accumulated: f64,
}

/// One unique object instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    /// Graph of the strongest contributor.
    pub graph: ObjectGraph,
    pub regions: Vec<Region>,
    pub centroid: [f64; 2],
    /// Sum over regions of the max-pooled normalized occupancy.
    pub score: f64,
    /// Strongest first; the first entry is the source of `graph`.
    pub contributors: Vec<Contributor>,
}

/// How per-id instance groups are joined into unique instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// Connected components of the max-pooled map: groups join when their
    /// regions coincide or touch.
    #[default]
    Connected,
    /// Groups join only when they share a region. Adjacent footprints of
    /// distinct objects stay apart.
    Overlap,
}

impl FusionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FusionMode::Connected => "connected",
            FusionMode::Overlap => "overlap",
        }
    }
}

impl std::str::FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "connected" => Ok(FusionMode::Connected),
            "overlap" => Ok(FusionMode::Overlap),
            _ => Err(format!("unknown fusion mode {s:?} (connected, overlap)")),
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Stacks the binary instance maps of every id, max-pools them, and returns
/// one record per fused group, sorted by centroid.
pub fn fuse_across_graphs(per_oid: &[(u32, ObjectGraph, Vec<InstanceGroup>)], mode: FusionMode) -> Vec<InstanceRecord> {
    let mut pooled: BTreeMap<Region, f64> = BTreeMap::new();
    for (_, _, groups) in per_oid {
        for g in groups {
            for (r, s) in g.regions.iter().zip(&g.region_scores) {
                let e = pooled.entry(*r).or_insert(0.0);
                *e = e.max(*s);
            }
        }
    }

    // Union groups (across all ids) that share or, in connected mode, touch
    // a region. Each group is itself connected, so connected mode yields the
    // components of the fused map.
    let nodes: Vec<&InstanceGroup> = per_oid.iter().flat_map(|(_, _, gs)| gs.iter()).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let joined = nodes[i].regions.iter().any(|a| {
                nodes[j].regions.iter().any(|b| match mode {
                    FusionMode::Connected => a == b || a.touches(b),
                    FusionMode::Overlap => a == b,
                })
            });
            if joined {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut component_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let component: Vec<usize> = (0..nodes.len())
        .map(|i| {
            let r = find(&mut parent, i);
            let next = component_of_root.len();
            *component_of_root.entry(r).or_insert(next)
        })
        .collect();
    let n_components = component_of_root.len();

    struct Acc {
        regions: BTreeSet<Region>,
        contributors: Vec<Contributor>,
        cx: f64,
        cy: f64,
        mass: f64,
    }
    let mut accs: Vec<Acc> = (0..n_components)
        .map(|_| Acc {
            regions: BTreeSet::new(),
            contributors: Vec::new(),
            cx: 0.0,
            cy: 0.0,
            mass: 0.0,
        })
        .collect();
    let mut node = 0;
    for (oid, graph, groups) in per_oid {
        for g in groups {
            let acc = &mut accs[component[node]];
            node += 1;
            acc.regions.extend(g.regions.iter().copied());
            acc.cx += g.accumulated * g.centroid[0];
            acc.cy += g.accumulated * g.centroid[1];
            acc.mass += g.accumulated;
            match acc.contributors.iter_mut().find(|c| c.oid == *oid) {
                Some(c) => c.accumulated += g.accumulated,
                None => acc.contributors.push(Contributor {
                    oid: *oid,
                    graph: graph.clone(),
                    accumulated: g.accumulated,
                }),
            }
        }
    }

    let mut out: Vec<InstanceRecord> = accs
        .into_iter()
        .filter(|a| !a.contributors.is_empty())
        .map(|mut a| {
            a.contributors
                .sort_by(|x, y| y.accumulated.total_cmp(&x.accumulated).then(x.oid.cmp(&y.oid)));
            InstanceRecord {
                graph: a.contributors[0].graph.clone(),
                score: a.regions.iter().map(|r| pooled[r]).sum(),
                regions: a.regions.into_iter().collect(),
                centroid: [a.cx / a.mass, a.cy / a.mass],
                contributors: a.contributors,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.centroid[0]
            .total_cmp(&b.centroid[0])
            .then(a.centroid[1].total_cmp(&b.centroid[1]))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(regions: &[(u32, u32)], centroid: [f64; 2], accumulated: f64) -> InstanceGroup {
        let regions: Vec<Region> = regions.iter().map(|&(x, y)| Region { x, y }).collect();
        let s = 1.0 / regions.len() as f64;
        InstanceGroup {
            region_scores: vec![s; regions.len()],
            score: 1.0,
            regions,
            centroid,
            accumulated,
        }
    }

    fn cup(color: &str) -> ObjectGraph {
        ObjectGraph::new("cup").with_attr("color", color)
    }

    #[test]
    fn single_id_is_identity() {
        let groups = vec![group(&[(0, 0)], [0.2, 0.2], 1.0), group(&[(5, 5)], [2.7, 2.7], 2.0)];
        let fused = fuse_across_graphs(&[(0, cup("red"), groups.clone())], FusionMode::Connected);
        assert_eq!(fused.len(), 2);
        for (rec, g) in fused.iter().zip(&groups) {
            assert_eq!(rec.regions, g.regions);
            assert_eq!(rec.centroid, g.centroid);
            assert_eq!(rec.graph, cup("red"));
        }
    }

    #[test]
    fn variants_on_the_same_regions_fuse() {
        let input = [
            (0, cup("red"), vec![group(&[(2, 2)], [1.2, 1.2], 1.0)]),
            (1, cup("black"), vec![group(&[(2, 2), (3, 2)], [1.4, 1.2], 3.0)]),
        ];
        for mode in [FusionMode::Connected, FusionMode::Overlap] {
            let fused = fuse_across_graphs(&input, mode);
            assert_eq!(fused.len(), 1);
            assert_eq!(fused[0].graph, cup("black"));
            assert_eq!(fused[0].contributors.len(), 2);
            assert_eq!(fused[0].regions.len(), 2);
        }
    }

    #[test]
    fn adjacent_groups_depend_on_mode() {
        let input = [
            (0, cup("red"), vec![group(&[(2, 2)], [1.2, 1.2], 1.0)]),
            (1, cup("black"), vec![group(&[(3, 3)], [1.7, 1.7], 1.0)]),
        ];
        assert_eq!(fuse_across_graphs(&input, FusionMode::Connected).len(), 1);
        assert_eq!(fuse_across_graphs(&input, FusionMode::Overlap).len(), 2);
    }

    #[test]
    fn disjoint_groups_stay_apart() {
        let fused = fuse_across_graphs(
            &[
                (0, cup("red"), vec![group(&[(7, 7)], [3.7, 3.7], 1.0)]),
                (1, cup("black"), vec![group(&[(0, 0)], [0.2, 0.2], 1.0)]),
            ],
            FusionMode::Overlap,
        );
        assert_eq!(fused.len(), 2);
        // sorted by centroid
        assert_eq!(fused[0].graph, cup("black"));
    }

    #[test]
    fn empty_input() {
        assert!(fuse_across_graphs(&[], FusionMode::Connected).is_empty());
    }
}

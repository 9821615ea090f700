//! Region occupancy scores and greedy non-maximal region merging.

use serde::{Deserialize, Serialize};

/// Region index along x and y, in units of regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
}

impl Region {
    /// 8-connectivity.
    pub fn touches(&self, other: &Region) -> bool {
        self != other && self.x.abs_diff(other.x) <= 1 && self.y.abs_diff(other.y) <= 1
    }
}

/// Normalized occupancy per region, stored row-major (`y * nx + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub dx: u32,
    pub dy: u32,
    pub nx: u32,
    pub ny: u32,
    pub scores: Vec<f64>,
}

impl RegionGrid {
    pub fn zeros(dx: u32, dy: u32, nx: u32, ny: u32) -> Self {
        Self {
            dx,
            dy,
            nx,
            ny,
            scores: vec![0.0; nx as usize * ny as usize],
        }
    }

    /// Normalizes raw region masses in place. An all-zero grid stays zero.
    pub fn from_masses(dx: u32, dy: u32, nx: u32, ny: u32, mut masses: Vec<f64>) -> Self {
        assert_eq!(masses.len(), nx as usize * ny as usize, "mass grid shape");
        let total: f64 = masses.iter().sum();
        if total > 0.0 {
            for m in &mut masses {
                *m /= total;
            }
        }
        Self {
            dx,
            dy,
            nx,
            ny,
            scores: masses,
        }
    }

    pub fn index(&self, r: Region) -> usize {
        r.y as usize * self.nx as usize + r.x as usize
    }

    pub fn region(&self, index: usize) -> Region {
        Region {
            x: (index % self.nx as usize) as u32,
            y: (index / self.nx as usize) as u32,
        }
    }

    pub fn score(&self, r: Region) -> f64 {
        self.scores[self.index(r)]
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Instance label per region; `None` for zeroed regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabels {
    pub nx: u32,
    pub ny: u32,
    pub labels: Vec<Option<u32>>,
    pub count: u32,
}

impl RegionLabels {
    /// Regions of each label, in label order, each sorted by (y, x).
    pub fn groups(&self) -> Vec<Vec<Region>> {
        let mut out = vec![Vec::new(); self.count as usize];
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(l) = label {
                out[*l as usize].push(Region {
                    x: (i % self.nx as usize) as u32,
                    y: (i / self.nx as usize) as u32,
                });
            }
        }
        out
    }
}

struct Labels {
    parent: Vec<u32>,
}

impl Labels {
    fn fresh(&mut self) -> u32 {
        let l = self.parent.len() as u32;
        self.parent.push(l);
        l
    }

    fn find(&mut self, mut l: u32) -> u32 {
        while self.parent[l as usize] != l {
            let up = self.parent[self.parent[l as usize] as usize];
            self.parent[l as usize] = up;
            l = up;
        }
        l
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (a, b) = (self.find(a), self.find(b));
        let keep = a.min(b);
        self.parent[a.max(b) as usize] = keep;
        keep
    }
}

/// Greedy non-maximal region merging.
///
/// Regions are visited in descending score order (ties by index). A region
/// below `gamma` is zeroed. A surviving region joins the label of its labeled
/// neighbors, unioning them if there are several, or opens a new label. The
/// next-best region is pulled into the same label when it touches the current
/// one and survives the threshold itself. Labels are renumbered densely in
/// order of their best region.
pub fn merge_regions(grid: &RegionGrid, gamma: f64) -> RegionLabels {
    let n = grid.scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| grid.scores[b].total_cmp(&grid.scores[a]).then(a.cmp(&b)));

    let mut raw: Vec<Option<u32>> = vec![None; n];
    let mut uf = Labels { parent: Vec::new() };

    for (pos, &idx) in order.iter().enumerate() {
        if grid.scores[idx] < gamma || grid.scores[idx] <= 0.0 {
            continue;
        }
        let here = grid.region(idx);
        let mut label = raw[idx];
        for ny in here.y.saturating_sub(1)..=(here.y + 1).min(grid.ny - 1) {
            for nx in here.x.saturating_sub(1)..=(here.x + 1).min(grid.nx - 1) {
                let j = grid.index(Region { x: nx, y: ny });
                if j == idx {
                    continue;
                }
                if let Some(l) = raw[j] {
                    label = Some(match label {
                        Some(mine) => uf.union(mine, l),
                        None => l,
                    });
                }
            }
        }
        let label = label.unwrap_or_else(|| uf.fresh());
        raw[idx] = Some(label);

        if let Some(&next) = order.get(pos + 1) {
            let s = grid.scores[next];
            if raw[next].is_none() && s >= gamma && s > 0.0 && here.touches(&grid.region(next)) {
                raw[next] = Some(label);
            }
        }
    }

    // Dense renumbering by first appearance in visiting order.
    let mut dense: Vec<Option<u32>> = vec![None; uf.parent.len()];
    let mut count = 0;
    for &idx in &order {
        if let Some(l) = raw[idx] {
            let root = uf.find(l) as usize;
            if dense[root].is_none() {
                dense[root] = Some(count);
                count += 1;
            }
        }
    }
    let labels = raw
        .into_iter()
        .map(|l| l.map(|l| dense[uf.find(l) as usize].expect("renumbered")))
        .collect();
    RegionLabels {
        nx: grid.nx,
        ny: grid.ny,
        labels,
        count,
    }
}

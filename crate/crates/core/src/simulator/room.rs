use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_spec, ClassSpec, SimConfig, SimError, SizeClass, COLORS, MATERIALS, PALETTE};

/// Requested instance count per class.
pub type Copies = BTreeMap<String, u32>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub class: String,
    pub color: String,
    pub material: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Id of the object this one rests on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<u32>,
}

impl SceneObject {
    pub fn centroid(&self) -> [f64; 3] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
        ]
    }

    /// Horizontal gap between footprints (0 when they overlap), L-infinity.
    #[cfg(test)]
    fn footprint_gap(&self, other: &SceneObject) -> f64 {
        let gx = (other.min[0] - self.max[0]).max(self.min[0] - other.max[0]);
        let gy = (other.min[1] - self.max[1]).max(self.min[1] - other.max[1]);
        gx.max(gy).max(0.0)
    }

    fn footprints_overlap(&self, other: &SceneObject, clearance: f64) -> bool {
        self.min[0] < other.max[0] + clearance
            && other.min[0] < self.max[0] + clearance
            && self.min[1] < other.max[1] + clearance
            && other.min[1] < self.max[1] + clearance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub seed: u64,
    pub width: f64,
    pub depth: f64,
    pub wall_height: f64,
    pub objects: Vec<SceneObject>,
    pub copies: Copies,
}

impl RoomSpec {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn classes(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.class.as_str()).collect()
    }

    pub fn count_of(&self, class: &str) -> usize {
        self.objects.iter().filter(|o| o.class == class).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationFact {
    pub kind: String,
    pub target: u32,
}

pub type RelationMap = BTreeMap<u32, Vec<RelationFact>>;

const FLOOR_CLEARANCE: f64 = 0.25;
const TOP_CLEARANCE: f64 = 0.05;
const TOP_INSET: f64 = 0.03;

struct Placer<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    objects: Vec<SceneObject>,
    used_looks: BTreeMap<String, BTreeSet<(String, String)>>,
}

impl Placer<'_> {
    fn sample_dims(&mut self, spec: &ClassSpec) -> [f64; 3] {
        let mut d = [0.0; 3];
        for (i, v) in d.iter_mut().enumerate() {
            *v = self.rng.random_range(spec.min[i]..=spec.max[i]);
        }
        if self.rng.random_bool(0.5) {
            d.swap(0, 1);
        }
        d
    }

    fn sample_look(&mut self, class: &str) -> (String, String) {
        let used = self.used_looks.entry(class.to_string()).or_default();
        loop {
            let look = (
                COLORS.choose(&mut self.rng).unwrap().to_string(),
                MATERIALS.choose(&mut self.rng).unwrap().to_string(),
            );
            if !self.cfg.distinct_copies || !used.contains(&look) {
                used.insert(look.clone());
                return look;
            }
        }
    }

    fn far_from_same_class(&self, class: &str, c: [f64; 3]) -> bool {
        self.objects.iter().filter(|o| o.class == class).all(|o| {
            let oc = o.centroid();
            (oc[0] - c[0]).abs().max((oc[1] - c[1]).abs()) >= self.cfg.separation
        })
    }

    fn place_on_floor(&mut self, spec: &ClassSpec) -> bool {
        let (w, d, m) = (self.cfg.room_width, self.cfg.room_depth, self.cfg.margin);
        for _ in 0..self.cfg.max_attempts {
            let dims = self.sample_dims(spec);
            let (lo_x, hi_x) = (m, w - m - dims[0]);
            let (lo_y, hi_y) = (m, d - m - dims[1]);
            if lo_x > hi_x || lo_y > hi_y {
                continue;
            }
            let x = self.rng.random_range(lo_x..=hi_x);
            let y = self.rng.random_range(lo_y..=hi_y);
            let cand = SceneObject {
                id: self.objects.len() as u32,
                class: spec.name.to_string(),
                color: String::new(),
                material: String::new(),
                min: [x, y, 0.0],
                max: [x + dims[0], y + dims[1], dims[2]],
                support: None,
            };
            let clear = self
                .objects
                .iter()
                .filter(|o| o.support.is_none())
                .all(|o| !o.footprints_overlap(&cand, FLOOR_CLEARANCE));
            if clear && self.far_from_same_class(spec.name, cand.centroid()) {
                self.push(cand);
                return true;
            }
        }
        false
    }

    fn place_on_support(&mut self, spec: &ClassSpec, supporters: &[u32]) -> bool {
        if supporters.is_empty() {
            return false;
        }
        for _ in 0..self.cfg.max_attempts {
            let dims = self.sample_dims(spec);
            let sid = *supporters.choose(&mut self.rng).unwrap();
            let s = &self.objects[sid as usize];
            let (lo_x, hi_x) = (s.min[0] + TOP_INSET, s.max[0] - TOP_INSET - dims[0]);
            let (lo_y, hi_y) = (s.min[1] + TOP_INSET, s.max[1] - TOP_INSET - dims[1]);
            if lo_x > hi_x || lo_y > hi_y {
                continue;
            }
            let top = s.max[2];
            let x = self.rng.random_range(lo_x..=hi_x);
            let y = self.rng.random_range(lo_y..=hi_y);
            let cand = SceneObject {
                id: self.objects.len() as u32,
                class: spec.name.to_string(),
                color: String::new(),
                material: String::new(),
                min: [x, y, top],
                max: [x + dims[0], y + dims[1], top + dims[2]],
                support: Some(sid),
            };
            let clear = self
                .objects
                .iter()
                .filter(|o| o.support == Some(sid))
                .all(|o| !o.footprints_overlap(&cand, TOP_CLEARANCE));
            if clear && self.far_from_same_class(spec.name, cand.centroid()) {
                self.push(cand);
                return true;
            }
        }
        false
    }

    fn push(&mut self, mut o: SceneObject) {
        let (color, material) = self.sample_look(&o.class);
        o.color = color;
        o.material = material;
        self.objects.push(o);
    }
}

fn pick_extra(
    rng: &mut ChaCha8Rng,
    pool: impl Iterator<Item = &'static ClassSpec>,
    exclude: &Copies,
    n: u32,
) -> Vec<&'static ClassSpec> {
    let mut pool: Vec<_> = pool.filter(|c| !exclude.contains_key(c.name)).collect();
    pool.shuffle(rng);
    pool.truncate(n as usize);
    pool
}

type ClassFilter = Box<dyn Fn(&ClassSpec) -> bool>;

/// Rejection-samples a room holding the requested copies plus a seeded
/// selection of other palette classes, one instance each.
pub fn generate_room(seed: u64, cfg: &SimConfig, copies: &Copies) -> Result<RoomSpec, SimError> {
    cfg.validate()?;
    for (class, &count) in copies {
        class_spec(class).ok_or_else(|| SimError::UnknownClass(class.clone()))?;
        if count > 5 {
            return Err(SimError::TooManyCopies {
                class: class.clone(),
                count,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let requested = |size: SizeClass, supporter: Option<bool>| -> Vec<(&'static ClassSpec, u32)> {
        copies
            .iter()
            .filter_map(|(name, &n)| {
                let s = class_spec(name).expect("checked above");
                let ok = s.size == size && supporter.is_none_or(|want| s.supporter == want);
                (ok && n > 0).then_some((s, n))
            })
            .collect()
    };

    // (class, copies, required). Requested copies go first so they get space;
    // the extra classes are best effort.
    let mut floor_plan: Vec<(&ClassSpec, u32, bool)> = Vec::new();
    for size in [SizeClass::Large, SizeClass::Medium] {
        floor_plan.extend(requested(size, None).into_iter().map(|(s, n)| (s, n, true)));
    }
    let have: u32 = requested(SizeClass::Large, Some(true)).iter().map(|(_, n)| n).sum();
    // Same-class small copies need to spread out, so every copy gets a
    // supporter of its own to choose from.
    let most_small = requested(SizeClass::Small, None)
        .iter()
        .map(|(_, n)| *n)
        .max()
        .unwrap_or(0);
    let extra_supporters = cfg.n_supporters.max(most_small).saturating_sub(have);
    let pools: [(ClassFilter, u32); 3] = [
        (Box::new(|c: &ClassSpec| c.supporter), extra_supporters),
        (
            Box::new(|c: &ClassSpec| c.size == SizeClass::Large && !c.supporter),
            cfg.n_large,
        ),
        (Box::new(|c: &ClassSpec| c.size == SizeClass::Medium), cfg.n_medium),
    ];
    for (filter, n) in pools {
        for s in pick_extra(&mut rng, PALETTE.iter().filter(|c| filter(c)), copies, n) {
            floor_plan.push((s, 1, false));
        }
    }
    let mut small_plan: Vec<(&ClassSpec, u32, bool)> = requested(SizeClass::Small, None)
        .into_iter()
        .map(|(s, n)| (s, n, true))
        .collect();
    for s in pick_extra(
        &mut rng,
        PALETTE.iter().filter(|c| c.size == SizeClass::Small),
        copies,
        cfg.n_small,
    ) {
        small_plan.push((s, 1, false));
    }

    let mut placer = Placer {
        cfg,
        rng,
        objects: Vec::new(),
        used_looks: BTreeMap::new(),
    };
    let fail = |spec: &ClassSpec, placed: u32, requested: u32| SimError::Placement {
        class: spec.name.to_string(),
        placed,
        requested,
        attempts: cfg.max_attempts,
    };
    for (spec, n, required) in floor_plan {
        for placed in 0..n {
            if !placer.place_on_floor(spec) && required {
                return Err(fail(spec, placed, n));
            }
        }
    }
    let supporters: Vec<u32> = placer
        .objects
        .iter()
        .filter(|o| class_spec(&o.class).is_some_and(|s| s.supporter))
        .map(|o| o.id)
        .collect();
    for (spec, n, required) in small_plan {
        for placed in 0..n {
            if !placer.place_on_support(spec, &supporters) && required {
                return Err(fail(spec, placed, n));
            }
        }
    }

    Ok(RoomSpec {
        seed,
        width: cfg.room_width,
        depth: cfg.room_depth,
        wall_height: cfg.wall_height,
        objects: placer.objects,
        copies: copies.clone(),
    })
}

/// `is-on` from support links; `is-near` between objects whose horizontal
/// centroid distance is below `tau_near` and neither supports the other.
pub fn derive_relations(room: &RoomSpec, tau_near: f64) -> RelationMap {
    let mut out = RelationMap::new();
    for a in &room.objects {
        let facts = out.entry(a.id).or_default();
        if let Some(s) = a.support {
            facts.push(RelationFact {
                kind: "is-on".into(),
                target: s,
            });
        }
        let ca = a.centroid();
        for b in &room.objects {
            if a.id == b.id || a.support == Some(b.id) || b.support == Some(a.id) {
                continue;
            }
            let cb = b.centroid();
            if (ca[0] - cb[0]).hypot(ca[1] - cb[1]) < tau_near {
                facts.push(RelationFact {
                    kind: "is-near".into(),
                    target: b.id,
                });
            }
        }
    }
    out
}

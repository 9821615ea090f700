//! Captions and instructions generated from scene metadata, with oracle labels.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{RelationMap, RoomSpec, COLORS, MATERIALS, PALETTE};
use crate::aggregation::InstanceRecord;
use crate::discriminator::{classify, DialogueState};
use crate::graph::ObjectGraph;
use crate::phrase::with_article;

pub const VERB_TEMPLATES: &[&str] = &[
    "pick up {}",
    "take {}",
    "bring me {}",
    "get {}",
    "grab {}",
    "fetch {}",
    "find {}",
    "hand me {}",
];

const ON_CUES: &[&str] = &["on", "on top of", "upon"];
const NEAR_CUES: &[&str] = &["near", "beside", "next to", "close to", "by"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructionKind {
    /// "pick up a plastic cup"
    SelfAttribute,
    /// "take the plastic cup on the table"
    SelfRelational,
    /// "bring a cup"
    Bare,
    /// A class that is not in the room.
    Absent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub text: String,
    pub kind: InstructionKind,
    pub gold: ObjectGraph,
    /// Object the instruction was written about, if any.
    pub target: Option<u32>,
    pub expected: DialogueState,
}

/// Class, color and material of `id` plus one relation to a bare landmark:
/// `is-on` when supported, otherwise the nearest `is-near` neighbor.
pub fn caption_graph(room: &RoomSpec, relations: &RelationMap, id: u32) -> ObjectGraph {
    let o = room.object(id).expect("object id");
    let mut g = ObjectGraph::new(o.class.clone())
        .with_attr("color", &o.color)
        .with_attr("material", &o.material);
    let facts = relations.get(&id).map(Vec::as_slice).unwrap_or_default();
    let chosen = facts.iter().find(|f| f.kind == "is-on").or_else(|| {
        let c = o.centroid();
        facts.iter().filter(|f| f.kind == "is-near").min_by(|a, b| {
            let da = horizontal_distance(c, room.object(a.target).unwrap().centroid());
            let db = horizontal_distance(c, room.object(b.target).unwrap().centroid());
            da.total_cmp(&db).then(a.target.cmp(&b.target))
        })
    });
    if let Some(f) = chosen {
        let landmark = room.object(f.target).expect("relation target");
        g = g.with_relation(&f.kind, ObjectGraph::new(landmark.class.clone()));
    }
    g.canonicalize().expect("palette tokens are valid")
}

fn horizontal_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Ground-truth instances of `class` among `visible` objects, as the
/// discriminator would see them from a perfect perception stack.
pub fn oracle_instances(
    room: &RoomSpec,
    relations: &RelationMap,
    visible: &BTreeSet<u32>,
    class: &str,
) -> Vec<(u32, InstanceRecord)> {
    room.objects
        .iter()
        .filter(|o| o.class == class && visible.contains(&o.id))
        .map(|o| {
            let c = o.centroid();
            (
                o.id,
                InstanceRecord {
                    graph: caption_graph(room, relations, o.id),
                    regions: Vec::new(),
                    centroid: [c[0], c[1]],
                    score: 1.0,
                    contributors: Vec::new(),
                },
            )
        })
        .collect()
}

fn wrap(rng: &mut impl Rng, noun_phrase: &str) -> String {
    VERB_TEMPLATES.choose(rng).unwrap().replace("{}", noun_phrase)
}

/// Three instructions per visible class (self attribute, self attribute plus
/// the caption's relation, bare name) and one about an absent class. With
/// probability `mismatch_rate` the self-attribute value is swapped for one no
/// visible copy carries. Labels come from classifying the gold graph against
/// the oracle instances.
pub fn emit_instructions(
    room: &RoomSpec,
    relations: &RelationMap,
    visible: &BTreeSet<u32>,
    mismatch_rate: f64,
    rng: &mut impl Rng,
) -> Vec<Instruction> {
    let classes: BTreeSet<&str> = room
        .objects
        .iter()
        .filter(|o| visible.contains(&o.id))
        .map(|o| o.class.as_str())
        .collect();
    let mut out = Vec::new();
    for class in &classes {
        let instances = oracle_instances(room, relations, visible, class);
        let ids: Vec<u32> = instances.iter().map(|(id, _)| *id).collect();
        let records: Vec<InstanceRecord> = instances.into_iter().map(|(_, r)| r).collect();
        let label = |g: &ObjectGraph| classify(g, &records).expect("same root").state;

        // Self attribute.
        let target = *ids.choose(rng).unwrap();
        let o = room.object(target).unwrap();
        let (kind, own, pool) = if rng.random_bool(0.5) {
            ("color", &o.color, COLORS)
        } else {
            ("material", &o.material, MATERIALS)
        };
        let mut value = own.clone();
        if rng.random_bool(mismatch_rate) {
            let taken: BTreeSet<&str> = ids
                .iter()
                .map(|id| {
                    let c = room.object(*id).unwrap();
                    if kind == "color" {
                        c.color.as_str()
                    } else {
                        c.material.as_str()
                    }
                })
                .collect();
            let free: Vec<&&str> = pool.iter().filter(|v| !taken.contains(**v)).collect();
            if let Some(v) = free.choose(rng) {
                value = v.to_string();
            }
        }
        let gold = ObjectGraph::new(*class).with_attr(kind, &value);
        out.push(Instruction {
            text: wrap(rng, &with_article(&format!("{value} {class}"))),
            kind: InstructionKind::SelfAttribute,
            expected: label(&gold),
            gold,
            target: Some(target),
        });

        // Self attribute plus the caption's relation.
        let related: Vec<(u32, ObjectGraph)> = ids
            .iter()
            .map(|id| (*id, caption_graph(room, relations, *id)))
            .filter(|(_, g)| !g.rel_attrs.is_empty())
            .collect();
        if let Some((target, caption)) = related.choose(rng) {
            let o = room.object(*target).unwrap();
            let (kind, value) = if rng.random_bool(0.5) {
                ("color", &o.color)
            } else {
                ("material", &o.material)
            };
            let rel = &caption.rel_attrs[0];
            let cue = if rel.kind == "is-on" { ON_CUES } else { NEAR_CUES }
                .choose(rng)
                .unwrap();
            let gold = ObjectGraph::new(*class)
                .with_attr(kind, value)
                .with_relation(&rel.kind, rel.target.clone())
                .canonicalize()
                .unwrap();
            out.push(Instruction {
                text: wrap(rng, &format!("the {value} {class} {cue} the {}", rel.target.root)),
                kind: InstructionKind::SelfRelational,
                expected: label(&gold),
                gold,
                target: Some(*target),
            });
        }

        // Bare name.
        let gold = ObjectGraph::new(*class);
        out.push(Instruction {
            text: wrap(rng, &with_article(class)),
            kind: InstructionKind::Bare,
            expected: label(&gold),
            gold,
            target: (ids.len() == 1).then_some(ids[0]),
        });
    }

    let present = room.classes();
    let absent: Vec<&str> = PALETTE
        .iter()
        .map(|c| c.name)
        .filter(|c| !present.contains(c))
        .collect();
    if let Some(class) = absent.choose(rng) {
        out.push(Instruction {
            text: wrap(rng, &with_article(class)),
            kind: InstructionKind::Absent,
            gold: ObjectGraph::new(*class),
            target: None,
            expected: DialogueState::Missing,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phrase::{phrase_to_graph, realize, Lexicon};
    use crate::simulator::{derive_relations, generate_room, Copies, SceneObject, SimConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obj(id: u32, class: &str, color: &str, x: f64, support: Option<u32>) -> SceneObject {
        let z = if support.is_some() { 0.75 } else { 0.0 };
        SceneObject {
            id,
            class: class.into(),
            color: color.into(),
            material: "plastic".into(),
            min: [x, 1.0, z],
            max: [x + 0.2, 1.2, z + 0.2],
            support,
        }
    }

    fn room(objects: Vec<SceneObject>) -> RoomSpec {
        RoomSpec {
            seed: 0,
            width: 5.0,
            depth: 5.0,
            wall_height: 2.5,
            objects,
            copies: Copies::new(),
        }
    }

    #[test]
    fn caption_prefers_support() {
        let r = room(vec![
            obj(0, "table", "white", 1.0, None),
            obj(1, "cup", "red", 1.0, Some(0)),
            obj(2, "chair", "black", 1.3, None),
        ]);
        let rel = derive_relations(&r, 0.75);
        assert_eq!(
            realize(&caption_graph(&r, &rel, 1)),
            "a red plastic cup on top of a table"
        );
        assert_eq!(
            realize(&caption_graph(&r, &rel, 2)),
            "a black plastic chair near a table"
        );
    }

    #[test]
    fn labels_follow_the_scene() {
        let one = room(vec![obj(0, "cup", "red", 1.0, None)]);
        let rel = derive_relations(&one, 0.75);
        let visible: BTreeSet<u32> = [0].into();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ins = emit_instructions(&one, &rel, &visible, 0.0, &mut rng);
        let bare = ins.iter().find(|i| i.kind == InstructionKind::Bare).unwrap();
        assert_eq!(bare.expected, DialogueState::Confirm);
        let absent = ins.iter().find(|i| i.kind == InstructionKind::Absent).unwrap();
        assert_eq!(absent.expected, DialogueState::Missing);

        let two = room(vec![obj(0, "cup", "red", 1.0, None), obj(1, "cup", "black", 3.0, None)]);
        let rel = derive_relations(&two, 0.75);
        let visible: BTreeSet<u32> = [0, 1].into();
        let ins = emit_instructions(&two, &rel, &visible, 0.0, &mut rng);
        let bare = ins.iter().find(|i| i.kind == InstructionKind::Bare).unwrap();
        assert_eq!(bare.expected, DialogueState::Ambiguity);
    }

    #[test]
    fn forced_mismatch_on_single_copy() {
        let one = room(vec![obj(0, "cup", "red", 1.0, None)]);
        let rel = derive_relations(&one, 0.75);
        let visible: BTreeSet<u32> = [0].into();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ins = emit_instructions(&one, &rel, &visible, 1.0, &mut rng);
        let attr = ins.iter().find(|i| i.kind == InstructionKind::SelfAttribute).unwrap();
        assert_eq!(attr.expected, DialogueState::Mismatch);
    }

    #[test]
    fn every_instruction_parses_to_its_gold_graph() {
        let lex = Lexicon::builtin();
        let cfg = SimConfig::default();
        for seed in 0..30 {
            let copies: Copies = [("cup".to_string(), 1 + seed as u32 % 3)].into();
            let Ok(r) = generate_room(seed, &cfg, &copies) else {
                continue;
            };
            let rel = derive_relations(&r, cfg.tau_near);
            let visible: BTreeSet<u32> = r.objects.iter().map(|o| o.id).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in emit_instructions(&r, &rel, &visible, 0.3, &mut rng) {
                assert_eq!(phrase_to_graph(&i.text, &lex).unwrap(), i.gold, "{}", i.text);
            }
            for o in &r.objects {
                let g = caption_graph(&r, &rel, o.id);
                assert_eq!(phrase_to_graph(&realize(&g), &lex).unwrap(), g);
            }
        }
    }
}

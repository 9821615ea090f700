//! Acceptance criteria, one test each. Every test writes a single
//! `criterion N PASS|FAIL` line to stderr (uncaptured) before asserting.
//!
//! Criteria 3, 4, 6 and 7 share one generated dataset of 50 rooms per
//! instance count and one evaluation over every noise column.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Vector3};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use disambig_core::config::PipelineConfig;
use disambig_core::dataset::{build_dataset, read_dataset, simulate_to, EpisodeData};
use disambig_core::discriminator::{classify, generate_query, OutcomeRecord, QueryTemplates};
use disambig_core::eval::{evaluate, evaluate_column, ColumnReport, EvalReport};
use disambig_core::geometry::{backproject, to_world, BoundingBox, CameraIntrinsics, Pose};
use disambig_core::phrase::{phrase_to_graph, realize, Lexicon};
use disambig_core::simulator::{
    apply_errors, derive_relations, emit_instructions, generate_room, render_depth, Copies, Detection, ErrorConfig,
    InstructionKind, NoiseColumn, RoomSpec, SimConfig,
};
use disambig_core::{DialogueState, InstanceRecord, ObjectGraph, Pipeline};

fn verdict(id: u32, title: &str, detail: &str, pass: bool) {
    let word = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id} {word}: {title}: {detail}");
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// Shared dataset and evaluation

struct Fixture {
    cfg: PipelineConfig,
    data: Vec<EpisodeData>,
    build: Duration,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = PipelineConfig::default();
        let t = Instant::now();
        let data = build_dataset(&cfg).expect("dataset builds");
        Fixture {
            build: t.elapsed(),
            cfg,
            data,
        }
    })
}

fn report() -> &'static EvalReport {
    static R: OnceLock<EvalReport> = OnceLock::new();
    R.get_or_init(|| {
        let f = fixture();
        let p = Pipeline::new(f.cfg.clone()).unwrap();
        evaluate(&p, &f.data, &NoiseColumn::ALL).unwrap()
    })
}

fn column(name: NoiseColumn) -> &'static ColumnReport {
    report().columns.iter().find(|c| c.noise == name.as_str()).unwrap()
}

fn f1_list(c: &ColumnReport) -> String {
    c.counting
        .f1
        .iter()
        .map(|(k, v)| format!("F1@{k}={v:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// 1. Parser corpus

#[test]
fn criterion_1_parser_corpus() {
    let lex = Lexicon::builtin();
    let cfg = SimConfig::default();
    let t = Instant::now();
    let mut corpus = Vec::new();
    let mut seed = 0u64;
    while corpus.len() < 600 {
        let copies: Copies = [("cup".to_string(), 1 + (seed % 3) as u32)].into();
        seed += 1;
        let Ok(room) = generate_room(seed, &cfg, &copies) else {
            continue;
        };
        let relations = derive_relations(&room, cfg.tau_near);
        let visible: BTreeSet<u32> = room.objects.iter().map(|o| o.id).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        corpus.extend(emit_instructions(
            &room,
            &relations,
            &visible,
            cfg.mismatch_rate,
            &mut rng,
        ));
    }
    let matched = corpus
        .iter()
        .filter(|i| phrase_to_graph(&i.text, &lex).is_ok_and(|g| g == i.gold))
        .count();
    let elapsed = t.elapsed();
    let kinds: BTreeSet<InstructionKind> = corpus.iter().map(|i| i.kind).collect();
    let rate = matched as f64 / corpus.len() as f64;
    let three_types = [
        InstructionKind::SelfAttribute,
        InstructionKind::SelfRelational,
        InstructionKind::Bare,
    ]
    .iter()
    .all(|k| kinds.contains(k));
    verdict(
        1,
        "parser corpus",
        &format!(
            "{matched}/{} match gold ({rate:.4}), all three expression types: {three_types}, {:.2} s",
            corpus.len(),
            elapsed.as_secs_f64()
        ),
        corpus.len() >= 500 && rate >= 0.99 && three_types && elapsed < Duration::from_secs(5),
    );
}

// ---------------------------------------------------------------------------
// 2. Round-trip law

fn random_graph(rng: &mut ChaCha8Rng, lex: &Lexicon, budget: &mut usize, levels: usize) -> ObjectGraph {
    let classes: Vec<&str> = lex.classes().collect();
    let mut g = ObjectGraph::new(*classes.choose(rng).unwrap());
    let kinds: Vec<&str> = lex.value_kinds().collect();
    for kind in kinds {
        if *budget > 0 && rng.random_bool(0.5) {
            let values: Vec<&str> = lex.values(kind).collect();
            g = g.with_attr(kind, values.choose(rng).unwrap());
            *budget -= 1;
        }
    }
    let relations: Vec<&str> = lex.relation_kinds().into_iter().collect();
    while levels > 0 && *budget > 0 && rng.random_bool(0.5) {
        *budget -= 1;
        let kind = *relations.choose(rng).unwrap();
        let child = random_graph(rng, lex, budget, levels - 1);
        g = g.with_relation(kind, child);
    }
    g
}

#[test]
fn criterion_2_round_trip() {
    let lex = Lexicon::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let mut shapes = BTreeSet::new();
    let mut n = 0;
    while n < 1000 {
        let mut budget = 3;
        let g = random_graph(&mut rng, &lex, &mut budget, 2).canonicalize().unwrap();
        if g.depth() > 2 {
            continue;
        }
        n += 1;
        shapes.insert((g.depth(), g.edge_count()));
        let text = realize(&g);
        match phrase_to_graph(&text, &lex) {
            Ok(back) if back == g => {}
            other => failures.push(format!("{text:?} -> {other:?}")),
        }
    }
    verdict(
        2,
        "realize/parse round trip",
        &format!(
            "{n} graphs, {} (depth, edges) shapes, {} failures {:?}",
            shapes.len(),
            failures.len(),
            failures.first()
        ),
        failures.is_empty(),
    );
}

// ---------------------------------------------------------------------------
// 3. Noise-free counting

#[test]
fn criterion_3_counting_noise_free() {
    let f = fixture();
    let p = Pipeline::new(f.cfg.clone()).unwrap();
    let t = Instant::now();
    let c = evaluate_column(&p, &f.data, NoiseColumn::None).unwrap();
    let total = f.build + t.elapsed();
    let per_count: BTreeMap<u32, usize> = c.episodes.iter().fold(BTreeMap::new(), |mut m, e| {
        *m.entry(e.true_count).or_default() += 1;
        m
    });
    let exact = c.counting.f1.len() == 3 && c.counting.f1.values().all(|&v| v == 1.0);
    verdict(
        3,
        "counting, noise-free",
        &format!(
            "{} episodes per count {:?}, {}, {:.1} s",
            c.episodes.len(),
            per_count,
            f1_list(&c),
            total.as_secs_f64()
        ),
        per_count.values().all(|&n| n == 50) && exact && total < Duration::from_secs(120),
    );
}

// ---------------------------------------------------------------------------
// 4. Counting under noise

#[test]
fn criterion_4_counting_under_noise() {
    let noisy = column(NoiseColumn::CsSdFn);
    let fp = column(NoiseColumn::Fp);
    let others: Vec<(&str, f64)> = report()
        .columns
        .iter()
        .filter(|c| c.noise != fp.noise)
        .map(|c| (c.noise.as_str(), c.counting.average))
        .collect();
    let fp_worst = others.iter().all(|(_, a)| fp.counting.average < *a);
    let degradation = noisy.counting.degradation.unwrap();
    verdict(
        4,
        "counting under noise",
        &format!(
            "cs+sd+fn avg {:.3} degradation {degradation:.3}; fp avg {:.3}, others {others:?}",
            noisy.counting.average, fp.counting.average
        ),
        noisy.counting.average >= 0.85 && degradation <= 0.10 && fp.counting.average >= 0.65 && fp_worst,
    );
}

// ---------------------------------------------------------------------------
// 5. Discriminator against a brute-force oracle

/// Self attributes "k=v", relational "rel=landmark" and "rel=landmark / k=v".
fn oracle_paths(g: &ObjectGraph) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in &g.self_attrs {
        out.insert(format!("{}={}", a.kind, a.value));
    }
    for r in &g.rel_attrs {
        let head = format!("{}={}", r.kind, r.target.root);
        for tail in oracle_paths(&r.target) {
            out.insert(format!("{head} / {tail}"));
        }
        out.insert(head);
    }
    out
}

#[derive(Debug, PartialEq)]
enum Oracle {
    Missing,
    Confirm(usize),
    Mismatch(usize, BTreeSet<String>),
    Ambiguity(BTreeMap<usize, BTreeSet<String>>),
    /// One exact match among non-matching instances.
    OneExactAmongOthers(usize),
    /// Two or more exact matches.
    SeveralExact(BTreeSet<usize>),
}

/// The cardinality rule applied literally to the non-empty differences, with
/// the two mixed situations it leaves open reported separately.
fn oracle(g: &ObjectGraph, instances: &[ObjectGraph]) -> Oracle {
    let want = oracle_paths(g);
    let diffs: Vec<BTreeSet<String>> = instances
        .iter()
        .map(|i| want.difference(&oracle_paths(i)).cloned().collect())
        .collect();
    let exact: BTreeSet<usize> = (0..diffs.len()).filter(|&i| diffs[i].is_empty()).collect();
    let nonempty: BTreeMap<usize, BTreeSet<String>> = diffs
        .iter()
        .enumerate()
        .filter(|(_, d)| !d.is_empty())
        .map(|(i, d)| (i, d.clone()))
        .collect();
    if instances.is_empty() {
        return Oracle::Missing;
    }
    match (exact.len(), nonempty.len()) {
        (1, 0) => Oracle::Confirm(*exact.first().unwrap()),
        (1, _) => Oracle::OneExactAmongOthers(*exact.first().unwrap()),
        (0, 1) => {
            let (i, d) = nonempty.into_iter().next().unwrap();
            Oracle::Mismatch(i, d)
        }
        (0, _) => Oracle::Ambiguity(nonempty),
        _ => Oracle::SeveralExact(exact),
    }
}

fn universe() -> Vec<ObjectGraph> {
    let mut out = Vec::new();
    for color in [None, Some("red"), Some("black")] {
        for material in [None, Some("plastic"), Some("metal")] {
            for landmark in [None, Some("table"), Some("counter")] {
                let mut g = ObjectGraph::new("cup");
                if let Some(c) = color {
                    g = g.with_attr("color", c);
                }
                if let Some(m) = material {
                    g = g.with_attr("material", m);
                }
                if let Some(l) = landmark {
                    g = g.with_relation("is-on", ObjectGraph::new(l));
                }
                out.push(g.canonicalize().unwrap());
            }
        }
    }
    out
}

/// Multisets of at most `k` indices into `0..n`, as sorted lists.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in &frontier {
            let lo = s.last().copied().unwrap_or(0);
            for i in lo..n {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn record(g: &ObjectGraph, slot: usize) -> InstanceRecord {
    InstanceRecord {
        graph: g.clone(),
        regions: Vec::new(),
        centroid: [slot as f64, 0.0],
        score: 1.0,
        contributors: Vec::new(),
    }
}

#[test]
fn criterion_5_discriminator_oracle() {
    let graphs = universe();
    let sets = multisets(graphs.len(), 3);
    let mut cases = 0usize;
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    let mut disagreements = Vec::new();
    for g in &graphs {
        for set in &sets {
            cases += 1;
            let members: Vec<ObjectGraph> = set.iter().map(|&i| graphs[i].clone()).collect();
            let records: Vec<InstanceRecord> = members.iter().enumerate().map(|(slot, m)| record(m, slot)).collect();
            let got = classify(g, &records).unwrap();
            let slot_of = |r: &InstanceRecord| r.centroid[0] as usize;
            let got_candidates: BTreeMap<usize, BTreeSet<String>> = got
                .candidates
                .iter()
                .map(|c| {
                    (
                        slot_of(&c.instance),
                        c.difference.iter().map(|p| p.to_string()).collect(),
                    )
                })
                .collect();
            let got_matched = got.matched.as_ref().map(slot_of);
            let expected = oracle(g, &members);
            let (kind, ok) = match &expected {
                Oracle::Missing => (
                    "missing",
                    got.state == DialogueState::Missing && got_candidates.is_empty(),
                ),
                Oracle::Confirm(i) => (
                    "confirm",
                    got.state == DialogueState::Confirm && got_matched == Some(*i) && got_candidates.is_empty(),
                ),
                Oracle::Mismatch(i, d) => (
                    "mismatch",
                    got.state == DialogueState::Mismatch && got_candidates == BTreeMap::from([(*i, d.clone())]),
                ),
                Oracle::Ambiguity(all) => (
                    "ambiguity",
                    got.state == DialogueState::Ambiguity && &got_candidates == all,
                ),
                // Pinned deviation: the exact match is confirmed.
                Oracle::OneExactAmongOthers(i) => (
                    "one exact among others",
                    got.state == DialogueState::Confirm && got_matched == Some(*i),
                ),
                // Pinned deviation: ask only among the exact matches.
                Oracle::SeveralExact(exact) => (
                    "several exact",
                    got.state == DialogueState::Ambiguity
                        && got_candidates.keys().copied().collect::<BTreeSet<_>>() == *exact
                        && got_candidates.values().all(BTreeSet::is_empty),
                ),
            };
            *by_kind.entry(kind).or_default() += 1;
            if !ok && disagreements.len() < 3 {
                disagreements.push(format!("{} vs {:?}: got {:?}", g.to_text(), set, got.state));
            }
        }
    }

    // The two deviations, pinned end to end including the query text.
    let t = QueryTemplates::default();
    let red = ObjectGraph::new("cup").with_attr("color", "red");
    let black = ObjectGraph::new("cup").with_attr("color", "black");
    let red_metal = red.clone().with_attr("material", "metal").canonicalize().unwrap();
    let one = classify(&red, &[record(&black, 0), record(&red, 1)]).unwrap();
    let one_query = generate_query(&one, &t, 0);
    let several = classify(&red, &[record(&red_metal, 0), record(&red, 1), record(&black, 2)]).unwrap();
    let several_query = generate_query(&several, &t, 0);
    let pinned = one.state == DialogueState::Confirm
        && one.matched.as_ref().map(|m| m.centroid[0]) == Some(1.0)
        && t.acknowledgements.contains(&one_query)
        && several.state == DialogueState::Ambiguity
        && several_query.starts_with("I found one red cup, and one red metal cup. ")
        && t.wh_suffixes.iter().any(|s| several_query.ends_with(s.as_str()));

    verdict(
        5,
        "discriminator vs brute-force oracle",
        &format!(
            "{cases} cases {by_kind:?}, {} disagreements {:?}; pinned deviations hold: {pinned}",
            disagreements.len(),
            disagreements
        ),
        disagreements.is_empty() && pinned && cases > 1000,
    );
}

// ---------------------------------------------------------------------------
// 6. End-to-end state accuracy

#[test]
fn criterion_6_state_accuracy() {
    let clean = column(NoiseColumn::None);
    let noisy = column(NoiseColumn::CsSdFn);
    let d = &clean.dialogue;
    verdict(
        6,
        "dialogue state accuracy",
        &format!(
            "{} pairs; noise-free AA {:.3} state acc {:.3} confusion {:?}; cs+sd+fn AA {:.3}",
            d.pairs, d.ambiguity_f1, d.state_accuracy, d.confusion, noisy.dialogue.ambiguity_f1
        ),
        d.pairs == 100 && d.ambiguity_f1 >= 0.95 && d.state_accuracy >= 0.95 && noisy.dialogue.ambiguity_f1 >= 0.85,
    );
}

// ---------------------------------------------------------------------------
// 7. Query accuracy and BLEU

#[test]
fn criterion_7_query_accuracy() {
    let clean = &column(NoiseColumn::None).dialogue;
    let noisy = &column(NoiseColumn::CsSdFn).dialogue;
    verdict(
        7,
        "query accuracy and BLEU",
        &format!(
            "noise-free QA {:.3} BLEU {:.4}; cs+sd+fn QA {:.3} BLEU {:.4}",
            clean.query_accuracy, clean.bleu, noisy.query_accuracy, noisy.bleu
        ),
        clean.pairs == 100
            && clean.query_accuracy >= 0.90
            && clean.bleu == 1.0
            && noisy.query_accuracy >= 0.70
            && noisy.bleu >= 0.77,
    );
}

// ---------------------------------------------------------------------------
// 8. Geometry numerics

fn rigidity_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = CameraIntrinsics::centered(110.0, 128, 128).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let rot = Rotation3::new(axis * rng.random_range(0.0..3.0));
        let t = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(0.0..3.0),
        );
        let pose = Pose::new(*rot.matrix(), t).unwrap();
        let cam: Vec<Vector3<f64>> = (0..6)
            .map(|_| {
                let (u, v) = (rng.random_range(0.0..128.0), rng.random_range(0.0..128.0));
                backproject(u, v, rng.random_range(0.3..8.0), &k).unwrap()
            })
            .collect();
        let world: Vec<Vector3<f64>> = cam.iter().map(|p| to_world(p, &pose)).collect();
        for i in 0..cam.len() {
            for j in i + 1..cam.len() {
                worst = worst.max(((cam[i] - cam[j]).norm() - (world[i] - world[j]).norm()).abs());
            }
            // The camera center maps to the translation, so ranges are kept too.
            worst = worst.max((cam[i].norm() - (world[i] - t).norm()).abs());
        }
    }
    worst
}

/// Largest deviation of rendered depth from the closed form for a camera
/// facing a bare wall squarely: every pixel whose ray meets that wall reads
/// the wall distance.
fn wall_error() -> (f64, usize) {
    let room = RoomSpec {
        seed: 0,
        width: 6.0,
        depth: 5.0,
        wall_height: 2.5,
        objects: vec![],
        copies: Copies::new(),
    };
    let k = CameraIntrinsics::centered(110.0, 128, 128).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    // (camera x, camera y, yaw, wall distance)
    for (x, y, yaw, dist) in [(2.0, 2.5, 0.0, 4.0), (3.0, 1.5, FRAC_PI_2, 3.5), (4.5, 2.0, 0.0, 1.5)] {
        let height = 1.2;
        let pose = Pose::looking(Vector3::new(x, y, height), yaw, 0.0);
        let d = render_depth(&room, &pose, &k);
        let lateral_room = if yaw == 0.0 {
            (y, room.depth - y)
        } else {
            (x, room.width - x)
        };
        for v in 0..128u32 {
            for u in 0..128u32 {
                let (a, b) = ((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy);
                let z_hit = height - b * dist;
                let side = a * dist;
                let margin = 1e-3;
                let inside = z_hit > margin
                    && z_hit < room.wall_height - margin
                    && side > -lateral_room.1 + margin
                    && side < lateral_room.0 - margin;
                if inside {
                    checked += 1;
                    worst = worst.max((d.get(u, v) as f64 - dist).abs());
                }
            }
        }
    }
    (worst, checked)
}

struct MonteCarlo {
    shift_mean: f64,
    shift_std: f64,
    scale_mean: f64,
    scale_std: f64,
    deletion_rate: f64,
    injection_rate: f64,
}

fn monte_carlo(cfg: &ErrorConfig, draws: usize) -> MonteCarlo {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let (w, h) = (4000, 4000);
    let b = BoundingBox::from_center(2000.0, 2000.0, 40.0, 40.0);
    let det = Detection {
        bbox: b,
        caption: "a red cup".into(),
        gt_id: Some(0),
    };
    let bank = vec![Detection {
        bbox: BoundingBox::from_center(100.0, 100.0, 20.0, 20.0),
        caption: "a blue vase".into(),
        gt_id: None,
    }];
    let only = |column: NoiseColumn| cfg.with_column(column);
    let mean_std = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, v.sqrt())
    };

    let cs = only(NoiseColumn::Cs);
    let shifts: Vec<f64> = (0..draws)
        .map(|_| {
            let out = apply_errors(std::slice::from_ref(&det), w, h, &bank, &cs, &mut rng);
            let (u, v) = out[0].bbox.center();
            (u - 2000.0).hypot(v - 2000.0) / b.area().sqrt()
        })
        .collect();
    let sd = ErrorConfig {
        shape_distortion: true,
        ..cfg.with_column(NoiseColumn::None)
    };
    let scales: Vec<f64> = (0..draws)
        .map(|_| {
            let out = apply_errors(std::slice::from_ref(&det), w, h, &bank, &sd, &mut rng);
            (out[0].bbox.width() / b.width() - 1.0).abs()
        })
        .collect();
    let fneg = ErrorConfig {
        false_negatives: true,
        ..cfg.with_column(NoiseColumn::None)
    };
    let deleted = (0..draws)
        .filter(|_| apply_errors(std::slice::from_ref(&det), w, h, &bank, &fneg, &mut rng).is_empty())
        .count();
    let fp = only(NoiseColumn::Fp);
    let injected = (0..draws)
        .filter(|_| !apply_errors(&[], w, h, &bank, &fp, &mut rng).is_empty())
        .count();
    let (shift_mean, shift_std) = mean_std(&shifts);
    let (scale_mean, scale_std) = mean_std(&scales);
    MonteCarlo {
        shift_mean,
        shift_std,
        scale_mean,
        scale_std,
        deletion_rate: deleted as f64 / draws as f64,
        injection_rate: injected as f64 / draws as f64,
    }
}

#[test]
fn criterion_8_geometry_numerics() {
    let rigid = rigidity_error();
    let (wall, wall_pixels) = wall_error();
    let cfg = ErrorConfig::default();
    let mc = monte_carlo(&cfg, 10_000);
    let close = |got: f64, want: f64| (got - want).abs() <= 0.01;
    let stats_ok = close(mc.shift_mean, cfg.mu_c)
        && close(mc.shift_std, cfg.sigma_c)
        && close(mc.scale_mean, cfg.mu_s)
        && close(mc.scale_std, cfg.sigma_s)
        && close(mc.deletion_rate, cfg.p_fn)
        && close(mc.injection_rate, cfg.p_fp);
    verdict(
        8,
        "geometry numerics",
        &format!(
            "rigidity {rigid:.2e} m; wall {wall:.2e} m over {wall_pixels} px; shift {:.4}/{:.4}, scale {:.4}/{:.4}, \
             deletion {:.4}, injection {:.4} over 10^4 draws",
            mc.shift_mean, mc.shift_std, mc.scale_mean, mc.scale_std, mc.deletion_rate, mc.injection_rate
        ),
        rigid <= 1e-9 && wall <= 1e-6 && wall_pixels > 10_000 && stats_ok,
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn ground_and_eval(dir: &Path, cfg: &PipelineConfig) -> (Vec<String>, String) {
    let data = read_dataset(dir).unwrap();
    let p = Pipeline::new(cfg.clone()).unwrap();
    let mut records = Vec::new();
    for ep in &data {
        let noise = cfg.errors.with_column(NoiseColumn::CsSdFn);
        let (session, _) = p.observe(ep, &noise).unwrap();
        for ins in &ep.instructions {
            let outcome = p.ground(&session, &ins.text, ins.query_seed).unwrap();
            records.push(serde_json::to_string(&OutcomeRecord::from(&outcome)).unwrap());
        }
    }
    (records, evaluate(&p, &data, &NoiseColumn::ALL).unwrap().to_json())
}

#[test]
fn criterion_9_determinism() {
    let cfg = PipelineConfig {
        rooms: 2,
        ..PipelineConfig::default()
    };
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    simulate_to(&a, &cfg).unwrap();
    simulate_to(&b, &cfg).unwrap();
    let (ta, tb) = (tree(&a), tree(&b));
    let (ga, ra) = ground_and_eval(&a, &cfg);
    let (gb, rb) = ground_and_eval(&b, &cfg);
    let files = ta.len();
    let bytes: usize = ta.values().map(Vec::len).sum();
    verdict(
        9,
        "determinism",
        &format!(
            "{files} files / {bytes} bytes identical: {}; {} grounding records identical: {}; reports identical: {}",
            ta == tb,
            ga.len(),
            ga == gb,
            ra == rb
        ),
        ta == tb && !ga.is_empty() && ga == gb && ra == rb,
    );
}

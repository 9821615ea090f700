//! Evaluation: instance-counting F1, dialogue-state metrics, query accuracy
//! and corpus BLEU, per detector-noise column.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EpisodeData;
use crate::discriminator::{ground, DialogueState, GroundingOutcome};
use crate::graph::ObjectGraph;
use crate::phrase::tokenize;
use crate::pipeline::{Pipeline, PipelineError};
use crate::simulator::NoiseColumn;

/// Tokens a query is scored on: lowercase words with punctuation split off.
pub fn query_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut out = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_default() += 1;
        }
    }
    out
}

/// Clipped n-gram matches and candidate n-gram total for one pair.
fn clipped(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let refs = ngram_counts(reference, n);
    let matched = ngram_counts(candidate, n)
        .into_iter()
        .map(|(g, c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

fn combine(matched: &[usize], totals: &[usize], cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for (m, t) in matched.iter().zip(totals) {
        if *m == 0 || *t == 0 {
            return 0.0;
        }
        log_sum += (*m as f64 / *t as f64).ln();
    }
    let brevity = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    brevity * (log_sum / matched.len() as f64).exp()
}

/// Sentence BLEU with uniform weights over 1..=`max_n` grams and the brevity
/// penalty. Orders longer than the reference are dropped.
pub fn bleu(candidate: &[String], reference: &[String], max_n: usize) -> f64 {
    corpus_bleu(&[(candidate.to_vec(), reference.to_vec())], max_n)
}

/// Corpus BLEU: clipped counts and lengths are summed over all pairs before
/// the precisions are combined.
pub fn corpus_bleu(pairs: &[(Vec<String>, Vec<String>)], max_n: usize) -> f64 {
    let longest_ref = pairs.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let orders = max_n.min(longest_ref).max(1);
    let mut matched = vec![0; orders];
    let mut totals = vec![0; orders];
    let (mut cand_len, mut ref_len) = (0, 0);
    for (c, r) in pairs {
        cand_len += c.len();
        ref_len += r.len();
        for n in 1..=orders {
            let (m, t) = clipped(c, r, n);
            matched[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    combine(&matched, &totals, cand_len, ref_len)
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Per-count F1 over (true, predicted) count pairs: for count `c`, episodes
/// with true count `c` predicted `c` are hits, other predictions of `c` are
/// false alarms and other predictions for true `c` are misses.
pub fn count_f1(pairs: &[(u32, u32)], counts: &[u32]) -> BTreeMap<u32, f64> {
    counts
        .iter()
        .map(|&c| {
            let tp = pairs.iter().filter(|(t, p)| *t == c && *p == c).count();
            let fp = pairs.iter().filter(|(t, p)| *t != c && *p == c).count();
            let fn_ = pairs.iter().filter(|(t, p)| *t == c && *p != c).count();
            (c, f1(tp, fp, fn_))
        })
        .collect()
}

fn state_index(s: DialogueState) -> usize {
    DialogueState::ALL.iter().position(|x| *x == s).unwrap()
}

/// Graphs a query verbalizes: the matched instance for a confirmation,
/// otherwise the candidates.
fn slot_graphs(o: &GroundingOutcome) -> Vec<ObjectGraph> {
    let mut gs: Vec<ObjectGraph> = match &o.matched {
        Some(m) => vec![m.graph.clone()],
        None => o.candidates.iter().map(|c| c.instance.graph.clone()).collect(),
    };
    gs.sort();
    gs
}

/// Structural agreement: same state and the same multiset of slot graphs.
pub fn query_matches(predicted: &GroundingOutcome, reference: &GroundingOutcome) -> bool {
    predicted.state == reference.state && slot_graphs(predicted) == slot_graphs(reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionResult {
    pub text: String,
    pub expected: DialogueState,
    pub predicted: DialogueState,
    pub query: String,
    pub reference: String,
    pub query_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: String,
    pub focus: String,
    pub true_count: u32,
    pub predicted_count: u32,
    pub instructions: Vec<InstructionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    /// Keyed by instance count.
    pub f1: BTreeMap<u32, f64>,
    pub average: f64,
    /// Average F1 of the noise-free column minus this one, when both ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueReport {
    pub pairs: usize,
    /// F1 of detecting the ambiguity state against the oracle label.
    pub ambiguity_f1: f64,
    /// Four-way state accuracy.
    pub state_accuracy: f64,
    /// Rows are expected states, columns predicted, both in
    /// CONFIRM, INFORM-MISMATCH, INFORM-AMBIGUITY, INFORM-MISSING order.
    pub confusion: [[usize; 4]; 4],
    pub query_accuracy: f64,
    pub bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub noise: String,
    pub counting: CountingReport,
    pub dialogue: DialogueReport,
    pub episodes: Vec<EpisodeResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// The configuration document the report was produced with.
    pub config: String,
    pub columns: Vec<ColumnReport>,
}

/// Which instructions of which episodes are scored for dialogue metrics:
/// the first instruction of every episode, then the second, and so on, up to
/// `limit` pairs (0 for all).
pub fn dialogue_selection(episodes: &[EpisodeData], limit: u32) -> Vec<(usize, usize)> {
    let most = episodes.iter().map(|e| e.instructions.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    for j in 0..most {
        for (i, e) in episodes.iter().enumerate() {
            if j < e.instructions.len() {
                out.push((i, j));
            }
        }
    }
    if limit > 0 {
        out.truncate(limit as usize);
    }
    out.sort();
    out
}

/// Runs the pipeline over every episode under one noise column.
pub fn evaluate_column(
    pipeline: &Pipeline,
    episodes: &[EpisodeData],
    column: NoiseColumn,
) -> Result<ColumnReport, PipelineError> {
    let cfg = pipeline.config();
    let noise = cfg.errors.with_column(column);
    let selection = dialogue_selection(episodes, cfg.dialogue_pairs);

    type Graded = (EpisodeResult, Vec<(GroundingOutcome, GroundingOutcome)>);
    let graded: Vec<Graded> = episodes
        .par_iter()
        .enumerate()
        .map(|(i, ep)| -> Result<Graded, PipelineError> {
            let (session, _) = pipeline.observe(ep, &noise)?;
            let predicted_count = pipeline.instances(&session, &ep.spec.focus)?.len() as u32;
            let mut results = Vec::new();
            let mut outcomes = Vec::new();
            for &(_, j) in selection.iter().filter(|(e, _)| *e == i) {
                let ins = &ep.instructions[j];
                let predicted = pipeline.ground(&session, &ins.text, ins.query_seed)?;
                let oracle: Vec<_> = ins.oracle.iter().map(|o| o.record()).collect();
                let reference = ground(&ins.gold, &oracle, &cfg.templates, ins.query_seed)?;
                results.push(InstructionResult {
                    text: ins.text.clone(),
                    expected: ins.expected,
                    predicted: predicted.state,
                    query: predicted.query.clone(),
                    reference: reference.query.clone(),
                    query_match: query_matches(&predicted, &reference),
                });
                outcomes.push((predicted, reference));
            }
            Ok((
                EpisodeResult {
                    episode: ep.spec.name.clone(),
                    focus: ep.spec.focus.clone(),
                    true_count: ep.true_count(),
                    predicted_count,
                    instructions: results,
                },
                outcomes,
            ))
        })
        .collect::<Result<_, _>>()?;

    let count_pairs: Vec<(u32, u32)> = graded.iter().map(|(r, _)| (r.true_count, r.predicted_count)).collect();
    let f1s = count_f1(&count_pairs, &cfg.counts);
    let average = f1s.values().sum::<f64>() / f1s.len() as f64;

    let results: Vec<&InstructionResult> = graded.iter().flat_map(|(r, _)| &r.instructions).collect();
    let mut confusion = [[0usize; 4]; 4];
    for r in &results {
        confusion[state_index(r.expected)][state_index(r.predicted)] += 1;
    }
    let amb = state_index(DialogueState::Ambiguity);
    let tp = confusion[amb][amb];
    let fn_ = confusion[amb].iter().sum::<usize>() - tp;
    let fp = (0..4).map(|r| confusion[r][amb]).sum::<usize>() - tp;
    let n = results.len();
    let ratio = |k: usize| if n == 0 { 1.0 } else { k as f64 / n as f64 };
    let bleu_pairs: Vec<(Vec<String>, Vec<String>)> = graded
        .iter()
        .flat_map(|(_, o)| o)
        .map(|(p, r)| (query_tokens(&p.query), query_tokens(&r.query)))
        .collect();

    Ok(ColumnReport {
        noise: column.as_str().to_string(),
        counting: CountingReport {
            f1: f1s,
            average,
            degradation: None,
        },
        dialogue: DialogueReport {
            pairs: n,
            ambiguity_f1: f1(tp, fp, fn_),
            state_accuracy: ratio((0..4).map(|s| confusion[s][s]).sum()),
            confusion,
            query_accuracy: ratio(results.iter().filter(|r| r.query_match).count()),
            bleu: if bleu_pairs.is_empty() {
                1.0
            } else {
                corpus_bleu(&bleu_pairs, 4)
            },
        },
        episodes: graded.into_iter().map(|(r, _)| r).collect(),
    })
}

pub fn evaluate(
    pipeline: &Pipeline,
    episodes: &[EpisodeData],
    columns: &[NoiseColumn],
) -> Result<EvalReport, PipelineError> {
    let mut out = Vec::with_capacity(columns.len());
    for &c in columns {
        out.push(evaluate_column(pipeline, episodes, c)?);
    }
    let clean = out
        .iter()
        .find(|c| c.noise == NoiseColumn::None.as_str())
        .map(|c| c.counting.average);
    if let Some(clean) = clean {
        for c in &mut out {
            c.counting.degradation = Some(clean - c.counting.average);
        }
    }
    Ok(EvalReport {
        config: pipeline.config().to_text(),
        columns: out,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// One row per noise column.
    pub fn to_table(&self) -> String {
        let counts: Vec<u32> = self
            .columns
            .first()
            .map(|c| c.counting.f1.keys().copied().collect())
            .unwrap_or_default();
        let mut header: Vec<String> = vec!["noise".into()];
        header.extend(counts.iter().map(|c| format!("F1@{c}")));
        for h in ["F1 avg", "delta", "AA(F1)", "state acc", "QA", "BLEU", "pairs"] {
            header.push(h.into());
        }
        let mut rows = vec![header];
        for c in &self.columns {
            let mut row = vec![c.noise.clone()];
            row.extend(counts.iter().map(|k| format!("{:.3}", c.counting.f1[k])));
            row.push(format!("{:.3}", c.counting.average));
            row.push(
                c.counting
                    .degradation
                    .map(|d| format!("{d:+.3}"))
                    .unwrap_or_else(|| "-".into()),
            );
            let d = &c.dialogue;
            row.push(format!("{:.3}", d.ambiguity_f1));
            row.push(format!("{:.3}", d.state_accuracy));
            row.push(format!("{:.3}", d.query_accuracy));
            row.push(format!("{:.3}", d.bleu));
            row.push(d.pairs.to_string());
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let r = toks("i found one red cup . which one did you mean ?");
        assert_eq!(bleu(&r, &r, 4), 1.0);
        assert_eq!(bleu(&toks("x y z w"), &toks("a b c d"), 4), 0.0);
        assert_eq!(bleu(&[], &r, 4), 0.0);
    }

    // Candidate "the the the" against "the cat": unigram precision is clipped
    // to 1/3 and the bigram "the the" never matches. Reference length 2 caps
    // the orders at 2, so the score is 0; with unigrams only it is 1/3.
    #[test]
    fn bleu_clips_repeated_tokens() {
        let (c, r) = (toks("the the the"), toks("the cat"));
        assert_eq!(clipped(&c, &r, 1), (1, 3));
        assert_eq!(bleu(&c, &r, 4), 0.0);
        assert!((bleu(&c, &r, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_brevity_penalty() {
        let r = toks("a b c d e f");
        let c = toks("a b c d");
        let expected = (1.0f64 - 6.0 / 4.0).exp();
        assert!((bleu(&c, &r, 4) - expected).abs() < 1e-12);
    }

    #[test]
    fn corpus_bleu_pools_counts() {
        let pairs = vec![(toks("a b c d"), toks("a b c d")), (toks("e f g h"), toks("e f g x"))];
        // 1-gram 7/8, 2-gram 5/6, 3-gram 3/4, 4-gram 1/2.
        let expected = ((7.0f64 / 8.0).ln() + (5.0f64 / 6.0).ln() + (0.75f64).ln() + (0.5f64).ln()) / 4.0;
        assert!((corpus_bleu(&pairs, 4) - expected.exp()).abs() < 1e-12);
    }

    #[test]
    fn count_f1_by_hand() {
        let pairs = [(1, 1), (1, 1), (2, 2), (2, 1), (3, 3), (3, 2)];
        let f = count_f1(&pairs, &[1, 2, 3]);
        assert!((f[&1] - 0.8).abs() < 1e-12); // tp 2, fp 1, fn 0
        assert!((f[&2] - 0.5).abs() < 1e-12); // tp 1, fp 1, fn 1
        assert!((f[&3] - 2.0 / 3.0).abs() < 1e-12); // tp 1, fp 0, fn 1
        assert_eq!(count_f1(&[(1, 1)], &[1, 2])[&2], 1.0);
    }

    #[test]
    fn query_tokens_split_punctuation() {
        assert_eq!(
            query_tokens("I found one cup. Okay?"),
            vec!["i", "found", "one", "cup", ".", "okay", "?"]
        );
    }
}

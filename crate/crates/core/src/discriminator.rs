//! Dialogue state classification and query generation.
//!
//! The input graph is compared against every unique instance of its root
//! class. An instance matches exactly when it carries every attribute path the
//! input asks for. One exact match grounds the request even if other,
//! non-matching instances exist; several exact matches are ambiguous among
//! themselves.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::InstanceRecord;
use crate::graph::{GraphError, ObjectGraph, PathSet};
use crate::phrase::describe;

pub const MISSING_QUERY: &str = "I could not find that.";

#[derive(Debug, Error, PartialEq)]
pub enum DiscriminatorError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown dialogue state {0:?}")]
    UnknownState(String),
    #[error("{0} list must not be empty")]
    EmptyList(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DialogueState {
    #[serde(rename = "CONFIRM")]
    Confirm,
    #[serde(rename = "INFORM-MISMATCH")]
    Mismatch,
    #[serde(rename = "INFORM-AMBIGUITY")]
    Ambiguity,
    #[serde(rename = "INFORM-MISSING")]
    Missing,
}

impl DialogueState {
    pub const ALL: [DialogueState; 4] = [
        DialogueState::Confirm,
        DialogueState::Mismatch,
        DialogueState::Ambiguity,
        DialogueState::Missing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DialogueState::Confirm => "CONFIRM",
            DialogueState::Mismatch => "INFORM-MISMATCH",
            DialogueState::Ambiguity => "INFORM-AMBIGUITY",
            DialogueState::Missing => "INFORM-MISSING",
        }
    }
}

impl fmt::Display for DialogueState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogueState {
    type Err = DiscriminatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| DiscriminatorError::UnknownState(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub instance: InstanceRecord,
    /// Requested paths this instance lacks.
    pub difference: PathSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingOutcome {
    pub state: DialogueState,
    pub matched: Option<InstanceRecord>,
    /// Sorted by description, then centroid.
    pub candidates: Vec<Candidate>,
    pub query: String,
}

/// Phrase lists the query templates draw from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTemplates {
    pub mismatch_suffixes: Vec<String>,
    pub wh_suffixes: Vec<String>,
    pub acknowledgements: Vec<String>,
}

impl Default for QueryTemplates {
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            mismatch_suffixes: own(&["— is that okay?", "— should I take it instead?"]),
            wh_suffixes: own(&["Which one did you mean?", "Which one should I take?"]),
            acknowledgements: own(&["Okay.", "Sure.", "On it."]),
        }
    }
}

impl QueryTemplates {
    pub fn validate(&self) -> Result<(), DiscriminatorError> {
        if self.mismatch_suffixes.is_empty() {
            return Err(DiscriminatorError::EmptyList("mismatch suffix"));
        }
        if self.wh_suffixes.is_empty() {
            return Err(DiscriminatorError::EmptyList("wh suffix"));
        }
        if self.acknowledgements.is_empty() {
            return Err(DiscriminatorError::EmptyList("acknowledgement"));
        }
        Ok(())
    }
}

/// Classifies `instances` (all of `g`'s root class) against the request `g`.
/// The returned outcome has an empty query; see [`generate_query`].
pub fn classify(g: &ObjectGraph, instances: &[InstanceRecord]) -> Result<GroundingOutcome, DiscriminatorError> {
    let mut scored = Vec::with_capacity(instances.len());
    for inst in instances {
        scored.push(Candidate {
            difference: g.difference(&inst.graph)?,
            instance: inst.clone(),
        });
    }
    scored.sort_by(|a, b| {
        describe(&a.instance.graph)
            .cmp(&describe(&b.instance.graph))
            .then(a.instance.centroid[0].total_cmp(&b.instance.centroid[0]))
            .then(a.instance.centroid[1].total_cmp(&b.instance.centroid[1]))
    });

    let (exact, inexact): (Vec<_>, Vec<_>) = scored.into_iter().partition(|c| c.difference.is_empty());
    let (state, matched, candidates) = match (exact.len(), inexact.len()) {
        (0, 0) => (DialogueState::Missing, None, Vec::new()),
        (1, _) => (DialogueState::Confirm, Some(exact[0].instance.clone()), Vec::new()),
        (0, 1) => (DialogueState::Mismatch, None, inexact),
        (0, _) => (DialogueState::Ambiguity, None, inexact),
        _ => (DialogueState::Ambiguity, None, exact),
    };
    Ok(GroundingOutcome {
        state,
        matched,
        candidates,
        query: String::new(),
    })
}

/// Candidate descriptions, with a location hint appended wherever two
/// candidates would otherwise read the same.
pub fn candidate_descriptions(candidates: &[Candidate]) -> Vec<String> {
    let plain: Vec<String> = candidates.iter().map(|c| describe(&c.instance.graph)).collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &plain {
        *seen.entry(d.as_str()).or_default() += 1;
    }
    plain
        .iter()
        .zip(candidates)
        .map(|(d, c)| {
            if seen[d.as_str()] > 1 {
                let [x, y] = c.instance.centroid;
                format!("{d} (near {x:.1}, {y:.1} meters)")
            } else {
                d.clone()
            }
        })
        .collect()
}

/// Fills the template for `state` using the phrase at index `choice` of the
/// relevant list (taken modulo its length).
pub fn render_query(
    state: DialogueState,
    descriptions: &[String],
    templates: &QueryTemplates,
    choice: usize,
) -> String {
    let pick = |list: &[String]| list[choice % list.len()].clone();
    match state {
        DialogueState::Missing => MISSING_QUERY.to_string(),
        DialogueState::Confirm => pick(&templates.acknowledgements),
        DialogueState::Mismatch => {
            let desc = descriptions.first().map(String::as_str).unwrap_or_default();
            format!("I found one {desc} {}", pick(&templates.mismatch_suffixes))
        }
        DialogueState::Ambiguity => {
            let listed: Vec<String> = descriptions.iter().map(|d| format!("one {d}")).collect();
            format!("I found {}. {}", listed.join(", and "), pick(&templates.wh_suffixes))
        }
    }
}

/// Query for a classified outcome. The phrase choice is drawn from a
/// generator seeded with `seed`, so the result is a pure function of both.
pub fn generate_query(outcome: &GroundingOutcome, templates: &QueryTemplates, seed: u64) -> String {
    let list_len = match outcome.state {
        DialogueState::Missing => 1,
        DialogueState::Confirm => templates.acknowledgements.len(),
        DialogueState::Mismatch => templates.mismatch_suffixes.len(),
        DialogueState::Ambiguity => templates.wh_suffixes.len(),
    };
    let choice = ChaCha8Rng::seed_from_u64(seed).random_range(0..list_len.max(1));
    render_query(
        outcome.state,
        &candidate_descriptions(&outcome.candidates),
        templates,
        choice,
    )
}

/// `classify` followed by `generate_query`.
pub fn ground(
    g: &ObjectGraph,
    instances: &[InstanceRecord],
    templates: &QueryTemplates,
    seed: u64,
) -> Result<GroundingOutcome, DiscriminatorError> {
    let mut outcome = classify(g, instances)?;
    outcome.query = generate_query(&outcome, templates, seed);
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub graph: ObjectGraph,
    pub centroid: [f64; 2],
    pub difference: Vec<String>,
}

/// Serializable form of a [`GroundingOutcome`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub state: DialogueState,
    pub query: String,
    pub matched: Option<CandidateRecord>,
    pub candidates: Vec<CandidateRecord>,
}

impl From<&GroundingOutcome> for OutcomeRecord {
    fn from(o: &GroundingOutcome) -> Self {
        let record = |inst: &InstanceRecord, diff: &PathSet| CandidateRecord {
            graph: inst.graph.clone(),
            centroid: inst.centroid,
            difference: diff.iter().map(|p| p.to_string()).collect(),
        };
        OutcomeRecord {
            state: o.state,
            query: o.query.clone(),
            matched: o.matched.as_ref().map(|m| record(m, &PathSet::new())),
            candidates: o
                .candidates
                .iter()
                .map(|c| record(&c.instance, &c.difference))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttributePath;

    fn inst(g: ObjectGraph, x: f64) -> InstanceRecord {
        InstanceRecord {
            graph: g.canonicalize().unwrap(),
            regions: vec![],
            centroid: [x, 0.0],
            score: 1.0,
            contributors: vec![],
        }
    }

    fn cup() -> ObjectGraph {
        ObjectGraph::new("cup")
    }

    #[test]
    fn confirm_on_superset() {
        let g = cup().with_attr("material", "plastic");
        let i = inst(
            cup()
                .with_attr("material", "plastic")
                .with_relation("is-on", ObjectGraph::new("table")),
            0.0,
        );
        let o = classify(&g, std::slice::from_ref(&i)).unwrap();
        assert_eq!(o.state, DialogueState::Confirm);
        assert_eq!(o.matched, Some(i));
    }

    #[test]
    fn mismatch_reports_difference() {
        let g = cup()
            .with_attr("color", "red")
            .with_relation("is-on", ObjectGraph::new("dining table"));
        let i = inst(
            cup()
                .with_attr("color", "black")
                .with_relation("is-on", ObjectGraph::new("dining table")),
            0.0,
        );
        let o = classify(&g, &[i]).unwrap();
        assert_eq!(o.state, DialogueState::Mismatch);
        let want: PathSet = [AttributePath(vec![("color".into(), "red".into())])].into();
        assert_eq!(o.candidates[0].difference, want);
    }

    #[test]
    fn ambiguity_and_missing() {
        let o = classify(
            &cup(),
            &[
                inst(cup().with_attr("color", "red"), 0.0),
                inst(cup().with_attr("color", "black"), 1.0),
            ],
        )
        .unwrap();
        assert_eq!(o.state, DialogueState::Ambiguity);
        assert_eq!(o.candidates.len(), 2);
        let o = classify(&cup().with_attr("color", "red"), &[]).unwrap();
        assert_eq!(o.state, DialogueState::Missing);
        assert!(o.candidates.is_empty());
    }

    #[test]
    fn exact_match_beats_mismatches() {
        let g = cup().with_attr("color", "red");
        let o = classify(
            &g,
            &[
                inst(cup().with_attr("color", "red"), 0.0),
                inst(cup().with_attr("color", "black"), 1.0),
            ],
        )
        .unwrap();
        assert_eq!(o.state, DialogueState::Confirm);
        assert_eq!(o.matched.unwrap().graph, cup().with_attr("color", "red"));
    }

    #[test]
    fn several_exact_matches_are_ambiguous_among_themselves() {
        let g = cup().with_attr("color", "red");
        let o = classify(
            &g,
            &[
                inst(cup().with_attr("color", "red").with_attr("material", "glass"), 0.0),
                inst(cup().with_attr("color", "red").with_attr("material", "metal"), 1.0),
                inst(cup().with_attr("color", "black"), 2.0),
            ],
        )
        .unwrap();
        assert_eq!(o.state, DialogueState::Ambiguity);
        assert_eq!(o.candidates.len(), 2);
        assert!(o.candidates.iter().all(|c| c.difference.is_empty()));
    }

    #[test]
    fn root_mismatch_is_an_error() {
        assert!(classify(&cup(), &[inst(ObjectGraph::new("mug"), 0.0)]).is_err());
    }

    #[test]
    fn missing_query_is_constant() {
        let o = ground(&cup(), &[], &QueryTemplates::default(), 3).unwrap();
        assert_eq!(o.query, "I could not find that.");
    }

    #[test]
    fn ambiguity_template_fill() {
        let descs = vec![
            describe(
                &cup()
                    .with_attr("color", "red")
                    .with_relation("is-on", ObjectGraph::new("table").with_attr("color", "white")),
            ),
            describe(
                &cup()
                    .with_attr("color", "black")
                    .with_relation("is-on", ObjectGraph::new("counter")),
            ),
        ];
        assert_eq!(
            render_query(DialogueState::Ambiguity, &descs, &QueryTemplates::default(), 0),
            "I found one red cup on top of a white table, and one black cup on top of a counter. \
             Which one did you mean?"
        );
    }

    #[test]
    fn mismatch_template_fill() {
        let descs = vec!["black cup".to_string()];
        assert_eq!(
            render_query(DialogueState::Mismatch, &descs, &QueryTemplates::default(), 1),
            "I found one black cup — should I take it instead?"
        );
    }

    #[test]
    fn seeded_choice_is_deterministic() {
        let t = QueryTemplates::default();
        let o = classify(&cup(), &[inst(cup(), 0.0)]).unwrap();
        let first = generate_query(&o, &t, 42);
        assert!(t.acknowledgements.contains(&first));
        assert_eq!(first, generate_query(&o, &t, 42));
        let picks: std::collections::BTreeSet<String> = (0..64).map(|s| generate_query(&o, &t, s)).collect();
        assert_eq!(picks.len(), 3);
    }

    #[test]
    fn identical_descriptions_get_location_hints() {
        let o = classify(
            &cup(),
            &[
                inst(cup().with_attr("color", "red"), 1.26),
                inst(cup().with_attr("color", "red"), 3.0),
            ],
        )
        .unwrap();
        let d = candidate_descriptions(&o.candidates);
        assert_eq!(d[0], "red cup (near 1.3, 0.0 meters)");
        assert_eq!(d[1], "red cup (near 3.0, 0.0 meters)");
    }

    #[test]
    fn state_names_round_trip() {
        for s in DialogueState::ALL {
            assert_eq!(s.as_str().parse::<DialogueState>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("CONFUSED".parse::<DialogueState>().is_err());
    }
}

//! Object graphs: a tree rooted at an object class whose edges are self
//! attributes (`color=red`) and relational attributes (`is-on -> table`).
//!
//! Graphs are plain values. Most of the pipeline works on the canonical form
//! produced by [`ObjectGraph::canonicalize`], where attribute lists are sorted
//! and deduplicated so structural equality coincides with semantic equality.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("invalid attribute kind {0:?}")]
    InvalidKind(String),
    #[error("{0:?} is a relational kind and cannot carry a value token")]
    RelationalAsSelf(String),
    #[error("{0:?} is not a relational kind (relations start with \"is-\")")]
    SelfAsRelational(String),
    #[error("node {node:?} has conflicting values for {kind:?}: {first:?} and {second:?}")]
    ConflictingValue {
        node: String,
        kind: String,
        first: String,
        second: String,
    },
    #[error("empty token in graph")]
    EmptyToken,
    #[error("root mismatch: expected {expected:?}, found {found:?}")]
    RootMismatch { expected: String, found: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

/// Whether an attribute describes the object itself or relates it to another object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttributeCategory {
    #[serde(rename = "self")]
    Intrinsic,
    #[serde(rename = "relational")]
    Relational,
}

/// A validated attribute name such as `color` or `is-near`.
///
/// The vocabulary is open: any lowercase identifier is accepted, and names
/// beginning with `is-` are relational.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeKind {
    name: String,
}

impl AttributeKind {
    pub fn new(name: &str) -> Result<Self, GraphError> {
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
            && name.starts_with(|c: char| c.is_ascii_lowercase())
            && name != "is-";
        if !valid {
            return Err(GraphError::InvalidKind(name.to_string()));
        }
        Ok(Self { name: name.to_string() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn category(&self) -> AttributeCategory {
        category_of(&self.name)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn category_of(name: &str) -> AttributeCategory {
    if name.starts_with("is-") {
        AttributeCategory::Relational
    } else {
        AttributeCategory::Intrinsic
    }
}

/// A self attribute edge: `kind = value`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SelfAttr {
    pub kind: String,
    pub value: String,
}

/// A relational edge to a landmark object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    pub kind: String,
    pub target: ObjectGraph,
}

/// Tree with an object class at the root.
///
/// Field order matters: the derived `Ord` sorts by root, then self attributes,
/// then relations, which is the canonical ordering used for relation children.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectGraph {
    pub root: String,
    pub self_attrs: Vec<SelfAttr>,
    pub rel_attrs: Vec<Relation>,
}

/// One root-to-node edge sequence, e.g. `[("is-on","table"),("color","white")]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributePath(pub Vec<(String, String)>);

impl AttributePath {
    pub fn edges(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for AttributePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (edge, token)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" / ")?;
            }
            write!(f, "{edge}={token}")?;
        }
        Ok(())
    }
}

pub type PathSet = BTreeSet<AttributePath>;

impl ObjectGraph {
    pub fn new(root: impl Into<String>) -> Self {
        Self {
            root: root.into(),
            self_attrs: Vec::new(),
            rel_attrs: Vec::new(),
        }
    }

    pub fn with_attr(mut self, kind: &str, value: &str) -> Self {
        self.self_attrs.push(SelfAttr {
            kind: kind.to_string(),
            value: value.to_string(),
        });
        self
    }

    pub fn with_relation(mut self, kind: &str, target: ObjectGraph) -> Self {
        self.rel_attrs.push(Relation {
            kind: kind.to_string(),
            target,
        });
        self
    }

    /// Value of a self attribute on this node, if present.
    pub fn attr(&self, kind: &str) -> Option<&str> {
        self.self_attrs
            .iter()
            .find(|a| a.kind == kind)
            .map(|a| a.value.as_str())
    }

    /// Lowercases tokens, sorts and deduplicates edges at every level and
    /// validates attribute kinds.
    pub fn canonicalize(&self) -> Result<ObjectGraph, GraphError> {
        let root = normalize_token(&self.root)?;

        let mut self_attrs = Vec::with_capacity(self.self_attrs.len());
        for attr in &self.self_attrs {
            let kind = AttributeKind::new(&attr.kind.trim().to_lowercase())?;
            if kind.category() == AttributeCategory::Relational {
                return Err(GraphError::RelationalAsSelf(kind.name));
            }
            self_attrs.push(SelfAttr {
                kind: kind.name,
                value: normalize_token(&attr.value)?,
            });
        }
        self_attrs.sort();
        self_attrs.dedup();
        for pair in self_attrs.windows(2) {
            if pair[0].kind == pair[1].kind {
                return Err(GraphError::ConflictingValue {
                    node: root,
                    kind: pair[0].kind.clone(),
                    first: pair[0].value.clone(),
                    second: pair[1].value.clone(),
                });
            }
        }

        let mut rel_attrs = Vec::with_capacity(self.rel_attrs.len());
        for rel in &self.rel_attrs {
            let kind = AttributeKind::new(&rel.kind.trim().to_lowercase())?;
            if kind.category() != AttributeCategory::Relational {
                return Err(GraphError::SelfAsRelational(kind.name));
            }
            rel_attrs.push(Relation {
                kind: kind.name,
                target: rel.target.canonicalize()?,
            });
        }
        rel_attrs.sort();
        rel_attrs.dedup();

        Ok(ObjectGraph {
            root,
            self_attrs,
            rel_attrs,
        })
    }

    pub fn is_canonical(&self) -> bool {
        self.canonicalize().map(|c| &c == self).unwrap_or(false)
    }

    /// Total number of edges (self + relational) in the tree.
    pub fn edge_count(&self) -> usize {
        self.self_attrs.len() + self.rel_attrs.iter().map(|r| 1 + r.target.edge_count()).sum::<usize>()
    }

    /// Longest root-to-leaf edge sequence.
    pub fn depth(&self) -> usize {
        let self_depth = usize::from(!self.self_attrs.is_empty());
        let rel_depth = self.rel_attrs.iter().map(|r| 1 + r.target.depth()).max().unwrap_or(0);
        self_depth.max(rel_depth)
    }

    /// Every root-to-node edge sequence of the tree.
    pub fn attribute_paths(&self) -> PathSet {
        let mut out = PathSet::new();
        collect_paths(self, &mut Vec::new(), &mut out);
        out
    }

    /// Paths of `self` that are absent from `other`: the attributes requested
    /// by `self` that `other` does not satisfy.
    pub fn difference(&self, other: &ObjectGraph) -> Result<PathSet, GraphError> {
        if self.root != other.root {
            return Err(GraphError::RootMismatch {
                expected: self.root.clone(),
                found: other.root.clone(),
            });
        }
        let theirs = other.attribute_paths();
        Ok(self
            .attribute_paths()
            .into_iter()
            .filter(|p| !theirs.contains(p))
            .collect())
    }

    /// Paths present in exactly one of the two graphs.
    pub fn symmetric_difference(&self, other: &ObjectGraph) -> Result<PathSet, GraphError> {
        let mut out = self.difference(other)?;
        out.extend(other.difference(self)?);
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_text(text: &str) -> Result<ObjectGraph, GraphError> {
        if text.trim().is_empty() {
            return Err(GraphError::Parse {
                offset: 0,
                message: "empty input".into(),
            });
        }
        serde_json::from_str::<ObjectGraph>(text).map_err(|e| GraphError::Parse {
            offset: byte_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

pub fn graph_equal(a: &ObjectGraph, b: &ObjectGraph) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn normalize_token(token: &str) -> Result<String, GraphError> {
    let t = token.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if t.is_empty() {
        return Err(GraphError::EmptyToken);
    }
    Ok(t)
}

fn collect_paths(g: &ObjectGraph, prefix: &mut Vec<(String, String)>, out: &mut PathSet) {
    for a in &g.self_attrs {
        prefix.push((a.kind.clone(), a.value.clone()));
        out.insert(AttributePath(prefix.clone()));
        prefix.pop();
    }
    for r in &g.rel_attrs {
        prefix.push((r.kind.clone(), r.target.root.clone()));
        out.insert(AttributePath(prefix.clone()));
        collect_paths(&r.target, prefix, out);
        prefix.pop();
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

impl fmt::Display for ObjectGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.root)?;
        if self.self_attrs.is_empty() && self.rel_attrs.is_empty() {
            return Ok(());
        }
        f.write_str("{")?;
        let mut first = true;
        for a in &self.self_attrs {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{}={}", a.kind, a.value)?;
        }
        for r in &self.rel_attrs {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{}->{}", r.kind, r.target)?;
        }
        f.write_str("}")
    }
}

// Wire form: {"root":"cup","self":[["color","red"]],"rel":[["is-on",{...}]]}
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireGraph {
    root: String,
    #[serde(rename = "self")]
    self_attrs: Vec<(String, String)>,
    rel: Vec<(String, WireGraph)>,
}

impl From<&ObjectGraph> for WireGraph {
    fn from(g: &ObjectGraph) -> Self {
        WireGraph {
            root: g.root.clone(),
            self_attrs: g.self_attrs.iter().map(|a| (a.kind.clone(), a.value.clone())).collect(),
            rel: g
                .rel_attrs
                .iter()
                .map(|r| (r.kind.clone(), WireGraph::from(&r.target)))
                .collect(),
        }
    }
}

impl From<WireGraph> for ObjectGraph {
    fn from(w: WireGraph) -> Self {
        ObjectGraph {
            root: w.root,
            self_attrs: w
                .self_attrs
                .into_iter()
                .map(|(kind, value)| SelfAttr { kind, value })
                .collect(),
            rel_attrs: w
                .rel
                .into_iter()
                .map(|(kind, target)| Relation {
                    kind,
                    target: target.into(),
                })
                .collect(),
        }
    }
}

impl Serialize for ObjectGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        WireGraph::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ObjectGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: ObjectGraph = WireGraph::deserialize(deserializer)?.into();
        raw.canonicalize().map_err(D::Error::custom)
    }
}

//! Top-down construction of an object graph from a BIO label sequence.
//!
//! Grammar, with `*` meaning zero or more:
//!
//! ```text
//! r(g) -> at_S* | at_R*      at_S -> av_S
//! at_R -> av_R               av_R -> at_S* | at_R*
//! ```
//!
//! Nodes under construction live on a stack. A relation attaches to the node
//! on top of the stack, so `a cup on a table near a sofa` nests the sofa under
//! the table. A preceding `and` pops one level first, which makes
//! `a cup on a table and near a sofa` attach both relations to the cup.

use crate::graph::{ObjectGraph, Relation, SelfAttr};

use super::{validate_bio, PhraseError, Prefix, Symbol, TagLabel, Token};

struct Node {
    class: String,
    attrs: Vec<SelfAttr>,
    children: Vec<(String, usize)>,
}

enum Item {
    Span(Symbol, String),
    Conjunction,
}

pub fn parse_tags(tokens: &[Token], labels: &[TagLabel]) -> Result<ObjectGraph, PhraseError> {
    if tokens.len() != labels.len() {
        return Err(PhraseError::LengthMismatch {
            tokens: tokens.len(),
            labels: labels.len(),
        });
    }
    if tokens.is_empty() {
        return Err(PhraseError::EmptyInput);
    }
    validate_bio(labels)?;

    let items = spans(tokens, labels);
    if items
        .iter()
        .filter(|i| matches!(i, Item::Span(Symbol::Root, _)))
        .count()
        > 1
    {
        return Err(PhraseError::MultipleRoots);
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut root: Option<usize> = None;
    let mut stack: Vec<usize> = Vec::new();
    // Edges seen before the referred object appeared; attached to it later.
    let mut fronted: Vec<(String, usize)> = Vec::new();
    let mut pending_values: Vec<SelfAttr> = Vec::new();
    let mut pending_rel: Option<(String, Option<usize>)> = None;
    let mut conjunction = false;

    for item in items {
        let (symbol, text) = match item {
            Item::Conjunction => {
                conjunction = true;
                continue;
            }
            Item::Span(symbol, text) => (symbol, text),
        };
        match symbol {
            Symbol::Kind(kind) if kind.starts_with("is-") => {
                if let Some((k, _)) = pending_rel.take() {
                    return Err(PhraseError::DanglingRelation(k));
                }
                if let Some(v) = pending_values.first() {
                    return Err(PhraseError::UnattachedValue {
                        kind: v.kind.clone(),
                        value: v.value.clone(),
                    });
                }
                if conjunction && stack.len() > 1 {
                    stack.pop();
                }
                conjunction = false;
                pending_rel = Some((kind, stack.last().copied()));
            }
            Symbol::Kind(kind) => pending_values.push(SelfAttr { kind, value: text }),
            Symbol::Root => {
                let idx = nodes.len();
                nodes.push(Node {
                    class: text,
                    attrs: std::mem::take(&mut pending_values),
                    children: std::mem::take(&mut fronted),
                });
                root = Some(idx);
                stack.clear();
                stack.push(idx);
                conjunction = false;
            }
            Symbol::Landmark => {
                let Some((kind, parent)) = pending_rel.take() else {
                    return Err(PhraseError::OrphanLandmark(text));
                };
                let idx = nodes.len();
                nodes.push(Node {
                    class: text,
                    attrs: std::mem::take(&mut pending_values),
                    children: Vec::new(),
                });
                match parent {
                    Some(p) => nodes[p].children.push((kind, idx)),
                    None => fronted.push((kind, idx)),
                }
                stack.push(idx);
                conjunction = false;
            }
        }
    }

    if let Some((kind, _)) = pending_rel {
        return Err(PhraseError::DanglingRelation(kind));
    }
    if let Some(v) = pending_values.into_iter().next() {
        return Err(PhraseError::UnattachedValue {
            kind: v.kind,
            value: v.value,
        });
    }
    let root = root.ok_or(PhraseError::NoReferredObject)?;
    Ok(build(&nodes, root).canonicalize()?)
}

fn spans(tokens: &[Token], labels: &[TagLabel]) -> Vec<Item> {
    let mut out: Vec<Item> = Vec::new();
    for (token, label) in tokens.iter().zip(labels) {
        match (label.prefix, &label.symbol) {
            (Prefix::B, Some(sym)) => out.push(Item::Span(sym.clone(), token.text.clone())),
            (Prefix::I, Some(_)) => {
                if let Some(Item::Span(_, text)) = out.last_mut() {
                    text.push(' ');
                    text.push_str(&token.text);
                }
            }
            _ if token.text == "and" => out.push(Item::Conjunction),
            _ => {}
        }
    }
    out
}

fn build(nodes: &[Node], idx: usize) -> ObjectGraph {
    let node = &nodes[idx];
    ObjectGraph {
        root: node.class.clone(),
        self_attrs: node.attrs.clone(),
        rel_attrs: node
            .children
            .iter()
            .map(|(kind, child)| Relation {
                kind: kind.clone(),
                target: build(nodes, *child),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphError;
    use crate::phrase::{phrase_to_graph, tokenize, Lexicon};

    fn labels(s: &str) -> Vec<TagLabel> {
        s.split_whitespace().map(|l| l.parse().unwrap()).collect()
    }

    #[test]
    fn parses_self_and_relational() {
        let toks = tokenize("take the plastic cup on the table");
        let g = parse_tags(&toks, &labels("O O B-material B-r(g) B-is-on O B-av_R")).unwrap();
        let want = ObjectGraph::new("cup")
            .with_attr("material", "plastic")
            .with_relation("is-on", ObjectGraph::new("table"));
        assert_eq!(g, want);
    }

    #[test]
    fn parses_bare_root() {
        let g = parse_tags(&tokenize("bring a cup"), &labels("O O B-r(g)")).unwrap();
        assert_eq!(g, ObjectGraph::new("cup"));
    }

    #[test]
    fn repeated_word_attaches_per_noun() {
        let lex = Lexicon::builtin();
        let g = phrase_to_graph("a white lamp near a white table", &lex).unwrap();
        let want = ObjectGraph::new("lamp")
            .with_attr("color", "white")
            .with_relation("is-near", ObjectGraph::new("table").with_attr("color", "white"));
        assert_eq!(g, want);
    }

    #[test]
    fn multi_token_spans_join_with_space() {
        let toks = tokenize("the light blue mug on top of the dining table");
        let l = labels("O B-color I-color B-r(g) B-is-on I-is-on I-is-on O B-av_R I-av_R");
        let g = parse_tags(&toks, &l).unwrap();
        assert_eq!(g.attr("color"), Some("light blue"));
        assert_eq!(g.rel_attrs[0].target.root, "dining table");
    }

    #[test]
    fn chained_and_conjoined_relations() {
        let lex = Lexicon::builtin();
        let nested = phrase_to_graph("a cup on top of a table near a sofa", &lex).unwrap();
        assert_eq!(
            nested,
            ObjectGraph::new("cup").with_relation(
                "is-on",
                ObjectGraph::new("table").with_relation("is-near", ObjectGraph::new("sofa"))
            )
        );
        let flat = phrase_to_graph("a cup on top of a table and near a sofa", &lex).unwrap();
        assert_eq!(
            flat,
            ObjectGraph::new("cup")
                .with_relation("is-on", ObjectGraph::new("table"))
                .with_relation("is-near", ObjectGraph::new("sofa"))
                .canonicalize()
                .unwrap()
        );
    }

    #[test]
    fn fronted_relation_attaches_to_root() {
        let lex = Lexicon::builtin();
        let g = phrase_to_graph("near the sofa , the red lamp", &lex).unwrap();
        assert_eq!(
            g,
            ObjectGraph::new("lamp")
                .with_attr("color", "red")
                .with_relation("is-near", ObjectGraph::new("sofa"))
        );
    }

    #[test]
    fn structural_errors() {
        let t = tokenize("cup mug");
        assert_eq!(
            parse_tags(&t, &labels("B-r(g) B-r(g)")).unwrap_err(),
            PhraseError::MultipleRoots
        );
        assert_eq!(
            parse_tags(&t, &labels("O O")).unwrap_err(),
            PhraseError::NoReferredObject
        );
        let t = tokenize("cup on");
        assert_eq!(
            parse_tags(&t, &labels("B-r(g) B-is-on")).unwrap_err(),
            PhraseError::DanglingRelation("is-on".into())
        );
        let t = tokenize("cup table");
        assert!(matches!(
            parse_tags(&t, &labels("B-r(g) B-av_R")).unwrap_err(),
            PhraseError::OrphanLandmark(_)
        ));
        let t = tokenize("cup red");
        assert!(matches!(
            parse_tags(&t, &labels("B-r(g) B-color")).unwrap_err(),
            PhraseError::UnattachedValue { .. }
        ));
        let t = tokenize("red black cup");
        assert!(matches!(
            parse_tags(&t, &labels("B-color B-color B-r(g)")).unwrap_err(),
            PhraseError::Graph(GraphError::ConflictingValue { .. })
        ));
        assert!(matches!(
            parse_tags(&t, &labels("O O")).unwrap_err(),
            PhraseError::LengthMismatch { .. }
        ));
        assert!(matches!(
            parse_tags(&t, &labels("O I-color B-r(g)")).unwrap_err(),
            PhraseError::InvalidBio { position: 1, .. }
        ));
    }
}

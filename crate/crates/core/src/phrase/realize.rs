//! Graph to English noun phrase by pre-order traversal.
//!
//! Self-attribute edges (`color`, `material`, ...) have an empty surface form,
//! so their value tokens simply precede the class noun. Relational edges come
//! after all self edges and use the surface forms from [`relation_surface`].
//! Relations whose landmark has no relations of its own are emitted first and
//! sibling relations are joined with `and`, which is what the parser needs to
//! rebuild the same tree.

use crate::graph::ObjectGraph;

/// Surface form of a relational edge.
pub fn relation_surface(kind: &str) -> String {
    match kind {
        "is-on" => "on top of".to_string(),
        "is-near" => "near".to_string(),
        "is-at" => "at".to_string(),
        other => other.trim_start_matches("is-").replace('-', " "),
    }
}

pub fn with_article(phrase: &str) -> String {
    let article = match phrase.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    };
    format!("{article} {phrase}")
}

/// Description without the leading article, e.g. `red cup on top of a table`.
pub fn describe(g: &ObjectGraph) -> String {
    let mut words: Vec<&str> = g.self_attrs.iter().map(|a| a.value.as_str()).collect();
    words.push(&g.root);
    let mut out = words.join(" ");

    let (leaf, nested): (Vec<_>, Vec<_>) = g.rel_attrs.iter().partition(|r| r.target.rel_attrs.is_empty());
    let parts: Vec<String> = leaf
        .into_iter()
        .chain(nested)
        .map(|r| format!("{} {}", relation_surface(&r.kind), with_article(&describe(&r.target))))
        .collect();
    if !parts.is_empty() {
        out.push(' ');
        out.push_str(&parts.join(" and "));
    }
    out
}

pub fn realize(g: &ObjectGraph) -> String {
    with_article(&describe(g))
}

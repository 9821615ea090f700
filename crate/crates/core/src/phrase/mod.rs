//! Natural-language text to [`ObjectGraph`] and back.
//!
//! Text is tokenized, labeled with BIO tags over the symbol set
//! `{r(g), av_R, <attribute kind>}` and then parsed top-down into a tree by
//! [`parse_tags`]. The labeling step is pluggable through [`SequenceTagger`];
//! the default [`LexiconTagger`] is deterministic and driven by a [`Lexicon`].

mod external;
mod lexicon;
mod parser;
mod realize;
mod tagger;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{GraphError, ObjectGraph};

pub use external::ExternalTagger;
pub use lexicon::{LexEntry, Lexicon, LexiconError};
pub use parser::parse_tags;
pub use realize::{describe, realize, relation_surface, with_article};
pub use tagger::{validate_bio, LexiconTagger, SequenceTagger};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhraseError {
    #[error("empty input")]
    EmptyInput,
    #[error("no referred object")]
    NoReferredObject,
    #[error("more than one referred object span")]
    MultipleRoots,
    #[error("relation {0:?} has no landmark object")]
    DanglingRelation(String),
    #[error("landmark {0:?} is not introduced by a relation")]
    OrphanLandmark(String),
    #[error("value {value:?} ({kind}) is not attached to any object")]
    UnattachedValue { kind: String, value: String },
    #[error("invalid BIO sequence at token {position}: {label}")]
    InvalidBio { position: usize, label: String },
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("tagger protocol violation: {0}")]
    Protocol(String),
    #[error("tagger timed out")]
    Timeout,
    #[error("tagger i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub index: usize,
}

const PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')'];

/// Lowercased whitespace tokenization with punctuation split into its own tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next().filter(|c| PUNCTUATION.contains(c)) {
            words.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        while let Some(c) = rest.chars().last().filter(|c| PUNCTUATION.contains(c)) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        if !rest.is_empty() {
            words.push(rest.to_lowercase());
        }
        words.extend(trailing.into_iter().rev());
    }
    words
        .into_iter()
        .enumerate()
        .map(|(index, text)| Token { text, index })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prefix {
    B,
    I,
    O,
}

/// Tag symbol: the referred object, a landmark object, or an attribute kind
/// (used both for self-attribute values and relation cues).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Root,
    Landmark,
    Kind(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Root => f.write_str("r(g)"),
            Symbol::Landmark => f.write_str("av_R"),
            Symbol::Kind(k) => f.write_str(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TagLabel {
    pub prefix: Prefix,
    pub symbol: Option<Symbol>,
}

impl TagLabel {
    pub const O: TagLabel = TagLabel {
        prefix: Prefix::O,
        symbol: None,
    };

    pub fn begin(symbol: Symbol) -> Self {
        Self {
            prefix: Prefix::B,
            symbol: Some(symbol),
        }
    }

    pub fn inside(symbol: Symbol) -> Self {
        Self {
            prefix: Prefix::I,
            symbol: Some(symbol),
        }
    }

    pub fn is_outside(&self) -> bool {
        self.prefix == Prefix::O
    }
}

impl fmt::Display for TagLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.prefix, &self.symbol) {
            (Prefix::B, Some(s)) => write!(f, "B-{s}"),
            (Prefix::I, Some(s)) => write!(f, "I-{s}"),
            _ => f.write_str("O"),
        }
    }
}

impl FromStr for TagLabel {
    type Err = PhraseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "O" {
            return Ok(TagLabel::O);
        }
        let (prefix, sym) = match s.split_once('-') {
            Some(("B", rest)) => (Prefix::B, rest),
            Some(("I", rest)) => (Prefix::I, rest),
            _ => return Err(PhraseError::UnknownLabel(s.to_string())),
        };
        let symbol = match sym {
            "r(g)" => Symbol::Root,
            "av_R" => Symbol::Landmark,
            kind => {
                crate::graph::AttributeKind::new(kind).map_err(|_| PhraseError::UnknownLabel(s.to_string()))?;
                Symbol::Kind(kind.to_string())
            }
        };
        Ok(TagLabel {
            prefix,
            symbol: Some(symbol),
        })
    }
}

/// Tags `text` with `tagger` and parses the labels into a canonical graph.
pub fn phrase_to_graph_with(text: &str, tagger: &mut dyn SequenceTagger) -> Result<ObjectGraph, PhraseError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(PhraseError::EmptyInput);
    }
    let labels = tagger.tag(&tokens)?;
    parse_tags(&tokens, &labels)
}

pub fn phrase_to_graph(text: &str, lexicon: &Lexicon) -> Result<ObjectGraph, PhraseError> {
    let mut tagger = LexiconTagger::new(lexicon);
    phrase_to_graph_with(text, &mut tagger)
}

use super::{LexEntry, Lexicon, PhraseError, Prefix, Symbol, TagLabel, Token};

/// Produces one BIO label per token.
pub trait SequenceTagger {
    fn tag(&mut self, tokens: &[Token]) -> Result<Vec<TagLabel>, PhraseError>;
}

/// Checks that every `I-X` continues a `B-X` or `I-X` span.
pub fn validate_bio(labels: &[TagLabel]) -> Result<(), PhraseError> {
    let mut prev: Option<&TagLabel> = None;
    for (position, label) in labels.iter().enumerate() {
        let ok = match label.prefix {
            Prefix::I => prev.is_some_and(|p| p.prefix != Prefix::O && p.symbol == label.symbol),
            Prefix::B => label.symbol.is_some(),
            Prefix::O => label.symbol.is_none(),
        };
        if !ok {
            return Err(PhraseError::InvalidBio {
                position,
                label: label.to_string(),
            });
        }
        prev = Some(label);
    }
    Ok(())
}

/// Deterministic tagger over a closed [`Lexicon`].
///
/// Phrases are matched greedily, longest first. Relation cues split the
/// sentence into chunks; the first object class after a cue is its landmark
/// (`av_R`) and the first class not governed by a cue is the referred object
/// (`r(g)`). A value token modifies the nearest following labeled object in
/// its chunk.
pub struct LexiconTagger<'a> {
    lexicon: &'a Lexicon,
}

#[derive(Debug, Clone, PartialEq)]
enum SpanKind {
    Class,
    Value(String),
    Cue(String),
    Other,
}

#[derive(Debug)]
struct Span {
    len: usize,
    kind: SpanKind,
    chunk: usize,
}

impl<'a> LexiconTagger<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        Self { lexicon }
    }

    fn segment(&self, tokens: &[Token]) -> Vec<Span> {
        let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        let mut spans = Vec::new();
        let mut chunk = 0;
        let mut i = 0;
        while i < words.len() {
            let (len, kind) = match self.lexicon.longest_match(&words, i) {
                Some((len, LexEntry::Class)) => (len, SpanKind::Class),
                Some((len, LexEntry::Value(k))) => (len, SpanKind::Value(k.clone())),
                Some((len, LexEntry::Cue(k))) => (len, SpanKind::Cue(k.clone())),
                None => (1, SpanKind::Other),
            };
            if matches!(kind, SpanKind::Cue(_)) {
                chunk += 1;
            }
            spans.push(Span { len, kind, chunk });
            i += len;
        }
        spans
    }
}

impl SequenceTagger for LexiconTagger<'_> {
    fn tag(&mut self, tokens: &[Token]) -> Result<Vec<TagLabel>, PhraseError> {
        if tokens.is_empty() {
            return Err(PhraseError::EmptyInput);
        }
        let spans = self.segment(tokens);
        let mut symbols: Vec<Option<Symbol>> = vec![None; spans.len()];

        // Landmarks: first class in each chunk that opens with a cue.
        let mut landmark_chunks = std::collections::BTreeSet::new();
        for (i, span) in spans.iter().enumerate() {
            if span.kind == SpanKind::Class && span.chunk > 0 && landmark_chunks.insert(span.chunk) {
                symbols[i] = Some(Symbol::Landmark);
            }
        }
        let root = spans
            .iter()
            .enumerate()
            .find(|(i, s)| s.kind == SpanKind::Class && symbols[*i].is_none())
            .map(|(i, _)| i)
            .ok_or(PhraseError::NoReferredObject)?;
        symbols[root] = Some(Symbol::Root);

        for (i, span) in spans.iter().enumerate() {
            match &span.kind {
                SpanKind::Cue(kind) => {
                    let has_landmark = spans
                        .iter()
                        .zip(&symbols)
                        .skip(i + 1)
                        .take_while(|(s, _)| s.chunk == span.chunk)
                        .any(|(_, sym)| *sym == Some(Symbol::Landmark));
                    if has_landmark {
                        symbols[i] = Some(Symbol::Kind(kind.clone()));
                    }
                }
                SpanKind::Value(kind) => {
                    let next_class = spans
                        .iter()
                        .enumerate()
                        .skip(i + 1)
                        .take_while(|(_, s)| s.chunk == span.chunk)
                        .find(|(_, s)| s.kind == SpanKind::Class)
                        .map(|(j, _)| j);
                    if next_class.is_some_and(|j| symbols[j].is_some()) {
                        symbols[i] = Some(Symbol::Kind(kind.clone()));
                    }
                }
                _ => {}
            }
        }

        let mut labels = Vec::with_capacity(tokens.len());
        for (span, symbol) in spans.iter().zip(symbols) {
            match symbol {
                Some(sym) => {
                    labels.push(TagLabel::begin(sym.clone()));
                    for _ in 1..span.len {
                        labels.push(TagLabel::inside(sym.clone()));
                    }
                }
                None => labels.extend(std::iter::repeat_n(TagLabel::O, span.len)),
            }
        }
        debug_assert_eq!(labels.len(), tokens.len());
        debug_assert!(validate_bio(&labels).is_ok());
        Ok(labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phrase::tokenize;

    fn labels(text: &str) -> Vec<String> {
        let lex = Lexicon::builtin();
        LexiconTagger::new(&lex)
            .tag(&tokenize(text))
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[test]
    fn tags_self_and_relational_expression() {
        assert_eq!(
            labels("take the plastic cup on the table"),
            ["O", "O", "B-material", "B-r(g)", "B-is-on", "O", "B-av_R"]
        );
    }

    #[test]
    fn tags_bare_expression() {
        assert_eq!(labels("bring a cup"), ["O", "O", "B-r(g)"]);
    }

    #[test]
    fn repeated_value_attaches_to_each_noun() {
        assert_eq!(
            labels("a white lamp near a white table"),
            ["O", "B-color", "B-r(g)", "B-is-near", "O", "B-color", "B-av_R"]
        );
    }

    #[test]
    fn multiword_spans_use_inside_labels() {
        assert_eq!(
            labels("the light blue mug on top of the dining table"),
            ["O", "B-color", "I-color", "B-r(g)", "B-is-on", "I-is-on", "I-is-on", "O", "B-av_R", "I-av_R"]
        );
    }

    #[test]
    fn dangling_cue_and_value_are_outside() {
        assert_eq!(labels("put the cup on"), ["O", "O", "B-r(g)", "O"]);
        assert_eq!(labels("the cup red"), ["O", "B-r(g)", "O"]);
    }

    #[test]
    fn fronted_relation_still_finds_root() {
        assert_eq!(
            labels("near the sofa , the lamp"),
            ["B-is-near", "O", "B-av_R", "O", "O", "B-r(g)"]
        );
    }

    #[test]
    fn no_class_is_an_error() {
        let lex = Lexicon::builtin();
        let err = LexiconTagger::new(&lex).tag(&tokenize("bring it")).unwrap_err();
        assert_eq!(err, PhraseError::NoReferredObject);
        // a class governed by a cue is not a referred object
        let err = LexiconTagger::new(&lex).tag(&tokenize("on the table")).unwrap_err();
        assert_eq!(err, PhraseError::NoReferredObject);
    }

    #[test]
    fn bio_validation() {
        let i_color = TagLabel::inside(Symbol::Kind("color".into()));
        assert!(validate_bio(&[TagLabel::O, i_color.clone()]).is_err());
        assert!(validate_bio(std::slice::from_ref(&i_color)).is_err());
        assert!(validate_bio(&[TagLabel::begin(Symbol::Root), i_color.clone()]).is_err());
        assert!(validate_bio(&[TagLabel::begin(Symbol::Kind("color".into())), i_color]).is_ok());
    }
}

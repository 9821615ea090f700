use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{category_of, AttributeCategory, AttributeKind};
use crate::kv;

const BUILTIN: &str = include_str!("../../data/lexicon.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error(transparent)]
    Syntax(#[from] kv::KvError),
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("lexicon has no object classes")]
    NoClasses,
}

/// What a lexicon phrase denotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexEntry {
    Class,
    Value(String),
    Cue(String),
}

/// Closed vocabulary for the deterministic tagger.
#[derive(Debug, Clone)]
pub struct Lexicon {
    classes: BTreeSet<String>,
    values: BTreeMap<String, BTreeSet<String>>,
    cues: BTreeMap<String, String>,
    stopwords: BTreeSet<String>,
    verbs: BTreeSet<String>,
    phrases: HashMap<Vec<String>, LexEntry>,
    longest: usize,
}

impl Lexicon {
    pub fn builtin() -> Lexicon {
        Lexicon::from_text(BUILTIN).expect("built-in lexicon is valid")
    }

    pub fn from_text(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon {
            classes: BTreeSet::new(),
            values: BTreeMap::new(),
            cues: BTreeMap::new(),
            stopwords: BTreeSet::new(),
            verbs: BTreeSet::new(),
            phrases: HashMap::new(),
            longest: 0,
        };
        for entry in kv::parse(text)? {
            let items: Vec<String> = kv::list(&entry.value, ',').into_iter().map(|s| normalize(&s)).collect();
            let line = entry.line;
            match entry.key.as_str() {
                "classes" => {
                    for c in items {
                        lex.insert(line, &c, LexEntry::Class)?;
                        lex.classes.insert(c);
                    }
                }
                "stopwords" => lex.stopwords.extend(items),
                "verbs" => lex.verbs.extend(items),
                key => {
                    if let Some(kind) = key.strip_prefix("value.") {
                        check_kind(line, kind, AttributeCategory::Intrinsic)?;
                        for v in items {
                            lex.insert(line, &v, LexEntry::Value(kind.to_string()))?;
                            lex.values.entry(kind.to_string()).or_default().insert(v);
                        }
                    } else if let Some(kind) = key.strip_prefix("relation.") {
                        check_kind(line, kind, AttributeCategory::Relational)?;
                        for cue in items {
                            lex.insert(line, &cue, LexEntry::Cue(kind.to_string()))?;
                            lex.cues.insert(cue, kind.to_string());
                        }
                    } else {
                        return Err(LexiconError::UnknownKey {
                            line,
                            key: key.to_string(),
                        });
                    }
                }
            }
        }
        if lex.classes.is_empty() {
            return Err(LexiconError::NoClasses);
        }
        Ok(lex)
    }

    fn insert(&mut self, line: usize, phrase: &str, entry: LexEntry) -> Result<(), LexiconError> {
        let key: Vec<String> = phrase.split(' ').map(str::to_string).collect();
        if key.iter().any(|t| t.is_empty()) {
            return Err(LexiconError::Invalid {
                line,
                message: "empty phrase".into(),
            });
        }
        match self.phrases.get(&key) {
            Some(existing) if *existing != entry => {
                return Err(LexiconError::Invalid {
                    line,
                    message: format!("{phrase:?} is listed as both {existing:?} and {entry:?}"),
                })
            }
            _ => {}
        }
        self.longest = self.longest.max(key.len());
        self.phrases.insert(key, entry);
        Ok(())
    }

    /// Longest lexicon phrase starting at `tokens[start]`, as (token count, entry).
    pub fn longest_match(&self, tokens: &[&str], start: usize) -> Option<(usize, &LexEntry)> {
        let max = self.longest.min(tokens.len() - start);
        (1..=max).rev().find_map(|len| {
            let key: Vec<String> = tokens[start..start + len].iter().map(|s| s.to_string()).collect();
            self.phrases.get(&key).map(|e| (len, e))
        })
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(String::as_str)
    }

    pub fn is_class(&self, s: &str) -> bool {
        self.classes.contains(s)
    }

    pub fn value_kinds(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn values(&self, kind: &str) -> impl Iterator<Item = &str> {
        self.values
            .get(kind)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn kind_of_value(&self, value: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|(_, vs)| vs.contains(value))
            .map(|(k, _)| k.as_str())
    }

    pub fn relation_kinds(&self) -> BTreeSet<&str> {
        self.cues.values().map(String::as_str).collect()
    }

    pub fn cue_kind(&self, cue: &str) -> Option<&str> {
        self.cues.get(cue).map(String::as_str)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token) || self.verbs.contains(token)
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn check_kind(line: usize, kind: &str, want: AttributeCategory) -> Result<(), LexiconError> {
    AttributeKind::new(kind).map_err(|e| LexiconError::Invalid {
        line,
        message: e.to_string(),
    })?;
    if category_of(kind) != want {
        return Err(LexiconError::Invalid {
            line,
            message: format!("{kind:?} has the wrong category for this key"),
        });
    }
    Ok(())
}

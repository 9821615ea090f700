//! Flat `key = value` documents used for the lexicon and the pipeline config.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat only
//! when the caller allows it; every entry remembers its 1-based line number so
//! validation errors can point at the offending line.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, KvError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(KvError {
                line,
                message: format!("expected `key = value`, found {trimmed:?}"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError {
                line,
                message: "empty key".into(),
            });
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

/// Splits a list value on `sep`, trimming items and dropping empties.
pub fn list(value: &str, sep: char) -> Vec<String> {
    value
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

//! Line protocol for an out-of-process tagger.
//!
//! Request: the tokens of one sentence separated by tabs, newline terminated.
//! Response: one label per token (`B-color`, `I-r(g)`, `O`, ...) separated by
//! tabs, newline terminated. One request is in flight at a time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{validate_bio, PhraseError, SequenceTagger, TagLabel, Token};

pub struct ExternalTagger {
    child: Option<Child>,
    writer: Box<dyn Write + Send>,
    responses: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ExternalTagger {
    /// Runs `program args...` and talks to it over stdin/stdout.
    pub fn spawn(program: &str, args: &[&str], timeout: Duration) -> Result<Self, PhraseError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| PhraseError::Io(format!("spawning {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut tagger = Self::from_streams(BufReader::new(stdout), stdin, timeout);
        tagger.child = Some(child);
        Ok(tagger)
    }

    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Self {
            child: None,
            writer: Box::new(writer),
            responses: rx,
            timeout,
        }
    }
}

impl SequenceTagger for ExternalTagger {
    fn tag(&mut self, tokens: &[Token]) -> Result<Vec<TagLabel>, PhraseError> {
        if tokens.is_empty() {
            return Err(PhraseError::EmptyInput);
        }
        if let Some(bad) = tokens.iter().find(|t| t.text.contains(['\t', '\n'])) {
            return Err(PhraseError::Protocol(format!(
                "token {:?} contains a separator",
                bad.text
            )));
        }
        let request = tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("\t");
        writeln!(self.writer, "{request}")
            .and_then(|_| self.writer.flush())
            .map_err(|e| PhraseError::Io(e.to_string()))?;

        let line = match self.responses.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(PhraseError::Io(e.to_string())),
            Err(RecvTimeoutError::Timeout) => return Err(PhraseError::Timeout),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(PhraseError::Protocol("tagger closed its output".into()))
            }
        };
        let labels = line
            .trim_end_matches('\r')
            .split('\t')
            .map(str::parse::<TagLabel>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PhraseError::Protocol(e.to_string()))?;
        if labels.len() != tokens.len() {
            return Err(PhraseError::Protocol(format!(
                "expected {} labels, got {}",
                tokens.len(),
                labels.len()
            )));
        }
        validate_bio(&labels)?;
        Ok(labels)
    }
}

impl Drop for ExternalTagger {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

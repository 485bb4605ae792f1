//! Transcript-backed providers.
//!
//! A transcript is JSON lines, one record per recorded exchange:
//!
//! ```text
//! {"hash": "<sha256 of canonical prompt>", "prompt": "...", "response": "...",
//!  "prompt_tokens": 120, "completion_tokens": 30, "sample": 0}
//! ```
//!
//! The canonical prompt is the prompt trimmed with every whitespace run
//! collapsed to one space. `sample` is optional and distinguishes repeated
//! requests for the same prompt; lookups fall back to sample 0.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ledger::TokenUsage;
use super::provider::{Capabilities, Provider, ProviderError, ProviderResponse, RequestOptions};
use super::GatewayError;

pub fn canonicalize(prompt: &str) -> String {
    prompt.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(canonicalize(prompt).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub hash: String,
    pub prompt: String,
    pub response: String,
    pub prompt_tokens: i64,
    pub completion_tokens: i64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sample: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl TranscriptRecord {
    pub fn new(prompt: &str, response: impl Into<String>, usage: TokenUsage, sample: u32) -> Self {
        TranscriptRecord {
            hash: prompt_hash(prompt),
            prompt: prompt.to_string(),
            response: response.into(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            sample,
        }
    }

    pub fn usage(&self) -> TokenUsage {
        TokenUsage::new(self.prompt_tokens, self.completion_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum UnknownPromptPolicy {
    Error,
    Fallback { response: String, usage: TokenUsage },
}

/// Serves recorded responses; never touches the network.
pub struct ReplayProvider {
    records: HashMap<(String, u32), TranscriptRecord>,
    caps: Capabilities,
    unknown: UnknownPromptPolicy,
    calls: AtomicUsize,
}

impl std::fmt::Debug for ReplayProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReplayProvider")
            .field("records", &self.records.len())
            .field("caps", &self.caps)
            .finish()
    }
}

fn transcript_error(line: usize, message: impl Into<String>) -> GatewayError {
    GatewayError::Transcript {
        line,
        message: message.into(),
    }
}

impl ReplayProvider {
    pub fn new(records: Vec<TranscriptRecord>, caps: Capabilities) -> Result<Self, GatewayError> {
        let mut map = HashMap::new();
        for (i, r) in records.into_iter().enumerate() {
            let line = i + 1;
            if r.hash != prompt_hash(&r.prompt) {
                return Err(transcript_error(line, "hash does not match the canonical prompt"));
            }
            if r.prompt_tokens < 0 || r.completion_tokens < 0 {
                return Err(transcript_error(line, "negative token count"));
            }
            let key = (r.hash.clone(), r.sample);
            if map.insert(key, r).is_some() {
                return Err(transcript_error(line, "duplicate prompt hash and sample"));
            }
        }
        Ok(ReplayProvider {
            records: map,
            caps,
            unknown: UnknownPromptPolicy::Error,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn parse(jsonl: &str, caps: Capabilities) -> Result<Self, GatewayError> {
        let mut records = Vec::new();
        for (i, line) in jsonl.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: TranscriptRecord =
                serde_json::from_str(line).map_err(|e| transcript_error(i + 1, format!("malformed record: {e}")))?;
            records.push(r);
        }
        Self::new(records, caps)
    }

    pub fn from_file(path: &Path, caps: Capabilities) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(format!("reading {}", path.display()), e))?;
        Ok(Self::parse(&text, caps)?)
    }

    pub fn with_unknown_policy(mut self, policy: UnknownPromptPolicy) -> Self {
        self.unknown = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for ReplayProvider {
    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn send(&self, prompt: &str, options: &RequestOptions) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hash = prompt_hash(prompt);
        let rec = self
            .records
            .get(&(hash.clone(), options.sample))
            .or_else(|| self.records.get(&(hash.clone(), 0)));
        match (rec, &self.unknown) {
            (Some(r), _) => Ok(ProviderResponse {
                raw: r.response.clone(),
                usage: r.usage(),
            }),
            (None, UnknownPromptPolicy::Fallback { response, usage }) => Ok(ProviderResponse {
                raw: response.clone(),
                usage: *usage,
            }),
            (None, UnknownPromptPolicy::Error) => Err(ProviderError::UnknownPrompt { hash }),
        }
    }
}

/// Wraps a provider and keeps every successful exchange so it can be
/// written out as a transcript.
pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    records: Mutex<Vec<TranscriptRecord>>,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>) -> Self {
        RecordingProvider {
            inner,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.records.lock().clone()
    }

    /// Writes the transcript sorted by (hash, sample) so repeated recordings
    /// of the same run produce the same file.
    pub fn write_to(&self, path: &Path) -> crate::Result<()> {
        let mut records = self.records();
        records.sort_by(|a, b| (&a.hash, a.sample).cmp(&(&b.hash, b.sample)));
        records.dedup_by(|a, b| a.hash == b.hash && a.sample == b.sample);
        write_transcript(path, &records)
    }
}

pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> crate::Result<()> {
    let io = |e| crate::Error::io(format!("writing {}", path.display()), e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io)?;
    }
    f.flush().map_err(io)
}

impl Provider for RecordingProvider {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn send(&self, prompt: &str, options: &RequestOptions) -> Result<ProviderResponse, ProviderError> {
        let resp = self.inner.send(prompt, options)?;
        self.records
            .lock()
            .push(TranscriptRecord::new(prompt, resp.raw.clone(), resp.usage, options.sample));
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(prompt: &str, response: &str, sample: u32) -> TranscriptRecord {
        TranscriptRecord::new(prompt, response, TokenUsage::new(3, 1), sample)
    }

    #[test]
    fn whitespace_does_not_change_the_hash() {
        assert_eq!(prompt_hash("a  b\n c "), prompt_hash("a b c"));
        assert_ne!(prompt_hash("a b"), prompt_hash("ab"));
    }

    #[test]
    fn replays_by_hash_and_sample() {
        let p = ReplayProvider::new(vec![rec("q", "r0", 0), rec("q", "r1", 1)], Capabilities::plain_text()).unwrap();
        let opts = RequestOptions::new("m");
        assert_eq!(p.send("q", &opts).unwrap().raw, "r0");
        assert_eq!(p.send(" q\n", &opts.with_sample(1)).unwrap().raw, "r1");
        assert_eq!(p.send("q", &opts.with_sample(2)).unwrap().raw, "r0");
        assert!(matches!(p.send("other", &opts), Err(ProviderError::UnknownPrompt { .. })));
    }

    #[test]
    fn fallback_policy() {
        let p = ReplayProvider::new(vec![], Capabilities::plain_text())
            .unwrap()
            .with_unknown_policy(UnknownPromptPolicy::Fallback {
                response: "none".into(),
                usage: TokenUsage::default(),
            });
        assert_eq!(p.send("x", &RequestOptions::new("m")).unwrap().raw, "none");
    }

    #[test]
    fn rejects_bad_transcripts() {
        let mut bad = rec("q", "r", 0);
        bad.hash = "00".into();
        assert!(matches!(
            ReplayProvider::new(vec![bad], Capabilities::plain_text()),
            Err(GatewayError::Transcript { line: 1, .. })
        ));
        assert!(ReplayProvider::new(vec![rec("q", "a", 0), rec("q", "b", 0)], Capabilities::plain_text()).is_err());
        assert!(matches!(
            ReplayProvider::parse("{not json", Capabilities::plain_text()),
            Err(GatewayError::Transcript { line: 1, .. })
        ));
    }

    #[test]
    fn recording_round_trips_through_a_file() {
        let src = Arc::new(ReplayProvider::new(vec![rec("q", "r", 0)], Capabilities::structured()).unwrap());
        let recorder = RecordingProvider::new(src);
        recorder.send("q", &RequestOptions::new("m")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        recorder.write_to(&path).unwrap();
        let replay = ReplayProvider::from_file(&path, Capabilities::structured()).unwrap();
        assert_eq!(replay.send("q", &RequestOptions::new("m")).unwrap().raw, "r");
    }
}

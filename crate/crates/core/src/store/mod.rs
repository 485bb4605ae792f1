//! Persistent home for terminologies, code sets, runs, triples, vectors,
//! matches and custom tables.
//!
//! The store keeps its logical tables in memory behind a read/write lock and
//! persists them as a versioned JSON snapshot. Readers proceed concurrently;
//! writers are serialized, which also serializes writes within a run.

mod filter;
mod import;
mod lexer;
mod model;
pub mod query;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embeddings::{EmbeddingVector, StringVectors};
use crate::llm::CostLedger;
use crate::matcher::MatchResult;

pub use filter::{CodeFilter, FilterError, TextTest};
pub use import::{read_columnar, read_delimited, DelimitedOptions, ImportRow, RowRejection};
pub use model::*;
pub use query::{QueryError, Table};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("import contained no usable rows ({rejected} rejected)")]
    ImportEmpty { rejected: usize },
    #[error("{what} '{id}' not found")]
    NotFound { what: &'static str, id: String },
    #[error("run {run_id} is {status}, not running")]
    RunClosed { run_id: String, status: &'static str },
    #[error("run {run_id} cannot move from {from} to {to}")]
    InvalidTransition {
        run_id: String,
        from: &'static str,
        to: &'static str,
    },
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("referential integrity: {0}")]
    Integrity(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("persistence failed: {0}")]
    Persist(String),
}

impl StoreError {
    pub fn kind(&self) -> &'static str {
        match self {
            StoreError::ImportEmpty { .. } => "ImportEmpty",
            StoreError::NotFound { .. } => "NotFound",
            StoreError::RunClosed { .. } => "RunClosed",
            StoreError::InvalidTransition { .. } => "InvalidTransition",
            StoreError::InvalidTriple(_) => "InvalidTriple",
            StoreError::InvalidInput(_) => "InvalidInput",
            StoreError::Integrity(_) => "Integrity",
            StoreError::Filter(_) => "FilterError",
            StoreError::Query(_) => "QueryError",
            StoreError::Persist(_) => "PersistError",
        }
    }
}

fn not_found(what: &'static str, id: impl Into<String>) -> StoreError {
    StoreError::NotFound { what, id: id.into() }
}

/// Source of wall-clock timestamps (unix milliseconds).
pub trait Clock: Send + Sync {
    fn now_millis(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_millis(&self) -> u64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

pub struct FixedClock(pub u64);

/// Triples per run, stored as `[run_id, [[key, triple], ...]]` entries.
mod nested_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    type Nested<A, K, V> = BTreeMap<A, BTreeMap<K, V>>;

    pub fn serialize<S, A, K, V>(m: &Nested<A, K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        A: Serialize,
        K: Serialize,
        V: Serialize,
    {
        s.collect_seq(m.iter().map(|(a, inner)| (a, inner.iter().collect::<Vec<_>>())))
    }

    pub fn deserialize<'de, D, A, K, V>(d: D) -> Result<Nested<A, K, V>, D::Error>
    where
        D: Deserializer<'de>,
        A: Deserialize<'de> + Ord,
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
    {
        Ok(Vec::<(A, Vec<(K, V)>)>::deserialize(d)?
            .into_iter()
            .map(|(a, inner)| (a, inner.into_iter().collect()))
            .collect())
    }
}

impl Clock for FixedClock {
    fn now_millis(&self) -> u64 {
        self.0
    }
}

/// Serializes a map as a list of pairs so tuple keys survive JSON.
mod pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer, K: Serialize, V: Serialize>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D, K, V>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        D: Deserializer<'de>,
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

type TripleKey = (String, String, String);

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Counters {
    terminology: u64,
    code_set: u64,
    run: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct StoreState {
    format_version: u32,
    counters: Counters,
    terminologies: BTreeMap<TerminologyId, Terminology>,
    code_sets: BTreeMap<CodeSetId, CodeSet>,
    runs: BTreeMap<RunId, Run>,
    #[serde(with = "nested_pairs")]
    triples: BTreeMap<RunId, BTreeMap<TripleKey, Triple>>,
    /// (model_id, text)
    #[serde(with = "pairs")]
    string_vectors: BTreeMap<(String, String), StringVectors>,
    /// (model_id, terminology_id, code_id)
    #[serde(with = "pairs")]
    code_summaries: BTreeMap<(String, String, String), EmbeddingVector>,
    /// (source_text, style, model_id)
    #[serde(with = "pairs")]
    expansions: BTreeMap<(String, String, String), ExpansionString>,
    /// (model_id, text)
    #[serde(with = "pairs")]
    beceptivity: BTreeMap<(String, String), f64>,
    assessments: Vec<AssessmentRecord>,
    refinements: Vec<RefinementRecord>,
    /// (code_set_id, object_text)
    #[serde(with = "pairs")]
    matches: BTreeMap<(CodeSetId, String), MatchResult>,
    custom_tables: BTreeMap<String, Vec<CustomTable>>,
}

/// Outcome of a terminology import.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportOutcome {
    pub terminology: Terminology,
    pub rejected: Vec<RowRejection>,
    /// Rows dropped as duplicates of an earlier (code_id, string) pair.
    pub duplicates: usize,
    /// Distinct strings of the terminology, in code order.
    pub distinct_strings: Vec<String>,
}

/// Everything in the store except wall-clock timestamps, in canonical order.
/// Two stores with equal logical content export byte-identical JSON.
#[derive(Debug, Serialize)]
struct LogicalExport<'a> {
    format_version: u32,
    terminologies: Vec<&'a Terminology>,
    code_sets: Vec<&'a CodeSet>,
    runs: Vec<LogicalRun<'a>>,
    triples: Vec<&'a Triple>,
    string_vectors: Vec<(&'a (String, String), &'a StringVectors)>,
    code_summaries: Vec<&'a EmbeddingVector>,
    expansions: Vec<&'a ExpansionString>,
    beceptivity: Vec<(&'a (String, String), f64)>,
    assessments: Vec<&'a AssessmentRecord>,
    refinements: Vec<&'a RefinementRecord>,
    matches: Vec<&'a MatchResult>,
    custom_tables: Vec<LogicalTable<'a>>,
}

#[derive(Debug, Serialize)]
struct LogicalRun<'a> {
    id: &'a RunId,
    code_set_id: &'a CodeSetId,
    spec_ids: &'a [String],
    status: RunStatus,
    ledger: &'a Option<CostLedger>,
}

#[derive(Debug, Serialize)]
struct LogicalTable<'a> {
    name: &'a str,
    version: u32,
    defining_query: &'a str,
    columns: &'a [String],
    rows: &'a [Vec<Value>],
}

pub struct Store {
    state: RwLock<StoreState>,
    path: Option<PathBuf>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish_non_exhaustive()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            state: RwLock::new(StoreState {
                format_version: FORMAT_VERSION,
                ..Default::default()
            }),
            path: None,
            clock: Arc::new(SystemClock),
        }
    }

    /// Opens the snapshot at `path`, or starts empty when the file does not
    /// exist yet. Call [`Store::persist`] to write it back.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let state = if path.exists() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| StoreError::Persist(format!("reading {}: {e}", path.display())))?;
            let state: StoreState = serde_json::from_str(&text)
                .map_err(|e| StoreError::Persist(format!("decoding {}: {e}", path.display())))?;
            if state.format_version != FORMAT_VERSION {
                return Err(StoreError::Persist(format!(
                    "{} has format version {}, expected {FORMAT_VERSION}",
                    path.display(),
                    state.format_version
                )));
            }
            state
        } else {
            StoreState {
                format_version: FORMAT_VERSION,
                ..Default::default()
            }
        };
        Ok(Store {
            state: RwLock::new(state),
            path: Some(path),
            clock: Arc::new(SystemClock),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Writes the snapshot atomically (temp file + rename). No-op in memory.
    pub fn persist(&self) -> Result<(), StoreError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let json = {
            let state = self.state.read();
            serde_json::to_string(&*state).map_err(|e| StoreError::Persist(e.to_string()))?
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| StoreError::Persist(e.to_string()))?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json).map_err(|e| StoreError::Persist(format!("writing {}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, path).map_err(|e| StoreError::Persist(e.to_string()))
    }

    // ---- terminologies -------------------------------------------------

    /// Imports rows into the terminology called `name`, creating it if
    /// needed. Re-importing the same rows leaves the content unchanged.
    pub fn import_terminology<I>(&self, name: &str, rows: I) -> Result<ImportOutcome, StoreError>
    where
        I: IntoIterator<Item = Result<ImportRow, RowRejection>>,
    {
        let mut rejected = Vec::new();
        let mut accepted: Vec<(String, String, u32)> = Vec::new();
        let mut seen_any = false;
        for (i, row) in rows.into_iter().enumerate() {
            seen_any = true;
            let row_no = i + 1;
            match row {
                Err(mut r) => {
                    r.row = row_no;
                    rejected.push(r);
                }
                Ok(r) => {
                    let code_id = r.code_id.trim();
                    let text = r.text.trim();
                    let reason = if code_id.is_empty() {
                        Some("empty code_id")
                    } else if text.is_empty() {
                        Some("empty string text")
                    } else if r.source_rank < 0 || r.source_rank > u32::MAX as i64 {
                        Some("rank out of range")
                    } else {
                        None
                    };
                    match reason {
                        Some(reason) => rejected.push(RowRejection {
                            row: row_no,
                            reason: reason.into(),
                        }),
                        None => accepted.push((code_id.to_string(), text.to_string(), r.source_rank as u32)),
                    }
                }
            }
        }
        if !seen_any || accepted.is_empty() {
            return Err(StoreError::ImportEmpty {
                rejected: rejected.len(),
            });
        }

        let mut state = self.state.write();
        let existing = state.terminologies.values().find(|t| t.name == name).map(|t| t.id.clone());
        let id = match existing {
            Some(id) => id,
            None => {
                state.counters.terminology += 1;
                let id = TerminologyId(format!("term-{}", state.counters.terminology));
                state.terminologies.insert(
                    id.clone(),
                    Terminology {
                        id: id.clone(),
                        name: name.to_string(),
                        codes: BTreeMap::new(),
                    },
                );
                id
            }
        };
        let term = state.terminologies.get_mut(&id).expect("just ensured");
        let mut duplicates = 0;
        for (code_id, text, rank) in accepted {
            let code = term.codes.entry(code_id.clone()).or_insert_with(|| Code {
                code_id,
                terminology_id: id.clone(),
                strings: Vec::new(),
                main_string: 0,
            });
            if code.strings.iter().any(|s| s.text == text) {
                duplicates += 1;
                continue;
            }
            code.strings.push(TermString {
                text,
                source_rank: rank,
            });
        }
        for code in term.codes.values_mut() {
            // Stable: equal ranks keep import order. Rank 0 (lowest) is main.
            code.strings.sort_by_key(|s| s.source_rank);
            code.main_string = 0;
        }
        let mut distinct = BTreeSet::new();
        let mut distinct_strings = Vec::new();
        for code in term.codes.values() {
            for s in &code.strings {
                if distinct.insert(s.text.clone()) {
                    distinct_strings.push(s.text.clone());
                }
            }
        }
        Ok(ImportOutcome {
            terminology: term.clone(),
            rejected,
            duplicates,
            distinct_strings,
        })
    }

    pub fn terminology(&self, id: &TerminologyId) -> Result<Terminology, StoreError> {
        self.state
            .read()
            .terminologies
            .get(id)
            .cloned()
            .ok_or_else(|| not_found("terminology", id.as_str()))
    }

    /// Resolves a terminology by id or, failing that, by name.
    pub fn find_terminology(&self, id_or_name: &str) -> Result<Terminology, StoreError> {
        let state = self.state.read();
        state
            .terminologies
            .get(&TerminologyId::from(id_or_name))
            .or_else(|| state.terminologies.values().find(|t| t.name == id_or_name))
            .cloned()
            .ok_or_else(|| not_found("terminology", id_or_name))
    }

    pub fn terminologies(&self) -> Vec<Terminology> {
        self.state.read().terminologies.values().cloned().collect()
    }

    pub fn code(&self, terminology_id: &TerminologyId, code_id: &str) -> Result<Code, StoreError> {
        self.state
            .read()
            .terminologies
            .get(terminology_id)
            .and_then(|t| t.codes.get(code_id))
            .cloned()
            .ok_or_else(|| not_found("code", format!("{terminology_id}/{code_id}")))
    }

    // ---- code sets -----------------------------------------------------

    pub fn create_code_set(
        &self,
        terminology_id: &TerminologyId,
        name: &str,
        filter: &CodeFilter,
        expansion_style: Option<String>,
    ) -> Result<CodeSet, StoreError> {
        let mut state = self.state.write();
        let term = state
            .terminologies
            .get(terminology_id)
            .ok_or_else(|| not_found("terminology", terminology_id.as_str()))?;
        let members: BTreeSet<String> = term
            .codes
            .values()
            .filter(|c| filter.matches(c))
            .map(|c| c.code_id.clone())
            .collect();
        if let Some(existing) = state.code_sets.values().find(|cs| cs.name == name) {
            if existing.terminology_id == *terminology_id
                && existing.member_code_ids == members
                && existing.source_filter == filter.to_string()
                && existing.expansion_style == expansion_style
            {
                return Ok(existing.clone());
            }
        }
        state.counters.code_set += 1;
        let id = CodeSetId(format!("cs-{}", state.counters.code_set));
        let cs = CodeSet {
            id: id.clone(),
            name: name.to_string(),
            terminology_id: terminology_id.clone(),
            empty_warning: members.is_empty(),
            member_code_ids: members,
            source_filter: filter.to_string(),
            expansion_style,
        };
        state.code_sets.insert(id, cs.clone());
        Ok(cs)
    }

    pub fn code_set(&self, id: &CodeSetId) -> Result<CodeSet, StoreError> {
        self.state
            .read()
            .code_sets
            .get(id)
            .cloned()
            .ok_or_else(|| not_found("code set", id.as_str()))
    }

    /// Resolves a code set by id, falling back to its name (latest wins).
    pub fn find_code_set(&self, id_or_name: &str) -> Result<CodeSet, StoreError> {
        let state = self.state.read();
        state
            .code_sets
            .get(&CodeSetId::from(id_or_name))
            .or_else(|| state.code_sets.values().rev().find(|c| c.name == id_or_name))
            .cloned()
            .ok_or_else(|| not_found("code set", id_or_name))
    }

    pub fn code_set_members(&self, id: &CodeSetId) -> Result<Vec<Code>, StoreError> {
        let state = self.state.read();
        let cs = state.code_sets.get(id).ok_or_else(|| not_found("code set", id.as_str()))?;
        let term = state
            .terminologies
            .get(&cs.terminology_id)
            .ok_or_else(|| StoreError::Integrity(format!("code set {id} names a missing terminology")))?;
        cs.member_code_ids
            .iter()
            .map(|c| {
                term.codes
                    .get(c)
                    .cloned()
                    .ok_or_else(|| StoreError::Integrity(format!("code set {id} member {c} does not exist")))
            })
            .collect()
    }

    // ---- runs and triples ----------------------------------------------

    pub fn create_run(&self, code_set_id: &CodeSetId, spec_ids: Vec<String>) -> Result<Run, StoreError> {
        let mut state = self.state.write();
        if !state.code_sets.contains_key(code_set_id) {
            return Err(not_found("code set", code_set_id.as_str()));
        }
        state.counters.run += 1;
        let id = RunId(format!("run-{}", state.counters.run));
        let run = Run {
            id: id.clone(),
            code_set_id: code_set_id.clone(),
            spec_ids,
            status: RunStatus::Pending,
            ledger: None,
            started_at: None,
            ended_at: None,
        };
        state.runs.insert(id.clone(), run.clone());
        state.triples.insert(id, BTreeMap::new());
        Ok(run)
    }

    pub fn run(&self, id: &RunId) -> Result<Run, StoreError> {
        self.state
            .read()
            .runs
            .get(id)
            .cloned()
            .ok_or_else(|| not_found("run", id.as_str()))
    }

    pub fn runs(&self) -> Vec<Run> {
        self.state.read().runs.values().cloned().collect()
    }

    pub fn set_run_status(&self, id: &RunId, next: RunStatus, ledger: Option<CostLedger>) -> Result<Run, StoreError> {
        let now = self.clock.now_millis();
        let mut state = self.state.write();
        let run = state.runs.get_mut(id).ok_or_else(|| not_found("run", id.as_str()))?;
        if !run.status.can_become(next) {
            return Err(StoreError::InvalidTransition {
                run_id: id.to_string(),
                from: run.status.as_str(),
                to: next.as_str(),
            });
        }
        run.status = next;
        if next == RunStatus::Running {
            run.started_at = Some(now);
        }
        if next.is_terminal() {
            run.ended_at = Some(now);
        }
        if ledger.is_some() {
            run.ledger = ledger;
        }
        Ok(run.clone())
    }

    /// Inserts triples into a running run. The whole batch is validated
    /// before anything is written; duplicates of stored triples (or of each
    /// other) are skipped. Returns the number of new triples.
    pub fn insert_triples(&self, run_id: &RunId, triples: Vec<Triple>) -> Result<usize, StoreError> {
        let mut state = self.state.write();
        let run = state.runs.get(run_id).ok_or_else(|| not_found("run", run_id.as_str()))?;
        if run.status != RunStatus::Running {
            return Err(StoreError::RunClosed {
                run_id: run_id.to_string(),
                status: run.status.as_str(),
            });
        }
        let cs = state
            .code_sets
            .get(&run.code_set_id)
            .ok_or_else(|| StoreError::Integrity(format!("run {run_id} names a missing code set")))?;
        for t in &triples {
            if t.run_id != *run_id {
                return Err(StoreError::InvalidTriple(format!("triple belongs to run {}", t.run_id)));
            }
            if t.predicate.trim().is_empty() || t.object_value.trim().is_empty() {
                return Err(StoreError::InvalidTriple("empty predicate or object".into()));
            }
            if !cs.member_code_ids.contains(&t.subject_code_id) {
                return Err(StoreError::Integrity(format!(
                    "subject {} is not in code set {}",
                    t.subject_code_id, cs.id
                )));
            }
            if t.object_kind == ObjectKind::Numeric
                && !t.object_value.trim().parse::<f64>().is_ok_and(f64::is_finite)
            {
                return Err(StoreError::InvalidTriple(format!(
                    "numeric object '{}' is not a finite number",
                    t.object_value
                )));
            }
        }
        let table = state.triples.entry(run_id.clone()).or_default();
        let before = table.len();
        for t in triples {
            table.entry(t.key()).or_insert(t);
        }
        Ok(table.len() - before)
    }

    /// Triples of a run in canonical (subject, predicate, object) order.
    pub fn triples(&self, run_id: &RunId) -> Result<Vec<Triple>, StoreError> {
        let state = self.state.read();
        if !state.runs.contains_key(run_id) {
            return Err(not_found("run", run_id.as_str()));
        }
        Ok(state
            .triples
            .get(run_id)
            .map(|t| t.values().cloned().collect())
            .unwrap_or_default())
    }

    pub fn all_triples(&self) -> Vec<Triple> {
        self.state
            .read()
            .triples
            .values()
            .flat_map(|t| t.values().cloned())
            .collect()
    }

    // ---- vectors and caches --------------------------------------------

    pub fn string_vectors(&self, model_id: &str, text: &str) -> Option<StringVectors> {
        self.state
            .read()
            .string_vectors
            .get(&(model_id.to_string(), text.to_string()))
            .cloned()
    }

    /// First write wins; returns whatever ends up stored.
    pub fn put_string_vectors(&self, model_id: &str, text: &str, v: StringVectors) -> StringVectors {
        self.state
            .write()
            .string_vectors
            .entry((model_id.to_string(), text.to_string()))
            .or_insert(v)
            .clone()
    }

    pub fn code_summary(&self, model_id: &str, terminology_id: &TerminologyId, code_id: &str) -> Option<EmbeddingVector> {
        self.state
            .read()
            .code_summaries
            .get(&(model_id.to_string(), terminology_id.0.clone(), code_id.to_string()))
            .cloned()
    }

    pub fn put_code_summary(&self, terminology_id: &TerminologyId, code_id: &str, v: EmbeddingVector) -> EmbeddingVector {
        self.state
            .write()
            .code_summaries
            .entry((v.model_id.clone(), terminology_id.0.clone(), code_id.to_string()))
            .or_insert(v)
            .clone()
    }

    pub fn expansion(&self, source_text: &str, style: &str, model_id: &str) -> Option<ExpansionString> {
        self.state
            .read()
            .expansions
            .get(&(source_text.to_string(), style.to_string(), model_id.to_string()))
            .cloned()
    }

    /// All stored expansion sets for `source_text`, across styles and models.
    pub fn expansions_of(&self, source_text: &str) -> Vec<ExpansionString> {
        self.state
            .read()
            .expansions
            .values()
            .filter(|e| e.source_text == source_text)
            .cloned()
            .collect()
    }

    pub fn put_expansion(&self, e: ExpansionString) -> ExpansionString {
        self.state
            .write()
            .expansions
            .entry((e.source_text.clone(), e.style.clone(), e.model_id.clone()))
            .or_insert(e)
            .clone()
    }

    pub fn beceptivity(&self, model_id: &str, text: &str) -> Option<f64> {
        self.state
            .read()
            .beceptivity
            .get(&(model_id.to_string(), text.to_string()))
            .copied()
    }

    pub fn put_beceptivity(&self, model_id: &str, text: &str, value: f64) -> f64 {
        *self
            .state
            .write()
            .beceptivity
            .entry((model_id.to_string(), text.to_string()))
            .or_insert(value)
    }

    pub fn record_assessment(&self, rec: AssessmentRecord) {
        self.state.write().assessments.push(rec);
    }

    pub fn assessments(&self, run_id: &RunId) -> Vec<AssessmentRecord> {
        self.state
            .read()
            .assessments
            .iter()
            .filter(|a| a.run_id == *run_id)
            .cloned()
            .collect()
    }

    pub fn record_refinement(&self, rec: RefinementRecord) {
        self.state.write().refinements.push(rec);
    }

    pub fn refinements(&self, run_id: &RunId) -> Vec<RefinementRecord> {
        self.state
            .read()
            .refinements
            .iter()
            .filter(|r| r.run_id == *run_id)
            .cloned()
            .collect()
    }

    // ---- matches -------------------------------------------------------

    pub fn stored_match(&self, code_set_id: &CodeSetId, object_text: &str) -> Option<MatchResult> {
        self.state
            .read()
            .matches
            .get(&(code_set_id.clone(), object_text.to_string()))
            .cloned()
    }

    pub fn put_match(&self, result: MatchResult) {
        self.state
            .write()
            .matches
            .insert((result.code_set_id.clone(), result.object_text.clone()), result);
    }

    /// Stored matches for an object string across all code sets.
    pub fn matches_for(&self, object_text: &str) -> Vec<MatchResult> {
        self.state
            .read()
            .matches
            .values()
            .filter(|m| m.object_text == object_text)
            .cloned()
            .collect()
    }

    pub fn matches_in(&self, code_set_id: &CodeSetId) -> Vec<MatchResult> {
        self.state
            .read()
            .matches
            .values()
            .filter(|m| m.code_set_id == *code_set_id)
            .cloned()
            .collect()
    }

    // ---- custom tables -------------------------------------------------

    /// Runs `query` against the logical tables and stores the result as a
    /// new snapshot version of table `name`.
    pub fn materialize_custom_table(&self, name: &str, query: &str) -> Result<CustomTable, StoreError> {
        if name.trim().is_empty() {
            return Err(StoreError::InvalidInput("custom table name is empty".into()));
        }
        let result = {
            let state = self.state.read();
            query::execute(query, &surface(&state))?
        };
        let now = self.clock.now_millis();
        let mut state = self.state.write();
        let versions = state.custom_tables.entry(name.to_string()).or_default();
        let table = CustomTable {
            name: name.to_string(),
            version: versions.len() as u32 + 1,
            defining_query: query.to_string(),
            columns: result.columns,
            rows: result.rows,
            created_at: now,
        };
        versions.push(table.clone());
        Ok(table)
    }

    pub fn custom_table(&self, name: &str) -> Result<CustomTable, StoreError> {
        self.state
            .read()
            .custom_tables
            .get(name)
            .and_then(|v| v.last())
            .cloned()
            .ok_or_else(|| not_found("custom table", name))
    }

    pub fn custom_table_versions(&self, name: &str) -> Vec<CustomTable> {
        self.state.read().custom_tables.get(name).cloned().unwrap_or_default()
    }

    /// Read-only query over the logical tables, without materializing.
    pub fn query(&self, query: &str) -> Result<Table, StoreError> {
        let state = self.state.read();
        Ok(query::execute(query, &surface(&state))?)
    }

    // ---- export --------------------------------------------------------

    /// Canonical JSON of the logical content (timestamps excluded).
    pub fn logical_export(&self) -> String {
        let state = self.state.read();
        let mut assessments: Vec<&AssessmentRecord> = state.assessments.iter().collect();
        assessments.sort_by(|a, b| {
            (&a.run_id, &a.subject_code_id, &a.predicate, &a.text)
                .cmp(&(&b.run_id, &b.subject_code_id, &b.predicate, &b.text))
                .then(a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))
        });
        let mut refinements: Vec<&RefinementRecord> = state.refinements.iter().collect();
        refinements.sort_by(|a, b| {
            (&a.run_id, &a.subject_code_id, &a.predicate, a.depth, &a.parent, &a.child)
                .cmp(&(&b.run_id, &b.subject_code_id, &b.predicate, b.depth, &b.parent, &b.child))
        });
        let export = LogicalExport {
            format_version: state.format_version,
            terminologies: state.terminologies.values().collect(),
            code_sets: state.code_sets.values().collect(),
            runs: state
                .runs
                .values()
                .map(|r| LogicalRun {
                    id: &r.id,
                    code_set_id: &r.code_set_id,
                    spec_ids: &r.spec_ids,
                    status: r.status,
                    ledger: &r.ledger,
                })
                .collect(),
            triples: state.triples.values().flat_map(|t| t.values()).collect(),
            string_vectors: state.string_vectors.iter().collect(),
            code_summaries: state.code_summaries.values().collect(),
            expansions: state.expansions.values().collect(),
            beceptivity: state.beceptivity.iter().map(|(k, v)| (k, *v)).collect(),
            assessments,
            refinements,
            matches: state.matches.values().collect(),
            custom_tables: state
                .custom_tables
                .values()
                .flatten()
                .map(|t| LogicalTable {
                    name: &t.name,
                    version: t.version,
                    defining_query: &t.defining_query,
                    columns: &t.columns,
                    rows: &t.rows,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&export).expect("logical export serializes")
    }

    /// SHA-256 hex digest of [`Store::logical_export`].
    pub fn export_hash(&self) -> String {
        hex::encode(Sha256::digest(self.logical_export().as_bytes()))
    }
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

fn opt_text(s: Option<&str>) -> Value {
    s.map_or(Value::Null, text)
}

/// The query surface: one table per logical entity.
fn surface(state: &StoreState) -> query::Surface {
    let mut s = query::Surface::new();

    let mut t = Table::new(&["id", "name"]);
    let mut codes = Table::new(&["terminology_id", "code_id", "main_string"]);
    let mut strings = Table::new(&["terminology_id", "code_id", "text", "source_rank"]);
    for term in state.terminologies.values() {
        t.rows.push(vec![text(term.id.as_str()), text(&term.name)]);
        for c in term.codes.values() {
            codes
                .rows
                .push(vec![text(term.id.as_str()), text(&c.code_id), text(c.main_text())]);
            for st in &c.strings {
                strings.rows.push(vec![
                    text(term.id.as_str()),
                    text(&c.code_id),
                    text(&st.text),
                    Value::Number(st.source_rank as f64),
                ]);
            }
        }
    }
    s.insert("terminologies".into(), t);
    s.insert("codes".into(), codes);
    s.insert("strings".into(), strings);

    let mut sets = Table::new(&["id", "name", "terminology_id", "source_filter", "expansion_style"]);
    let mut members = Table::new(&["code_set_id", "code_id"]);
    for cs in state.code_sets.values() {
        sets.rows.push(vec![
            text(cs.id.as_str()),
            text(&cs.name),
            text(cs.terminology_id.as_str()),
            text(&cs.source_filter),
            opt_text(cs.expansion_style.as_deref()),
        ]);
        for m in &cs.member_code_ids {
            members.rows.push(vec![text(cs.id.as_str()), text(m)]);
        }
    }
    s.insert("code_sets".into(), sets);
    s.insert("code_set_members".into(), members);

    let mut runs = Table::new(&["id", "code_set_id", "status", "cost"]);
    for r in state.runs.values() {
        let cost = r
            .ledger
            .as_ref()
            .and_then(|l| l.accumulated_cost.to_string().parse::<f64>().ok())
            .map_or(Value::Null, Value::Number);
        runs.rows.push(vec![
            text(r.id.as_str()),
            text(r.code_set_id.as_str()),
            text(r.status.as_str()),
            cost,
        ]);
    }
    s.insert("runs".into(), runs);

    let mut triples = Table::new(&[
        "run_id",
        "subject_code_id",
        "predicate",
        "object_value",
        "object_kind",
        "finalization",
        "replaced_parent",
    ]);
    for tr in state.triples.values().flat_map(|t| t.values()) {
        triples.rows.push(vec![
            text(tr.run_id.as_str()),
            text(&tr.subject_code_id),
            text(&tr.predicate),
            text(&tr.object_value),
            text(serde_plain(&tr.object_kind).as_str()),
            text(serde_plain(&tr.finalization).as_str()),
            opt_text(tr.replaced_parent.as_deref()),
        ]);
    }
    s.insert("triples".into(), triples);

    let mut matches = Table::new(&["code_set_id", "object_string", "rank", "code_id", "distance"]);
    for m in state.matches.values() {
        for (i, r) in m.ranked.iter().enumerate() {
            matches.rows.push(vec![
                text(m.code_set_id.as_str()),
                text(&m.object_text),
                Value::Number((i + 1) as f64),
                text(&r.code_id),
                Value::Number(r.distance),
            ]);
        }
    }
    s.insert("matches".into(), matches);

    let mut expansions = Table::new(&["source_text", "style", "model_id", "generated_text"]);
    for e in state.expansions.values() {
        for g in &e.generated_texts {
            expansions
                .rows
                .push(vec![text(&e.source_text), text(&e.style), text(&e.model_id), text(g)]);
        }
    }
    s.insert("expansions".into(), expansions);
    s
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

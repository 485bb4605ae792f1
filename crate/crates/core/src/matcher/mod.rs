//! Mapping free-text object strings onto the codes of a code set.
//!
//! d(x, c) is the minimum cosine distance over every pair of a vector of
//! the object string and a vector of the code. Codes with d(x, c) ≥ z are
//! dropped, the rest ranked ascending (ties by code id) and the top n kept.

mod index;
mod review;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embeddings::{EmbeddingService, VectorKind};
use crate::store::{CodeSet, CodeSetId, Store};

pub use index::{CodeIndex, CodeVectors, ExactIndex, RankedCode};
pub use review::{review_export, REVIEW_HEADER};

pub const DEFAULT_TOP_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("code set {0} has no codes with usable vectors")]
    EmptySet(String),
    #[error("missing vectors: {0}")]
    DependencyMissing(String),
    #[error("invalid match query: {0}")]
    InvalidQuery(String),
}

impl MatchError {
    pub fn kind(&self) -> &'static str {
        match self {
            MatchError::EmptySet(_) => "EmptySet",
            MatchError::DependencyMissing(_) => "DependencyMissing",
            MatchError::InvalidQuery(_) => "InvalidQuery",
        }
    }
}

/// Which vectors make up V_x (object kinds) and V_c (subject kinds).
///
/// For a code, per-string kinds are taken from every string of the code and
/// SUMMARY is the code's summary vector. For an object string, SUMMARY is
/// its own CLS vector (the mean over a single string). With
/// `include_expansions`, the summary vectors of stored expansions are added
/// to both sides: the object's own expansions and those of every string of
/// the code, restricted to `expansion_style` when one is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorSelection {
    pub subject_kinds: BTreeSet<VectorKind>,
    pub object_kinds: BTreeSet<VectorKind>,
    #[serde(default)]
    pub include_expansions: bool,
    #[serde(default)]
    pub expansion_style: Option<String>,
}

impl Default for VectorSelection {
    fn default() -> Self {
        VectorSelection {
            subject_kinds: [VectorKind::Cls].into(),
            object_kinds: [VectorKind::Cls].into(),
            include_expansions: false,
            expansion_style: None,
        }
    }
}

impl VectorSelection {
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.subject_kinds.is_empty() || self.object_kinds.is_empty() {
            return Err(MatchError::InvalidQuery("vector selection needs at least one kind per side".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    #[serde(default)]
    pub selection: VectorSelection,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_z() -> f64 {
    2.0
}

fn default_n() -> usize {
    DEFAULT_TOP_N
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            selection: VectorSelection::default(),
            z: default_z(),
            n: DEFAULT_TOP_N,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(0.0..=2.0).contains(&self.z) {
            return Err(MatchError::InvalidQuery(format!("z must be in [0, 2], got {}", self.z)));
        }
        if self.n == 0 {
            return Err(MatchError::InvalidQuery("n must be at least 1".into()));
        }
        self.selection.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchQuery {
    pub object_text: String,
    pub code_set_id: CodeSetId,
    #[serde(flatten)]
    pub params: MatchParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub code_set_id: CodeSetId,
    pub object_text: String,
    pub ranked: Vec<RankedCode>,
    pub best: Option<String>,
    pub z: f64,
    pub n: usize,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub results: Vec<MatchResult>,
    pub computed: usize,
    pub reused: usize,
    pub failures: Vec<(String, String)>,
}

/// Matches object strings against code sets, persisting results in the
/// store keyed by (code set, object string).
pub struct Matcher {
    store: Arc<Store>,
    embeddings: Arc<EmbeddingService>,
    distance_computations: AtomicUsize,
}

impl std::fmt::Debug for Matcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Matcher")
            .field("distance_computations", &self.distance_computations())
            .finish()
    }
}

fn missing(e: impl std::fmt::Display) -> crate::Error {
    MatchError::DependencyMissing(e.to_string()).into()
}

impl Matcher {
    pub fn new(store: Arc<Store>, embeddings: Arc<EmbeddingService>) -> Self {
        Matcher {
            store,
            embeddings,
            distance_computations: AtomicUsize::new(0),
        }
    }

    /// Pairwise distances computed so far by this matcher.
    pub fn distance_computations(&self) -> usize {
        self.distance_computations.load(Ordering::SeqCst)
    }

    fn expansion_summaries(&self, text: &str, style: Option<&str>) -> Vec<Vec<f64>> {
        let model = self.embeddings.model_id();
        self.store
            .expansions_of(text)
            .into_iter()
            .filter(|e| e.model_id == model && style.is_none_or(|s| s == e.style))
            .filter_map(|e| e.summary.map(|s| s.values))
            .collect()
    }

    /// V_x for an object string, embedding it on demand.
    pub fn object_vectors(&self, text: &str, selection: &VectorSelection) -> crate::Result<Vec<Vec<f64>>> {
        let sv = self.embeddings.embed_string(text)?;
        let mut out = Vec::new();
        for kind in &selection.object_kinds {
            match kind {
                VectorKind::Summary => out.push(sv.cls.clone()),
                k => out.push(sv.get(*k).expect("per-string kind").to_vec()),
            }
        }
        if selection.include_expansions {
            out.extend(self.expansion_summaries(text, selection.expansion_style.as_deref()));
        }
        Ok(out)
    }

    /// V_c for every member of a code set.
    pub fn code_vectors(&self, code_set: &CodeSet, selection: &VectorSelection) -> crate::Result<Vec<CodeVectors>> {
        let members = self.store.code_set_members(&code_set.id)?;
        let style = selection
            .expansion_style
            .as_deref()
            .or(code_set.expansion_style.as_deref());
        let mut out = Vec::with_capacity(members.len());
        for code in members {
            let mut vectors = Vec::new();
            for kind in &selection.subject_kinds {
                if *kind == VectorKind::Summary {
                    let s = self
                        .embeddings
                        .code_summary_vector(&code.terminology_id, &code.code_id)
                        .map_err(missing)?;
                    vectors.push(s.values);
                    continue;
                }
                for s in &code.strings {
                    let sv = self.embeddings.cached(&s.text).ok_or_else(|| {
                        missing(format!("string '{}' of code {} has no vectors", s.text, code.code_id))
                    })?;
                    vectors.push(sv.get(*kind).expect("per-string kind").to_vec());
                }
            }
            if selection.include_expansions {
                for s in &code.strings {
                    vectors.extend(self.expansion_summaries(&s.text, style));
                }
            }
            out.push(CodeVectors {
                code_id: code.code_id.clone(),
                vectors,
            });
        }
        Ok(out)
    }

    pub fn fingerprint(&self, object_text: &str, code_set: &CodeSet, params: &MatchParams) -> String {
        let payload = serde_json::json!({
            "object": object_text,
            "code_set": code_set.id,
            "members": code_set.member_code_ids,
            "selection": params.selection,
            "z": params.z,
            "n": params.n,
            "model": self.embeddings.model_id(),
        });
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }

    fn build_index(&self, code_set: &CodeSet, selection: &VectorSelection) -> crate::Result<ExactIndex> {
        let index = ExactIndex::new(self.code_vectors(code_set, selection)?);
        if index.is_empty() {
            return Err(MatchError::EmptySet(code_set.id.to_string()).into());
        }
        Ok(index)
    }

    fn run_one(&self, index: &dyn CodeIndex, text: &str, code_set: &CodeSet, params: &MatchParams) -> crate::Result<MatchResult> {
        let query = self.object_vectors(text, &params.selection)?;
        if query.is_empty() {
            return Err(missing(format!("no vectors selected for '{text}'")));
        }
        let (ranked, computed) = index.search(&query, params.z, params.n);
        self.distance_computations.fetch_add(computed, Ordering::SeqCst);
        let result = MatchResult {
            code_set_id: code_set.id.clone(),
            object_text: text.to_string(),
            best: ranked.first().map(|r| r.code_id.clone()),
            ranked,
            z: params.z,
            n: params.n,
            fingerprint: self.fingerprint(text, code_set, params),
        };
        self.store.put_match(result.clone());
        Ok(result)
    }

    /// Matches one object string and persists the result.
    pub fn match_string_to_codes(&self, query: &MatchQuery) -> crate::Result<MatchResult> {
        query.params.validate()?;
        if query.object_text.trim().is_empty() {
            return Err(MatchError::InvalidQuery("object string is empty".into()).into());
        }
        let code_set = self.store.code_set(&query.code_set_id)?;
        let index = self.build_index(&code_set, &query.params.selection)?;
        self.run_one(&index, &query.object_text, &code_set, &query.params)
    }

    /// Matches each distinct object string once. Strings whose stored result
    /// has the same fingerprint are reused without computing distances.
    /// Per-string failures are collected rather than aborting the batch.
    pub fn batch_match(
        &self,
        objects: &[String],
        code_set_id: &CodeSetId,
        params: &MatchParams,
        workers: usize,
    ) -> crate::Result<BatchOutcome> {
        params.validate()?;
        let code_set = self.store.code_set(code_set_id)?;
        let distinct: BTreeSet<&str> = objects.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
        let mut outcome = BatchOutcome::default();
        let mut todo = Vec::new();
        let mut done: BTreeMap<String, MatchResult> = BTreeMap::new();
        for text in distinct {
            match self.store.stored_match(code_set_id, text) {
                Some(m) if m.fingerprint == self.fingerprint(text, &code_set, params) => {
                    outcome.reused += 1;
                    done.insert(text.to_string(), m);
                }
                _ => todo.push(text.to_string()),
            }
        }
        if !todo.is_empty() {
            let index = self.build_index(&code_set, &params.selection)?;
            let workers = workers.clamp(1, todo.len());
            let next = AtomicUsize::new(0);
            let results: parking_lot::Mutex<Vec<(String, crate::Result<MatchResult>)>> = Default::default();
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(text) = todo.get(i) else { break };
                        let r = self.run_one(&index, text, &code_set, params);
                        results.lock().push((text.clone(), r));
                    });
                }
            });
            for (text, r) in results.into_inner() {
                match r {
                    Ok(m) => {
                        outcome.computed += 1;
                        done.insert(text, m);
                    }
                    Err(e) => outcome.failures.push((text, e.to_string())),
                }
            }
            outcome.failures.sort();
        }
        outcome.results = done.into_values().collect();
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{EmbedError, Embedder, StringVectors};
    use crate::store::{CodeFilter, ImportRow};
    use std::collections::HashMap;

    /// Embeds a handful of known strings as fixed 2-d vectors.
    struct Table(HashMap<&'static str, [f64; 2]>);

    impl Embedder for Table {
        fn model_id(&self) -> &str {
            "table"
        }
        fn dimension(&self) -> usize {
            2
        }
        fn embed(&self, text: &str) -> Result<StringVectors, EmbedError> {
            let v = self.0.get(text).ok_or_else(|| EmbedError::Embedder {
                message: format!("unknown {text}"),
                retryable: false,
            })?;
            Ok(StringVectors {
                cls: v.to_vec(),
                mean_pooled: v.to_vec(),
                max_pooled: v.to_vec(),
            })
        }
    }

    fn setup() -> (Arc<Store>, Matcher, CodeSetId) {
        let store = Arc::new(Store::in_memory());
        let emb = Arc::new(Table(HashMap::from([
            ("east", [1.0, 0.0]),
            ("north", [0.0, 1.0]),
            ("northeast", [1.0, 1.0]),
            ("x", [1.0, 0.0]),
            ("y", [0.0, 1.0]),
        ])));
        let svc = Arc::new(EmbeddingService::new(emb, store.clone()));
        let term = store
            .import_terminology(
                "t",
                vec![
                    Ok(ImportRow::new("A", "east", 0)),
                    Ok(ImportRow::new("B", "north", 0)),
                    Ok(ImportRow::new("C", "northeast", 0)),
                ],
            )
            .unwrap()
            .terminology;
        for t in ["east", "north", "northeast"] {
            svc.embed_string(t).unwrap();
        }
        let cs = store.create_code_set(&term.id, "all", &CodeFilter::All, None).unwrap();
        (store.clone(), Matcher::new(store, svc), cs.id)
    }

    fn query(cs: &CodeSetId, x: &str, z: f64, n: usize) -> MatchQuery {
        MatchQuery {
            object_text: x.into(),
            code_set_id: cs.clone(),
            params: MatchParams {
                selection: VectorSelection::default(),
                z,
                n,
            },
        }
    }

    #[test]
    fn forced_geometry() {
        let (_, m, cs) = setup();
        let r = m.match_string_to_codes(&query(&cs, "x", 0.5, 4)).unwrap();
        assert_eq!(r.best.as_deref(), Some("A"));
        assert_eq!(r.ranked.len(), 2);
        assert!(r.ranked.iter().all(|c| c.distance < 0.5));
        assert!(r.ranked.iter().all(|c| c.code_id != "B"));
    }

    #[test]
    fn z_two_always_has_a_best() {
        let (_, m, cs) = setup();
        let r = m.match_string_to_codes(&query(&cs, "y", 2.0, 1)).unwrap();
        assert_eq!(r.best.as_deref(), Some("B"));
        assert_eq!(r.ranked.len(), 1);
    }

    #[test]
    fn invalid_parameters() {
        let (_, m, cs) = setup();
        assert!(m.match_string_to_codes(&query(&cs, "x", 2.5, 4)).is_err());
        assert!(m.match_string_to_codes(&query(&cs, "x", 1.0, 0)).is_err());
    }

    #[test]
    fn batch_dedups_and_reuses() {
        let (store, m, cs) = setup();
        let objects: Vec<String> = ["x", "x", "x", "x", "x", "y", "east"].iter().map(|s| s.to_string()).collect();
        let params = MatchParams::default();
        let first = m.batch_match(&objects, &cs, &params, 3).unwrap();
        assert_eq!(first.results.len(), 3);
        assert_eq!(first.computed, 3);
        assert_eq!(store.matches_in(&cs).len(), 3);
        let before = m.distance_computations();
        let again = m.batch_match(&objects, &cs, &params, 3).unwrap();
        assert_eq!(again.reused, 3);
        assert_eq!(m.distance_computations(), before);
        let two = MatchParams { n: 2, ..params };
        let r = m.batch_match(&objects, &cs, &two, 1).unwrap();
        assert!(r.results.iter().all(|m| m.ranked.len() <= 2));
    }

    #[test]
    fn unembedded_members_are_a_missing_dependency() {
        let store = Arc::new(Store::in_memory());
        let emb = Arc::new(Table(HashMap::from([("x", [1.0, 0.0])])));
        let svc = Arc::new(EmbeddingService::new(emb, store.clone()));
        let term = store
            .import_terminology("t", vec![Ok(ImportRow::new("A", "east", 0))])
            .unwrap()
            .terminology;
        let cs = store.create_code_set(&term.id, "all", &CodeFilter::All, None).unwrap();
        let m = Matcher::new(store, svc);
        let err = m.match_string_to_codes(&query(&cs.id, "x", 1.0, 4)).unwrap_err();
        assert_eq!(err.kind(), "DependencyMissing");
    }
}

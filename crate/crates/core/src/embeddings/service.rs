use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use once_cell::sync::OnceCell;
use parking_lot::Mutex;

use super::{pool_slices, EmbedError, Embedder, EmbeddingVector, PoolMode, StringVectors, VectorKind, VectorOwner};
use crate::store::{Store, TerminologyId};

/// Embedding cache in front of an [`Embedder`].
///
/// Vectors are persisted in the store keyed by (model_id, text), so a text
/// is embedded at most once per model. Concurrent callers asking for the
/// same text share one in-flight computation and observe the same stored
/// vectors.
pub struct EmbeddingService {
    embedder: Arc<dyn Embedder>,
    store: Arc<Store>,
    in_flight: Mutex<HashMap<String, Arc<OnceCell<StringVectors>>>>,
    calls: AtomicUsize,
}

impl std::fmt::Debug for EmbeddingService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingService")
            .field("model_id", &self.embedder.model_id())
            .field("calls", &self.calls.load(Ordering::Relaxed))
            .finish()
    }
}

impl EmbeddingService {
    pub fn new(embedder: Arc<dyn Embedder>, store: Arc<Store>) -> Self {
        EmbeddingService {
            embedder,
            store,
            in_flight: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn model_id(&self) -> &str {
        self.embedder.model_id()
    }

    pub fn dimension(&self) -> usize {
        self.embedder.dimension()
    }

    /// Number of times the underlying embedder has been invoked.
    pub fn embedder_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn cached(&self, text: &str) -> Option<StringVectors> {
        self.store.string_vectors(self.model_id(), text)
    }

    /// CLS, mean-pooled and max-pooled vectors for `text`, computed on the
    /// first request and served from the store afterwards.
    pub fn embed_string(&self, text: &str) -> Result<StringVectors, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        if let Some(v) = self.cached(text) {
            return Ok(v);
        }
        let cell = self
            .in_flight
            .lock()
            .entry(text.to_string())
            .or_insert_with(|| Arc::new(OnceCell::new()))
            .clone();
        let result = cell
            .get_or_try_init(|| {
                // Another caller may have finished between the cache check
                // and taking the cell.
                if let Some(v) = self.cached(text) {
                    return Ok(v);
                }
                self.calls.fetch_add(1, Ordering::SeqCst);
                let v = self.embedder.embed(text)?;
                v.validate(self.dimension())?;
                Ok(self.store.put_string_vectors(self.model_id(), text, v))
            })
            .cloned();
        let mut in_flight = self.in_flight.lock();
        if in_flight.get(text).is_some_and(|c| Arc::ptr_eq(c, &cell)) {
            in_flight.remove(text);
        }
        result
    }

    /// Embeds every text, spreading the work over `workers` threads.
    /// Returns the first error encountered, if any.
    pub fn embed_all(&self, texts: &[String], workers: usize) -> Result<(), EmbedError> {
        let workers = workers.max(1).min(texts.len().max(1));
        if workers == 1 {
            return texts.iter().try_for_each(|t| self.embed_string(t).map(|_| ()));
        }
        let next = AtomicUsize::new(0);
        let first_err: Mutex<Option<EmbedError>> = Mutex::new(None);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(t) = texts.get(i) else { break };
                    if let Err(e) = self.embed_string(t) {
                        first_err.lock().get_or_insert(e);
                        break;
                    }
                });
            }
        });
        match first_err.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn string_vector(&self, text: &str, kind: VectorKind) -> Result<EmbeddingVector, EmbedError> {
        let v = self.embed_string(text)?;
        v.to_embedding(kind, text, self.model_id())
            .ok_or_else(|| EmbedError::DependencyMissing(format!("{} is not a per-string vector kind", kind.as_str())))
    }

    /// Mean of the CLS vectors of every string of a code, stored once per
    /// (code, model). Every string must already have its vectors.
    pub fn code_summary_vector(&self, terminology_id: &TerminologyId, code_id: &str) -> Result<EmbeddingVector, EmbedError> {
        if let Some(v) = self.store.code_summary(self.model_id(), terminology_id, code_id) {
            return Ok(v);
        }
        let code = self
            .store
            .code(terminology_id, code_id)
            .map_err(|e| EmbedError::DependencyMissing(e.to_string()))?;
        let mut cls = Vec::with_capacity(code.strings.len());
        for s in &code.strings {
            let v = self.cached(&s.text).ok_or_else(|| {
                EmbedError::DependencyMissing(format!("no CLS vector for string '{}' of code {code_id}", s.text))
            })?;
            cls.push(v.cls);
        }
        let slices: Vec<&[f64]> = cls.iter().map(Vec::as_slice).collect();
        let summary = EmbeddingVector {
            values: pool_slices(&slices, PoolMode::Mean),
            model_id: self.model_id().to_string(),
            kind: VectorKind::Summary,
            owner: VectorOwner::Code {
                terminology_id: terminology_id.to_string(),
                code_id: code_id.to_string(),
            },
        };
        Ok(self.store.put_code_summary(terminology_id, code_id, summary))
    }

    /// Mean of the CLS vectors of `texts`, which are embedded on demand.
    pub fn summary_of(&self, texts: &[String], owner: VectorOwner) -> Result<EmbeddingVector, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::NothingToPool);
        }
        let cls: Vec<Vec<f64>> = texts
            .iter()
            .map(|t| self.embed_string(t).map(|v| v.cls))
            .collect::<Result<_, _>>()?;
        let slices: Vec<&[f64]> = cls.iter().map(Vec::as_slice).collect();
        Ok(EmbeddingVector {
            values: pool_slices(&slices, PoolMode::Mean),
            model_id: self.model_id().to_string(),
            kind: VectorKind::Summary,
            owner,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::FixtureEmbedder;
    use crate::store::ImportRow;

    struct Counting {
        inner: FixtureEmbedder,
        calls: AtomicUsize,
        bad_length: bool,
    }

    impl Embedder for Counting {
        fn model_id(&self) -> &str {
            self.inner.model_id()
        }
        fn dimension(&self) -> usize {
            self.inner.dimension()
        }
        fn embed(&self, text: &str) -> Result<StringVectors, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(2));
            let mut v = self.inner.embed(text)?;
            if self.bad_length {
                v.cls.pop();
            }
            Ok(v)
        }
    }

    fn service(bad_length: bool) -> (Arc<Counting>, EmbeddingService, Arc<Store>) {
        let emb = Arc::new(Counting {
            inner: FixtureEmbedder::hashing("fixture", 8),
            calls: AtomicUsize::new(0),
            bad_length,
        });
        let store = Arc::new(Store::in_memory());
        let svc = EmbeddingService::new(emb.clone(), store.clone());
        (emb, svc, store)
    }

    #[test]
    fn second_embed_hits_cache() {
        let (emb, svc, _) = service(false);
        let a = svc.embed_string("x").unwrap();
        let b = svc.embed_string("x").unwrap();
        assert_eq!(a, b);
        assert_eq!(emb.calls.load(Ordering::SeqCst), 1);
        assert_eq!(svc.embedder_calls(), 1);
        assert_eq!(a.cls.len(), 8);
    }

    #[test]
    fn wrong_length_is_rejected_and_not_cached() {
        let (_, svc, store) = service(true);
        assert_eq!(
            svc.embed_string("x"),
            Err(EmbedError::Dimension { expected: 8, got: 7 })
        );
        assert!(store.string_vectors("fixture", "x").is_none());
    }

    #[test]
    fn concurrent_requests_embed_once() {
        let (emb, svc, _) = service(false);
        let texts: Vec<String> = (0..64).map(|i| format!("t{}", i % 4)).collect();
        svc.embed_all(&texts, 8).unwrap();
        assert_eq!(emb.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn code_summary_is_mean_of_cls() {
        let (_, svc, store) = service(false);
        let term = store
            .import_terminology(
                "t",
                vec![Ok(ImportRow::new("C1", "a", 0)), Ok(ImportRow::new("C1", "b", 1))],
            )
            .unwrap()
            .terminology;
        assert!(matches!(
            svc.code_summary_vector(&term.id, "C1"),
            Err(EmbedError::DependencyMissing(_))
        ));
        let a = svc.embed_string("a").unwrap().cls;
        let b = svc.embed_string("b").unwrap().cls;
        let s = svc.code_summary_vector(&term.id, "C1").unwrap();
        for i in 0..8 {
            assert!((s.values[i] - (a[i] + b[i]) / 2.0).abs() < 1e-9);
        }
        assert_eq!(s.kind, VectorKind::Summary);
    }
}

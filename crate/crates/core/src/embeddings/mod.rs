//! Embedding vectors, pooling and cosine geometry.
//!
//! Every string gets three vectors from the embedder (CLS, mean-pooled and
//! max-pooled token vectors). Summary vectors pool CLS vectors across a set
//! of strings: all strings of a code, or all expansion strings of a source
//! string. Vectors are kept as produced; cosine distance divides by the
//! norms itself.

mod fixture;
mod service;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{FixtureEmbedder, FixtureFormatError};
pub use service::EmbeddingService;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VectorKind {
    Cls,
    MeanPooled,
    MaxPooled,
    Summary,
}

impl VectorKind {
    pub const STRING_KINDS: [VectorKind; 3] =
        [VectorKind::Cls, VectorKind::MeanPooled, VectorKind::MaxPooled];

    pub fn as_str(self) -> &'static str {
        match self {
            VectorKind::Cls => "CLS",
            VectorKind::MeanPooled => "MEAN_POOLED",
            VectorKind::MaxPooled => "MAX_POOLED",
            VectorKind::Summary => "SUMMARY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CLS" => Some(VectorKind::Cls),
            "MEAN_POOLED" | "MEAN" => Some(VectorKind::MeanPooled),
            "MAX_POOLED" | "MAX" => Some(VectorKind::MaxPooled),
            "SUMMARY" => Some(VectorKind::Summary),
            _ => None,
        }
    }
}

/// What a vector was computed for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorOwner {
    Text(String),
    Code {
        terminology_id: String,
        code_id: String,
    },
    Expansion {
        source_text: String,
        style: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
    pub kind: VectorKind,
    pub owner: VectorOwner,
}

/// The three per-string vectors an embedder produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringVectors {
    pub cls: Vec<f64>,
    pub mean_pooled: Vec<f64>,
    pub max_pooled: Vec<f64>,
}

impl StringVectors {
    pub fn get(&self, kind: VectorKind) -> Option<&[f64]> {
        match kind {
            VectorKind::Cls => Some(&self.cls),
            VectorKind::MeanPooled => Some(&self.mean_pooled),
            VectorKind::MaxPooled => Some(&self.max_pooled),
            VectorKind::Summary => None,
        }
    }

    pub fn to_embedding(&self, kind: VectorKind, text: &str, model_id: &str) -> Option<EmbeddingVector> {
        self.get(kind).map(|v| EmbeddingVector {
            values: v.to_vec(),
            model_id: model_id.to_string(),
            kind,
            owner: VectorOwner::Text(text.to_string()),
        })
    }

    pub(crate) fn validate(&self, dimension: usize) -> Result<(), EmbedError> {
        for v in [&self.cls, &self.mean_pooled, &self.max_pooled] {
            if v.len() != dimension {
                return Err(EmbedError::Dimension {
                    expected: dimension,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("embedder failed: {message}")]
    Embedder { message: String, retryable: bool },
    #[error("embedder returned a vector of length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedder returned a non-finite component")]
    NonFinite,
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("vectors differ in model or dimension")]
    MixedVectors,
    #[error("cannot pool an empty vector list")]
    NothingToPool,
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,
    #[error("missing dependency: {0}")]
    DependencyMissing(String),
}

impl EmbedError {
    pub fn kind(&self) -> &'static str {
        match self {
            EmbedError::Embedder { .. } | EmbedError::Dimension { .. } | EmbedError::NonFinite => "EmbedError",
            EmbedError::EmptyText => "EmptyText",
            EmbedError::MixedVectors => "MixedVectors",
            EmbedError::NothingToPool => "NothingToPool",
            EmbedError::ZeroVector => "ZeroVector",
            EmbedError::DependencyMissing(_) => "DependencyMissing",
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Embedder { retryable: true, .. })
    }
}

/// Plugin contract for embedding models. Implementations must be
/// deterministic: the same text always yields the same vectors.
pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<StringVectors, EmbedError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Mean,
    Max,
}

/// Component-wise mean or max of `vectors`, tagged as a summary vector.
pub fn pool_vectors(
    vectors: &[EmbeddingVector],
    mode: PoolMode,
    owner: VectorOwner,
) -> Result<EmbeddingVector, EmbedError> {
    let first = vectors.first().ok_or(EmbedError::NothingToPool)?;
    if vectors
        .iter()
        .any(|v| v.model_id != first.model_id || v.values.len() != first.values.len())
    {
        return Err(EmbedError::MixedVectors);
    }
    let slices: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    Ok(EmbeddingVector {
        values: pool_slices(&slices, mode),
        model_id: first.model_id.clone(),
        kind: VectorKind::Summary,
        owner,
    })
}

/// Pooling over raw slices; callers guarantee equal, non-zero lengths.
pub(crate) fn pool_slices(vectors: &[&[f64]], mode: PoolMode) -> Vec<f64> {
    let d = vectors[0].len();
    match mode {
        PoolMode::Mean => {
            let mut acc = vec![0.0; d];
            for v in vectors {
                for (a, x) in acc.iter_mut().zip(v.iter()) {
                    *a += x;
                }
            }
            let n = vectors.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
        PoolMode::Max => {
            let mut acc = vec![f64::NEG_INFINITY; d];
            for v in vectors {
                for (a, x) in acc.iter_mut().zip(v.iter()) {
                    *a = a.max(*x);
                }
            }
            acc
        }
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// `1 - u·v / (|u||v|)`, with the cosine clamped to [-1, 1] so rounding
/// cannot push the result outside [0, 2].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::MixedVectors);
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(cosine_distance_with_norms(u, nu, v, nv))
}

#[inline]
pub(crate) fn cosine_distance_with_norms(u: &[f64], nu: f64, v: &[f64], nv: f64) -> f64 {
    let cos = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    1.0 - cos
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector {
            values: values.to_vec(),
            model_id: "m".into(),
            kind: VectorKind::Cls,
            owner: VectorOwner::Text("t".into()),
        }
    }

    fn owner() -> VectorOwner {
        VectorOwner::Text("pool".into())
    }

    #[test]
    fn mean_and_max_pooling() {
        let vs = [ev(&[0.0, 2.0]), ev(&[2.0, 0.0])];
        let mean = pool_vectors(&vs, PoolMode::Mean, owner()).unwrap();
        assert_eq!(mean.values, vec![1.0, 1.0]);
        assert_eq!(mean.kind, VectorKind::Summary);
        let max = pool_vectors(&vs, PoolMode::Max, owner()).unwrap();
        assert_eq!(max.values, vec![2.0, 2.0]);
    }

    #[test]
    fn mean_of_single_vector_is_identity() {
        let v = ev(&[0.3, -1.7, 4.0]);
        let p = pool_vectors(std::slice::from_ref(&v), PoolMode::Mean, owner()).unwrap();
        assert_eq!(p.values, v.values);
    }

    #[test]
    fn pooling_rejects_mixed_inputs() {
        let mut other = ev(&[1.0, 1.0]);
        other.model_id = "other".into();
        assert_eq!(
            pool_vectors(&[ev(&[1.0, 0.0]), other], PoolMode::Mean, owner()),
            Err(EmbedError::MixedVectors)
        );
        assert_eq!(
            pool_vectors(&[ev(&[1.0, 0.0]), ev(&[1.0])], PoolMode::Max, owner()),
            Err(EmbedError::MixedVectors)
        );
        assert_eq!(pool_vectors(&[], PoolMode::Mean, owner()), Err(EmbedError::NothingToPool));
    }

    #[test]
    fn cosine_reference_points() {
        let v = [0.2, -3.0, 1.5];
        assert!(cosine_distance(&v, &v).unwrap().abs() < 1e-9);
        assert!((cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 2.0).abs() < 1e-9);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbedError::ZeroVector));
        assert_eq!(cosine_distance(&[1.0], &[1.0, 0.0]), Err(EmbedError::MixedVectors));
    }

    fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, d).prop_filter("nonzero", |v| norm(v) > 1e-6)
    }

    proptest! {
        #[test]
        fn cosine_is_bounded_symmetric_and_scale_invariant(
            (u, v) in (1usize..12).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d))),
            alpha in 1e-3f64..1e3,
        ) {
            let d = cosine_distance(&u, &v).unwrap();
            prop_assert!((0.0..=2.0 + 1e-9).contains(&d));
            prop_assert!((d - cosine_distance(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((d - cosine_distance(&scaled, &v).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn mean_of_copies_is_the_vector(v in prop::collection::vec(-1e3f64..1e3, 1..16), n in 1usize..20) {
            let copies = vec![ev(&v); n];
            let p = pool_vectors(&copies, PoolMode::Mean, owner()).unwrap();
            for (a, b) in p.values.iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}

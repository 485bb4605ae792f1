//! Deterministic offline embedder.
//!
//! Vectors come from a lookup file when the text is listed there. Anything
//! else falls back to seeded hashing: every lower-cased word is hashed to a
//! pseudo-random vector in [-1, 1]^d, the mean/max pooled vectors pool the
//! word vectors, and the CLS vector is the unit-normalized mean plus a
//! smaller whole-phrase component. Phrases that share words therefore land
//! close together, phrases with different wording do not.
//!
//! Lookup file format, one record per line, tab separated:
//!
//! ```text
//! text <TAB> model_id <TAB> kind <TAB> c1,c2,...,cd
//! ```
//!
//! `kind` is one of `CLS`, `MEAN_POOLED`, `MAX_POOLED`. Records for other
//! model ids are ignored. Blank lines and lines starting with `#` are skipped.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{norm, pool_slices, EmbedError, Embedder, PoolMode, StringVectors, VectorKind};

const PHRASE_WEIGHT: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("fixture embedder file, line {line}: {message}")]
pub struct FixtureFormatError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
struct Listed {
    cls: Option<Vec<f64>>,
    mean_pooled: Option<Vec<f64>>,
    max_pooled: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FixtureEmbedder {
    model_id: String,
    dimension: usize,
    listed: HashMap<String, Listed>,
}

impl FixtureEmbedder {
    /// Pure hashing embedder with no lookup table.
    pub fn hashing(model_id: impl Into<String>, dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        FixtureEmbedder {
            model_id: model_id.into(),
            dimension,
            listed: HashMap::new(),
        }
    }

    pub fn from_file(path: &Path, model_id: impl Into<String>, dimension: usize) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, model_id, dimension).map_err(|e| {
            crate::Error::Embed(EmbedError::Embedder {
                message: e.to_string(),
                retryable: false,
            })
        })
    }

    pub fn parse(text: &str, model_id: impl Into<String>, dimension: usize) -> Result<Self, FixtureFormatError> {
        let mut emb = Self::hashing(model_id, dimension);
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FixtureFormatError { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            if fields[1] != emb.model_id {
                continue;
            }
            let kind = VectorKind::parse(fields[2])
                .filter(|k| *k != VectorKind::Summary)
                .ok_or_else(|| err(format!("unknown vector kind '{}'", fields[2])))?;
            let values: Vec<f64> = fields[3]
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| err(format!("bad component: {e}")))?;
            if values.len() != dimension {
                return Err(err(format!("expected {dimension} components, found {}", values.len())));
            }
            let entry = emb.listed.entry(fields[0].to_string()).or_default();
            let slot = match kind {
                VectorKind::Cls => &mut entry.cls,
                VectorKind::MeanPooled => &mut entry.mean_pooled,
                _ => &mut entry.max_pooled,
            };
            *slot = Some(values);
        }
        Ok(emb)
    }

    fn hashed(&self, salt: &str, token: &str) -> Vec<f64> {
        let mut h = Sha256::new();
        h.update(self.model_id.as_bytes());
        h.update([0u8]);
        h.update(salt.as_bytes());
        h.update([0u8]);
        h.update(token.as_bytes());
        let seed: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        (0..self.dimension).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn hash_embed(&self, text: &str) -> StringVectors {
        let lowered = text.to_lowercase();
        let mut tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            tokens.push(lowered.trim());
        }
        let token_vecs: Vec<Vec<f64>> = tokens.iter().map(|t| self.hashed("token", t)).collect();
        let slices: Vec<&[f64]> = token_vecs.iter().map(Vec::as_slice).collect();
        let mean_pooled = pool_slices(&slices, PoolMode::Mean);
        let max_pooled = pool_slices(&slices, PoolMode::Max);
        let phrase = self.hashed("phrase", &tokens.join(" "));
        let n = norm(&mean_pooled).max(f64::MIN_POSITIVE);
        let pn = norm(&phrase).max(f64::MIN_POSITIVE);
        let cls = mean_pooled
            .iter()
            .zip(&phrase)
            .map(|(m, p)| m / n + PHRASE_WEIGHT * p / pn)
            .collect();
        StringVectors {
            cls,
            mean_pooled,
            max_pooled,
        }
    }
}

impl Embedder for FixtureEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<StringVectors, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let hashed = self.hash_embed(text);
        Ok(match self.listed.get(text) {
            None => hashed,
            Some(l) => StringVectors {
                cls: l.cls.clone().unwrap_or(hashed.cls),
                mean_pooled: l.mean_pooled.clone().unwrap_or(hashed.mean_pooled),
                max_pooled: l.max_pooled.clone().unwrap_or(hashed.max_pooled),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine_distance;

    #[test]
    fn hashing_is_deterministic_and_sized() {
        let e = FixtureEmbedder::hashing("m", 8);
        let a = e.embed("heart attack").unwrap();
        let b = e.embed("heart attack").unwrap();
        assert_eq!(a, b);
        a.validate(8).unwrap();
    }

    #[test]
    fn model_id_changes_vectors() {
        let a = FixtureEmbedder::hashing("m1", 8).embed("x").unwrap();
        let b = FixtureEmbedder::hashing("m2", 8).embed("x").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn shared_words_are_closer_than_disjoint_words() {
        let e = FixtureEmbedder::hashing("m", 32);
        let a = e.embed("finger fracture").unwrap();
        let b = e.embed("fracture of finger").unwrap();
        let c = e.embed("congestive heart failure").unwrap();
        let near = cosine_distance(&a.cls, &b.cls).unwrap();
        let far = cosine_distance(&a.cls, &c.cls).unwrap();
        assert!(near < far, "{near} !< {far}");
    }

    #[test]
    fn lookup_file_overrides_listed_kinds_only() {
        let text = "# comment\nbroken finger\tm\tCLS\t1,0,0\nbroken finger\tother\tCLS\t9,9,9\n";
        let e = FixtureEmbedder::parse(text, "m", 3).unwrap();
        let v = e.embed("broken finger").unwrap();
        assert_eq!(v.cls, vec![1.0, 0.0, 0.0]);
        assert_eq!(v.mean_pooled, FixtureEmbedder::hashing("m", 3).embed("broken finger").unwrap().mean_pooled);
    }

    #[test]
    fn malformed_lookup_lines_are_rejected() {
        assert_eq!(FixtureEmbedder::parse("a\tm\tCLS\t1,2", "m", 3).unwrap_err().line, 1);
        assert!(FixtureEmbedder::parse("a\tm\tWHAT\t1,2,3", "m", 3).is_err());
        assert!(FixtureEmbedder::parse("a\tm\tCLS", "m", 3).is_err());
        assert!(FixtureEmbedder::parse("a\tm\tCLS\t1,x,3", "m", 3).is_err());
    }

    #[test]
    fn punctuation_only_text_still_embeds() {
        let v = FixtureEmbedder::hashing("m", 4).embed("!!!").unwrap();
        assert!(norm(&v.cls) > 0.0);
    }
}

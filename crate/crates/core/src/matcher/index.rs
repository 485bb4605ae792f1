use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_distance_with_norms, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCode {
    pub code_id: String,
    pub distance: f64,
}

/// The vector set V_c of one code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeVectors {
    pub code_id: String,
    pub vectors: Vec<Vec<f64>>,
}

/// Nearest-code search. `ExactIndex` is the only implementation; an
/// approximate backend would implement the same contract.
pub trait CodeIndex: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Codes with d(x, c) < z, ascending by distance then code id, at most
    /// `n` of them. Also returns how many pairwise distances were computed.
    fn search(&self, query: &[Vec<f64>], z: f64, n: usize) -> (Vec<RankedCode>, usize);
}

struct Entry {
    code_id: String,
    vectors: Vec<(Vec<f64>, f64)>,
}

/// Exhaustive search over every pair in V_x × V_c. Zero vectors are
/// dropped since cosine distance is undefined for them.
pub struct ExactIndex {
    entries: Vec<Entry>,
}

impl ExactIndex {
    pub fn new(codes: Vec<CodeVectors>) -> Self {
        let mut entries: Vec<Entry> = codes
            .into_iter()
            .map(|c| Entry {
                code_id: c.code_id,
                vectors: c
                    .vectors
                    .into_iter()
                    .filter_map(|v| {
                        let n = norm(&v);
                        (n > 0.0 && n.is_finite()).then_some((v, n))
                    })
                    .collect(),
            })
            .filter(|e| !e.vectors.is_empty())
            .collect();
        entries.sort_by(|a, b| a.code_id.cmp(&b.code_id));
        ExactIndex { entries }
    }
}

pub(crate) fn rank_order(a: &RankedCode, b: &RankedCode) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.code_id.cmp(&b.code_id))
}

impl CodeIndex for ExactIndex {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn search(&self, query: &[Vec<f64>], z: f64, n: usize) -> (Vec<RankedCode>, usize) {
        let query: Vec<(&[f64], f64)> = query
            .iter()
            .map(|v| (v.as_slice(), norm(v)))
            .filter(|(_, n)| *n > 0.0 && n.is_finite())
            .collect();
        let mut computed = 0;
        let mut hits = Vec::new();
        for e in &self.entries {
            let mut best = f64::INFINITY;
            for (u, nu) in &query {
                for (v, nv) in &e.vectors {
                    if u.len() != v.len() {
                        continue;
                    }
                    computed += 1;
                    best = best.min(cosine_distance_with_norms(u, *nu, v, *nv));
                }
            }
            if best < z {
                hits.push(RankedCode {
                    code_id: e.code_id.clone(),
                    distance: best,
                });
            }
        }
        hits.sort_by(rank_order);
        hits.truncate(n);
        (hits, computed)
    }
}

//! Browser demo over `lexigraph-core`. Each export takes and returns JSON
//! text so the page stays framework free; the same functions run natively
//! in tests.

use lexigraph_core::embeddings::{cosine_distance, norm};
use lexigraph_core::llm::{BudgetDecision, CostLedger, TokenUsage};
use lexigraph_core::matcher::{CodeIndex, CodeVectors, ExactIndex};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("could not read '{0}' as a number")]
    Number(String),
    #[error("invalid request: {0}")]
    Request(#[from] serde_json::Error),
    #[error("{0}")]
    Input(String),
}

impl DemoError {
    fn kind(&self) -> &'static str {
        match self {
            DemoError::Number(_) => "ParseError",
            DemoError::Request(_) => "BadRequest",
            DemoError::Input(_) => "InvalidInput",
        }
    }
}

fn respond<T: Serialize>(r: Result<T, DemoError>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("serializable"),
        Err(e) => json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string(),
    }
}

/// Numbers separated by commas and/or whitespace.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, DemoError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| DemoError::Number(t.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineReport {
    pub distance: f64,
    pub similarity: f64,
    pub angle_degrees: f64,
    pub norm_u: f64,
    pub norm_v: f64,
}

pub fn cosine_report(u: &str, v: &str) -> Result<CosineReport, DemoError> {
    let (u, v) = (parse_vector(u)?, parse_vector(v)?);
    let distance = cosine_distance(&u, &v).map_err(|e| DemoError::Input(e.to_string()))?;
    let similarity = 1.0 - distance;
    Ok(CosineReport {
        distance,
        similarity,
        angle_degrees: similarity.clamp(-1.0, 1.0).acos().to_degrees(),
        norm_u: norm(&u),
        norm_v: norm(&v),
    })
}

/// Cosine distance between two vectors typed as text.
#[wasm_bindgen]
pub fn cosine(u: &str, v: &str) -> String {
    respond(cosine_report(u, v))
}

#[derive(Debug, Clone, Deserialize)]
pub struct DemoCode {
    pub code_id: String,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MatchRequest {
    pub codes: Vec<DemoCode>,
    pub query: Vec<Vec<f64>>,
    pub z: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub code_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    /// Returned codes, nearest first.
    pub ranked: Vec<Scored>,
    pub best: Option<String>,
    /// Codes inside the threshold that the top-n cut dropped.
    pub cut_by_n: Vec<Scored>,
    /// Codes at or beyond the threshold.
    pub beyond_z: Vec<Scored>,
    pub distances_computed: usize,
}

pub fn match_report(req: &MatchRequest) -> Result<MatchReport, DemoError> {
    if !(req.z > 0.0 && req.z <= 2.0) {
        return Err(DemoError::Input(format!("z must be in (0, 2], got {}", req.z)));
    }
    if req.n == 0 {
        return Err(DemoError::Input("n must be at least 1".into()));
    }
    if req.query.is_empty() {
        return Err(DemoError::Input("the query needs at least one vector".into()));
    }
    let index = ExactIndex::new(
        req.codes
            .iter()
            .map(|c| CodeVectors {
                code_id: c.code_id.clone(),
                vectors: c.vectors.clone(),
            })
            .collect(),
    );
    let (ranked, computed) = index.search(&req.query, req.z, req.n);
    let (all, _) = index.search(&req.query, f64::INFINITY, usize::MAX);
    let scored = |r: &lexigraph_core::matcher::RankedCode| Scored {
        code_id: r.code_id.clone(),
        distance: r.distance,
    };
    let kept: Vec<&str> = ranked.iter().map(|r| r.code_id.as_str()).collect();
    let (inside, beyond): (Vec<_>, Vec<_>) = all.iter().partition(|r| r.distance < req.z);
    Ok(MatchReport {
        best: ranked.first().map(|r| r.code_id.clone()),
        cut_by_n: inside
            .into_iter()
            .filter(|r| !kept.contains(&r.code_id.as_str()))
            .map(scored)
            .collect(),
        beyond_z: beyond.into_iter().map(scored).collect(),
        ranked: ranked.iter().map(scored).collect(),
        distances_computed: computed,
    })
}

/// Ranks codes against a query vector set; see [`MatchRequest`].
#[wasm_bindgen]
pub fn match_codes(request: &str) -> String {
    respond(
        serde_json::from_str::<MatchRequest>(request)
            .map_err(DemoError::from)
            .and_then(|r| match_report(&r)),
    )
}

#[derive(Debug, Clone, Deserialize)]
pub struct BudgetRequest {
    #[serde(with = "rust_decimal::serde::str")]
    pub price_per_prompt_token: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub price_per_completion_token: Decimal,
    #[serde(default, with = "rust_decimal::serde::str_option")]
    pub dollar_limit: Option<Decimal>,
    /// (prompt tokens, completion tokens) per planned call, in order.
    pub calls: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetStep {
    pub call: usize,
    #[serde(with = "rust_decimal::serde::str")]
    pub cost: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub accumulated: Decimal,
    pub killed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub steps: Vec<BudgetStep>,
    pub dispatched: usize,
    pub skipped: usize,
    /// 1-based index of the call whose response crossed the limit.
    pub killed_at: Option<usize>,
    #[serde(with = "rust_decimal::serde::str")]
    pub total: Decimal,
}

/// Replays planned calls through a cost ledger. Once the ledger kills the
/// run nothing further is dispatched.
pub fn simulate(req: &BudgetRequest) -> Result<BudgetReport, DemoError> {
    let mut ledger = CostLedger::new(req.price_per_prompt_token, req.price_per_completion_token, req.dollar_limit);
    let mut steps = Vec::new();
    let mut killed_at = None;
    for (i, (p, c)) in req.calls.iter().enumerate() {
        if ledger.killed {
            break;
        }
        let before = ledger.accumulated_cost;
        let decision = ledger
            .record(TokenUsage::new(*p, *c))
            .map_err(|e| DemoError::Input(format!("call {}: {e}", i + 1)))?;
        let killed = decision == BudgetDecision::Kill;
        if killed {
            killed_at = Some(i + 1);
        }
        steps.push(BudgetStep {
            call: i + 1,
            cost: ledger.accumulated_cost - before,
            accumulated: ledger.accumulated_cost,
            killed,
        });
    }
    Ok(BudgetReport {
        dispatched: steps.len(),
        skipped: req.calls.len() - steps.len(),
        killed_at,
        total: ledger.accumulated_cost,
        steps,
    })
}

/// Budget simulation; see [`BudgetRequest`].
#[wasm_bindgen]
pub fn simulate_budget(request: &str) -> String {
    respond(
        serde_json::from_str::<BudgetRequest>(request)
            .map_err(DemoError::from)
            .and_then(|r| simulate(&r)),
    )
}

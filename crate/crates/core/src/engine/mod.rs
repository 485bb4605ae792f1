//! Run orchestration: prompting every concept of a code set, reducing
//! repeated samples, enforcing beceptivity and writing triples.

mod finalize;
mod hierarchy;
mod inflight;
mod prompts;
mod run;

use std::collections::BTreeSet;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{CostLedger, PromptTemplate, ResponseElement, ResponseSchema, ValueKind};
use crate::store::{Finalization, RunId, RunStatus};

pub use finalize::{finalize_boolean, finalize_categorical_vote, finalize_numeric, NumericMode};
pub use hierarchy::BeceptivityHierarchy;
pub use prompts::{default_style_instruction, expansion_prompt, refinement_prompt, requery_prompt};
pub use run::{Engine, RunProgress};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid relationship spec: {0}")]
    InvalidSpec(String),
    #[error("aggregation failed: {0}")]
    Aggregation(String),
    #[error("could not assess beceptivity of '{text}': {message}")]
    Assessment { text: String, message: String },
    #[error("could not expand '{text}' in style '{style}': {message}")]
    Expansion { text: String, style: String, message: String },
    #[error("invalid hierarchy: {0}")]
    Hierarchy(String),
}

impl EngineError {
    pub fn kind(&self) -> &'static str {
        match self {
            EngineError::InvalidSpec(_) => "InvalidSpec",
            EngineError::Aggregation(_) => "AggregationError",
            EngineError::Assessment { .. } => "AssessmentError",
            EngineError::Expansion { .. } => "ExpansionError",
            EngineError::Hierarchy(_) => "HierarchyError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalizeMode {
    Vote,
    Average,
    Sum,
    BooleanVote,
    #[default]
    None,
}

/// Repeated independent samples of the same prompt, reduced by `mode`.
/// `repeats` counts every sample including the first and is ignored when
/// the mode is `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreYouSureConfig {
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub mode: FinalizeMode,
}

fn default_repeats() -> u32 {
    3
}

impl Default for AreYouSureConfig {
    fn default() -> Self {
        AreYouSureConfig {
            repeats: default_repeats(),
            mode: FinalizeMode::None,
        }
    }
}

impl AreYouSureConfig {
    pub fn samples(&self) -> u32 {
        match self.mode {
            FinalizeMode::None => 1,
            _ => self.repeats,
        }
    }

    pub fn finalization(&self) -> Finalization {
        match self.mode {
            FinalizeMode::None => Finalization::Single,
            FinalizeMode::Vote => Finalization::Vote,
            FinalizeMode::Average => Finalization::Average,
            FinalizeMode::Sum => Finalization::Sum,
            FinalizeMode::BooleanVote => Finalization::BooleanVote,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeceptivityMethod {
    Inline,
    Requery,
    DbLookup,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeceptivityConfig {
    #[serde(default)]
    pub method: BeceptivityMethod,
    #[serde(default = "default_min")]
    pub min_required: f64,
    #[serde(default = "default_scale_max")]
    pub scale_max: f64,
    #[serde(default = "default_depth")]
    pub max_refinement_depth: u32,
}

fn default_min() -> f64 {
    6.0
}

fn default_scale_max() -> f64 {
    10.0
}

fn default_depth() -> u32 {
    2
}

impl Default for BeceptivityConfig {
    fn default() -> Self {
        BeceptivityConfig {
            method: BeceptivityMethod::None,
            min_required: default_min(),
            scale_max: default_scale_max(),
            max_refinement_depth: default_depth(),
        }
    }
}

impl BeceptivityConfig {
    pub fn enabled(&self) -> bool {
        self.method != BeceptivityMethod::None
    }
}

/// One relationship to populate, e.g. `has_complication_of`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipSpec {
    /// Defaults to the predicate.
    #[serde(default)]
    pub id: Option<String>,
    pub predicate: String,
    pub template: PromptTemplate,
    pub schema: ResponseSchema,
    #[serde(default)]
    pub are_you_sure: AreYouSureConfig,
    #[serde(default)]
    pub beceptivity: BeceptivityConfig,
    #[serde(default)]
    pub object_expansion_styles: Vec<String>,
}

impl RelationshipSpec {
    pub fn id(&self) -> &str {
        self.id.as_deref().unwrap_or(&self.predicate)
    }

    /// The single element whose values become triple objects.
    pub fn answer(&self) -> &ResponseElement {
        self.schema
            .elements()
            .iter()
            .find(|e| !e.no_write)
            .expect("validated spec has an answer element")
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidSpec(format!("{}: {m}", self.id())));
        if self.predicate.trim().is_empty() {
            return bad("predicate is empty".into());
        }
        let answers: Vec<&ResponseElement> = self.schema.elements().iter().filter(|e| !e.no_write).collect();
        if answers.len() != 1 {
            return bad(format!("expected exactly one persistable element, found {}", answers.len()));
        }
        let a = answers[0];
        let ays = &self.are_you_sure;
        if ays.mode != FinalizeMode::None {
            if ays.repeats == 0 {
                return bad("are_you_sure.repeats must be at least 1".into());
            }
            if a.multi_response {
                return bad("are-you-sure finalization needs a single-valued answer element".into());
            }
            let ok = match ays.mode {
                FinalizeMode::Vote => matches!(a.value_kind, ValueKind::Categorical | ValueKind::BooleanLike),
                FinalizeMode::BooleanVote => a.value_kind == ValueKind::BooleanLike,
                FinalizeMode::Average | FinalizeMode::Sum => a.value_kind == ValueKind::Numeric,
                FinalizeMode::None => true,
            };
            if !ok {
                return bad(format!("finalization {:?} does not fit a {:?} element", ays.mode, a.value_kind));
            }
        }
        let b = &self.beceptivity;
        if b.enabled() {
            if a.value_kind != ValueKind::FreeText {
                return bad("beceptivity applies to free-text answers only".into());
            }
            if !(b.scale_max.is_finite() && b.scale_max > 0.0) {
                return bad("beceptivity.scale_max must be positive".into());
            }
            if !(b.min_required.is_finite() && b.min_required >= 0.0) {
                return bad("beceptivity.min_required must be at least 0".into());
            }
            if b.max_refinement_depth == 0 {
                return bad("beceptivity.max_refinement_depth must be at least 1".into());
            }
            if b.method == BeceptivityMethod::Inline && !a.beceptivity_requested {
                return bad("inline beceptivity needs beceptivity_requested on the answer element".into());
            }
            if b.method == BeceptivityMethod::Inline && self.schema.beceptivity_scale_max() != b.scale_max {
                return bad("inline beceptivity scale must match the schema's scale".into());
            }
        }
        if self.object_expansion_styles.iter().any(|s| s.trim().is_empty()) {
            return bad("expansion style names must not be empty".into());
        }
        if !self.object_expansion_styles.is_empty() && a.value_kind != ValueKind::FreeText {
            return bad("expansion strings apply to free-text answers only".into());
        }
        Ok(())
    }
}

/// Specs answered from one prompt. All members share the template; their
/// schemas are merged into one response.
#[derive(Debug, Clone)]
pub(crate) struct PromptGroup {
    pub specs: Vec<RelationshipSpec>,
    pub template: PromptTemplate,
    pub schema: ResponseSchema,
    pub samples: u32,
}

pub(crate) fn build_groups(specs: &[RelationshipSpec], grouping: Option<&[Vec<String>]>) -> Result<Vec<PromptGroup>, EngineError> {
    let invalid = |m: String| EngineError::InvalidSpec(m);
    let mut ids = BTreeSet::new();
    for s in specs {
        s.validate()?;
        if !ids.insert(s.id().to_string()) {
            return Err(invalid(format!("duplicate spec id '{}'", s.id())));
        }
    }
    let partition: Vec<Vec<String>> = match grouping {
        Some(g) => g.to_vec(),
        None => specs.iter().map(|s| vec![s.id().to_string()]).collect(),
    };
    let mut seen = BTreeSet::new();
    let mut groups = Vec::new();
    for members in partition {
        if members.is_empty() {
            return Err(invalid("empty group".into()));
        }
        let mut group_specs = Vec::new();
        for id in &members {
            if !seen.insert(id.clone()) {
                return Err(invalid(format!("spec '{id}' appears in two groups")));
            }
            let spec = specs
                .iter()
                .find(|s| s.id() == id)
                .ok_or_else(|| invalid(format!("group names unknown spec '{id}'")))?;
            group_specs.push(spec.clone());
        }
        let template = group_specs[0].template.clone();
        if group_specs.iter().any(|s| s.template != template) {
            return Err(invalid(format!("grouped specs {members:?} must share one template")));
        }
        let mut elements: Vec<ResponseElement> = Vec::new();
        for s in &group_specs {
            for e in s.schema.elements() {
                match elements.iter().find(|x| x.name == e.name) {
                    Some(x) if x == e && e.no_write => {}
                    Some(_) => return Err(invalid(format!("grouped specs both define element '{}'", e.name))),
                    None => elements.push(e.clone()),
                }
            }
        }
        let scale = group_specs[0].schema.beceptivity_scale_max();
        let schema = ResponseSchema::with_scale(elements, scale).map_err(|e| invalid(e.to_string()))?;
        let samples = group_specs.iter().map(|s| s.are_you_sure.samples()).max().unwrap_or(1);
        groups.push(PromptGroup {
            specs: group_specs,
            template,
            schema,
            samples,
        });
    }
    if seen.len() != specs.len() {
        let missing: Vec<&str> = specs.iter().map(|s| s.id()).filter(|id| !seen.contains(*id)).collect();
        return Err(invalid(format!("specs not assigned to a group: {missing:?}")));
    }
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub price_per_prompt_token: Decimal,
    pub price_per_completion_token: Decimal,
    #[serde(default)]
    pub dollar_limit: Option<Decimal>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            price_per_prompt_token: Decimal::ZERO,
            price_per_completion_token: Decimal::ZERO,
            dollar_limit: None,
        }
    }
}

impl BudgetConfig {
    pub fn ledger(&self) -> CostLedger {
        CostLedger::new(self.price_per_prompt_token, self.price_per_completion_token, self.dollar_limit)
    }
}

/// Declarative run description, loaded from a JSON or TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Code set id or name.
    pub code_set: String,
    pub relationships: Vec<RelationshipSpec>,
    /// Partition of spec ids into prompt groups; each spec alone by default.
    #[serde(default)]
    pub groups: Option<Vec<Vec<String>>>,
    /// Falls back to the workbench's default budget when unset.
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: RunId,
    pub status: RunStatus,
    pub concepts: usize,
    pub concepts_completed: usize,
    pub triples_written: usize,
    pub items_refined: usize,
    pub items_dropped: usize,
    pub items_failed: usize,
    pub items_killed: usize,
    pub key_unmapped: usize,
    pub parse_errors: usize,
    pub assessment_errors: usize,
    pub expansion_failures: usize,
    pub provider_calls: usize,
    pub ledger: CostLedger,
    /// Human-readable account of the run, one line per event.
    #[serde(skip)]
    pub log: Vec<String>,
}

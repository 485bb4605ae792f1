#![allow(dead_code)]

use std::sync::Arc;

use lexigraph_core::embeddings::FixtureEmbedder;
use lexigraph_core::engine::{BudgetConfig, RelationshipSpec};
use lexigraph_core::llm::{
    render_prompt, Capabilities, PromptTemplate, ReplayProvider, ResponseSchema, TokenUsage, TranscriptRecord,
};
use lexigraph_core::store::{ImportRow, RowRejection, Store};
use lexigraph_core::{Workbench, WorkbenchConfig};

pub const MODEL: &str = "replay-model";

/// Small clinical terminology shared by the engine scenarios.
pub fn clinical_rows() -> Vec<Result<ImportRow, RowRejection>> {
    [
        ("I21", "myocardial infarction", 0),
        ("I21", "heart attack", 1),
        ("I50", "congestive heart failure", 0),
        ("I50", "heart failure", 1),
        ("R57", "cardiogenic shock", 0),
        ("N39", "urinary tract infection", 0),
        ("N39", "UTI", 1),
        ("L08", "staph skin infection", 0),
        ("S62", "fracture of an unspecified upper extremity digit", 0),
        ("J18", "pneumonia", 0),
        ("K35", "acute appendicitis", 0),
    ]
    .into_iter()
    .map(|(c, s, r)| Ok(ImportRow::new(c, s, r)))
    .collect()
}

/// Collects replay records for the prompts a test expects the engine to send.
pub struct Script {
    pub caps: Capabilities,
    pub records: Vec<TranscriptRecord>,
}

impl Script {
    pub fn new(caps: Capabilities) -> Self {
        Script { caps, records: Vec::new() }
    }

    pub fn on(&mut self, prompt: &str, response: &str) -> &mut Self {
        self.on_full(prompt, response, TokenUsage::new(10, 5), 0)
    }

    pub fn on_full(&mut self, prompt: &str, response: &str, usage: TokenUsage, sample: u32) -> &mut Self {
        self.records.push(TranscriptRecord::new(prompt, response, usage, sample));
        self
    }

    /// The main prompt for `spec` and `concept`.
    pub fn on_concept(&mut self, spec: &RelationshipSpec, concept: &str, response: &str) -> &mut Self {
        let prompt = render_prompt(&spec.template, concept, &spec.schema, self.caps);
        self.on(&prompt, response)
    }

    pub fn provider(&self) -> Arc<ReplayProvider> {
        Arc::new(ReplayProvider::new(self.records.clone(), self.caps).expect("valid script"))
    }
}

pub fn config() -> WorkbenchConfig {
    let mut cfg = WorkbenchConfig::default();
    cfg.provider.model = MODEL.into();
    cfg.embedder.dimension = 32;
    cfg.retry = lexigraph_core::llm::RetryPolicy::immediate(1);
    cfg.workers = 1;
    cfg
}

pub fn workbench_with(provider: Arc<ReplayProvider>, cfg: WorkbenchConfig) -> Workbench {
    let embedder = Arc::new(FixtureEmbedder::hashing(cfg.embedder.model_id.clone(), cfg.embedder.dimension));
    let wb = Workbench::from_parts(Arc::new(Store::in_memory()), embedder, provider, cfg).unwrap();
    wb.import_terminology("clinical", clinical_rows()).unwrap();
    wb
}

pub fn workbench(provider: Arc<ReplayProvider>) -> Workbench {
    workbench_with(provider, config())
}

pub fn spec(predicate: &str, template: &str, schema: ResponseSchema) -> RelationshipSpec {
    RelationshipSpec {
        id: None,
        predicate: predicate.into(),
        template: PromptTemplate::new(template).unwrap(),
        schema,
        are_you_sure: Default::default(),
        beceptivity: Default::default(),
        object_expansion_styles: Vec::new(),
    }
}

pub fn unlimited() -> BudgetConfig {
    BudgetConfig::default()
}

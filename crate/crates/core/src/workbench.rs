//! One object wiring store, embeddings, engine and matcher together, with
//! the operations the CLI and HTTP service expose.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingService, Embedder, FixtureEmbedder};
use crate::engine::{BeceptivityHierarchy, BudgetConfig, Engine, RelationshipSpec, RunConfig, RunProgress, RunReport};
use crate::llm::{
    Capabilities, Provider, ProviderError, ProviderResponse, ReplayProvider, RequestOptions, RetryPolicy, SharedLedger,
    TokenUsage, UnknownPromptPolicy,
};
use crate::matcher::{BatchOutcome, MatchParams, MatchQuery, MatchResult, Matcher};
use crate::store::{
    read_columnar, read_delimited, CodeFilter, CodeSet, CustomTable, DelimitedOptions, ImportOutcome, ObjectKind, Run,
    RunId, Store,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub model_id: String,
    pub dimension: usize,
    /// Optional lookup file of precomputed vectors; other texts fall back to
    /// the seeded hashing embedder.
    pub lookup_file: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            model_id: "hashing-embedder".into(),
            dimension: 64,
            lookup_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Transcript to replay. Without one, every request fails.
    pub transcript: Option<PathBuf>,
    pub structured_output: bool,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Reply used for prompts missing from the transcript; unknown prompts
    /// are an error when unset.
    pub fallback_response: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            transcript: None,
            structured_output: false,
            model: "replay".into(),
            temperature: 0.0,
            max_tokens: 1024,
            fallback_response: None,
        }
    }
}

impl ProviderConfig {
    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            structured_output: self.structured_output,
        }
    }

    pub fn request_options(&self) -> RequestOptions {
        RequestOptions {
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            sample: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkbenchConfig {
    /// Snapshot file; in memory when unset.
    pub store_path: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    pub provider: ProviderConfig,
    pub retry: RetryPolicy,
    /// `child<TAB>parent` file for database-lookup beceptivity.
    pub hierarchy: Option<PathBuf>,
    /// Expansion style name → instruction override.
    pub styles: BTreeMap<String, String>,
    pub workers: usize,
    /// Budget for runs that do not set their own, and for expansion strings
    /// generated while creating a code set.
    pub budget: BudgetConfig,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        WorkbenchConfig {
            store_path: None,
            embedder: EmbedderConfig::default(),
            provider: ProviderConfig::default(),
            retry: RetryPolicy::default(),
            hierarchy: None,
            styles: BTreeMap::new(),
            workers: 4,
            budget: BudgetConfig::default(),
        }
    }
}

/// Stand-in provider when no transcript is configured.
struct NoProvider;

impl Provider for NoProvider {
    fn capabilities(&self) -> Capabilities {
        Capabilities::plain_text()
    }

    fn send(&self, _: &str, _: &RequestOptions) -> Result<ProviderResponse, ProviderError> {
        Err(ProviderError::Fatal {
            message: "no provider configured".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub terminology_id: String,
    pub name: String,
    pub codes: usize,
    pub strings: usize,
    pub rejected: usize,
    pub duplicates: usize,
    pub embedded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSetSummary {
    pub code_set: CodeSet,
    pub expansions: usize,
    pub expansion_failures: usize,
}

pub struct Workbench {
    store: Arc<Store>,
    embeddings: Arc<EmbeddingService>,
    engine: Engine,
    matcher: Matcher,
    config: WorkbenchConfig,
}

impl std::fmt::Debug for Workbench {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workbench").field("config", &self.config).finish()
    }
}

impl Workbench {
    /// Builds every component from configuration.
    pub fn open(config: WorkbenchConfig) -> crate::Result<Self> {
        let store = match &config.store_path {
            Some(p) => Store::open(p)?,
            None => Store::in_memory(),
        };
        let e = &config.embedder;
        let embedder: Arc<dyn Embedder> = match &e.lookup_file {
            Some(p) => Arc::new(FixtureEmbedder::from_file(p, &e.model_id, e.dimension)?),
            None => Arc::new(FixtureEmbedder::hashing(&e.model_id, e.dimension)),
        };
        let p = &config.provider;
        let provider: Arc<dyn Provider> = match &p.transcript {
            Some(path) => {
                let mut replay = ReplayProvider::from_file(path, p.capabilities())?;
                if let Some(resp) = &p.fallback_response {
                    replay = replay.with_unknown_policy(UnknownPromptPolicy::Fallback {
                        response: resp.clone(),
                        usage: TokenUsage::default(),
                    });
                }
                Arc::new(replay)
            }
            None => Arc::new(NoProvider),
        };
        Self::from_parts(Arc::new(store), embedder, provider, config)
    }

    /// Builds a workbench around caller-supplied components; the matching
    /// fields of `config` are ignored.
    pub fn from_parts(
        store: Arc<Store>,
        embedder: Arc<dyn Embedder>,
        provider: Arc<dyn Provider>,
        config: WorkbenchConfig,
    ) -> crate::Result<Self> {
        let embeddings = Arc::new(EmbeddingService::new(embedder, store.clone()));
        let mut engine = Engine::new(store.clone(), embeddings.clone(), provider, config.provider.request_options())
            .with_retry(config.retry);
        if let Some(h) = &config.hierarchy {
            engine = engine.with_hierarchy(BeceptivityHierarchy::from_file(h)?);
        }
        for (name, instruction) in &config.styles {
            engine = engine.with_style(name, instruction);
        }
        let matcher = Matcher::new(store.clone(), embeddings.clone());
        Ok(Workbench {
            store,
            embeddings,
            engine,
            matcher,
            config,
        })
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn embeddings(&self) -> &Arc<EmbeddingService> {
        &self.embeddings
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn matcher(&self) -> &Matcher {
        &self.matcher
    }

    pub fn config(&self) -> &WorkbenchConfig {
        &self.config
    }

    pub fn persist(&self) -> crate::Result<()> {
        Ok(self.store.persist()?)
    }

    /// Imports rows, then embeds every string of the terminology and
    /// computes code summary vectors.
    pub fn import_terminology(&self, name: &str, outcome_rows: Vec<Result<crate::store::ImportRow, crate::store::RowRejection>>) -> crate::Result<ImportSummary> {
        let outcome: ImportOutcome = self.store.import_terminology(name, outcome_rows)?;
        let term = &outcome.terminology;
        let texts: Vec<String> = term
            .codes
            .values()
            .flat_map(|c| c.strings.iter().map(|s| s.text.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let before = self.embeddings.embedder_calls();
        self.embeddings.embed_all(&texts, self.config.workers)?;
        for code_id in term.codes.keys() {
            self.embeddings.code_summary_vector(&term.id, code_id)?;
        }
        self.persist()?;
        Ok(ImportSummary {
            terminology_id: term.id.to_string(),
            name: term.name.clone(),
            codes: term.codes.len(),
            strings: term.string_count(),
            rejected: outcome.rejected.len(),
            duplicates: outcome.duplicates,
            embedded: self.embeddings.embedder_calls() - before,
        })
    }

    /// Reads a delimited file, or a columnar JSON fixture when the file name
    /// ends in `.json`.
    pub fn import_file(&self, name: &str, path: &Path, opts: &DelimitedOptions) -> crate::Result<ImportSummary> {
        let io = |e| crate::Error::io(format!("reading {}", path.display()), e);
        let rows = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            let text = std::fs::read_to_string(path).map_err(io)?;
            read_columnar(&text)
                .map_err(|m| crate::store::StoreError::InvalidInput(format!("{}: {m}", path.display())))?
                .into_iter()
                .map(Ok)
                .collect()
        } else {
            read_delimited(std::fs::File::open(path).map_err(io)?, opts)
        };
        self.import_terminology(name, rows)
    }

    /// Creates a code set from a filter expression. With an expansion style,
    /// every string of every member is expanded (cached per string).
    pub fn create_code_set(
        &self,
        terminology: &str,
        name: &str,
        filter: &str,
        expansion_style: Option<&str>,
    ) -> crate::Result<CodeSetSummary> {
        let term = self.store.find_terminology(terminology)?;
        let filter = CodeFilter::parse(filter).map_err(crate::store::StoreError::from)?;
        let cs = self.store.create_code_set(&term.id, name, &filter, expansion_style.map(str::to_string))?;
        let (mut expansions, mut failures) = (0, 0);
        if let Some(style) = expansion_style {
            let gateway = self.engine.gateway(SharedLedger::new(self.config.budget.ledger()));
            let texts: BTreeSet<String> = self
                .store
                .code_set_members(&cs.id)?
                .into_iter()
                .flat_map(|c| c.strings.into_iter().map(|s| s.text))
                .collect();
            for t in texts {
                match self.engine.expand_string(&t, style, &gateway) {
                    Ok(_) => expansions += 1,
                    Err(e) => {
                        log::warn!("expansion of '{t}' failed: {e}");
                        failures += 1;
                    }
                }
            }
        }
        self.persist()?;
        Ok(CodeSetSummary {
            code_set: cs,
            expansions,
            expansion_failures: failures,
        })
    }

    pub fn start_run(&self, cfg: &RunConfig) -> crate::Result<Run> {
        let cs = self.store.find_code_set(&cfg.code_set)?;
        let run = self.engine.start_run(&cs.id, &cfg.relationships, cfg.groups.as_deref())?;
        self.persist()?;
        Ok(run)
    }

    pub fn execute_run(
        &self,
        run_id: &RunId,
        cfg: &RunConfig,
        progress: Option<&(dyn Fn(&RunProgress) + Sync)>,
    ) -> crate::Result<RunReport> {
        let workers = if cfg.workers == 0 { self.config.workers } else { cfg.workers };
        let budget = cfg.budget.clone().unwrap_or_else(|| self.config.budget.clone());
        let result = self
            .engine
            .execute_run(run_id, &cfg.relationships, cfg.groups.as_deref(), &budget, workers, progress);
        self.persist()?;
        result
    }

    pub fn run(&self, cfg: &RunConfig) -> crate::Result<RunReport> {
        let run = self.start_run(cfg)?;
        self.execute_run(&run.id, cfg, None)
    }

    pub fn run_specs(&self, code_set: &str, specs: &[RelationshipSpec], budget: BudgetConfig) -> crate::Result<RunReport> {
        self.run(&RunConfig {
            code_set: code_set.to_string(),
            relationships: specs.to_vec(),
            groups: None,
            budget: Some(budget),
            workers: self.config.workers,
        })
    }

    /// Free-text objects written by a run.
    pub fn run_objects(&self, run_id: &RunId) -> crate::Result<Vec<String>> {
        Ok(self
            .store
            .triples(run_id)?
            .into_iter()
            .filter(|t| t.object_kind == ObjectKind::FreeText)
            .map(|t| t.object_value)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect())
    }

    /// Matches every free-text object of a run against a code set.
    pub fn match_run(&self, run_id: &RunId, code_set: &str, params: &MatchParams) -> crate::Result<BatchOutcome> {
        let objects = self.run_objects(run_id)?;
        self.match_objects(&objects, code_set, params)
    }

    pub fn match_objects(&self, objects: &[String], code_set: &str, params: &MatchParams) -> crate::Result<BatchOutcome> {
        let cs = self.store.find_code_set(code_set)?;
        let out = self.matcher.batch_match(objects, &cs.id, params, self.config.workers)?;
        self.persist()?;
        Ok(out)
    }

    pub fn match_one(&self, object: &str, code_set: &str, params: &MatchParams) -> crate::Result<MatchResult> {
        let cs = self.store.find_code_set(code_set)?;
        let out = self.matcher.match_string_to_codes(&MatchQuery {
            object_text: object.to_string(),
            code_set_id: cs.id,
            params: params.clone(),
        })?;
        self.persist()?;
        Ok(out)
    }

    pub fn review_export(&self, code_set: &str) -> crate::Result<String> {
        let cs = self.store.find_code_set(code_set)?;
        crate::matcher::review_export(&self.store, &cs.id)
    }

    pub fn materialize(&self, name: &str, query: &str) -> crate::Result<CustomTable> {
        let t = self.store.materialize_custom_table(name, query)?;
        self.persist()?;
        Ok(t)
    }

    pub fn export(&self) -> String {
        self.store.logical_export()
    }

    pub fn export_hash(&self) -> String {
        self.store.export_hash()
    }
}

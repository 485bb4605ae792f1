use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::finalize::{finalize_boolean, finalize_categorical_vote, finalize_numeric, NumericMode};
use super::hierarchy::BeceptivityHierarchy;
use super::inflight::InFlight;
use super::prompts::{self, EXPANSIONS_ELEMENT, REPLACEMENTS_ELEMENT, SCORE_ELEMENT};
use super::{
    build_groups, BeceptivityConfig, BeceptivityMethod, BudgetConfig, EngineError, FinalizeMode, PromptGroup,
    RelationshipSpec, RunConfig, RunReport,
};
use crate::embeddings::{EmbeddingService, VectorOwner};
use crate::llm::{
    parse_response, render_prompt, Gateway, GatewayError, ItemValue, ParsedResponse, Provider,
    RequestOptions, ResponseItem, RetryPolicy, SharedLedger, ValueKind,
};
use crate::store::{
    AssessmentRecord, AssessmentSource, Code, CodeSetId, ExpansionString, ObjectKind, RefinementRecord, Run, RunId,
    RunStatus, Store, Triple,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProgress {
    pub run_id: RunId,
    pub concepts_done: usize,
    pub concepts: usize,
}

/// The budget ran out; the current concept is abandoned.
struct Killed;

fn is_kill(e: &crate::Error) -> bool {
    matches!(e, crate::Error::Gateway(GatewayError::BudgetExhausted))
}

#[derive(Debug, Default)]
struct Counters {
    refined: usize,
    dropped: usize,
    failed: usize,
    key_unmapped: usize,
    parse_errors: usize,
    assessment_errors: usize,
    expansion_failures: usize,
}

impl Counters {
    fn add(&mut self, o: &Counters) {
        self.refined += o.refined;
        self.dropped += o.dropped;
        self.failed += o.failed;
        self.key_unmapped += o.key_unmapped;
        self.parse_errors += o.parse_errors;
        self.assessment_errors += o.assessment_errors;
        self.expansion_failures += o.expansion_failures;
    }
}

#[derive(Default)]
struct ConceptOutcome {
    triples: Vec<Triple>,
    counters: Counters,
    log: Vec<String>,
    killed: bool,
}

struct RunCtx<'a> {
    run_id: &'a RunId,
    gateway: &'a Gateway,
    groups: &'a [PromptGroup],
}

/// Drives runs against one provider and one embedding model.
pub struct Engine {
    store: Arc<Store>,
    embeddings: Arc<EmbeddingService>,
    provider: Arc<dyn Provider>,
    options: RequestOptions,
    retry: RetryPolicy,
    hierarchy: Option<Arc<BeceptivityHierarchy>>,
    styles: BTreeMap<String, String>,
    requery_inflight: InFlight<String, f64>,
    expansion_inflight: InFlight<(String, String), ExpansionString>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("options", &self.options)
            .field("retry", &self.retry)
            .field("styles", &self.styles)
            .finish()
    }
}

impl Engine {
    pub fn new(
        store: Arc<Store>,
        embeddings: Arc<EmbeddingService>,
        provider: Arc<dyn Provider>,
        options: RequestOptions,
    ) -> Self {
        Engine {
            store,
            embeddings,
            provider,
            options,
            retry: RetryPolicy::default(),
            hierarchy: None,
            styles: BTreeMap::new(),
            requery_inflight: InFlight::new(),
            expansion_inflight: InFlight::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_hierarchy(mut self, h: BeceptivityHierarchy) -> Self {
        self.hierarchy = Some(Arc::new(h));
        self
    }

    /// Overrides the instruction used for an expansion style.
    pub fn with_style(mut self, name: impl Into<String>, instruction: impl Into<String>) -> Self {
        self.styles.insert(name.into(), instruction.into());
        self
    }

    pub fn model_id(&self) -> &str {
        &self.options.model
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn gateway(&self, ledger: SharedLedger) -> Gateway {
        Gateway::new(self.provider.clone(), ledger, self.options.clone(), self.retry)
    }

    fn style_instruction(&self, style: &str) -> String {
        self.styles
            .get(style)
            .cloned()
            .unwrap_or_else(|| prompts::default_style_instruction(style))
    }

    // ---- beceptivity ---------------------------------------------------

    /// Beceptivity of `text`. `inline` is the score that came with the text
    /// in its own response, used by the inline method. Requery results are
    /// cached per (model, text).
    pub fn assess_beceptivity(
        &self,
        text: &str,
        inline: Option<f64>,
        cfg: &BeceptivityConfig,
        gateway: &Gateway,
    ) -> crate::Result<f64> {
        let fail = |message: String| -> crate::Error {
            EngineError::Assessment {
                text: text.to_string(),
                message,
            }
            .into()
        };
        let value = match cfg.method {
            BeceptivityMethod::None => {
                return Err(EngineError::InvalidSpec("beceptivity method is none".into()).into());
            }
            BeceptivityMethod::Inline => inline.ok_or_else(|| fail("response carried no usable score".into()))?,
            BeceptivityMethod::DbLookup => {
                let h = self
                    .hierarchy
                    .as_ref()
                    .ok_or_else(|| fail("no beceptivity hierarchy is loaded".into()))?;
                h.beceptivity(text, cfg.scale_max)
                    .ok_or_else(|| fail("term is not in the hierarchy".into()))?
            }
            BeceptivityMethod::Requery => {
                if let Some(v) = self.store.beceptivity(self.model_id(), text) {
                    return Ok(v);
                }
                self.requery_inflight.run(&text.to_string(), || {
                    if let Some(v) = self.store.beceptivity(self.model_id(), text) {
                        return Ok(v);
                    }
                    let caps = gateway.capabilities();
                    let (prompt, schema) = prompts::requery_prompt(text, cfg.scale_max, caps);
                    let resp = gateway.request(&prompt, 0).map_err(|e| match e {
                        GatewayError::BudgetExhausted => e.into(),
                        other => fail(other.to_string()),
                    })?;
                    let parsed = parse_response(&resp.raw, &schema, caps).map_err(|e| fail(e.to_string()))?;
                    let v = parsed
                        .get(SCORE_ELEMENT)
                        .and_then(|e| e.items.first())
                        .and_then(|i| i.value.as_number())
                        .ok_or_else(|| fail("reply has no score".into()))?;
                    if !(0.0..=cfg.scale_max).contains(&v) {
                        return Err(fail(format!("score {v} is outside 0..={}", cfg.scale_max)));
                    }
                    Ok(self.store.put_beceptivity(self.model_id(), text, v))
                })?
            }
        };
        if !(0.0..=cfg.scale_max).contains(&value) {
            return Err(fail(format!("score {value} is outside 0..={}", cfg.scale_max)));
        }
        Ok(value)
    }

    /// Asks for more specific replacements of an under-beceptive item in the
    /// context of one concept. Never cached: the same item gets different
    /// replacements for different concepts.
    pub fn refine_underbeceptive(
        &self,
        item: &str,
        concept: &str,
        spec: &RelationshipSpec,
        gateway: &Gateway,
    ) -> crate::Result<Vec<ResponseItem>> {
        let caps = gateway.capabilities();
        let cfg = &spec.beceptivity;
        let inline = cfg.method == BeceptivityMethod::Inline;
        let (prompt, schema) = prompts::refinement_prompt(&spec.template, item, concept, inline, cfg.scale_max, caps)?;
        let resp = gateway.request(&prompt, 0)?;
        let parsed = parse_response(&resp.raw, &schema, caps)?;
        let mut seen = HashSet::new();
        Ok(parsed
            .get(REPLACEMENTS_ELEMENT)
            .map(|e| e.items.clone())
            .unwrap_or_default()
            .into_iter()
            .filter(|r| {
                let t = r.value.as_text();
                t != item && seen.insert(t)
            })
            .collect())
    }

    // ---- expansion strings ---------------------------------------------

    /// Alternative phrasings of `text` in `style`, generated once per
    /// (text, style, model) and stored with their summary vector.
    pub fn expand_string(&self, text: &str, style: &str, gateway: &Gateway) -> crate::Result<ExpansionString> {
        let fail = |message: String| -> crate::Error {
            EngineError::Expansion {
                text: text.to_string(),
                style: style.to_string(),
                message,
            }
            .into()
        };
        if text.trim().is_empty() || style.trim().is_empty() {
            return Err(fail("text and style must be non-empty".into()));
        }
        if let Some(e) = self.store.expansion(text, style, self.model_id()) {
            return Ok(e);
        }
        let key = (text.to_string(), style.to_string());
        self.expansion_inflight.run(&key, || {
            if let Some(e) = self.store.expansion(text, style, self.model_id()) {
                return Ok(e);
            }
            let caps = gateway.capabilities();
            let (prompt, schema) =
                prompts::expansion_prompt(text, &self.style_instruction(style), caps).map_err(|e| fail(e.to_string()))?;
            let resp = gateway.request(&prompt, 0).map_err(|e| match e {
                GatewayError::BudgetExhausted => e.into(),
                other => fail(other.to_string()),
            })?;
            let parsed = parse_response(&resp.raw, &schema, caps).map_err(|e| fail(e.to_string()))?;
            let mut seen = HashSet::new();
            let generated: Vec<String> = parsed
                .get(EXPANSIONS_ELEMENT)
                .map(|e| e.items.iter().map(|i| i.value.as_text()).collect::<Vec<_>>())
                .unwrap_or_default()
                .into_iter()
                .filter(|t| seen.insert(t.clone()))
                .collect();
            if generated.is_empty() {
                return Err(fail("no expansion strings returned".into()));
            }
            let owner = VectorOwner::Expansion {
                source_text: text.to_string(),
                style: style.to_string(),
            };
            let summary = self.embeddings.summary_of(&generated, owner).map_err(|e| fail(e.to_string()))?;
            Ok(self.store.put_expansion(ExpansionString {
                source_text: text.to_string(),
                style: style.to_string(),
                model_id: self.model_id().to_string(),
                generated_texts: generated,
                summary: Some(summary),
            }))
        })
    }

    // ---- runs ------------------------------------------------------------

    /// Validates the specs and creates a pending run.
    pub fn start_run(
        &self,
        code_set_id: &CodeSetId,
        specs: &[RelationshipSpec],
        grouping: Option<&[Vec<String>]>,
    ) -> crate::Result<Run> {
        self.store.code_set(code_set_id)?;
        build_groups(specs, grouping)?;
        Ok(self
            .store
            .create_run(code_set_id, specs.iter().map(|s| s.id().to_string()).collect())?)
    }

    pub fn run_population(
        &self,
        code_set_id: &CodeSetId,
        specs: &[RelationshipSpec],
        grouping: Option<&[Vec<String>]>,
        budget: &BudgetConfig,
        workers: usize,
    ) -> crate::Result<RunReport> {
        let run = self.start_run(code_set_id, specs, grouping)?;
        self.execute_run(&run.id, specs, grouping, budget, workers, None)
    }

    pub fn run_config(&self, cfg: &RunConfig) -> crate::Result<RunReport> {
        let cs = self.store.find_code_set(&cfg.code_set)?;
        let run = self.start_run(&cs.id, &cfg.relationships, cfg.groups.as_deref())?;
        let budget = cfg.budget.clone().unwrap_or_default();
        self.execute_run(&run.id, &cfg.relationships, cfg.groups.as_deref(), &budget, cfg.workers, None)
    }

    /// Processes every concept of a pending run. Concepts are spread over
    /// `workers` threads; each concept's triples are written together once
    /// the concept is finished. When the budget is exhausted no further
    /// requests are sent, the concept in progress is abandoned and the run
    /// ends as `killed_budget`.
    pub fn execute_run(
        &self,
        run_id: &RunId,
        specs: &[RelationshipSpec],
        grouping: Option<&[Vec<String>]>,
        budget: &BudgetConfig,
        workers: usize,
        progress: Option<&(dyn Fn(&RunProgress) + Sync)>,
    ) -> crate::Result<RunReport> {
        let groups = build_groups(specs, grouping)?;
        let run = self.store.run(run_id)?;
        let members = self.store.code_set_members(&run.code_set_id)?;
        self.store.set_run_status(run_id, RunStatus::Running, None)?;

        let ledger = SharedLedger::new(budget.ledger());
        let gateway = self.gateway(ledger.clone());
        let ctx = RunCtx {
            run_id,
            gateway: &gateway,
            groups: &groups,
        };

        let total = members.len();
        let next = AtomicUsize::new(0);
        let done = AtomicUsize::new(0);
        let written = AtomicUsize::new(0);
        let outcomes: Mutex<Vec<(usize, ConceptOutcome)>> = Mutex::new(Vec::with_capacity(total));
        let write_error: Mutex<Option<crate::Error>> = Mutex::new(None);

        let work = || loop {
            let i = next.fetch_add(1, Ordering::SeqCst);
            let Some(code) = members.get(i) else { break };
            let outcome = if ledger.is_killed() || write_error.lock().is_some() {
                ConceptOutcome {
                    killed: true,
                    ..Default::default()
                }
            } else {
                self.process_concept(&ctx, code)
            };
            if !outcome.killed && !outcome.triples.is_empty() {
                match self.store.insert_triples(run_id, outcome.triples.clone()) {
                    Ok(n) => {
                        written.fetch_add(n, Ordering::SeqCst);
                    }
                    Err(e) => {
                        write_error.lock().get_or_insert(e.into());
                    }
                }
            }
            outcomes.lock().push((i, outcome));
            let d = done.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(p) = progress {
                p(&RunProgress {
                    run_id: run_id.clone(),
                    concepts_done: d,
                    concepts: total,
                });
            }
        };
        let workers = workers.clamp(1, total.max(1));
        if workers == 1 {
            work();
        } else {
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(&work);
                }
            });
        }

        if let Some(e) = write_error.into_inner() {
            self.store.set_run_status(run_id, RunStatus::Failed, Some(ledger.snapshot()))?;
            return Err(e);
        }

        let mut outcomes = outcomes.into_inner();
        outcomes.sort_by_key(|(i, _)| *i);
        let mut counters = Counters::default();
        let mut log = vec![format!(
            "run {run_id}: {total} concepts, {} prompt group(s), model {}",
            groups.len(),
            self.model_id()
        )];
        let mut killed_concepts = 0;
        for (i, o) in &outcomes {
            counters.add(&o.counters);
            let code = &members[*i];
            if o.killed {
                killed_concepts += 1;
                log.push(format!("concept {}: not completed, budget exhausted", code.code_id));
            } else {
                log.extend(o.log.iter().cloned());
            }
        }
        let status = if ledger.is_killed() {
            RunStatus::KilledBudget
        } else {
            RunStatus::Completed
        };
        let snapshot = ledger.snapshot();
        self.store.set_run_status(run_id, status, Some(snapshot.clone()))?;
        let report = RunReport {
            run_id: run_id.clone(),
            status,
            concepts: total,
            concepts_completed: total - killed_concepts,
            triples_written: written.into_inner(),
            items_refined: counters.refined,
            items_dropped: counters.dropped,
            items_failed: counters.failed,
            items_killed: killed_concepts,
            key_unmapped: counters.key_unmapped,
            parse_errors: counters.parse_errors,
            assessment_errors: counters.assessment_errors,
            expansion_failures: counters.expansion_failures,
            provider_calls: gateway.calls(),
            ledger: snapshot,
            log: Vec::new(),
        };
        log.push(format!(
            "run {run_id} {}: {} triples, {} refined, {} dropped, {} failed, {} concepts killed, cost {}",
            status.as_str(),
            report.triples_written,
            report.items_refined,
            report.items_dropped,
            report.items_failed,
            report.items_killed,
            report.ledger.accumulated_cost
        ));
        Ok(RunReport { log, ..report })
    }

    fn process_concept(&self, ctx: &RunCtx<'_>, code: &Code) -> ConceptOutcome {
        let mut out = ConceptOutcome::default();
        for group in ctx.groups {
            if self.process_group(ctx, code, group, &mut out).is_err() {
                return ConceptOutcome {
                    killed: true,
                    counters: out.counters,
                    ..Default::default()
                };
            }
        }
        out
    }

    fn sample(
        &self,
        ctx: &RunCtx<'_>,
        code: &Code,
        group: &PromptGroup,
        prompt: &str,
        sample: u32,
        out: &mut ConceptOutcome,
    ) -> Result<Option<ParsedResponse>, Killed> {
        let caps = ctx.gateway.capabilities();
        let resp = match ctx.gateway.request(prompt, sample) {
            Ok(r) => r,
            Err(GatewayError::BudgetExhausted) => return Err(Killed),
            Err(e) => {
                out.log.push(format!("concept {}: sample {sample} failed: {e}", code.code_id));
                return Ok(None);
            }
        };
        match parse_response(&resp.raw, &group.schema, caps) {
            Ok(p) => Ok(Some(p)),
            Err(e) => {
                match e {
                    GatewayError::KeyUnmapped(_) => out.counters.key_unmapped += 1,
                    _ => out.counters.parse_errors += 1,
                }
                out.log.push(format!("concept {}: sample {sample} rejected: {e}", code.code_id));
                Ok(None)
            }
        }
    }

    fn process_group(&self, ctx: &RunCtx<'_>, code: &Code, group: &PromptGroup, out: &mut ConceptOutcome) -> Result<(), Killed> {
        let concept = code.main_text();
        let prompt = render_prompt(&group.template, concept, &group.schema, ctx.gateway.capabilities());
        let mut samples = Vec::with_capacity(group.samples as usize);
        for s in 0..group.samples {
            samples.push(self.sample(ctx, code, group, &prompt, s, out)?);
        }
        for spec in &group.specs {
            let n = spec.are_you_sure.samples() as usize;
            let answer = spec.answer();
            let per_sample: Vec<&[ResponseItem]> = samples[..n]
                .iter()
                .flatten()
                .filter_map(|p| p.get(&answer.name))
                .map(|e| e.items.as_slice())
                .collect();
            let candidates = match finalize_samples(spec, &per_sample) {
                Ok(c) => c,
                Err(e) => {
                    out.counters.failed += 1;
                    out.log.push(format!("concept {}: {}: {e}", code.code_id, spec.predicate));
                    continue;
                }
            };
            let objects: Vec<(String, Option<String>)> = if spec.beceptivity.enabled() {
                self.enforce(ctx, code, spec, candidates, out)?
            } else {
                candidates.into_iter().map(|c| (c.value.as_text(), None)).collect()
            };
            for (text, _) in &objects {
                for style in &spec.object_expansion_styles {
                    match self.expand_string(text, style, ctx.gateway) {
                        Ok(_) => {}
                        Err(e) if is_kill(&e) => return Err(Killed),
                        Err(e) => {
                            out.counters.expansion_failures += 1;
                            out.log.push(format!("concept {}: {e}", code.code_id));
                        }
                    }
                }
            }
            let kind = match answer.value_kind {
                ValueKind::FreeText => ObjectKind::FreeText,
                ValueKind::Categorical => ObjectKind::Categorical,
                ValueKind::Numeric | ValueKind::BooleanLike => ObjectKind::Numeric,
            };
            out.log.push(format!(
                "concept {} ({concept}): {} -> {} object(s)",
                code.code_id,
                spec.predicate,
                objects.len()
            ));
            for (text, parent) in objects {
                out.triples.push(Triple {
                    subject_code_id: code.code_id.clone(),
                    predicate: spec.predicate.clone(),
                    object_value: text,
                    object_kind: kind,
                    run_id: ctx.run_id.clone(),
                    finalization: spec.are_you_sure.finalization(),
                    replaced_parent: parent,
                });
            }
        }
        Ok(())
    }

    /// Keeps items at or above the required beceptivity and replaces the
    /// rest with refinements, breadth first, up to the depth limit.
    fn enforce(
        &self,
        ctx: &RunCtx<'_>,
        code: &Code,
        spec: &RelationshipSpec,
        candidates: Vec<ResponseItem>,
        out: &mut ConceptOutcome,
    ) -> Result<Vec<(String, Option<String>)>, Killed> {
        let cfg = &spec.beceptivity;
        let concept = code.main_text();
        let source = match cfg.method {
            BeceptivityMethod::Inline => AssessmentSource::Inline,
            BeceptivityMethod::Requery => AssessmentSource::Requery,
            _ => AssessmentSource::DbLookup,
        };
        let mut queue: VecDeque<(ResponseItem, u32, Option<String>)> =
            candidates.into_iter().map(|c| (c, 0, None)).collect();
        let mut kept: Vec<(String, Option<String>)> = Vec::new();
        let mut under: HashSet<String> = HashSet::new();
        while let Some((item, depth, parent)) = queue.pop_front() {
            let text = item.value.as_text();
            let value = match self.assess_beceptivity(&text, item.beceptivity, cfg, ctx.gateway) {
                Ok(v) => Some(v),
                Err(e) if is_kill(&e) => return Err(Killed),
                Err(e) => {
                    out.counters.assessment_errors += 1;
                    out.log.push(format!("concept {}: {e}", code.code_id));
                    None
                }
            };
            self.store.record_assessment(AssessmentRecord {
                run_id: ctx.run_id.clone(),
                subject_code_id: code.code_id.clone(),
                predicate: spec.predicate.clone(),
                text: text.clone(),
                value,
                min_required: cfg.min_required,
                source,
            });
            if value.is_some_and(|v| v >= cfg.min_required) {
                kept.push((text, parent));
                continue;
            }
            under.insert(text.clone());
            if depth >= cfg.max_refinement_depth {
                out.counters.dropped += 1;
                out.log.push(format!(
                    "concept {}: dropped '{text}', still under-beceptive at depth {depth}",
                    code.code_id
                ));
                continue;
            }
            match self.refine_underbeceptive(&text, concept, spec, ctx.gateway) {
                Err(e) if is_kill(&e) => return Err(Killed),
                Err(e) => {
                    out.counters.dropped += 1;
                    out.log.push(format!("concept {}: could not refine '{text}': {e}", code.code_id));
                }
                Ok(reps) if reps.is_empty() => {
                    out.counters.dropped += 1;
                    out.log.push(format!("concept {}: no replacements for '{text}'", code.code_id));
                }
                Ok(reps) => {
                    out.counters.refined += 1;
                    out.log.push(format!(
                        "concept {}: replaced '{text}' with {} item(s)",
                        code.code_id,
                        reps.len()
                    ));
                    for r in reps {
                        self.store.record_refinement(RefinementRecord {
                            run_id: ctx.run_id.clone(),
                            subject_code_id: code.code_id.clone(),
                            predicate: spec.predicate.clone(),
                            parent: text.clone(),
                            child: r.value.as_text(),
                            depth: depth + 1,
                        });
                        queue.push_back((r, depth + 1, Some(text.clone())));
                    }
                }
            }
        }
        // A text judged under-beceptive anywhere in this concept is never
        // written, even if another path scored it higher.
        kept.retain(|(t, _)| !under.contains(t));
        Ok(kept)
    }
}

/// Reduces the answer element across samples to the candidate objects.
fn finalize_samples(spec: &RelationshipSpec, per_sample: &[&[ResponseItem]]) -> Result<Vec<ResponseItem>, EngineError> {
    if per_sample.is_empty() {
        return Err(EngineError::Aggregation("no usable sample".into()));
    }
    let firsts = || per_sample.iter().filter_map(|items| items.first());
    let numbers = || -> Result<Vec<f64>, EngineError> {
        firsts()
            .map(|i| {
                i.value
                    .as_number()
                    .ok_or_else(|| EngineError::Aggregation(format!("'{}' is not numeric", i.value.as_text())))
            })
            .collect()
    };
    Ok(match spec.are_you_sure.mode {
        FinalizeMode::None => per_sample[0].to_vec(),
        FinalizeMode::Vote => {
            let texts: Vec<String> = firsts().map(|i| i.value.as_text()).collect();
            let winner = finalize_categorical_vote(&texts)?;
            let value = firsts()
                .find(|i| i.value.as_text() == winner)
                .map(|i| i.value.clone())
                .unwrap_or(ItemValue::Text(winner));
            vec![ResponseItem { value, beceptivity: None }]
        }
        FinalizeMode::BooleanVote => vec![ResponseItem::number(f64::from(finalize_boolean(&numbers()?)?))],
        FinalizeMode::Average => vec![ResponseItem::number(finalize_numeric(&numbers()?, NumericMode::Average)?)],
        FinalizeMode::Sum => vec![ResponseItem::number(finalize_numeric(&numbers()?, NumericMode::Sum)?)],
    })
}

//! Example inputs: a small clinical terminology, run configurations and a
//! replay transcript answering every prompt those runs send.

use std::path::{Path, PathBuf};

use lexigraph_core::engine::{
    refinement_prompt, requery_prompt, BeceptivityConfig, BeceptivityMethod, BudgetConfig, RelationshipSpec, RunConfig,
};
use lexigraph_core::llm::{
    render_prompt, write_transcript, Capabilities, PromptTemplate, ResponseElement, ResponseSchema, TokenUsage,
    TranscriptRecord, ValueKind,
};
use rust_decimal::Decimal;

use crate::error::ServiceError;

pub const TERMINOLOGY: &[(&str, &str, u32)] = &[
    ("I21", "myocardial infarction", 0),
    ("I21", "heart attack", 1),
    ("I50", "congestive heart failure", 0),
    ("I50", "heart failure", 1),
    ("J18", "pneumonia", 0),
    ("J90", "pleural effusion", 0),
    ("J96", "respiratory failure", 0),
    ("A41", "sepsis", 0),
    ("N10", "pyelonephritis", 0),
    ("N10", "kidney infection", 1),
    ("N39", "urinary tract infection", 0),
    ("N39", "UTI", 1),
    ("L02", "skin abscess", 0),
    ("L03", "cellulitis", 0),
    ("L08", "staph skin infection", 0),
    ("S62", "fracture of an unspecified upper extremity digit", 0),
    ("S62", "broken finger", 1),
];

pub const INFECTIONS_FILTER: &str = r#"code_id in ["N39", "L08", "J18"]"#;

/// (concept, treated_by answer, has_complication_of answer)
const ANSWERS: &[(&str, &str, &str)] = &[
    ("urinary tract infection", "antibiotics|phenazopyridine", "pyelonephritis|sepsis"),
    ("staph skin infection", "antibiotics|incision and drainage", "cellulitis|skin abscess"),
    ("pneumonia", "amoxicillin|azithromycin", "pleural effusion|sepsis|respiratory failure"),
];

const SCORES: &[(&str, u32)] = &[
    ("antibiotics", 2),
    ("phenazopyridine", 8),
    ("incision and drainage", 7),
    ("amoxicillin", 9),
    ("azithromycin", 9),
    ("nitrofurantoin", 9),
    ("trimethoprim-sulfamethoxazole", 9),
    ("cephalexin", 9),
    ("clindamycin", 9),
];

const REFINEMENTS: &[(&str, &str, &str)] = &[
    ("antibiotics", "urinary tract infection", "nitrofurantoin|trimethoprim-sulfamethoxazole"),
    ("antibiotics", "staph skin infection", "cephalexin|clindamycin"),
];

pub fn terminology_tsv() -> String {
    TERMINOLOGY.iter().map(|(c, s, r)| format!("{c}\t{s}\t{r}\n")).collect()
}

fn multi(name: &str) -> ResponseSchema {
    ResponseSchema::new(vec![ResponseElement::new(name, ValueKind::FreeText).multi()]).expect("static schema")
}

pub fn treated_by() -> RelationshipSpec {
    RelationshipSpec {
        id: None,
        predicate: "treated_by".into(),
        template: PromptTemplate::new("What are the medications that treat <<<concept>>>?").expect("static template"),
        schema: multi("medications"),
        are_you_sure: Default::default(),
        beceptivity: BeceptivityConfig {
            method: BeceptivityMethod::Requery,
            ..Default::default()
        },
        object_expansion_styles: Vec::new(),
    }
}

pub fn has_complication_of() -> RelationshipSpec {
    RelationshipSpec {
        id: None,
        predicate: "has_complication_of".into(),
        template: PromptTemplate::new("What are the complications of <<<concept>>>?").expect("static template"),
        schema: multi("complications"),
        are_you_sure: Default::default(),
        beceptivity: Default::default(),
        object_expansion_styles: Vec::new(),
    }
}

/// Every concept costs more than the last, so a limit lands mid-run.
pub fn priced_budget(limit: Option<Decimal>) -> BudgetConfig {
    BudgetConfig {
        price_per_prompt_token: Decimal::new(1, 5),
        price_per_completion_token: Decimal::new(3, 5),
        dollar_limit: limit,
    }
}

pub fn run_config(limit: Option<Decimal>) -> RunConfig {
    RunConfig {
        code_set: "infections".into(),
        relationships: vec![treated_by(), has_complication_of()],
        groups: None,
        budget: Some(priced_budget(limit)),
        workers: 1,
    }
}

/// Word count stand-in for a tokenizer.
fn usage(prompt: &str, response: &str) -> TokenUsage {
    TokenUsage::new(prompt.split_whitespace().count() as i64, 4 * response.split_whitespace().count() as i64 + 8)
}

pub fn transcript(caps: Capabilities) -> Vec<TranscriptRecord> {
    let mut out = Vec::new();
    let mut push = |prompt: String, response: String| {
        let u = usage(&prompt, &response);
        out.push(TranscriptRecord::new(&prompt, response, u, 0));
    };
    let (tb, hc) = (treated_by(), has_complication_of());
    for (concept, meds, complications) in ANSWERS {
        let answer = |spec: &RelationshipSpec, body: &str| {
            let name = &spec.schema.elements()[0].name;
            if caps.structured_output {
                serde_json::json!({ name.as_str(): body.split('|').collect::<Vec<_>>() }).to_string()
            } else {
                format!("{name}: {body}")
            }
        };
        push(render_prompt(&tb.template, concept, &tb.schema, caps), answer(&tb, meds));
        push(render_prompt(&hc.template, concept, &hc.schema, caps), answer(&hc, complications));
    }
    for (text, score) in SCORES {
        let (p, _) = requery_prompt(text, tb.beceptivity.scale_max, caps);
        let r = if caps.structured_output {
            format!("{{\"beceptivity_score\": {score}}}")
        } else {
            format!("beceptivity_score: {score}")
        };
        push(p, r);
    }
    for (item, concept, replacements) in REFINEMENTS {
        let (p, _) = refinement_prompt(&tb.template, item, concept, false, tb.beceptivity.scale_max, caps)
            .expect("static template");
        let r = if caps.structured_output {
            serde_json::json!({ "replacements": replacements.split('|').collect::<Vec<_>>() }).to_string()
        } else {
            format!("replacements: {replacements}")
        };
        push(p, r);
    }
    out
}

pub const SETTINGS_TOML: &str = r#"store_path = "store.json"
workers = 2

[provider]
transcript = "transcript.jsonl"
model = "replay"
"#;

/// Writes the example files into `dir` and returns their paths.
pub fn write_examples(dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    std::fs::create_dir_all(dir).map_err(|e| ServiceError::config(dir, e))?;
    let write = |name: &str, body: String| -> Result<PathBuf, ServiceError> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| ServiceError::config(&p, e))?;
        Ok(p)
    };
    let json = |v: &RunConfig| serde_json::to_string_pretty(v).expect("serializable");
    let mut paths = vec![
        write("terminology.tsv", terminology_tsv())?,
        write("run.json", json(&run_config(None)))?,
        write("run-limited.json", json(&run_config(Some(Decimal::new(1, 2)))))?,
        write("settings.toml", SETTINGS_TOML.to_string())?,
    ];
    let t = dir.join("transcript.jsonl");
    write_transcript(&t, &transcript(Capabilities::plain_text()))?;
    paths.push(t);
    Ok(paths)
}

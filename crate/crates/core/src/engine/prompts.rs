//! Built-in prompts for beceptivity re-queries, refinement and expansion
//! strings. Each returns the full prompt plus the schema to parse the reply
//! with.

use crate::llm::{
    format_number, render_prompt, Capabilities, GatewayError, PromptTemplate, ResponseElement, ResponseSchema,
    ValueKind,
};

pub const SCORE_ELEMENT: &str = "beceptivity_score";
pub const REPLACEMENTS_ELEMENT: &str = "replacements";
pub const EXPANSIONS_ELEMENT: &str = "expansions";

pub fn requery_schema(scale_max: f64) -> ResponseSchema {
    ResponseSchema::with_scale(vec![ResponseElement::new(SCORE_ELEMENT, ValueKind::Numeric)], scale_max)
        .expect("static schema")
}

/// Context-free, so the score can be cached per text.
pub fn requery_prompt(text: &str, scale_max: f64, caps: Capabilities) -> (String, ResponseSchema) {
    let max = format_number(scale_max);
    let template = PromptTemplate::new(format!(
        "Rate how specific the term below is, from 0 (a very general category) to {max} (a single, very specific item). \
         Give the score as the {SCORE_ELEMENT} field.\n\nTerm: <<<concept>>>"
    ))
    .expect("static template");
    let schema = requery_schema(scale_max);
    (render_prompt(&template, text, &schema, caps), schema)
}

pub fn refinement_schema(with_scores: bool, scale_max: f64) -> ResponseSchema {
    let mut e = ResponseElement::new(REPLACEMENTS_ELEMENT, ValueKind::FreeText).multi();
    if with_scores {
        e = e.with_beceptivity();
    }
    ResponseSchema::with_scale(vec![e], scale_max).expect("static schema")
}

/// Asks for more specific answers to replace `item` for this concept. The
/// original question is repeated so the replacements fit the concept.
pub fn refinement_prompt(
    question: &PromptTemplate,
    item: &str,
    concept: &str,
    with_scores: bool,
    scale_max: f64,
    caps: Capabilities,
) -> Result<(String, ResponseSchema), GatewayError> {
    let template = PromptTemplate::new(format!(
        "The answer \"{item}\" to the question below is too general. List more specific answers that should replace it \
         for this question.\n\nQuestion: {}",
        question.body()
    ))?;
    let schema = refinement_schema(with_scores, scale_max);
    Ok((render_prompt(&template, concept, &schema, caps), schema))
}

pub fn default_style_instruction(style: &str) -> String {
    match style {
        "simple" => "Write several different ways of saying the term below in plain, everyday words, the way a patient \
                     might say it."
            .to_string(),
        "clinical" => "Write several different ways a clinician might write the term below in a medical record.".to_string(),
        other => format!("Write several different ways of saying the term below in a \"{other}\" style."),
    }
}

pub fn expansion_schema() -> ResponseSchema {
    ResponseSchema::new(vec![ResponseElement::new(EXPANSIONS_ELEMENT, ValueKind::FreeText).multi()]).expect("static schema")
}

pub fn expansion_prompt(text: &str, instruction: &str, caps: Capabilities) -> Result<(String, ResponseSchema), GatewayError> {
    let template = PromptTemplate::new(format!("{instruction}\n\nTerm: <<<concept>>>"))?;
    let schema = expansion_schema();
    Ok((render_prompt(&template, text, &schema, caps), schema))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refinement_prompt_ends_with_concept() {
        let q = PromptTemplate::new("What are the medications that treat <<<concept>>>?").unwrap();
        let (p, _) = refinement_prompt(&q, "antibiotics", "urinary tract infection", true, 10.0, Capabilities::plain_text()).unwrap();
        assert!(p.contains("\"antibiotics\""));
        assert!(p.ends_with("treat urinary tract infection?"));
    }

    #[test]
    fn requery_prompt_mentions_scale() {
        let (p, s) = requery_prompt("antibiotics", 10.0, Capabilities::structured());
        assert!(p.contains("to 10"));
        assert!(p.ends_with("Term: antibiotics"));
        assert_eq!(s.elements()[0].name, SCORE_ELEMENT);
    }

    #[test]
    fn styles() {
        assert!(default_style_instruction("simple").contains("everyday"));
        assert!(default_style_instruction("terse").contains("\"terse\""));
    }
}

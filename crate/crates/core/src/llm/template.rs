use serde::{Deserialize, Serialize};

use super::format::build_format_instructions;
use super::provider::Capabilities;
use super::schema::ResponseSchema;
use super::GatewayError;

pub const CONCEPT_PLACEHOLDER: &str = "<<<concept>>>";

/// Prompt body with exactly one `<<<concept>>>` placeholder, ideally at or
/// near the end so consecutive prompts share a long common prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate {
    body: String,
}

impl TryFrom<String> for PromptTemplate {
    type Error = GatewayError;

    fn try_from(body: String) -> Result<Self, Self::Error> {
        PromptTemplate::new(body)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> Self {
        t.body
    }
}

impl PromptTemplate {
    pub fn new(body: impl Into<String>) -> Result<Self, GatewayError> {
        let body = body.into();
        match body.matches(CONCEPT_PLACEHOLDER).count() {
            1 => Ok(PromptTemplate { body }),
            0 => Err(GatewayError::Template(format!("template has no {CONCEPT_PLACEHOLDER} placeholder"))),
            n => Err(GatewayError::Template(format!(
                "template has {n} {CONCEPT_PLACEHOLDER} placeholders, expected one"
            ))),
        }
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Characters of the body after the placeholder.
    pub fn tail_len(&self) -> usize {
        let at = self.body.find(CONCEPT_PLACEHOLDER).expect("validated");
        self.body.len() - at - CONCEPT_PLACEHOLDER.len()
    }

    pub fn substitute(&self, concept: &str) -> String {
        self.body.replacen(CONCEPT_PLACEHOLDER, concept, 1)
    }
}

/// Full prompt: generated format instructions first, then the template body
/// with the concept substituted. All static text precedes the concept
/// except whatever the template itself places after the placeholder.
pub fn render_prompt(template: &PromptTemplate, concept: &str, schema: &ResponseSchema, caps: Capabilities) -> String {
    let instructions = build_format_instructions(schema, caps);
    format!("{instructions}\n\n{}", template.substitute(concept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ResponseElement, ValueKind};

    fn schema() -> ResponseSchema {
        ResponseSchema::new(vec![ResponseElement::new("medications", ValueKind::FreeText).multi()]).unwrap()
    }

    #[test]
    fn substitutes_concept() {
        let t = PromptTemplate::new("What are the medications that treat <<<concept>>>?").unwrap();
        let p = render_prompt(&t, "urinary tract infection", &schema(), Capabilities::structured());
        assert!(p.contains("What are the medications that treat urinary tract infection?"));
        assert!(!p.contains(CONCEPT_PLACEHOLDER));
    }

    #[test]
    fn concept_follows_all_static_instruction_text() {
        let t = PromptTemplate::new("List complications of <<<concept>>>").unwrap();
        for caps in [Capabilities::structured(), Capabilities::plain_text()] {
            let p = render_prompt(&t, "myocardial infarction", &schema(), caps);
            assert!(p.ends_with("myocardial infarction"));
        }
    }

    #[test]
    fn placeholder_count_must_be_one() {
        assert!(matches!(PromptTemplate::new("no slot"), Err(GatewayError::Template(_))));
        assert!(matches!(
            PromptTemplate::new("<<<concept>>> and <<<concept>>>"),
            Err(GatewayError::Template(_))
        ));
    }

    #[test]
    fn rendering_is_pure() {
        let t = PromptTemplate::new("Q: <<<concept>>>").unwrap();
        let a = render_prompt(&t, "x", &schema(), Capabilities::plain_text());
        let b = render_prompt(&t, "x", &schema(), Capabilities::plain_text());
        assert_eq!(a, b);
    }
}

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    FreeText,
    Categorical,
    Numeric,
    BooleanLike,
}

/// Short key → categorical value map placed in the prompt so the model can
/// answer with a key. Keys are letters or short words, never numbers, so
/// they cannot be confused with a numeric score in the same response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, String)>", into = "Vec<(String, String)>")]
pub struct ResponseDictionary {
    entries: Vec<(String, String)>,
}

impl TryFrom<Vec<(String, String)>> for ResponseDictionary {
    type Error = GatewayError;

    fn try_from(entries: Vec<(String, String)>) -> Result<Self, Self::Error> {
        ResponseDictionary::new(entries)
    }
}

impl From<ResponseDictionary> for Vec<(String, String)> {
    fn from(d: ResponseDictionary) -> Self {
        d.entries
    }
}

pub const MAX_KEY_LEN: usize = 24;

impl ResponseDictionary {
    pub fn new<K: Into<String>, V: Into<String>>(entries: impl IntoIterator<Item = (K, V)>) -> Result<Self, GatewayError> {
        let entries: Vec<(String, String)> = entries
            .into_iter()
            .map(|(k, v)| (k.into().trim().to_string(), v.into()))
            .collect();
        if entries.is_empty() {
            return Err(GatewayError::InvalidSchema("dictionary has no entries".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, v) in &entries {
            if k.is_empty() || k.len() > MAX_KEY_LEN || k.chars().any(|c| c.is_whitespace() || c == '|' || c == ':') {
                return Err(GatewayError::InvalidSchema(format!(
                    "dictionary key '{k}' must be a short term without spaces"
                )));
            }
            if k.parse::<f64>().is_ok() {
                return Err(GatewayError::InvalidSchema(format!("dictionary key '{k}' is numeric")));
            }
            if v.trim().is_empty() {
                return Err(GatewayError::InvalidSchema(format!("dictionary key '{k}' has an empty value")));
            }
            if !seen.insert(k.to_lowercase()) {
                return Err(GatewayError::InvalidSchema(format!("duplicate dictionary key '{k}'")));
            }
        }
        Ok(ResponseDictionary { entries })
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn all_single_letters(&self) -> bool {
        self.entries
            .iter()
            .all(|(k, _)| k.chars().count() == 1 && k.chars().all(char::is_alphabetic))
    }

    pub fn key_for(&self, value: &str) -> Option<&str> {
        self.entries.iter().find(|(_, v)| v == value).map(|(k, _)| k.as_str())
    }

    /// Maps a model answer to its categorical value. Surrounding quotes,
    /// trailing punctuation and an echoed "key: value" line are tolerated;
    /// matching is case-insensitive.
    pub fn map_response(&self, raw: &str) -> Result<String, GatewayError> {
        let mut key = raw.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
        if let Some((head, _)) = key.split_once(':') {
            key = head.trim();
        }
        let key = key.trim_end_matches(['.', ')', ',']).trim_start_matches('(').trim();
        self.entries
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v.clone())
            .ok_or_else(|| GatewayError::KeyUnmapped(key.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseElement {
    pub name: String,
    pub value_kind: ValueKind,
    #[serde(default)]
    pub multi_response: bool,
    /// Parsed but never persisted (e.g. the model's reasoning).
    #[serde(default)]
    pub no_write: bool,
    #[serde(default)]
    pub dictionary: Option<ResponseDictionary>,
    /// Ask for a beceptivity score next to every item of this element.
    #[serde(default)]
    pub beceptivity_requested: bool,
    /// Extra guidance shown next to the element in the format instructions.
    #[serde(default)]
    pub description: Option<String>,
}

impl ResponseElement {
    pub fn new(name: impl Into<String>, value_kind: ValueKind) -> Self {
        ResponseElement {
            name: name.into(),
            value_kind,
            multi_response: false,
            no_write: false,
            dictionary: None,
            beceptivity_requested: false,
            description: None,
        }
    }

    pub fn multi(mut self) -> Self {
        self.multi_response = true;
        self
    }

    pub fn no_write(mut self) -> Self {
        self.no_write = true;
        self
    }

    pub fn with_dictionary(mut self, d: ResponseDictionary) -> Self {
        self.dictionary = Some(d);
        self
    }

    pub fn with_beceptivity(mut self) -> Self {
        self.beceptivity_requested = true;
        self
    }

    pub fn describe(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }
}

fn default_scale() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawSchema {
    elements: Vec<ResponseElement>,
    #[serde(default = "default_scale")]
    beceptivity_scale_max: f64,
}

/// The ordered elements a response must contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct ResponseSchema {
    elements: Vec<ResponseElement>,
    beceptivity_scale_max: f64,
}

impl TryFrom<RawSchema> for ResponseSchema {
    type Error = GatewayError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        ResponseSchema::with_scale(raw.elements, raw.beceptivity_scale_max)
    }
}

impl From<ResponseSchema> for RawSchema {
    fn from(s: ResponseSchema) -> Self {
        RawSchema {
            elements: s.elements,
            beceptivity_scale_max: s.beceptivity_scale_max,
        }
    }
}

impl ResponseSchema {
    pub fn new(elements: Vec<ResponseElement>) -> Result<Self, GatewayError> {
        Self::with_scale(elements, default_scale())
    }

    pub fn with_scale(elements: Vec<ResponseElement>, beceptivity_scale_max: f64) -> Result<Self, GatewayError> {
        let invalid = |m: String| Err(GatewayError::InvalidSchema(m));
        if elements.is_empty() {
            return invalid("schema has no elements".into());
        }
        if !(beceptivity_scale_max.is_finite() && beceptivity_scale_max > 0.0) {
            return invalid("beceptivity scale maximum must be positive".into());
        }
        let mut names = std::collections::HashSet::new();
        for e in &elements {
            if e.name.is_empty() || !e.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return invalid(format!("element name '{}' must be alphanumeric/underscore", e.name));
            }
            if !names.insert(e.name.as_str()) {
                return invalid(format!("duplicate element '{}'", e.name));
            }
            if e.dictionary.is_some() && e.multi_response {
                return invalid(format!("element '{}': multi_response must be false when a dictionary is defined", e.name));
            }
            if e.dictionary.is_some() && e.value_kind != ValueKind::Categorical {
                return invalid(format!("element '{}': dictionaries require a categorical element", e.name));
            }
            if e.beceptivity_requested && (e.value_kind != ValueKind::FreeText || e.no_write) {
                return invalid(format!(
                    "element '{}': beceptivity scores apply to persisted free-text elements",
                    e.name
                ));
            }
        }
        Ok(ResponseSchema {
            elements,
            beceptivity_scale_max,
        })
    }

    pub fn elements(&self) -> &[ResponseElement] {
        &self.elements
    }

    pub fn element(&self, name: &str) -> Option<&ResponseElement> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn beceptivity_scale_max(&self) -> f64 {
        self.beceptivity_scale_max
    }

    /// Elements in the order the model is asked to produce them: no-write
    /// elements (reasoning) first, then the answers in schema order.
    pub fn instruction_order(&self) -> Vec<&ResponseElement> {
        let (mut first, rest): (Vec<_>, Vec<_>) = self.elements.iter().partition(|e| e.no_write);
        first.extend(rest);
        first
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict() -> ResponseDictionary {
        ResponseDictionary::new([
            ("a", "Headache with movement"),
            ("b", "Fracture of femur"),
            ("c", "Fever of unknown origin"),
        ])
        .unwrap()
    }

    #[test]
    fn dictionary_keys_must_be_short_unique_and_non_numeric() {
        assert!(ResponseDictionary::new([("1", "x")]).is_err());
        assert!(ResponseDictionary::new([("a", "x"), ("A", "y")]).is_err());
        assert!(ResponseDictionary::new([("two words", "x")]).is_err());
        assert!(ResponseDictionary::new(Vec::<(String, String)>::new()).is_err());
        assert!(ResponseDictionary::new([("mild", "Mild course")]).is_ok());
    }

    #[test]
    fn dictionary_mapping_tolerates_decoration() {
        let d = dict();
        assert_eq!(d.map_response("b").unwrap(), "Fracture of femur");
        assert_eq!(d.map_response(" \"B.\" ").unwrap(), "Fracture of femur");
        assert_eq!(d.map_response("c: Fever of unknown origin").unwrap(), "Fever of unknown origin");
        assert_eq!(d.map_response("(a)").unwrap(), "Headache with movement");
        assert_eq!(d.map_response("z"), Err(GatewayError::KeyUnmapped("z".into())));
    }

    #[test]
    fn multi_response_with_dictionary_is_rejected() {
        let e = ResponseElement::new("answer", ValueKind::Categorical)
            .with_dictionary(dict())
            .multi();
        let err = ResponseSchema::new(vec![e]).unwrap_err();
        assert!(err.to_string().contains("multi_response must be false"));
    }

    #[test]
    fn schema_validation() {
        assert!(ResponseSchema::new(vec![]).is_err());
        let a = ResponseElement::new("a", ValueKind::FreeText);
        assert!(ResponseSchema::new(vec![a.clone(), a.clone()]).is_err());
        assert!(ResponseSchema::new(vec![ResponseElement::new("bad name", ValueKind::FreeText)]).is_err());
        assert!(ResponseSchema::new(vec![ResponseElement::new("n", ValueKind::Numeric).with_beceptivity()]).is_err());
        assert!(ResponseSchema::with_scale(vec![a], 0.0).is_err());
    }

    #[test]
    fn no_write_elements_come_first() {
        let s = ResponseSchema::new(vec![
            ResponseElement::new("answer", ValueKind::FreeText),
            ResponseElement::new("reasoning", ValueKind::FreeText).no_write(),
        ])
        .unwrap();
        let order: Vec<_> = s.instruction_order().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(order, ["reasoning", "answer"]);
    }

    #[test]
    fn deserialization_validates() {
        let bad = r#"{"elements":[{"name":"x","value_kind":"categorical","multi_response":true,"dictionary":[["a","A"]]}]}"#;
        assert!(serde_json::from_str::<ResponseSchema>(bad).is_err());
        let good = r#"{"elements":[{"name":"x","value_kind":"categorical","dictionary":[["a","A"]]}]}"#;
        let s: ResponseSchema = serde_json::from_str(good).unwrap();
        assert_eq!(s.beceptivity_scale_max(), 10.0);
    }
}

//! Response format instructions and the matching parser.
//!
//! Providers with structured output get a JSON object keyed by element name.
//! Everyone else gets one `name: value|value` line per element; a beceptivity
//! score rides along as `value ## score`.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::provider::Capabilities;
use super::schema::{ResponseElement, ResponseSchema, ValueKind};
use super::GatewayError;

pub const PIPE: char = '|';
pub const SCORE_SEPARATOR: &str = " ## ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemValue {
    Number(f64),
    Text(String),
}

impl ItemValue {
    pub fn as_text(&self) -> String {
        match self {
            ItemValue::Text(t) => t.clone(),
            ItemValue::Number(n) => format_number(*n),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            ItemValue::Number(n) => Some(*n),
            ItemValue::Text(_) => None,
        }
    }
}

pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseItem {
    pub value: ItemValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beceptivity: Option<f64>,
}

impl ResponseItem {
    pub fn text(t: impl Into<String>) -> Self {
        ResponseItem {
            value: ItemValue::Text(t.into()),
            beceptivity: None,
        }
    }

    pub fn number(n: f64) -> Self {
        ResponseItem {
            value: ItemValue::Number(n),
            beceptivity: None,
        }
    }

    pub fn scored(mut self, b: f64) -> Self {
        self.beceptivity = Some(b);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedElement {
    pub name: String,
    pub items: Vec<ResponseItem>,
    /// False for no-write elements; they are parsed and then discarded.
    pub persistable: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub elements: Vec<ParsedElement>,
    /// Schema elements absent from the response.
    pub missing: Vec<String>,
}

impl ParsedResponse {
    pub fn get(&self, name: &str) -> Option<&ParsedElement> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn persistable(&self) -> impl Iterator<Item = &ParsedElement> {
        self.elements.iter().filter(|e| e.persistable)
    }
}

fn kind_phrase(e: &ResponseElement) -> &'static str {
    match (e.value_kind, e.multi_response) {
        (ValueKind::FreeText | ValueKind::Categorical, false) => "text",
        (ValueKind::FreeText | ValueKind::Categorical, true) => "a list of text values, one entry per item",
        (ValueKind::Numeric, false) => "a number",
        (ValueKind::Numeric, true) => "a list of numbers",
        (ValueKind::BooleanLike, false) => "1 for yes or 0 for no",
        (ValueKind::BooleanLike, true) => "a list of 1 (yes) or 0 (no) values",
    }
}

fn element_lines(e: &ResponseElement, schema: &ResponseSchema, structured: bool, out: &mut Vec<String>) {
    let label = if structured { format!("\"{}\"", e.name) } else { e.name.clone() };
    let mut line = if let Some(d) = &e.dictionary {
        let which = if d.all_single_letters() { "letter keys" } else { "keys" };
        format!("{label}: answer only with one of the appropriate {which} listed below, not with the text after the key.")
    } else {
        let what = if structured {
            kind_phrase(e).replace("a list of", "a JSON array of")
        } else if e.multi_response {
            format!("{} separated by the {PIPE} character", kind_phrase(e).trim_end_matches(", one entry per item"))
        } else {
            format!("{} on a single line", kind_phrase(e))
        };
        format!("{label}: {what}.")
    };
    if e.no_write {
        line.push_str(" Think the question through here before giving any other field.");
    }
    if let Some(desc) = &e.description {
        line.push(' ');
        line.push_str(desc.trim());
    }
    out.push(line);
    if e.beceptivity_requested {
        let max = format_number(schema.beceptivity_scale_max());
        if structured {
            out.push(format!(
                "    Write each entry as an object {{\"value\": <text>, \"beceptivity_score\": <number>}}, where beceptivity_score rates how specific the value is from 0 (very general) to {max} (very specific)."
            ));
        } else {
            out.push(format!(
                "    After each value write \"{}\" and a beceptivity score from 0 (very general) to {max} (very specific).",
                SCORE_SEPARATOR.trim()
            ));
        }
    }
    if let Some(d) = &e.dictionary {
        for (k, v) in d.entries() {
            out.push(format!("    {k}: {v}"));
        }
    }
}

/// Instructions telling the model how to lay out its answer. Pure function of
/// the schema and capabilities, so identical for every concept of a run.
pub fn build_format_instructions(schema: &ResponseSchema, caps: Capabilities) -> String {
    let structured = caps.structured_output;
    let mut out = Vec::new();
    if structured {
        out.push("Reply with a single JSON object that has exactly these keys, in this order:".to_string());
    } else {
        out.push(format!(
            "Reply in plain text, not JSON. Write one line per field, in this order, starting each line with the field name and a colon. Separate multiple values with the {PIPE} character."
        ));
    }
    for e in schema.instruction_order() {
        element_lines(e, schema, structured, &mut out);
    }
    if structured {
        out.push("Return only the JSON object, with no text before or after it.".to_string());
    } else {
        out.push("Return only these lines.".to_string());
    }
    out.join("\n")
}

fn parse_error(message: impl Into<String>, raw: &str) -> GatewayError {
    GatewayError::Parse {
        message: message.into(),
        raw: raw.to_string(),
    }
}

pub fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim().trim_matches('"').trim();
    let t = t.strip_suffix('%').unwrap_or(t).trim();
    let cleaned: String = t.chars().filter(|c| *c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|n| n.is_finite())
}

fn parse_boolean(s: &str) -> Option<f64> {
    match s.trim().trim_matches('"').trim().to_ascii_lowercase().trim_end_matches('.') {
        "1" | "true" | "yes" => Some(1.0),
        "0" | "false" | "no" => Some(0.0),
        _ => None,
    }
}

/// Converts one raw item according to the element kind. `Ok(None)` means the
/// item was blank and is skipped.
fn convert_scalar(e: &ResponseElement, raw_text: &str, raw: &str) -> Result<Option<ItemValue>, GatewayError> {
    let text = raw_text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    match e.value_kind {
        ValueKind::FreeText => Ok(Some(ItemValue::Text(text.to_string()))),
        ValueKind::Categorical => match &e.dictionary {
            Some(d) => d.map_response(text).map(|v| Some(ItemValue::Text(v))),
            None => Ok(Some(ItemValue::Text(text.to_string()))),
        },
        ValueKind::Numeric => parse_number(text)
            .map(|n| Some(ItemValue::Number(n)))
            .ok_or_else(|| parse_error(format!("element '{}': '{text}' is not a number", e.name), raw)),
        ValueKind::BooleanLike => parse_boolean(text)
            .map(|n| Some(ItemValue::Number(n)))
            .ok_or_else(|| parse_error(format!("element '{}': '{text}' is not 0 or 1", e.name), raw)),
    }
}

fn json_scalar_text(v: &Json) -> Option<String> {
    match v {
        Json::String(s) => Some(s.clone()),
        Json::Number(n) => Some(n.to_string()),
        Json::Bool(b) => Some(if *b { "1".into() } else { "0".into() }),
        Json::Null => Some(String::new()),
        _ => None,
    }
}

fn convert_json_item(e: &ResponseElement, v: &Json, raw: &str) -> Result<Option<ResponseItem>, GatewayError> {
    let (value, score) = match v {
        Json::Object(map) if e.beceptivity_requested => {
            let value = map.get("value").unwrap_or(&Json::Null);
            let score = map.get("beceptivity_score").and_then(|s| match s {
                Json::Number(n) => n.as_f64(),
                Json::String(s) => parse_number(s),
                _ => None,
            });
            (value, score)
        }
        other => (other, None),
    };
    let text = json_scalar_text(value)
        .ok_or_else(|| parse_error(format!("element '{}': unexpected nested value", e.name), raw))?;
    Ok(convert_scalar(e, &text, raw)?.map(|value| ResponseItem {
        value,
        beceptivity: score,
    }))
}

fn extract_json_object(raw: &str) -> Option<serde_json::Map<String, Json>> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    if end < start {
        return None;
    }
    match serde_json::from_str::<Json>(&raw[start..=end]).ok()? {
        Json::Object(m) => Some(m),
        _ => None,
    }
}

fn parse_structured(raw: &str, schema: &ResponseSchema) -> Result<ParsedResponse, GatewayError> {
    let obj = extract_json_object(raw).ok_or_else(|| parse_error("no JSON object in response", raw))?;
    let mut out = ParsedResponse::default();
    for e in schema.elements() {
        let value = obj
            .get(&e.name)
            .or_else(|| obj.iter().find(|(k, _)| k.eq_ignore_ascii_case(&e.name)).map(|(_, v)| v));
        let Some(value) = value else {
            out.missing.push(e.name.clone());
            continue;
        };
        let raw_items: Vec<&Json> = match value {
            Json::Array(a) if e.multi_response => a.iter().collect(),
            Json::Array(a) if a.len() == 1 => vec![&a[0]],
            Json::Array(_) => {
                return Err(parse_error(format!("element '{}' expects a single value", e.name), raw));
            }
            other => vec![other],
        };
        let mut items = Vec::new();
        for v in raw_items {
            if let Some(item) = convert_json_item(e, v, raw)? {
                items.push(item);
            }
        }
        push_element(&mut out, e, items);
    }
    Ok(out)
}

fn push_element(out: &mut ParsedResponse, e: &ResponseElement, items: Vec<ResponseItem>) {
    if items.is_empty() {
        out.missing.push(e.name.clone());
        return;
    }
    out.elements.push(ParsedElement {
        name: e.name.clone(),
        items,
        persistable: !e.no_write,
    });
}

fn split_scored(e: &ResponseElement, piece: &str) -> (String, Option<f64>) {
    if e.beceptivity_requested {
        if let Some((v, s)) = piece.rsplit_once(SCORE_SEPARATOR.trim()) {
            return (v.trim().to_string(), parse_number(s));
        }
    }
    (piece.trim().to_string(), None)
}

fn parse_pipe_value(e: &ResponseElement, value: &str, raw: &str) -> Result<Vec<ResponseItem>, GatewayError> {
    let pieces: Vec<&str> = if e.multi_response {
        value.split(PIPE).collect()
    } else {
        vec![value]
    };
    let mut items = Vec::new();
    for p in pieces {
        let (text, score) = split_scored(e, p);
        if let Some(value) = convert_scalar(e, &text, raw)? {
            items.push(ResponseItem {
                value,
                beceptivity: score,
            });
        }
    }
    Ok(items)
}

fn parse_pipe(raw: &str, schema: &ResponseSchema) -> Result<ParsedResponse, GatewayError> {
    let mut found: Vec<Option<String>> = vec![None; schema.elements().len()];
    let mut unlabeled = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let labeled = line.split_once(':').and_then(|(head, rest)| {
            let head = head.trim().trim_matches(|c| c == '*' || c == '"' || c == '-').trim();
            schema
                .elements()
                .iter()
                .position(|e| e.name.eq_ignore_ascii_case(head))
                .map(|i| (i, rest.trim().to_string()))
        });
        match labeled {
            Some((i, rest)) if found[i].is_none() => found[i] = Some(rest),
            Some(_) => {}
            None => unlabeled.push(line),
        }
    }
    // A single-element schema may be answered with a bare pipe list.
    if schema.elements().len() == 1 && found[0].is_none() && !unlabeled.is_empty() {
        found[0] = Some(unlabeled.join(&PIPE.to_string()));
    }
    let mut out = ParsedResponse::default();
    for (e, value) in schema.elements().iter().zip(found) {
        match value {
            None => out.missing.push(e.name.clone()),
            Some(v) => {
                let items = parse_pipe_value(e, &v, raw)?;
                push_element(&mut out, e, items);
            }
        }
    }
    Ok(out)
}

/// Parses a raw model reply. Unparseable replies and values that do not fit
/// the element kind fail with `Parse` (carrying the raw text); an unknown
/// dictionary key fails with `KeyUnmapped`. Absent elements are listed in
/// `missing` rather than failing the whole response.
pub fn parse_response(raw: &str, schema: &ResponseSchema, caps: Capabilities) -> Result<ParsedResponse, GatewayError> {
    let parsed = if caps.structured_output {
        parse_structured(raw, schema)?
    } else {
        parse_pipe(raw, schema)?
    };
    if parsed.elements.is_empty() {
        return Err(parse_error("response contains none of the requested elements", raw));
    }
    Ok(parsed)
}

fn item_payload_text(e: &ResponseElement, item: &ResponseItem) -> String {
    let v = item.value.as_text();
    match &e.dictionary {
        Some(d) => d.key_for(&v).map(str::to_string).unwrap_or(v),
        None => v,
    }
}

/// Writes a reply in the layout the instructions ask for. Used for fixture
/// transcripts and round-trip tests.
pub fn render_payload(parsed: &ParsedResponse, schema: &ResponseSchema, caps: Capabilities) -> String {
    if caps.structured_output {
        let mut obj = serde_json::Map::new();
        for e in schema.instruction_order() {
            let Some(pe) = parsed.get(&e.name) else { continue };
            let items: Vec<Json> = pe
                .items
                .iter()
                .map(|it| {
                    let base = match (&it.value, &e.dictionary) {
                        (ItemValue::Number(n), None) => serde_json::json!(n),
                        _ => Json::String(item_payload_text(e, it)),
                    };
                    match it.beceptivity {
                        Some(b) if e.beceptivity_requested => {
                            serde_json::json!({"value": base, "beceptivity_score": b})
                        }
                        _ => base,
                    }
                })
                .collect();
            let value = if e.multi_response {
                Json::Array(items)
            } else {
                items.into_iter().next().unwrap_or(Json::Null)
            };
            obj.insert(e.name.clone(), value);
        }
        return Json::Object(obj).to_string();
    }
    let mut lines = Vec::new();
    for e in schema.instruction_order() {
        let Some(pe) = parsed.get(&e.name) else { continue };
        let items: Vec<String> = pe
            .items
            .iter()
            .map(|it| {
                let mut s = item_payload_text(e, it);
                if let (Some(b), true) = (it.beceptivity, e.beceptivity_requested) {
                    s.push_str(SCORE_SEPARATOR);
                    s.push_str(&format_number(b));
                }
                s
            })
            .collect();
        lines.push(format!("{}: {}", e.name, items.join(&PIPE.to_string())));
    }
    lines.join("\n")
}

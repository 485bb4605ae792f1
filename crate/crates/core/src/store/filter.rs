//! Declarative code-set filters.
//!
//! Filters are stored with the code set that produced them, so they are
//! plain data with a canonical text form rather than closures. Grammar:
//!
//! ```text
//! filter := or
//! or     := and ("or" and)*
//! and    := unary ("and" unary)*
//! unary  := "not" unary | "(" filter ")" | "all" | field test
//! field  := "code_id" | "string" | "main_string"
//! test   := "=" STR | "^=" STR | "starts_with" STR | "in" "[" STR ("," STR)* "]"
//! ```
//!
//! `string` holds when any string of the code passes the test; `main_string`
//! only looks at the code's main string.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Cursor, TokenKind};
use super::model::Code;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TextTest {
    Equals(String),
    Prefix(String),
    In(BTreeSet<String>),
}

impl TextTest {
    fn test(&self, value: &str) -> bool {
        match self {
            TextTest::Equals(s) => value == s,
            TextTest::Prefix(p) => value.starts_with(p.as_str()),
            TextTest::In(set) => set.contains(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeFilter {
    All,
    CodeId(TextTest),
    AnyString(TextTest),
    MainString(TextTest),
    And(Vec<CodeFilter>),
    Or(Vec<CodeFilter>),
    Not(Box<CodeFilter>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("filter error at {position}: {message}")]
pub struct FilterError {
    pub position: usize,
    pub message: String,
}

impl CodeFilter {
    pub fn code_id_prefix(prefix: impl Into<String>) -> Self {
        CodeFilter::CodeId(TextTest::Prefix(prefix.into()))
    }

    pub fn matches(&self, code: &Code) -> bool {
        match self {
            CodeFilter::All => true,
            CodeFilter::CodeId(t) => t.test(&code.code_id),
            CodeFilter::AnyString(t) => code.strings.iter().any(|s| t.test(&s.text)),
            CodeFilter::MainString(t) => t.test(code.main_text()),
            CodeFilter::And(fs) => fs.iter().all(|f| f.matches(code)),
            CodeFilter::Or(fs) => fs.iter().any(|f| f.matches(code)),
            CodeFilter::Not(f) => !f.matches(code),
        }
    }

    pub fn parse(input: &str) -> Result<Self, FilterError> {
        let tokens = tokenize(input).map_err(|e| FilterError {
            position: e.pos,
            message: e.message,
        })?;
        let mut cur = Cursor::new(tokens, input.len());
        if cur.at_end() {
            return Err(FilterError {
                position: 0,
                message: "empty filter".into(),
            });
        }
        let f = parse_or(&mut cur)?;
        if !cur.at_end() {
            return Err(err(&cur, "unexpected trailing input"));
        }
        Ok(f)
    }
}

fn err(cur: &Cursor, message: &str) -> FilterError {
    FilterError {
        position: cur.pos(),
        message: message.to_string(),
    }
}

fn parse_or(cur: &mut Cursor) -> Result<CodeFilter, FilterError> {
    let mut parts = vec![parse_and(cur)?];
    while cur.eat_keyword("or") {
        parts.push(parse_and(cur)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        CodeFilter::Or(parts)
    })
}

fn parse_and(cur: &mut Cursor) -> Result<CodeFilter, FilterError> {
    let mut parts = vec![parse_unary(cur)?];
    while cur.eat_keyword("and") {
        parts.push(parse_unary(cur)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        CodeFilter::And(parts)
    })
}

fn parse_unary(cur: &mut Cursor) -> Result<CodeFilter, FilterError> {
    if cur.eat_keyword("not") {
        return Ok(CodeFilter::Not(Box::new(parse_unary(cur)?)));
    }
    if cur.eat_symbol("(") {
        let inner = parse_or(cur)?;
        if !cur.eat_symbol(")") {
            return Err(err(cur, "expected ')'"));
        }
        return Ok(inner);
    }
    if cur.eat_keyword("all") {
        return Ok(CodeFilter::All);
    }
    let field_pos = cur.pos();
    let field = match cur.next().map(|t| t.kind) {
        Some(TokenKind::Ident(s)) => s.to_ascii_lowercase(),
        _ => {
            return Err(FilterError {
                position: field_pos,
                message: "expected a field (code_id, string, main_string)".into(),
            })
        }
    };
    let test = parse_test(cur)?;
    match field.as_str() {
        "code_id" => Ok(CodeFilter::CodeId(test)),
        "string" => Ok(CodeFilter::AnyString(test)),
        "main_string" => Ok(CodeFilter::MainString(test)),
        other => Err(FilterError {
            position: field_pos,
            message: format!("unknown field '{other}'"),
        }),
    }
}

fn expect_str(cur: &mut Cursor) -> Result<String, FilterError> {
    let pos = cur.pos();
    match cur.next().map(|t| t.kind) {
        Some(TokenKind::Str(s)) => Ok(s),
        _ => Err(FilterError {
            position: pos,
            message: "expected a quoted string".into(),
        }),
    }
}

fn parse_test(cur: &mut Cursor) -> Result<TextTest, FilterError> {
    if cur.eat_symbol("=") {
        return Ok(TextTest::Equals(expect_str(cur)?));
    }
    if cur.eat_symbol("^=") || cur.eat_keyword("starts_with") {
        return Ok(TextTest::Prefix(expect_str(cur)?));
    }
    if cur.eat_keyword("in") {
        if !cur.eat_symbol("[") {
            return Err(err(cur, "expected '['"));
        }
        let mut set = BTreeSet::new();
        if !cur.eat_symbol("]") {
            loop {
                set.insert(expect_str(cur)?);
                if cur.eat_symbol("]") {
                    break;
                }
                if !cur.eat_symbol(",") {
                    return Err(err(cur, "expected ',' or ']'"));
                }
            }
        }
        return Ok(TextTest::In(set));
    }
    Err(err(cur, "expected '=', '^=', 'starts_with' or 'in'"))
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl fmt::Display for TextTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextTest::Equals(s) => write!(f, "= {}", quote(s)),
            TextTest::Prefix(s) => write!(f, "^= {}", quote(s)),
            TextTest::In(set) => {
                let items: Vec<_> = set.iter().map(|s| quote(s)).collect();
                write!(f, "in [{}]", items.join(", "))
            }
        }
    }
}

impl fmt::Display for CodeFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeFilter::All => write!(f, "all"),
            CodeFilter::CodeId(t) => write!(f, "code_id {t}"),
            CodeFilter::AnyString(t) => write!(f, "string {t}"),
            CodeFilter::MainString(t) => write!(f, "main_string {t}"),
            CodeFilter::And(fs) => join(f, fs, " and "),
            CodeFilter::Or(fs) => join(f, fs, " or "),
            CodeFilter::Not(inner) => write!(f, "not ({inner})"),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, fs: &[CodeFilter], sep: &str) -> fmt::Result {
    let parts: Vec<_> = fs.iter().map(|x| format!("({x})")).collect();
    write!(f, "{}", parts.join(sep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::model::{TermString, TerminologyId};

    fn code(id: &str, strings: &[&str]) -> Code {
        Code {
            code_id: id.into(),
            terminology_id: TerminologyId::new("t"),
            strings: strings
                .iter()
                .enumerate()
                .map(|(i, s)| TermString {
                    text: s.to_string(),
                    source_rank: i as u32,
                })
                .collect(),
            main_string: 0,
        }
    }

    #[test]
    fn prefix_filter_selects_d_codes() {
        let f = CodeFilter::parse("code_id starts_with 'D'").unwrap();
        let codes = [code("D1", &["a"]), code("D2", &["b"]), code("M1", &["c"])];
        let hits: Vec<_> = codes.iter().filter(|c| f.matches(c)).map(|c| c.code_id.as_str()).collect();
        assert_eq!(hits, ["D1", "D2"]);
    }

    #[test]
    fn string_tests_look_at_all_strings_or_main() {
        let c = code("C1", &["myocardial infarction", "heart attack"]);
        assert!(CodeFilter::parse("string = 'heart attack'").unwrap().matches(&c));
        assert!(!CodeFilter::parse("main_string = 'heart attack'").unwrap().matches(&c));
        assert!(CodeFilter::parse("main_string ^= 'myocard'").unwrap().matches(&c));
    }

    #[test]
    fn boolean_combinators_and_membership() {
        let f = CodeFilter::parse("code_id in ['A', 'B'] or not (code_id ^= 'X' and all)").unwrap();
        assert!(f.matches(&code("A", &["s"])));
        assert!(f.matches(&code("Q", &["s"])));
        assert!(!f.matches(&code("X9", &["s"])));
    }

    #[test]
    fn canonical_text_reparses_to_same_filter() {
        let f = CodeFilter::parse("code_id ^= 'D' and (string in ['it''s', 'b'] or not main_string = 'z')").unwrap();
        let again = CodeFilter::parse(&f.to_string()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn errors_carry_positions() {
        let e = CodeFilter::parse("code_id ~ 'D'").unwrap_err();
        assert_eq!(e.position, 8);
        let e = CodeFilter::parse("colour = 'x'").unwrap_err();
        assert_eq!(e.position, 0);
        assert!(CodeFilter::parse("").is_err());
        assert!(CodeFilter::parse("code_id = 'a' extra").is_err());
    }
}

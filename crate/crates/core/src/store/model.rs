use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingVector;
use crate::llm::CostLedger;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

id_type!(TerminologyId);
id_type!(CodeSetId);
id_type!(RunId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermString {
    pub text: String,
    /// Import order; rank 0 is the preferred (main) string.
    pub source_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub code_id: String,
    pub terminology_id: TerminologyId,
    pub strings: Vec<TermString>,
    pub main_string: usize,
}

impl Code {
    pub fn main_text(&self) -> &str {
        &self.strings[self.main_string].text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminology {
    pub id: TerminologyId,
    pub name: String,
    pub codes: BTreeMap<String, Code>,
}

impl Terminology {
    pub fn string_count(&self) -> usize {
        self.codes.values().map(|c| c.strings.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSet {
    pub id: CodeSetId,
    pub name: String,
    pub terminology_id: TerminologyId,
    pub member_code_ids: BTreeSet<String>,
    /// Canonical text of the filter that selected the members.
    pub source_filter: String,
    pub expansion_style: Option<String>,
    /// Set when the filter matched nothing.
    pub empty_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    FreeText,
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finalization {
    Single,
    Vote,
    Average,
    Sum,
    BooleanVote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject_code_id: String,
    pub predicate: String,
    pub object_value: String,
    pub object_kind: ObjectKind,
    pub run_id: RunId,
    pub finalization: Finalization,
    /// The under-beceptive object this triple's object replaced.
    pub replaced_parent: Option<String>,
}

impl Triple {
    pub(crate) fn key(&self) -> (String, String, String) {
        (
            self.subject_code_id.clone(),
            self.predicate.clone(),
            self.object_value.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Completed,
    KilledBudget,
    Failed,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            RunStatus::Completed | RunStatus::KilledBudget | RunStatus::Failed
        )
    }

    fn order(self) -> u8 {
        match self {
            RunStatus::Pending => 0,
            RunStatus::Running => 1,
            _ => 2,
        }
    }

    /// Transitions only move forward: pending, running, then one terminal state.
    pub fn can_become(self, next: RunStatus) -> bool {
        !self.is_terminal() && next.order() > self.order()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Pending => "pending",
            RunStatus::Running => "running",
            RunStatus::Completed => "completed",
            RunStatus::KilledBudget => "killed_budget",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub id: RunId,
    pub code_set_id: CodeSetId,
    pub spec_ids: Vec<String>,
    pub status: RunStatus,
    pub ledger: Option<CostLedger>,
    pub started_at: Option<u64>,
    pub ended_at: Option<u64>,
}

/// Cell value of a custom table or query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Number(f64),
    Text(String),
}

impl Value {
    pub fn as_text(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Number(n) => n.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTable {
    pub name: String,
    pub version: u32,
    pub defining_query: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionString {
    pub source_text: String,
    pub style: String,
    pub model_id: String,
    pub generated_texts: Vec<String>,
    /// Mean of the generated texts' CLS vectors.
    pub summary: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentSource {
    Inline,
    Requery,
    DbLookup,
}

/// One beceptivity check made during a run. `value` is `None` when the
/// assessment failed, which counts as under-beceptive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub run_id: RunId,
    pub subject_code_id: String,
    pub predicate: String,
    pub text: String,
    pub value: Option<f64>,
    pub min_required: f64,
    pub source: AssessmentSource,
}

impl AssessmentRecord {
    pub fn is_under(&self) -> bool {
        self.value.is_none_or(|v| v < self.min_required)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub run_id: RunId,
    pub subject_code_id: String,
    pub predicate: String,
    pub parent: String,
    pub child: String,
    /// Depth of `child`; original response items are depth 0.
    pub depth: u32,
}

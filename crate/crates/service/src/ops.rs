//! Request payloads shared by the CLI and the HTTP layer, so both drive the
//! same workbench calls with the same inputs.

use std::path::{Path, PathBuf};

use lexigraph_core::engine::{RunConfig, RunProgress};
use lexigraph_core::matcher::MatchParams;
use lexigraph_core::store::{DelimitedOptions, ImportRow, RunId};
use lexigraph_core::Workbench;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportRequest {
    pub name: String,
    /// Server-side file to read. Either this or `rows`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub rows: Option<Vec<ImportRow>>,
    /// `tab` (default), `comma`, or a single character.
    #[serde(default)]
    pub delimiter: Option<String>,
    #[serde(default)]
    pub has_header: bool,
}

pub fn parse_delimiter(d: Option<&str>) -> Result<u8, ServiceError> {
    match d.unwrap_or("tab") {
        "tab" | "\t" | "\\t" => Ok(b'\t'),
        "comma" | "," => Ok(b','),
        "pipe" | "|" => Ok(b'|'),
        other if other.len() == 1 && other.is_ascii() => Ok(other.as_bytes()[0]),
        other => Err(ServiceError::BadRequest(format!("unsupported delimiter '{other}'"))),
    }
}

impl ImportRequest {
    pub fn execute(&self, wb: &Workbench) -> Result<Value, ServiceError> {
        let summary = match (&self.path, &self.rows) {
            (Some(path), None) => {
                let opts = DelimitedOptions {
                    delimiter: parse_delimiter(self.delimiter.as_deref())?,
                    has_header: self.has_header,
                };
                wb.import_file(&self.name, path, &opts)?
            }
            (None, Some(rows)) => wb.import_terminology(&self.name, rows.iter().cloned().map(Ok).collect())?,
            _ => return Err(ServiceError::BadRequest("give exactly one of 'path' or 'rows'".into())),
        };
        Ok(serde_json::to_value(summary).expect("serializable"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSetRequest {
    /// Terminology id or name.
    pub terminology: String,
    pub name: String,
    #[serde(default = "all_filter")]
    pub filter: String,
    #[serde(default)]
    pub expansion_style: Option<String>,
}

fn all_filter() -> String {
    "all".into()
}

impl CodeSetRequest {
    pub fn execute(&self, wb: &Workbench) -> Result<Value, ServiceError> {
        let out = wb.create_code_set(&self.terminology, &self.name, &self.filter, self.expansion_style.as_deref())?;
        Ok(serde_json::to_value(out).expect("serializable"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchBatchRequest {
    /// Code set id or name to match against.
    pub code_set: String,
    /// Match every free-text object of this run...
    #[serde(default)]
    pub run_id: Option<String>,
    /// ...or these strings.
    #[serde(default)]
    pub objects: Option<Vec<String>>,
    #[serde(flatten)]
    pub params: MatchParams,
}

impl MatchBatchRequest {
    pub fn objects(&self, wb: &Workbench) -> Result<Vec<String>, ServiceError> {
        match (&self.run_id, &self.objects) {
            (Some(run), None) => Ok(wb.run_objects(&RunId::new(run.as_str()))?),
            (None, Some(objects)) => Ok(objects.clone()),
            _ => Err(ServiceError::BadRequest("give exactly one of 'run_id' or 'objects'".into())),
        }
    }

    pub fn execute(&self, wb: &Workbench) -> Result<Value, ServiceError> {
        let objects = self.objects(wb)?;
        let out = wb.match_objects(&objects, &self.code_set, &self.params)?;
        Ok(serde_json::to_value(out).expect("serializable"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTableRequest {
    pub name: String,
    pub query: String,
}

impl CustomTableRequest {
    pub fn execute(&self, wb: &Workbench) -> Result<Value, ServiceError> {
        let t = wb.materialize(&self.name, &self.query)?;
        Ok(serde_json::json!({
            "name": t.name,
            "version": t.version,
            "columns": t.columns,
            "rows": t.rows.len(),
        }))
    }
}

/// Reads a run configuration; `.toml` files are TOML, anything else is
/// tried as JSON first and TOML second.
pub fn load_run_config(path: &Path) -> Result<RunConfig, ServiceError> {
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::config(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        return toml::from_str(&text).map_err(|e| ServiceError::config(path, e));
    }
    match serde_json::from_str(&text) {
        Ok(cfg) => Ok(cfg),
        Err(json_err) => {
            let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            if is_json {
                return Err(ServiceError::config(path, json_err));
            }
            toml::from_str(&text).map_err(|toml_err| {
                ServiceError::config(path, format!("neither JSON ({json_err}) nor TOML ({toml_err})"))
            })
        }
    }
}

/// Starts and executes a run, reporting progress through `progress`.
pub fn run_to_completion(
    wb: &Workbench,
    cfg: &RunConfig,
    progress: Option<&(dyn Fn(&RunProgress) + Sync)>,
) -> Result<lexigraph_core::engine::RunReport, ServiceError> {
    let run = wb.start_run(cfg)?;
    Ok(wb.execute_run(&run.id, cfg, progress)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiters() {
        assert_eq!(parse_delimiter(None).unwrap(), b'\t');
        assert_eq!(parse_delimiter(Some("comma")).unwrap(), b',');
        assert_eq!(parse_delimiter(Some(";")).unwrap(), b';');
        assert!(parse_delimiter(Some("ab")).is_err());
    }

    #[test]
    fn match_request_flattens_params() {
        let r: MatchBatchRequest = serde_json::from_str(r#"{"code_set": "all", "objects": ["x"], "n": 2}"#).unwrap();
        assert_eq!(r.params.n, 2);
        assert_eq!(r.params.z, MatchParams::default().z);
    }
}

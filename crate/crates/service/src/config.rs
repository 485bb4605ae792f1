//! Service settings: a TOML file, then `LEXIGRAPH_*` environment overrides.
//!
//! ```toml
//! store_path = "lexigraph.json"
//! bind = "127.0.0.1:8080"
//! workers = 4
//!
//! [provider]
//! transcript = "transcript.jsonl"
//! model = "replay"
//!
//! [budget]
//! price_per_prompt_token = "0.000001"
//! price_per_completion_token = "0.000002"
//! dollar_limit = "5.00"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lexigraph_core::WorkbenchConfig;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const ENV_PREFIX: &str = "LEXIGRAPH_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    #[serde(flatten)]
    pub workbench: WorkbenchConfig,
    pub bind: String,
    /// Directory of static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            workbench: WorkbenchConfig::default(),
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::config(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| ServiceError::config(path, e))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    /// Makes relative file paths relative to `base` (the settings file's
    /// directory) rather than the working directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut().filter(|v| v.is_relative()) {
                *v = base.join(&*v);
            }
        };
        let wb = &mut self.workbench;
        fix(&mut wb.store_path);
        fix(&mut wb.provider.transcript);
        fix(&mut wb.embedder.lookup_file);
        fix(&mut wb.hierarchy);
        fix(&mut self.static_dir);
    }

    /// File (if any) plus the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Applies overrides from `get`, keyed by full variable name.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        let var = |name: &str| get(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        fn parse<T: FromStr>(name: &str, v: &str) -> Result<T, ServiceError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| ServiceError::Config {
                path: format!("{ENV_PREFIX}{name}"),
                message: format!("'{v}': {e}"),
            })
        }
        let wb = &mut self.workbench;
        if let Some(v) = var("STORE") {
            wb.store_path = Some(v.into());
        }
        if let Some(v) = var("TRANSCRIPT") {
            wb.provider.transcript = Some(v.into());
        }
        if let Some(v) = var("MODEL") {
            wb.provider.model = v;
        }
        if let Some(v) = var("STRUCTURED_OUTPUT") {
            wb.provider.structured_output = parse("STRUCTURED_OUTPUT", &v)?;
        }
        if let Some(v) = var("PRICE_PROMPT") {
            wb.budget.price_per_prompt_token = parse::<Decimal>("PRICE_PROMPT", &v)?;
        }
        if let Some(v) = var("PRICE_COMPLETION") {
            wb.budget.price_per_completion_token = parse::<Decimal>("PRICE_COMPLETION", &v)?;
        }
        if let Some(v) = var("DOLLAR_LIMIT") {
            wb.budget.dollar_limit = Some(parse::<Decimal>("DOLLAR_LIMIT", &v)?);
        }
        if let Some(v) = var("WORKERS") {
            wb.workers = parse("WORKERS", &v)?;
        }
        if let Some(v) = var("EMBEDDER_DIMENSION") {
            wb.embedder.dimension = parse("EMBEDDER_DIMENSION", &v)?;
        }
        if let Some(v) = var("BIND") {
            self.bind = v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn toml_with_sections() {
        let cfg: ServiceConfig = toml::from_str(
            r#"
            store_path = "s.json"
            bind = "0.0.0.0:9000"
            [provider]
            transcript = "t.jsonl"
            structured_output = true
            [budget]
            price_per_prompt_token = "0.001"
            price_per_completion_token = "0.002"
            dollar_limit = "1.50"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.workbench.store_path, Some(PathBuf::from("s.json")));
        assert!(cfg.workbench.provider.structured_output);
        assert_eq!(cfg.workbench.budget.dollar_limit, Some(Decimal::new(150, 2)));
        assert_eq!(cfg.bind, "0.0.0.0:9000");
        assert_eq!(cfg.workbench.embedder, Default::default());
    }

    #[test]
    fn environment_overrides_file_values() {
        let env: HashMap<&str, &str> = HashMap::from([
            ("LEXIGRAPH_STORE", "other.json"),
            ("LEXIGRAPH_DOLLAR_LIMIT", "2.5"),
            ("LEXIGRAPH_PRICE_PROMPT", "0.01"),
            ("LEXIGRAPH_MODEL", "m2"),
        ]);
        let mut cfg = ServiceConfig::default();
        cfg.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.workbench.store_path, Some(PathBuf::from("other.json")));
        assert_eq!(cfg.workbench.budget.dollar_limit, Some(Decimal::new(25, 1)));
        assert_eq!(cfg.workbench.budget.price_per_prompt_token, Decimal::new(1, 2));
        assert_eq!(cfg.workbench.provider.model, "m2");
    }

    #[test]
    fn bad_override_names_the_variable() {
        let mut cfg = ServiceConfig::default();
        let err = cfg
            .apply_env(|k| (k == "LEXIGRAPH_WORKERS").then(|| "many".to_string()))
            .unwrap_err();
        assert!(err.to_string().contains("LEXIGRAPH_WORKERS"));
    }

    #[test]
    fn relative_paths_follow_the_settings_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("settings.toml");
        std::fs::write(&p, "store_path = \"s.json\"\n[provider]\ntranscript = \"/abs/t.jsonl\"\n").unwrap();
        let cfg = ServiceConfig::from_file(&p).unwrap();
        assert_eq!(cfg.workbench.store_path, Some(dir.path().join("s.json")));
        assert_eq!(cfg.workbench.provider.transcript, Some(PathBuf::from("/abs/t.jsonl")));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = ServiceConfig::from_file(Path::new("/nonexistent/lexigraph.toml")).unwrap_err();
        assert_eq!(err.kind(), "ConfigError");
        assert!(err.to_string().contains("/nonexistent/lexigraph.toml"));
    }
}

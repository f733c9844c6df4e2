//! Service configuration: a TOML file plus `TOKENSTEER_*` environment
//! overrides.
//!
//! An override names a field by its path with `__` between the parts, for
//! example `TOKENSTEER_HIGHLIGHT__TAU=0.3` or
//! `TOKENSTEER_BACKEND__BASE_URL=http://gpu:8000`. Values are read as TOML
//! scalars, falling back to a plain string.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::RemoteAnalyzerSettings;
use crate::backend::{BackendSettings, GenerationParams};
use crate::decoding::HighlightConfig;
use crate::expander::ExpanderConfig;

pub const ENV_PREFIX: &str = "TOKENSTEER_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("environment override {var}: {reason}")]
    Env { var: String, reason: String },
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzerMode {
    Remote,
    #[default]
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub mode: AnalyzerMode,
    pub remote: RemoteAnalyzerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub listen: String,
    pub log_dir: Option<PathBuf>,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection {
            listen: "127.0.0.1:8080".into(),
            log_dir: Some(PathBuf::from("logs")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub service: ServiceSection,
    pub backend: BackendSettings,
    pub generation: GenerationParams,
    pub highlight: HighlightConfig,
    pub expander: ExpanderConfig,
    pub analysis: AnalysisConfig,
}

fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, var: &str, raw: &str) -> Result<(), ConfigError> {
    let path: Vec<String> = var[ENV_PREFIX.len()..]
        .split("__")
        .map(str::to_ascii_lowercase)
        .collect();
    if path.iter().any(String::is_empty) {
        return Err(ConfigError::Env {
            var: var.to_string(),
            reason: "empty path segment".into(),
        });
    }
    let (last, parents) = path.split_last().expect("split yields one part");
    let mut cur = table;
    for part in parents {
        let next = cur
            .entry(part.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next.as_table_mut().ok_or_else(|| ConfigError::Env {
            var: var.to_string(),
            reason: format!("`{part}` is not a table"),
        })?;
    }
    cur.insert(last.clone(), env_value(raw));
    Ok(())
}

impl Config {
    /// Parses TOML text, applies overrides and validates.
    pub fn from_sources<I, K, V>(toml_src: &str, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table =
            toml::from_str(toml_src).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut vars: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.as_ref().starts_with(ENV_PREFIX))
            .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
            .collect();
        vars.sort();
        for (k, v) in &vars {
            apply_override(&mut table, k, v)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if given) and the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let src = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Config::from_sources(&src, std::env::vars())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.service
            .listen
            .parse()
            .map_err(|e| invalid("service.listen", format!("{e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        check_url("backend.base_url", &self.backend.base_url)?;
        if !self.backend.completions_path.starts_with('/') {
            return Err(invalid("backend.completions_path", "must start with `/`"));
        }
        if self.backend.completion_timeout_ms == 0 {
            return Err(invalid("backend.completion_timeout_ms", "must be positive"));
        }
        if self.backend.preview_timeout_ms == 0 {
            return Err(invalid("backend.preview_timeout_ms", "must be positive"));
        }
        if self.backend.preview_max_tokens == 0 {
            return Err(invalid("backend.preview_max_tokens", "must be positive"));
        }
        let g = &self.generation;
        if g.max_tokens == 0 {
            return Err(invalid("generation.max_tokens", "must be positive"));
        }
        if !g.temperature.is_finite() || g.temperature < 0.0 {
            return Err(invalid("generation.temperature", "must be >= 0"));
        }
        if g.top_k < 2 {
            return Err(invalid("generation.top_k", format!("must be >= 2, got {}", g.top_k)));
        }
        if g.n_samples == 0 {
            return Err(invalid("generation.n_samples", "must be >= 1"));
        }
        let h = &self.highlight;
        for (name, v) in [("alpha", h.alpha), ("beta", h.beta), ("tau", h.tau), ("h_max", h.h_max)] {
            if !v.is_finite() {
                return Err(invalid(&format!("highlight.{name}"), "must be finite"));
            }
        }
        if h.alpha < 0.0 {
            return Err(invalid("highlight.alpha", "must be >= 0"));
        }
        if !(h.beta > 0.0 && h.beta <= 1.0) {
            return Err(invalid("highlight.beta", "must be in (0, 1]"));
        }
        if h.tau < 0.0 {
            return Err(invalid("highlight.tau", "must be >= 0"));
        }
        if h.h_max <= 0.0 {
            return Err(invalid("highlight.h_max", "must be > 0"));
        }
        if h.tau >= h.h_max {
            return Err(invalid(
                "highlight.tau",
                format!("must be below highlight.h_max ({})", h.h_max),
            ));
        }
        let e = &self.expander;
        if e.preview_concurrency == 0 {
            return Err(invalid("expander.preview_concurrency", "must be >= 1"));
        }
        if e.assessment_concurrency == 0 {
            return Err(invalid("expander.assessment_concurrency", "must be >= 1"));
        }
        if e.n_samples == 0 {
            return Err(invalid("expander.n_samples", "must be >= 1"));
        }
        if !e.regen_temperature.is_finite() || e.regen_temperature < 0.0 {
            return Err(invalid("expander.regen_temperature", "must be >= 0"));
        }
        if e.summary_columns < 4 {
            return Err(invalid("expander.summary_columns", "must be >= 4"));
        }
        if self.analysis.mode == AnalyzerMode::Remote {
            check_url("analysis.remote.base_url", &self.analysis.remote.base_url)?;
            if self.analysis.remote.timeout_ms == 0 {
                return Err(invalid("analysis.remote.timeout_ms", "must be positive"));
            }
        }
        Ok(())
    }
}

fn check_url(field: &str, raw: &str) -> Result<(), ConfigError> {
    let url = reqwest::Url::parse(raw).map_err(|e| invalid(field, format!("{e}")))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(invalid(field, "scheme must be http or https"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO_ENV: [(&str, &str); 0] = [];

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::from_sources("", NO_ENV).unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.generation.top_k, 10);
        assert_eq!(cfg.highlight.tau, 0.25);
        assert_eq!(cfg.analysis.mode, AnalyzerMode::Heuristic);
    }

    #[test]
    fn file_and_env_overrides() {
        let src = "[highlight]\ntau = 0.3\n[backend]\nbase_url = \"http://a:1\"\n";
        let env = [
            ("TOKENSTEER_BACKEND__BASE_URL", "http://gpu:9000"),
            ("TOKENSTEER_GENERATION__TOP_K", "8"),
            ("TOKENSTEER_ANALYSIS__MODE", "remote"),
            ("UNRELATED", "x"),
        ];
        let cfg = Config::from_sources(src, env).unwrap();
        assert_eq!(cfg.highlight.tau, 0.3);
        assert_eq!(cfg.backend.base_url, "http://gpu:9000");
        assert_eq!(cfg.generation.top_k, 8);
        assert_eq!(cfg.analysis.mode, AnalyzerMode::Remote);
    }

    #[test]
    fn errors_name_the_field() {
        let err = Config::from_sources("[highlight]\ntau = 2.0\n", NO_ENV).unwrap_err();
        assert_eq!(
            err.to_string(),
            "invalid config field `highlight.tau`: must be below highlight.h_max (1.4)"
        );
        let err = Config::from_sources("", [("TOKENSTEER_GENERATION__TOP_K", "1")]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "generation.top_k"));
        let err = Config::from_sources("[service]\nlisten = \"nope\"\n", NO_ENV).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "service.listen"));
        let err = Config::from_sources("[backend]\nbase_url = \"ftp://x\"\n", NO_ENV).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "backend.base_url"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Config::from_sources("[highlight]\ntua = 0.3\n", NO_ENV).unwrap_err();
        assert!(err.to_string().contains("tua"), "{err}");
        let err = Config::from_sources("[highlight]\ntau = 0.3\n", [("TOKENSTEER_HIGHLIGHT__TAU__X", "1")])
            .unwrap_err();
        assert!(matches!(err, ConfigError::Env { .. }));
    }
}

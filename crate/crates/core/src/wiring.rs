//! Builds a ready [`SessionManager`] from a [`Config`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::{AnalysisPrompt, Analyzer, DedupAnalyzer, HeuristicAnalyzer, RemoteAnalyzer};
use crate::backend::{CompletionBackend, HttpBackend, ScriptedBackend, TraceError};
use crate::config::{AnalyzerMode, Config, ConfigError};
use crate::expander::Expander;
use crate::session::{ManagerConfig, SessionManager};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load scripted traces: {0}")]
    Traces(#[from] TraceError),
    #[error("cannot read analysis prompt {path}: {source}")]
    Prompt {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Completion backend named by the config, or recorded traces from
/// `scripted` when given.
pub fn backend(cfg: &Config, scripted: Option<&Path>) -> Result<Arc<dyn CompletionBackend>, BuildError> {
    Ok(match scripted {
        Some(dir) => Arc::new(ScriptedBackend::from_dir(dir)?),
        None => Arc::new(HttpBackend::new(cfg.backend.clone())),
    })
}

pub fn analyzer(cfg: &Config) -> Result<Arc<dyn Analyzer>, BuildError> {
    Ok(match cfg.analysis.mode {
        AnalyzerMode::Heuristic => Arc::new(HeuristicAnalyzer),
        AnalyzerMode::Remote => {
            let remote = &cfg.analysis.remote;
            let prompt = match &remote.prompt_path {
                Some(path) => AnalysisPrompt::load(path).map_err(|source| BuildError::Prompt {
                    path: path.clone(),
                    source,
                })?,
                None => AnalysisPrompt::default(),
            };
            Arc::new(RemoteAnalyzer::new(remote.clone(), prompt))
        }
    })
}

pub fn expander(cfg: &Config, scripted: Option<&Path>) -> Result<Arc<Expander>, BuildError> {
    cfg.validate()?;
    Ok(Arc::new(Expander::new(
        backend(cfg, scripted)?,
        Arc::new(DedupAnalyzer::new(analyzer(cfg)?)),
        cfg.generation,
        cfg.expander,
    )))
}

pub fn manager(cfg: &Config, scripted: Option<&Path>) -> Result<SessionManager, BuildError> {
    Ok(SessionManager::new(
        expander(cfg, scripted)?,
        ManagerConfig {
            highlight: cfg.highlight,
            log_dir: cfg.service.log_dir.clone(),
        },
    ))
}

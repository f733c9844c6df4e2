use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One prompt: a document and the cursor position (in characters) where
/// the completion is requested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub id: String,
    pub document: String,
    pub cursor_offset: usize,
    #[serde(default)]
    pub language_hint: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("corpus does not parse: {0}")]
    Parse(String),
    #[error("entry {index}: id is empty")]
    EmptyId { index: usize },
    #[error("entry {index}: duplicate id {id:?}")]
    DuplicateId { index: usize, id: String },
}

/// Parses a corpus file: a JSON array of entries with unique ids.
pub fn parse_corpus(src: &str) -> Result<Vec<CorpusEntry>, CorpusError> {
    let entries: Vec<CorpusEntry> =
        serde_json::from_str(src).map_err(|e| CorpusError::Parse(e.to_string()))?;
    let mut seen = HashSet::new();
    for (index, e) in entries.iter().enumerate() {
        if e.id.is_empty() {
            return Err(CorpusError::EmptyId { index });
        }
        if !seen.insert(e.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                index,
                id: e.id.clone(),
            });
        }
    }
    Ok(entries)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let src = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&src)
}

use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tokensteer_core::backend::{CompletionBackend, CompletionContext, GenerationParams};
use tokensteer_core::decoding::{Category, StepDistribution};
use tokensteer_core::expander::{profile_of, AssessmentState};
use tokensteer_core::session::{FinalizeAction, SessionManager};

use crate::corpus::CorpusEntry;
use crate::report::{CategoryHistogram, EntryData, EntryError};

async fn profile_entry(mgr: &SessionManager, entry: &CorpusEntry) -> Result<EntryData, String> {
    let id = mgr
        .create_session(&entry.document, entry.cursor_offset, &entry.language_hint)
        .map_err(|e| e.to_string())?
        .session_id;
    let result = async {
        mgr.run_completion(&id).await.map_err(|e| e.to_string())?;
        let view = mgr.wait_settled(&id).await.map_err(|e| e.to_string())?;
        let completion = view.completion.ok_or("no completion")?;
        let mut steps = Vec::with_capacity(completion.steps.len());
        let mut profiles = Vec::with_capacity(completion.steps.len());
        let mut categories = CategoryHistogram::default();
        for s in &completion.steps {
            let alts = mgr.list_alternatives(&id, s.index).map_err(|e| e.to_string())?;
            for a in &alts {
                match &a.assessment {
                    AssessmentState::Ready { assessment, .. } => match assessment.category {
                        Category::Significant => categories.significant += 1,
                        Category::Minor => categories.minor += 1,
                        Category::Incorrect => categories.incorrect += 1,
                    },
                    _ => categories.unavailable += 1,
                }
            }
            profiles.push(profile_of(&alts));
            steps.push(StepDistribution {
                step_index: s.index,
                candidates: s.candidates.clone(),
                chosen: s.chosen_rank,
            });
        }
        Ok(EntryData {
            id: entry.id.clone(),
            steps,
            profiles,
            categories,
        })
    }
    .await;
    let _ = mgr.finalize(&id, FinalizeAction::Dismiss).await;
    result
}

/// Runs every entry through the pipeline, at most `concurrency` at a time.
/// Failures are collected per entry; the run always completes.
pub async fn collect(
    mgr: Arc<SessionManager>,
    entries: &[CorpusEntry],
    concurrency: usize,
) -> (Vec<EntryData>, Vec<EntryError>) {
    let results: Vec<(String, Result<EntryData, String>)> = stream::iter(entries.iter().cloned())
        .map(|entry| {
            let mgr = mgr.clone();
            async move {
                let r = profile_entry(&mgr, &entry).await;
                (entry.id, r)
            }
        })
        .buffer_unordered(concurrency.max(1))
        .collect()
        .await;
    let mut data = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in results {
        match r {
            Ok(d) => data.push(d),
            Err(error) => errors.push(EntryError { id, error }),
        }
    }
    data.sort_by(|a, b| a.id.cmp(&b.id));
    errors.sort_by(|a, b| a.id.cmp(&b.id));
    (data, errors)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub id: String,
    pub completions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub requested: usize,
    pub entries: Vec<BaselineEntry>,
    pub errors: Vec<EntryError>,
}

/// Requests `n` whole completions per entry, side by side, with no
/// token-level data.
pub async fn baseline(
    backend: Arc<dyn CompletionBackend>,
    params: &GenerationParams,
    entries: &[CorpusEntry],
    n: usize,
) -> BaselineReport {
    let mut out = BaselineReport {
        requested: n,
        entries: Vec::new(),
        errors: Vec::new(),
    };
    for entry in entries {
        let chars = entry.document.chars().count();
        if entry.cursor_offset > chars {
            out.errors.push(EntryError {
                id: entry.id.clone(),
                error: format!("cursor offset {} is beyond the document ({chars} characters)", entry.cursor_offset),
            });
            continue;
        }
        let split = entry
            .document
            .char_indices()
            .nth(entry.cursor_offset)
            .map_or(entry.document.len(), |(b, _)| b);
        let ctx = CompletionContext::new(
            &entry.document[..split],
            &entry.document[split..],
            entry.language_hint.as_str(),
        );
        match backend.samples(&ctx, "", n, params).await {
            Ok(batch) => out.entries.push(BaselineEntry {
                id: entry.id.clone(),
                completions: batch.samples.into_iter().map(|c| c.text).collect(),
            }),
            Err(e) => out.errors.push(EntryError {
                id: entry.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    out.entries.sort_by(|a, b| a.id.cmp(&b.id));
    out.errors.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

//! Alternatives for each step, and regeneration after a replacement.
//!
//! Expansion fans out one preview request per alternative and, once a
//! preview is in, one assessment request. Results stream back as
//! [`ExpansionUpdate`]s and fill a fixed, probability-ordered list in place.
//! Regeneration samples several continuations after the replaced token and
//! keeps the one closest to the text it replaces.

pub mod distance;

use std::sync::Arc;

use futures::stream::{FuturesUnordered, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{mpsc, Semaphore};
use tokio_util::sync::CancellationToken;

use crate::analysis::{truncate_summary, AlternativeAssessment, AssessmentRequest, DedupAnalyzer};
use crate::backend::{
    request_preview, request_suffix_samples, truncate_preview, BaseCompletion, CompletionBackend,
    CompletionContext, GenerationParams,
};
use crate::decoding::{Category, ImportanceProfile, StepDistribution};

pub use distance::{edit_distance, edit_distance_within, select_closest_suffix, Closest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum PreviewState {
    Pending,
    Ready { text: String },
    Unavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AssessmentState {
    Pending,
    Ready {
        assessment: AlternativeAssessment,
        /// Truncated summary for inline display.
        display_summary: String,
        /// Judged without a real preview.
        low_confidence: bool,
    },
    Unavailable { reason: String },
}

impl AssessmentState {
    pub fn is_settled(&self) -> bool {
        !matches!(self, AssessmentState::Pending)
    }

    pub fn assessment(&self) -> Option<&AlternativeAssessment> {
        match self {
            AssessmentState::Ready { assessment, .. } => Some(assessment),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativePreview {
    pub alt_rank: usize,
    pub token_text: String,
    pub probability: f64,
    pub preview: PreviewState,
    pub assessment: AssessmentState,
}

impl AlternativePreview {
    pub fn is_incorrect(&self) -> bool {
        self.assessment
            .assessment()
            .is_some_and(|a| a.category == Category::Incorrect)
    }
}

/// Pending entries for every alternative of a step, most likely first.
pub fn skeleton(step: &StepDistribution) -> Vec<AlternativePreview> {
    step.alternatives()
        .map(|c| AlternativePreview {
            alt_rank: c.rank,
            token_text: c.text.clone(),
            probability: c.prob,
            preview: PreviewState::Pending,
            assessment: AssessmentState::Pending,
        })
        .collect()
}

/// Importance profile from whatever assessments have arrived. Missing or
/// failed assessments count as Minor with score 0.
pub fn profile_of(entries: &[AlternativePreview]) -> ImportanceProfile {
    ImportanceProfile::new(entries.iter().map(|e| match e.assessment.assessment() {
        Some(a) => (a.category, a.importance_score),
        None => (Category::Minor, 0.0),
    }))
}

pub fn all_settled(entries: &[AlternativePreview]) -> bool {
    entries.iter().all(|e| e.assessment.is_settled())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpansionUpdate {
    Preview {
        step: usize,
        rank: usize,
        state: PreviewState,
    },
    Assessment {
        step: usize,
        rank: usize,
        state: AssessmentState,
    },
}

impl ExpansionUpdate {
    /// Applies the update to the matching entry; returns false if none matches.
    pub fn apply(&self, lists: &mut [Vec<AlternativePreview>]) -> bool {
        let (step, rank) = match self {
            ExpansionUpdate::Preview { step, rank, .. }
            | ExpansionUpdate::Assessment { step, rank, .. } => (*step, *rank),
        };
        let Some(entry) = lists
            .get_mut(step)
            .and_then(|l| l.iter_mut().find(|e| e.alt_rank == rank))
        else {
            return false;
        };
        match self {
            ExpansionUpdate::Preview { state, .. } => entry.preview = state.clone(),
            ExpansionUpdate::Assessment { state, .. } => entry.assessment = state.clone(),
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpanderConfig {
    pub preview_concurrency: usize,
    pub assessment_concurrency: usize,
    pub n_samples: usize,
    pub regen_temperature: f64,
    pub summary_columns: usize,
    /// Characters of document prefix handed to the analyzer.
    pub context_chars: usize,
}

impl Default for ExpanderConfig {
    fn default() -> Self {
        ExpanderConfig {
            preview_concurrency: 4,
            assessment_concurrency: 6,
            n_samples: 10,
            regen_temperature: 0.8,
            summary_columns: 60,
            context_chars: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationResult {
    pub new_completion: BaseCompletion,
    pub chosen_sample_index: usize,
    pub distance_to_base: usize,
    pub edited_step_index: usize,
    pub samples_received: usize,
    pub samples_requested: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("step {step} is out of range (completion has {len} steps)")]
    InvalidStep { step: usize, len: usize },
    #[error("rank {rank} is not a selectable alternative at step {step}")]
    InvalidAlternative { step: usize, rank: usize },
    #[error("regeneration failed: {0}")]
    Failed(String),
}

fn tail_chars(s: &str, n: usize) -> &str {
    match s.char_indices().rev().nth(n.saturating_sub(1)) {
        Some((i, _)) if n > 0 => &s[i..],
        _ if n == 0 => "",
        _ => s,
    }
}

pub struct Expander {
    backend: Arc<dyn CompletionBackend>,
    analyzer: Arc<DedupAnalyzer>,
    params: GenerationParams,
    cfg: ExpanderConfig,
}

impl Expander {
    pub fn new(
        backend: Arc<dyn CompletionBackend>,
        analyzer: Arc<DedupAnalyzer>,
        params: GenerationParams,
        cfg: ExpanderConfig,
    ) -> Self {
        Expander {
            backend,
            analyzer,
            params,
            cfg,
        }
    }

    pub fn backend(&self) -> &Arc<dyn CompletionBackend> {
        &self.backend
    }

    pub fn analyzer(&self) -> &Arc<DedupAnalyzer> {
        &self.analyzer
    }

    pub fn params(&self) -> &GenerationParams {
        &self.params
    }

    pub fn config(&self) -> &ExpanderConfig {
        &self.cfg
    }

    /// Builds the analysis request for one alternative. With no preview the
    /// alternative is spliced into the original line instead.
    pub fn assessment_request(
        &self,
        ctx: &CompletionContext,
        completion: &BaseCompletion,
        step: usize,
        alt_text: &str,
        preview: Option<&str>,
    ) -> AssessmentRequest {
        let before = completion.text_before(step);
        let after = completion.text_after(step);
        let full_prefix = format!("{}{}", ctx.prefix, before);
        let line_prefix = full_prefix
            .rsplit_once('\n')
            .map_or(full_prefix.as_str(), |(_, l)| l)
            .to_string();
        let chosen = completion.steps[step].chosen_text();
        AssessmentRequest {
            base_completion: completion.text.clone(),
            top_token: chosen.to_string(),
            alternative_token: alt_text.to_string(),
            preview: preview
                .map(str::to_string)
                .unwrap_or_else(|| truncate_preview(alt_text, &after)),
            surrounding_context: tail_chars(&ctx.prefix, self.cfg.context_chars).to_string(),
            line_prefix,
            base_preview: truncate_preview(chosen, &after),
            language_hint: ctx.language_hint.clone(),
            preview_available: preview.is_some(),
        }
    }

    /// Runs previews and assessments for every alternative of `steps`,
    /// reporting each result on `tx`. Stops early when `cancel` fires.
    pub async fn expand(
        &self,
        session: &str,
        ctx: &CompletionContext,
        completion: &BaseCompletion,
        steps: &[usize],
        tx: mpsc::UnboundedSender<ExpansionUpdate>,
        cancel: CancellationToken,
    ) {
        let preview_sem = Semaphore::new(self.cfg.preview_concurrency.max(1));
        let assess_sem = Semaphore::new(self.cfg.assessment_concurrency.max(1));
        let mut work = FuturesUnordered::new();
        for &step in steps {
            let Some(dist) = completion.steps.get(step) else {
                continue;
            };
            let before = completion.text_before(step);
            for alt in dist.alternatives() {
                let (rank, text) = (alt.rank, alt.text.clone());
                let before = before.clone();
                let (tx, preview_sem, assess_sem) = (&tx, &preview_sem, &assess_sem);
                work.push(async move {
                    let preview = {
                        let _permit = preview_sem.acquire().await.expect("semaphore open");
                        request_preview(self.backend.as_ref(), ctx, &before, &text).await
                    };
                    let (state, preview_text) = match preview {
                        Ok(p) => (PreviewState::Ready { text: p.clone() }, Some(p)),
                        Err(e) => (
                            PreviewState::Unavailable {
                                reason: e.to_string(),
                            },
                            None,
                        ),
                    };
                    let _ = tx.send(ExpansionUpdate::Preview { step, rank, state });

                    let req =
                        self.assessment_request(ctx, completion, step, &text, preview_text.as_deref());
                    let result = {
                        let _permit = assess_sem.acquire().await.expect("semaphore open");
                        self.analyzer.assess(session, step, rank, &req).await
                    };
                    let state = match result {
                        Ok(a) => AssessmentState::Ready {
                            display_summary: truncate_summary(&a.summary, self.cfg.summary_columns),
                            assessment: a,
                            low_confidence: !req.preview_available,
                        },
                        Err(e) => AssessmentState::Unavailable {
                            reason: e.to_string(),
                        },
                    };
                    let _ = tx.send(ExpansionUpdate::Assessment { step, rank, state });
                });
            }
        }
        tokio::select! {
            _ = cancel.cancelled() => {}
            _ = async { while work.next().await.is_some() {} } => {}
        }
    }

    /// Expands one step and waits for every entry to settle.
    pub async fn expand_step(
        &self,
        session: &str,
        ctx: &CompletionContext,
        completion: &BaseCompletion,
        step: usize,
    ) -> Vec<AlternativePreview> {
        let Some(dist) = completion.steps.get(step) else {
            return Vec::new();
        };
        let mut lists = vec![Vec::new(); completion.steps.len()];
        lists[step] = skeleton(dist);
        let (tx, mut rx) = mpsc::unbounded_channel();
        self.expand(session, ctx, completion, &[step], tx, CancellationToken::new())
            .await;
        while let Ok(u) = rx.try_recv() {
            u.apply(&mut lists);
        }
        std::mem::take(&mut lists[step])
    }

    /// Replaces the token at `step` with candidate `rank` and regenerates
    /// everything after it, keeping the sampled continuation closest to the
    /// text that followed the step before.
    pub async fn apply_selection(
        &self,
        ctx: &CompletionContext,
        completion: &BaseCompletion,
        step: usize,
        rank: usize,
    ) -> Result<RegenerationResult, SelectionError> {
        let dist = completion.steps.get(step).ok_or(SelectionError::InvalidStep {
            step,
            len: completion.steps.len(),
        })?;
        if rank == dist.chosen || rank >= dist.candidates.len() {
            return Err(SelectionError::InvalidAlternative { step, rank });
        }
        let alt = &dist.candidates[rank].text;
        let committed = format!("{}{}", completion.text_before(step), alt);
        let base_suffix = completion.text_after(step);

        let mut params = self.params;
        params.temperature = self.cfg.regen_temperature;
        let n = if params.temperature == 0.0 {
            1
        } else {
            self.cfg.n_samples.max(1)
        };
        let batch = request_suffix_samples(self.backend.as_ref(), ctx, &committed, n, &params)
            .await
            .map_err(|e| SelectionError::Failed(e.to_string()))?;
        let texts: Vec<&str> = batch.samples.iter().map(|s| s.text.as_str()).collect();
        let closest = select_closest_suffix(&texts, &base_suffix)
            .ok_or_else(|| SelectionError::Failed("backend returned no usable samples".into()))?;
        let sample = &batch.samples[closest.index];

        let mut steps: Vec<StepDistribution> = completion.steps[..step].to_vec();
        let mut edited = dist.clone();
        edited.chosen = rank;
        steps.push(edited);
        steps.extend(sample.steps.iter().enumerate().map(|(i, s)| StepDistribution {
            step_index: step + 1 + i,
            ..s.clone()
        }));
        let new_completion = BaseCompletion::from_steps(steps, sample.finish_reason);
        debug_assert_eq!(new_completion.text, format!("{committed}{}", sample.text));

        Ok(RegenerationResult {
            new_completion,
            chosen_sample_index: closest.index,
            distance_to_base: closest.distance,
            edited_step_index: step,
            samples_received: batch.samples.len(),
            samples_requested: batch.requested,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_chars_is_char_safe() {
        assert_eq!(tail_chars("héllo", 4), "éllo");
        assert_eq!(tail_chars("ab", 10), "ab");
        assert_eq!(tail_chars("ab", 0), "");
    }

    #[test]
    fn skeleton_excludes_chosen() {
        let mut s = StepDistribution::new(
            3,
            vec![("a".into(), 0.5), ("b".into(), 0.3), ("c".into(), 0.1)],
        )
        .unwrap();
        let sk = skeleton(&s);
        assert_eq!(sk.iter().map(|e| e.alt_rank).collect::<Vec<_>>(), [1, 2]);
        s.chosen = 1;
        let sk = skeleton(&s);
        assert_eq!(sk.iter().map(|e| e.alt_rank).collect::<Vec<_>>(), [0, 2]);
        assert!(profile_of(&sk).scores.iter().all(|&x| x == 0.0));
        assert!(!all_settled(&sk));
    }
}

//! Completion backends.
//!
//! A backend produces three kinds of output: a greedy base completion with
//! per-step top-k distributions, a one-line preview of how the code would
//! continue after forcing an alternative token, and batches of sampled
//! continuations used for regeneration. [`HttpBackend`] speaks a JSON
//! completion protocol; [`ScriptedBackend`] replays a recorded trace.

mod http;
mod scripted;
pub mod wire;

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decoding::{DecodingError, StepDistribution};

pub use http::{BackendSettings, HttpBackend};
pub use scripted::{ScriptedBackend, Trace, TraceError, TraceNode};
pub use wire::ProtocolError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionContext {
    pub prefix: String,
    pub suffix: String,
    #[serde(default)]
    pub language_hint: String,
}

impl CompletionContext {
    pub fn new(
        prefix: impl Into<String>,
        suffix: impl Into<String>,
        language_hint: impl Into<String>,
    ) -> Self {
        CompletionContext {
            prefix: prefix.into(),
            suffix: suffix.into(),
            language_hint: language_hint.into(),
        }
    }

    /// Hex SHA-256 over prefix and suffix; identifies a document position.
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.prefix, &self.suffix)
    }
}

pub fn fingerprint(prefix: &str, suffix: &str) -> String {
    let mut h = Sha256::new();
    h.update(prefix.as_bytes());
    h.update([0u8]);
    h.update(suffix.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_k: usize,
    pub n_samples: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: 256,
            temperature: 0.0,
            top_k: 10,
            n_samples: 10,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.top_k < 2 {
            return Err(format!("top_k must be >= 2, got {}", self.top_k));
        }
        if self.n_samples == 0 {
            return Err("n_samples must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    #[default]
    Stop,
    Length,
}

/// A completion together with the distribution the model saw at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCompletion {
    pub text: String,
    pub steps: Vec<StepDistribution>,
    pub finish_reason: FinishReason,
}

impl BaseCompletion {
    pub fn empty() -> Self {
        BaseCompletion {
            text: String::new(),
            steps: Vec::new(),
            finish_reason: FinishReason::Stop,
        }
    }

    /// Builds a completion whose text is the concatenation of chosen tokens.
    pub fn from_steps(steps: Vec<StepDistribution>, finish_reason: FinishReason) -> Self {
        let text = steps.iter().map(|s| s.chosen_text()).collect();
        BaseCompletion {
            text,
            steps,
            finish_reason,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self) -> Result<(), DecodingError> {
        let mut rebuilt = String::with_capacity(self.text.len());
        for (i, s) in self.steps.iter().enumerate() {
            if s.step_index != i {
                return Err(DecodingError::InvalidDistribution(format!(
                    "step {i} carries index {}",
                    s.step_index
                )));
            }
            s.validate()?;
            rebuilt.push_str(s.chosen_text());
        }
        if rebuilt != self.text {
            return Err(DecodingError::InvalidDistribution(
                "chosen tokens do not reproduce the completion text".into(),
            ));
        }
        Ok(())
    }

    /// Byte offset at which each step's chosen token starts.
    pub fn step_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.steps
            .iter()
            .map(|s| {
                let start = off;
                off += s.chosen_text().len();
                start
            })
            .collect()
    }

    pub fn text_before(&self, step: usize) -> String {
        self.steps[..step].iter().map(|s| s.chosen_text()).collect()
    }

    pub fn text_after(&self, step: usize) -> String {
        self.steps[step + 1..]
            .iter()
            .map(|s| s.chosen_text())
            .collect()
    }
}

/// Result of a multi-sample request. Fewer samples than requested is a
/// partial result, not an error; the consumer decides what to do with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<BaseCompletion>,
    pub requested: usize,
}

impl SampleBatch {
    pub fn is_partial(&self) -> bool {
        self.samples.len() < self.requested
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("no scripted response for {0}")]
    Unscripted(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Timeout(_) => true,
            BackendError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn base_completion(
        &self,
        ctx: &CompletionContext,
        params: &GenerationParams,
    ) -> Result<BaseCompletion, BackendError>;

    /// Raw continuation after `forced_prefix + alt_token`, not truncated.
    /// `forced_prefix` is completion text only; the document prefix comes
    /// from `ctx`.
    async fn continuation(
        &self,
        ctx: &CompletionContext,
        forced_prefix: &str,
        alt_token: &str,
    ) -> Result<String, BackendError>;

    /// Up to `n` sampled continuations of `committed_prefix`.
    async fn samples(
        &self,
        ctx: &CompletionContext,
        committed_prefix: &str,
        n: usize,
        params: &GenerationParams,
    ) -> Result<SampleBatch, BackendError>;
}

pub async fn request_base_completion(
    backend: &dyn CompletionBackend,
    ctx: &CompletionContext,
    params: &GenerationParams,
) -> Result<BaseCompletion, BackendError> {
    params.validate().map_err(BackendError::InvalidRequest)?;
    if ctx.prefix.is_empty() && ctx.suffix.is_empty() {
        return Err(BackendError::InvalidRequest(
            "prefix and suffix are both empty".into(),
        ));
    }
    let completion = backend.base_completion(ctx, params).await?;
    debug_assert!(completion.validate().is_ok());
    debug_assert!(completion.steps.iter().all(|s| s.candidates.len() <= params.top_k));
    Ok(completion)
}

/// Cuts a preview at the first line break, keeping the forced token whole.
pub fn truncate_preview(alt_token: &str, continuation: &str) -> String {
    if alt_token.contains('\n') {
        return alt_token.to_string();
    }
    let line = continuation.split('\n').next().unwrap_or("");
    let mut out = String::with_capacity(alt_token.len() + line.len());
    out.push_str(alt_token);
    out.push_str(line.strip_suffix('\r').unwrap_or(line));
    out
}

/// One-line preview of the completion with `alt_token` forced after
/// `forced_prefix`. Always starts with the token text.
pub async fn request_preview(
    backend: &dyn CompletionBackend,
    ctx: &CompletionContext,
    forced_prefix: &str,
    alt_token: &str,
) -> Result<String, BackendError> {
    let cont = backend.continuation(ctx, forced_prefix, alt_token).await?;
    Ok(truncate_preview(alt_token, &cont))
}

pub async fn request_suffix_samples(
    backend: &dyn CompletionBackend,
    ctx: &CompletionContext,
    committed_prefix: &str,
    n: usize,
    params: &GenerationParams,
) -> Result<SampleBatch, BackendError> {
    if n == 0 {
        return Err(BackendError::InvalidRequest("n must be >= 1".into()));
    }
    let mut batch = backend.samples(ctx, committed_prefix, n, params).await?;
    batch.samples.truncate(n);
    batch.requested = n;
    Ok(batch)
}

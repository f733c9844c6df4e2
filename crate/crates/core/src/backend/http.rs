use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::wire::{self, CompletionRequest, ProtocolError};
use super::{
    BackendError, BaseCompletion, CompletionBackend, CompletionContext, GenerationParams,
    SampleBatch,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub base_url: String,
    pub completions_path: String,
    pub model: Option<String>,
    /// Name of the environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub completion_timeout_ms: u64,
    pub preview_timeout_ms: u64,
    pub retries: u32,
    pub preview_max_tokens: usize,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            base_url: "http://127.0.0.1:8000".into(),
            completions_path: "/v1/completions".into(),
            model: None,
            api_key_env: None,
            completion_timeout_ms: 30_000,
            preview_timeout_ms: 10_000,
            retries: 1,
            preview_max_tokens: 64,
        }
    }
}

/// Client for a JSON-over-HTTP completion endpoint.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::Client,
    settings: BackendSettings,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(settings: BackendSettings) -> Self {
        let api_key = settings
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        HttpBackend {
            client: reqwest::Client::new(),
            settings,
            api_key,
        }
    }

    pub fn settings(&self) -> &BackendSettings {
        &self.settings
    }

    fn url(&self) -> String {
        format!(
            "{}{}",
            self.settings.base_url.trim_end_matches('/'),
            self.settings.completions_path
        )
    }

    async fn post_once(
        &self,
        body: &CompletionRequest,
        timeout: Duration,
    ) -> Result<Vec<u8>, BackendError> {
        let mut req = self.client.post(self.url()).json(body).timeout(timeout);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| classify(e, timeout))?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|e| classify(e, timeout))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&bytes).chars().take(512).collect(),
            });
        }
        Ok(bytes.to_vec())
    }

    async fn post(
        &self,
        body: &CompletionRequest,
        timeout: Duration,
    ) -> Result<Vec<u8>, BackendError> {
        let mut attempt = 0;
        loop {
            match self.post_once(body, timeout).await {
                Err(e) if e.is_retryable() && attempt < self.settings.retries => {
                    tracing::warn!(error = %e, attempt, "retrying completion request");
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn request(&self, prompt: String, suffix: &str) -> CompletionRequest {
        CompletionRequest {
            model: self.settings.model.clone(),
            prompt,
            suffix: suffix.to_string(),
            max_tokens: 0,
            temperature: 0.0,
            logprobs: None,
            n: 1,
            stop: Vec::new(),
        }
    }
}

fn classify(e: reqwest::Error, timeout: Duration) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout(timeout)
    } else {
        BackendError::Transport(e.to_string())
    }
}

#[async_trait]
impl CompletionBackend for HttpBackend {
    async fn base_completion(
        &self,
        ctx: &CompletionContext,
        params: &GenerationParams,
    ) -> Result<BaseCompletion, BackendError> {
        let mut req = self.request(ctx.prefix.clone(), &ctx.suffix);
        req.max_tokens = params.max_tokens;
        req.temperature = params.temperature;
        req.logprobs = Some(params.top_k);
        let body = self
            .post(&req, Duration::from_millis(self.settings.completion_timeout_ms))
            .await?;
        wire::parse_completion_response(&body, params.top_k)?
            .into_iter()
            .next()
            .ok_or_else(|| ProtocolError::MissingField("choices[0]".into()).into())
    }

    async fn continuation(
        &self,
        ctx: &CompletionContext,
        forced_prefix: &str,
        alt_token: &str,
    ) -> Result<String, BackendError> {
        let prompt = format!("{}{forced_prefix}{alt_token}", ctx.prefix);
        let mut req = self.request(prompt, &ctx.suffix);
        req.max_tokens = self.settings.preview_max_tokens;
        req.stop = vec!["\n".into()];
        let body = self
            .post(&req, Duration::from_millis(self.settings.preview_timeout_ms))
            .await?;
        wire::parse_text_choices(&body)?
            .into_iter()
            .next()
            .ok_or_else(|| ProtocolError::MissingField("choices[0]".into()).into())
    }

    async fn samples(
        &self,
        ctx: &CompletionContext,
        committed_prefix: &str,
        n: usize,
        params: &GenerationParams,
    ) -> Result<SampleBatch, BackendError> {
        let prompt = format!("{}{committed_prefix}", ctx.prefix);
        let mut req = self.request(prompt, &ctx.suffix);
        req.max_tokens = params.max_tokens;
        req.temperature = params.temperature;
        req.logprobs = Some(params.top_k);
        req.n = n;
        let body = self
            .post(&req, Duration::from_millis(self.settings.completion_timeout_ms))
            .await?;
        let mut samples = Vec::with_capacity(n);
        for choice in wire::parse_completion_choices(&body, params.top_k)? {
            match choice {
                Ok(c) => samples.push(c),
                Err(e) => tracing::warn!(error = %e, "dropping malformed sample"),
            }
        }
        Ok(SampleBatch {
            samples,
            requested: n,
        })
    }
}

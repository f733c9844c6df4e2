use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    validate_assessment_str, AlternativeAssessment, AnalysisError, Analyzer, AssessmentRequest,
};

/// Prompt shipped with the repository (`prompts/analysis.txt`).
pub const DEFAULT_PROMPT: &str = include_str!("../../../../prompts/analysis.txt");

/// Prompt template with `{{placeholder}}` slots filled from the request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisPrompt {
    template: String,
}

impl Default for AnalysisPrompt {
    fn default() -> Self {
        AnalysisPrompt::new(DEFAULT_PROMPT)
    }
}

impl AnalysisPrompt {
    pub fn new(template: impl Into<String>) -> Self {
        AnalysisPrompt {
            template: template.into(),
        }
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(AnalysisPrompt::new(std::fs::read_to_string(path)?))
    }

    pub fn render(&self, req: &AssessmentRequest) -> String {
        let language = if req.language_hint.is_empty() {
            "unknown"
        } else {
            &req.language_hint
        };
        self.template
            .replace("{{language}}", language)
            .replace("{{context}}", &req.surrounding_context)
            .replace("{{base_completion}}", &req.base_completion)
            .replace("{{top_token}}", &req.top_token)
            .replace("{{base_preview}}", &req.base_preview)
            .replace("{{alternative_token}}", &req.alternative_token)
            .replace("{{preview}}", &req.preview)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteAnalyzerSettings {
    pub base_url: String,
    pub chat_path: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
    /// Overrides the bundled prompt when set.
    pub prompt_path: Option<std::path::PathBuf>,
}

impl Default for RemoteAnalyzerSettings {
    fn default() -> Self {
        RemoteAnalyzerSettings {
            base_url: "http://127.0.0.1:8001".into(),
            chat_path: "/v1/chat/completions".into(),
            model: "analysis".into(),
            api_key_env: None,
            timeout_ms: 15_000,
            prompt_path: None,
        }
    }
}

fn response_schema() -> Value {
    json!({
        "type": "object",
        "additionalProperties": false,
        "required": ["detailed_explanation", "summary", "category", "importance_score"],
        "properties": {
            "detailed_explanation": {"type": "string"},
            "summary": {"type": "string"},
            "category": {"type": "string", "enum": ["Significant", "Minor", "Incorrect"]},
            "importance_score": {"type": "number", "minimum": 0, "maximum": 1}
        }
    })
}

/// Chat-completion analyzer with schema-constrained output. A reply that
/// fails validation is re-asked once before giving up.
pub struct RemoteAnalyzer {
    client: reqwest::Client,
    settings: RemoteAnalyzerSettings,
    prompt: AnalysisPrompt,
    api_key: Option<String>,
}

impl RemoteAnalyzer {
    pub fn new(settings: RemoteAnalyzerSettings, prompt: AnalysisPrompt) -> Self {
        let api_key = settings
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        RemoteAnalyzer {
            client: reqwest::Client::new(),
            settings,
            prompt,
            api_key,
        }
    }

    pub fn request_body(&self, messages: &[Value]) -> Value {
        json!({
            "model": self.settings.model,
            "temperature": 0,
            "messages": messages,
            "response_format": {
                "type": "json_schema",
                "json_schema": {
                    "name": "alternative_assessment",
                    "strict": true,
                    "schema": response_schema()
                }
            }
        })
    }

    async fn chat(&self, messages: &[Value]) -> Result<String, AnalysisError> {
        let url = format!(
            "{}{}",
            self.settings.base_url.trim_end_matches('/'),
            self.settings.chat_path
        );
        let mut req = self
            .client
            .post(url)
            .json(&self.request_body(messages))
            .timeout(Duration::from_millis(self.settings.timeout_ms));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                AnalysisError::Timeout
            } else {
                AnalysisError::Backend(e.to_string())
            }
        })?;
        let status = resp.status();
        let body: Value = resp
            .json()
            .await
            .map_err(|e| AnalysisError::Backend(format!("unreadable response: {e}")))?;
        if !status.is_success() {
            return Err(AnalysisError::Backend(format!("HTTP {status}")));
        }
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                AnalysisError::Backend("response has no choices[0].message.content".into())
            })
    }
}

#[async_trait]
impl Analyzer for RemoteAnalyzer {
    async fn assess(&self, req: &AssessmentRequest) -> Result<AlternativeAssessment, AnalysisError> {
        let mut messages = vec![json!({"role": "user", "content": self.prompt.render(req)})];
        let first = self.chat(&messages).await?;
        match validate_assessment_str(&first) {
            Ok(a) => Ok(a),
            Err(err) => {
                tracing::debug!(error = %err, "re-asking analysis backend");
                messages.push(json!({"role": "assistant", "content": first}));
                messages.push(json!({
                    "role": "user",
                    "content": format!(
                        "That reply was rejected ({err}). Reply again with only the JSON object."
                    )
                }));
                let second = self.chat(&messages).await?;
                Ok(validate_assessment_str(&second)?)
            }
        }
    }
}

//! Structured assessment of local alternatives.
//!
//! Every alternative token gets an [`AlternativeAssessment`]: a detailed
//! explanation, a one-glance summary, a category and an importance score.
//! Assessments come either from a chat-style model endpoint
//! ([`RemoteAnalyzer`]) or from the rule-based [`HeuristicAnalyzer`].
//! Whatever the source, nothing reaches clients without passing
//! [`validate_assessment`].

mod heuristic;
mod remote;

use std::collections::HashMap;
use std::sync::Arc;

use async_trait::async_trait;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::OnceCell;
use unicode_width::UnicodeWidthChar;

use crate::decoding::Category;

pub use heuristic::HeuristicAnalyzer;
pub use remote::{AnalysisPrompt, RemoteAnalyzer, RemoteAnalyzerSettings, DEFAULT_PROMPT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeAssessment {
    pub detailed_explanation: String,
    pub summary: String,
    pub category: Category,
    pub importance_score: f64,
}

impl AlternativeAssessment {
    /// Score used downstream; Incorrect alternatives never weigh in.
    pub fn effective_score(&self) -> f64 {
        match self.category {
            Category::Incorrect => 0.0,
            _ => self.importance_score,
        }
    }
}

/// Everything the analyzer needs to judge one alternative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssessmentRequest {
    pub base_completion: String,
    pub top_token: String,
    pub alternative_token: String,
    /// One-line continuation starting with the alternative token.
    pub preview: String,
    /// Tail of the document prefix, for context.
    pub surrounding_context: String,
    /// Text of the current line before the step.
    pub line_prefix: String,
    /// The chosen token followed by the rest of its line.
    pub base_preview: String,
    pub language_hint: String,
    /// False when `preview` was reconstructed from the tokens alone.
    pub preview_available: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("range error: importance_score {0} is outside [0, 1]")]
    Range(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("analysis backend failed: {0}")]
    Backend(String),
    #[error("analysis timed out")]
    Timeout,
    #[error("analysis output rejected: {0}")]
    Malformed(#[from] ValidationError),
}

/// Checks raw structured output and turns it into an assessment.
pub fn validate_assessment(raw: &Value) -> Result<AlternativeAssessment, ValidationError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| ValidationError::Schema("assessment must be a JSON object".into()))?;
    let text = |name: &str| -> Result<String, ValidationError> {
        match obj.get(name) {
            None | Some(Value::Null) => {
                Err(ValidationError::Schema(format!("missing field `{name}`")))
            }
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(ValidationError::Schema(format!("`{name}` must be a string"))),
        }
    };
    let detailed_explanation = text("detailed_explanation")?;
    let summary = text("summary")?;
    if summary.trim().is_empty() {
        return Err(ValidationError::Schema("`summary` is empty".into()));
    }
    let category = match text("category")?.as_str() {
        "Significant" => Category::Significant,
        "Minor" => Category::Minor,
        "Incorrect" => Category::Incorrect,
        other => {
            return Err(ValidationError::Schema(format!(
                "unknown category {other:?}; expected Significant, Minor or Incorrect"
            )))
        }
    };
    let importance_score = match obj.get("importance_score") {
        None | Some(Value::Null) => {
            return Err(ValidationError::Schema(
                "missing field `importance_score`".into(),
            ))
        }
        Some(v) => v.as_f64().ok_or_else(|| {
            ValidationError::Schema("`importance_score` must be a number".into())
        })?,
    };
    if !(0.0..=1.0).contains(&importance_score) {
        return Err(ValidationError::Range(importance_score));
    }
    Ok(AlternativeAssessment {
        detailed_explanation,
        summary,
        category,
        importance_score,
    })
}

pub fn validate_assessment_str(raw: &str) -> Result<AlternativeAssessment, ValidationError> {
    let v: Value = serde_json::from_str(raw.trim())
        .map_err(|e| ValidationError::Schema(format!("not JSON: {e}")))?;
    validate_assessment(&v)
}

pub fn check_assessment(a: &AlternativeAssessment) -> Result<(), ValidationError> {
    let v = serde_json::to_value(a).map_err(|e| ValidationError::Schema(e.to_string()))?;
    validate_assessment(&v).map(|_| ())
}

/// Fits a summary into `limit` display columns, ending with `…` when cut.
pub fn truncate_summary(summary: &str, limit: usize) -> String {
    let limit = limit.max(4);
    let width: usize = summary.chars().map(|c| c.width().unwrap_or(0)).sum();
    if width <= limit {
        return summary.to_string();
    }
    let budget = limit - 1;
    let mut used = 0;
    let mut out = String::new();
    for c in summary.chars() {
        let w = c.width().unwrap_or(0);
        if used + w > budget {
            break;
        }
        used += w;
        out.push(c);
    }
    out.push('…');
    out
}

#[async_trait]
pub trait Analyzer: Send + Sync {
    async fn assess(&self, req: &AssessmentRequest) -> Result<AlternativeAssessment, AnalysisError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct DedupKey {
    session: String,
    step: usize,
    rank: usize,
    request: AssessmentRequest,
}

type Slot = Arc<OnceCell<Result<AlternativeAssessment, AnalysisError>>>;

/// Wraps an analyzer so that the same `(session, step, rank)` request is
/// sent at most once, even when issued concurrently.
pub struct DedupAnalyzer {
    inner: Arc<dyn Analyzer>,
    slots: Mutex<HashMap<DedupKey, Slot>>,
}

impl DedupAnalyzer {
    pub fn new(inner: Arc<dyn Analyzer>) -> Self {
        DedupAnalyzer {
            inner,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub async fn assess(
        &self,
        session: &str,
        step: usize,
        rank: usize,
        req: &AssessmentRequest,
    ) -> Result<AlternativeAssessment, AnalysisError> {
        let key = DedupKey {
            session: session.to_string(),
            step,
            rank,
            request: req.clone(),
        };
        let slot = self.slots.lock().entry(key).or_default().clone();
        slot.get_or_init(|| async {
            let out = self.inner.assess(req).await;
            match out {
                Ok(a) => check_assessment(&a).map(|_| a).map_err(AnalysisError::from),
                Err(e) => Err(e),
            }
        })
        .await
        .clone()
    }

    /// Drops every cached result for a session.
    pub fn forget_session(&self, session: &str) {
        self.slots.lock().retain(|k, _| k.session != session);
    }

    pub fn cached(&self) -> usize {
        self.slots.lock().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn valid() -> Value {
        json!({
            "detailed_explanation": "Uses a memory-hard key derivation function.",
            "summary": "stronger password hashing",
            "category": "Significant",
            "importance_score": 0.8
        })
    }

    #[test]
    fn validation_examples() {
        let a = validate_assessment(&valid()).unwrap();
        assert_eq!(a.category, Category::Significant);
        assert_eq!(a.summary, "stronger password hashing");
        assert_eq!(a.importance_score, 0.8);

        let mut v = valid();
        v["category"] = json!("Critical");
        assert!(matches!(validate_assessment(&v), Err(ValidationError::Schema(_))));

        let mut v = valid();
        v["importance_score"] = json!(1.3);
        assert_eq!(validate_assessment(&v), Err(ValidationError::Range(1.3)));

        let mut v = valid();
        v.as_object_mut().unwrap().remove("summary");
        assert!(matches!(validate_assessment(&v), Err(ValidationError::Schema(_))));

        let mut v = valid();
        v["summary"] = json!("   ");
        assert!(matches!(validate_assessment(&v), Err(ValidationError::Schema(_))));

        assert!(validate_assessment_str("not json").is_err());
        assert!(validate_assessment_str(&valid().to_string()).is_ok());
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate_summary("adds salting", 60), "adds salting");
        let long = "x".repeat(80);
        let t = truncate_summary(&long, 60);
        assert_eq!(t.chars().count(), 60);
        assert!(t.starts_with(&"x".repeat(59)));
        assert!(t.ends_with('…'));
        let exact = "y".repeat(60);
        assert_eq!(truncate_summary(&exact, 60), exact);
    }

    #[test]
    fn truncation_respects_multibyte_and_wide_chars() {
        let s = "ééééééééé";
        let t = truncate_summary(s, 5);
        assert_eq!(t, "éééé…");
        // Wide characters take two columns each.
        let wide = "漢字漢字漢字";
        let t = truncate_summary(wide, 7);
        assert_eq!(t, "漢字漢…");
    }

    struct Counting(AtomicUsize);

    #[async_trait]
    impl Analyzer for Counting {
        async fn assess(&self, _: &AssessmentRequest) -> Result<AlternativeAssessment, AnalysisError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            tokio::task::yield_now().await;
            Ok(validate_assessment(&valid()).unwrap())
        }
    }

    fn request() -> AssessmentRequest {
        AssessmentRequest {
            base_completion: "x = f(1)".into(),
            top_token: "f".into(),
            alternative_token: "g".into(),
            preview: "g(1)".into(),
            surrounding_context: String::new(),
            line_prefix: "x = ".into(),
            base_preview: "f(1)".into(),
            language_hint: "python".into(),
            preview_available: true,
        }
    }

    #[tokio::test]
    async fn dedup_calls_backend_once() {
        let counting = Arc::new(Counting(AtomicUsize::new(0)));
        let dedup = Arc::new(DedupAnalyzer::new(counting.clone()));
        let req = request();
        let (a, b) = tokio::join!(dedup.assess("s", 2, 1, &req), dedup.assess("s", 2, 1, &req));
        assert_eq!(a.unwrap(), b.unwrap());
        dedup.assess("s", 2, 1, &req).await.unwrap();
        assert_eq!(counting.0.load(Ordering::SeqCst), 1);
        dedup.assess("t", 2, 1, &req).await.unwrap();
        assert_eq!(counting.0.load(Ordering::SeqCst), 2);
        dedup.forget_session("s");
        assert_eq!(dedup.cached(), 1);
    }
}

//! JSON completion protocol: request bodies and response parsing.
//!
//! The response shape follows the widely deployed legacy completion API:
//! each choice carries its text and, per emitted token, the token's
//! log-probability plus a map of the top alternatives.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::{BaseCompletion, FinishReason};
use crate::decoding::{StepDistribution, TokenCandidate, MASS_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("response is not valid JSON: {0}")]
    InvalidJson(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` must be {expected}")]
    WrongType {
        field: String,
        expected: &'static str,
    },
    #[error("field `{field}` is invalid: {reason}")]
    InvalidValue { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub prompt: String,
    pub suffix: String,
    pub max_tokens: usize,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<usize>,
    pub n: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stop: Vec<String>,
}

type Result<T> = std::result::Result<T, ProtocolError>;

fn parse_json(body: &[u8]) -> Result<Value> {
    serde_json::from_slice(body).map_err(|e| ProtocolError::InvalidJson(e.to_string()))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(ProtocolError::MissingField(format!("{path}.{key}"))),
        Some(v) => Ok(v),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| ProtocolError::WrongType {
        field: path.to_string(),
        expected: "an object",
    })
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| ProtocolError::WrongType {
        field: path.to_string(),
        expected: "an array",
    })
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| ProtocolError::WrongType {
        field: path.to_string(),
        expected: "a string",
    })
}

fn as_logprob(v: &Value, path: &str) -> Result<f64> {
    let lp = v.as_f64().ok_or_else(|| ProtocolError::WrongType {
        field: path.to_string(),
        expected: "a number",
    })?;
    if lp.is_nan() || lp > 1e-6 {
        return Err(ProtocolError::InvalidValue {
            field: path.to_string(),
            reason: format!("log-probability {lp} is not <= 0"),
        });
    }
    Ok(lp.min(0.0))
}

fn choices(root: &Value) -> Result<&Vec<Value>> {
    let root = as_object(root, "$")?;
    let choices = match root.get("choices") {
        None | Some(Value::Null) => return Err(ProtocolError::MissingField("choices".into())),
        Some(v) => as_array(v, "choices")?,
    };
    Ok(choices)
}

fn finish_reason(choice: &Map<String, Value>, path: &str) -> Result<FinishReason> {
    match choice.get("finish_reason") {
        None | Some(Value::Null) => Ok(FinishReason::Stop),
        Some(Value::String(s)) if s == "stop" => Ok(FinishReason::Stop),
        Some(Value::String(s)) if s == "length" => Ok(FinishReason::Length),
        Some(other) => Err(ProtocolError::InvalidValue {
            field: format!("{path}.finish_reason"),
            reason: format!("expected \"stop\" or \"length\", got {other}"),
        }),
    }
}

/// Parses every choice of a completion response into a [`BaseCompletion`],
/// keeping at most `top_k` candidates per step. The emitted token is always
/// kept, even when the backend ranked it below the cut.
pub fn parse_completion_response(body: &[u8], top_k: usize) -> Result<Vec<BaseCompletion>> {
    parse_completion_choices(body, top_k)?.into_iter().collect()
}

/// Like [`parse_completion_response`] but reports each choice separately,
/// so one malformed sample does not discard the others.
pub fn parse_completion_choices(
    body: &[u8],
    top_k: usize,
) -> Result<Vec<Result<BaseCompletion>>> {
    let root = parse_json(body)?;
    Ok(choices(&root)?
        .iter()
        .enumerate()
        .map(|(i, c)| parse_choice(c, &format!("choices[{i}]"), top_k))
        .collect())
}

/// Choice texts only; used for previews, which need no distributions.
pub fn parse_text_choices(body: &[u8]) -> Result<Vec<String>> {
    let root = parse_json(body)?;
    choices(&root)?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let path = format!("choices[{i}]");
            let obj = as_object(c, &path)?;
            Ok(as_str(field(obj, "text", &path)?, &format!("{path}.text"))?.to_string())
        })
        .collect()
}

fn parse_choice(choice: &Value, path: &str, top_k: usize) -> Result<BaseCompletion> {
    let obj = as_object(choice, path)?;
    let text = as_str(field(obj, "text", path)?, &format!("{path}.text"))?;
    let finish = finish_reason(obj, path)?;

    let lp_path = format!("{path}.logprobs");
    let logprobs = as_object(field(obj, "logprobs", path)?, &lp_path)?;
    let tokens_path = format!("{lp_path}.tokens");
    let tokens = as_array(field(logprobs, "tokens", &lp_path)?, &tokens_path)?;
    let token_lp_path = format!("{lp_path}.token_logprobs");
    let token_lps = as_array(field(logprobs, "token_logprobs", &lp_path)?, &token_lp_path)?;
    let top_path = format!("{lp_path}.top_logprobs");
    let tops = as_array(field(logprobs, "top_logprobs", &lp_path)?, &top_path)?;

    for (name, len) in [(&token_lp_path, token_lps.len()), (&top_path, tops.len())] {
        if len != tokens.len() {
            return Err(ProtocolError::InvalidValue {
                field: name.clone(),
                reason: format!("has {len} entries but tokens has {}", tokens.len()),
            });
        }
    }

    let mut steps = Vec::with_capacity(tokens.len());
    let mut rebuilt = String::with_capacity(text.len());
    for (j, tok) in tokens.iter().enumerate() {
        let token = as_str(tok, &format!("{tokens_path}[{j}]"))?;
        rebuilt.push_str(token);
        let emitted_lp = as_logprob(&token_lps[j], &format!("{token_lp_path}[{j}]"))?;
        let entry_path = format!("{top_path}[{j}]");
        let top = match &tops[j] {
            Value::Null => return Err(ProtocolError::MissingField(entry_path)),
            v => as_object(v, &entry_path)?,
        };
        steps.push(build_step(j, token, emitted_lp, top, &entry_path, top_k)?);
    }
    if rebuilt != text {
        return Err(ProtocolError::InvalidValue {
            field: tokens_path,
            reason: format!("tokens do not concatenate to {path}.text"),
        });
    }
    Ok(BaseCompletion {
        text: text.to_string(),
        steps,
        finish_reason: finish,
    })
}

fn build_step(
    index: usize,
    emitted: &str,
    emitted_lp: f64,
    top: &Map<String, Value>,
    path: &str,
    top_k: usize,
) -> Result<StepDistribution> {
    let mut raw: Vec<(String, f64)> = Vec::with_capacity(top.len() + 1);
    for (tok, lp) in top {
        let lp = as_logprob(lp, &format!("{path}[{tok:?}]"))?;
        raw.push((tok.clone(), lp.exp()));
    }
    if !raw.iter().any(|(t, _)| t == emitted) {
        raw.push((emitted.to_string(), emitted_lp.exp()));
    }
    if emitted_lp.exp() <= 0.0 {
        return Err(ProtocolError::InvalidValue {
            field: path.to_string(),
            reason: "emitted token has zero probability".into(),
        });
    }
    raw.retain(|(t, p)| *p > 0.0 || t == emitted);
    // Stable: equal probabilities keep backend order.
    raw.sort_by(|a, b| b.1.total_cmp(&a.1));
    let chosen_pos = raw.iter().position(|(t, _)| t == emitted).unwrap();
    if raw.len() > top_k {
        if chosen_pos >= top_k {
            let kept = raw.remove(chosen_pos);
            raw.truncate(top_k - 1);
            raw.push(kept);
        } else {
            raw.truncate(top_k);
        }
    }
    let chosen = raw.iter().position(|(t, _)| t == emitted).unwrap();
    let total: f64 = raw.iter().map(|(_, p)| p).sum();
    if total > 1.0 + MASS_TOLERANCE {
        return Err(ProtocolError::InvalidValue {
            field: path.to_string(),
            reason: format!("probabilities sum to {total:.6}, above 1"),
        });
    }
    Ok(StepDistribution {
        step_index: index,
        candidates: raw
            .into_iter()
            .enumerate()
            .map(|(rank, (text, prob))| TokenCandidate { text, prob, rank })
            .collect(),
        chosen,
    })
}

//! Deterministic replay backend driven by trace files.
//!
//! A trace records one base completion (its step distributions), plus
//! optional canned previews and suffix samples keyed by `step:rank`. Forced
//! prefixes are resolved back to a `(step, rank)` position by walking the
//! recorded steps, so requests made after earlier edits still find their
//! script. Anything not scripted falls back to "the rest stays the same":
//! previews and suffixes continue with the recorded greedy tokens.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::Deserialize;
use thiserror::Error;

use super::{
    fingerprint, BackendError, BaseCompletion, CompletionBackend, CompletionContext,
    FinishReason, GenerationParams, SampleBatch,
};
use crate::decoding::{StepDistribution, TokenCandidate, MASS_TOLERANCE};
use crate::lexer;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace is not valid JSON: {0}")]
    Json(String),
    #[error("trace invalid at `{path}`: {reason}")]
    Invalid { path: String, reason: String },
    #[error("two traces share the context {0}")]
    DuplicateContext(String),
    #[error("more than one trace has no context")]
    DuplicateWildcard,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCandidate {
    text: String,
    logprob: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    candidates: Vec<RawCandidate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    steps: Vec<RawStep>,
    #[serde(default)]
    previews: BTreeMap<String, Option<String>>,
    #[serde(default)]
    suffixes: BTreeMap<String, Option<Vec<String>>>,
    #[serde(default)]
    continuations: BTreeMap<String, RawNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TraceContext {
    pub prefix: String,
    pub suffix: String,
    #[serde(default)]
    pub language_hint: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawTrace {
    #[serde(default)]
    context: Option<TraceContext>,
    #[serde(default)]
    finish_reason: FinishReason,
    #[serde(default)]
    globals: Option<Vec<String>>,
    steps: Vec<RawStep>,
    #[serde(default)]
    previews: BTreeMap<String, Option<String>>,
    #[serde(default)]
    suffixes: BTreeMap<String, Option<Vec<String>>>,
    #[serde(default)]
    continuations: BTreeMap<String, RawNode>,
}

/// One recorded completion and what happens when its tokens are replaced.
/// A `None` preview or suffix list scripts a backend failure.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceNode {
    pub steps: Vec<StepDistribution>,
    pub previews: BTreeMap<(usize, usize), Option<String>>,
    pub suffixes: BTreeMap<(usize, usize), Option<Vec<String>>>,
    pub continuations: BTreeMap<(usize, usize, usize), TraceNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub context: Option<TraceContext>,
    pub finish_reason: FinishReason,
    pub globals: Option<Vec<String>>,
    pub root: TraceNode,
}

fn invalid(path: &str, reason: impl Into<String>) -> TraceError {
    TraceError::Invalid {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn parse_key<const N: usize>(key: &str, path: &str) -> Result<[usize; N], TraceError> {
    let parts: Vec<&str> = key.split(':').collect();
    if parts.len() != N {
        return Err(invalid(path, format!("key {key:?} must have {N} `:`-separated parts")));
    }
    let mut out = [0usize; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part
            .parse()
            .map_err(|_| invalid(path, format!("key {key:?} has a non-numeric part")))?;
    }
    Ok(out)
}

impl TraceNode {
    fn compile(raw: RawNode, path: &str) -> Result<Self, TraceError> {
        let steps = raw
            .steps
            .into_iter()
            .enumerate()
            .map(|(i, s)| compile_step(i, s, &format!("{path}steps[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;

        let check_alt = |key: &str, field: &str, steps: &[StepDistribution]| {
            let kpath = format!("{path}{field}[{key:?}]");
            let [i, r] = parse_key::<2>(key, &kpath)?;
            let step = steps
                .get(i)
                .ok_or_else(|| invalid(&kpath, format!("step {i} does not exist")))?;
            if r == 0 || r >= step.candidates.len() {
                return Err(invalid(&kpath, format!("step {i} has no alternative of rank {r}")));
            }
            Ok::<_, TraceError>((i, r, kpath))
        };

        let mut previews = BTreeMap::new();
        for (key, preview) in raw.previews {
            let (i, r, kpath) = check_alt(&key, "previews", &steps)?;
            if let Some(p) = &preview {
                let alt = &steps[i].candidates[r].text;
                if !p.starts_with(alt.as_str()) {
                    return Err(invalid(&kpath, format!("preview must start with {alt:?}")));
                }
            }
            previews.insert((i, r), preview);
        }

        let mut suffixes = BTreeMap::new();
        for (key, list) in raw.suffixes {
            let (i, r, kpath) = check_alt(&key, "suffixes", &steps)?;
            if matches!(&list, Some(l) if l.is_empty()) {
                return Err(invalid(&kpath, "suffix list is empty"));
            }
            suffixes.insert((i, r), list);
        }

        let mut continuations = BTreeMap::new();
        for (key, child) in raw.continuations {
            let kpath = format!("{path}continuations[{key:?}]");
            let [i, r, k] = parse_key::<3>(&key, &kpath)?;
            let sample = match suffixes.get(&(i, r)) {
                Some(Some(list)) => list.get(k),
                _ => None,
            }
            .ok_or_else(|| invalid(&kpath, format!("no suffix sample {k} for {i}:{r}")))?
            .clone();
            let node = TraceNode::compile(child, &format!("{kpath}."))?;
            if node.default_text(0) != sample {
                return Err(invalid(&kpath, "steps do not reproduce the suffix sample"));
            }
            continuations.insert((i, r, k), node);
        }

        Ok(TraceNode {
            steps,
            previews,
            suffixes,
            continuations,
        })
    }

    /// Greedy text of steps `from..`.
    pub fn default_text(&self, from: usize) -> String {
        self.steps
            .iter()
            .skip(from)
            .map(|s| s.chosen_text())
            .collect()
    }

    fn steps_from(&self, from: usize) -> Vec<StepDistribution> {
        self.steps[from.min(self.steps.len())..]
            .iter()
            .enumerate()
            .map(|(i, s)| StepDistribution {
                step_index: i,
                ..s.clone()
            })
            .collect()
    }

    /// Finds the position whose candidate ends exactly at the end of `text`,
    /// walking from step `from`. Explicit continuations are tried before the
    /// node's own greedy path.
    fn resolve(&self, from: usize, text: &str) -> Option<(&TraceNode, usize, usize)> {
        let step = self.steps.get(from)?;
        if let Some(c) = step.candidates.iter().find(|c| c.text == text) {
            return Some((self, from, c.rank));
        }
        for c in &step.candidates {
            let Some(tail) = text.strip_prefix(c.text.as_str()) else {
                continue;
            };
            for (_, child) in self
                .continuations
                .range((from, c.rank, 0)..=(from, c.rank, usize::MAX))
            {
                if let Some(hit) = child.resolve(0, tail) {
                    return Some(hit);
                }
            }
            if let Some(hit) = self.resolve(from + 1, tail) {
                return Some(hit);
            }
        }
        None
    }
}

fn compile_step(index: usize, raw: RawStep, path: &str) -> Result<StepDistribution, TraceError> {
    if raw.candidates.is_empty() {
        return Err(invalid(path, "step has no candidates"));
    }
    let mut candidates: Vec<TokenCandidate> = Vec::with_capacity(raw.candidates.len());
    for (rank, c) in raw.candidates.into_iter().enumerate() {
        let cpath = format!("{path}.candidates[{rank}]");
        if c.text.is_empty() {
            return Err(invalid(&cpath, "candidate text is empty"));
        }
        if !c.logprob.is_finite() || c.logprob > 0.0 {
            return Err(invalid(&cpath, format!("logprob {} must be finite and <= 0", c.logprob)));
        }
        if candidates.iter().any(|p| p.text == c.text) {
            return Err(invalid(&cpath, format!("duplicate candidate {:?}", c.text)));
        }
        let prob = c.logprob.exp();
        if let Some(prev) = candidates.last() {
            if prob > prev.prob {
                return Err(invalid(&cpath, "candidates must be listed by descending logprob"));
            }
        }
        candidates.push(TokenCandidate {
            text: c.text,
            prob,
            rank,
        });
    }
    let total: f64 = candidates.iter().map(|c| c.prob).sum();
    if total > 1.0 + MASS_TOLERANCE {
        return Err(invalid(path, format!("probabilities sum to {total}")));
    }
    Ok(StepDistribution {
        step_index: index,
        candidates,
        chosen: 0,
    })
}

impl Trace {
    pub fn from_json(src: &str) -> Result<Self, TraceError> {
        let raw: RawTrace = serde_json::from_str(src).map_err(|e| TraceError::Json(e.to_string()))?;
        let root = TraceNode::compile(
            RawNode {
                steps: raw.steps,
                previews: raw.previews,
                suffixes: raw.suffixes,
                continuations: raw.continuations,
            },
            "",
        )?;
        Ok(Trace {
            context: raw.context,
            finish_reason: raw.finish_reason,
            globals: raw.globals,
            root,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Trace::from_json(&src)
    }

    pub fn base_completion(&self) -> BaseCompletion {
        BaseCompletion::from_steps(self.root.steps.clone(), self.finish_reason)
    }

    pub fn completion_context(&self) -> Option<CompletionContext> {
        self.context.as_ref().map(|c| {
            CompletionContext::new(c.prefix.clone(), c.suffix.clone(), c.language_hint.clone())
        })
    }
}

fn cap_candidates(mut step: StepDistribution, top_k: usize) -> StepDistribution {
    step.candidates.truncate(top_k.max(1));
    step
}

/// Replays recorded traces. Identical requests always produce identical
/// responses.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    by_context: HashMap<String, Arc<Trace>>,
    wildcard: Option<Arc<Trace>>,
}

impl ScriptedBackend {
    pub fn new(traces: impl IntoIterator<Item = Trace>) -> Result<Self, TraceError> {
        let mut backend = ScriptedBackend::default();
        for t in traces {
            backend.add(t)?;
        }
        Ok(backend)
    }

    /// Serves `trace` for every context, ignoring any recorded context.
    pub fn for_any_context(trace: Trace) -> Self {
        ScriptedBackend {
            by_context: HashMap::new(),
            wildcard: Some(Arc::new(trace)),
        }
    }

    /// Loads every `*.json` file in `dir`, in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TraceError> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir).map_err(|source| TraceError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        ScriptedBackend::new(paths.iter().map(Trace::load).collect::<Result<Vec<_>, _>>()?)
    }

    pub fn add(&mut self, trace: Trace) -> Result<(), TraceError> {
        match &trace.context {
            Some(c) => {
                let fp = fingerprint(&c.prefix, &c.suffix);
                if self.by_context.contains_key(&fp) {
                    return Err(TraceError::DuplicateContext(fp));
                }
                self.by_context.insert(fp, Arc::new(trace));
            }
            None => {
                if self.wildcard.is_some() {
                    return Err(TraceError::DuplicateWildcard);
                }
                self.wildcard = Some(Arc::new(trace));
            }
        }
        Ok(())
    }

    fn trace_for(&self, ctx: &CompletionContext) -> Result<&Trace, BackendError> {
        let fp = ctx.fingerprint();
        self.by_context
            .get(&fp)
            .or(self.wildcard.as_ref())
            .map(|t| t.as_ref())
            .ok_or_else(|| BackendError::Unscripted(format!("context {fp}")))
    }

    fn sample_completion(
        node: &TraceNode,
        step: usize,
        rank: usize,
        k: usize,
        text: &str,
        top_k: usize,
    ) -> BaseCompletion {
        let steps = if let Some(child) = node.continuations.get(&(step, rank, k)) {
            child.steps_from(0)
        } else if node.default_text(step + 1) == text {
            node.steps_from(step + 1)
        } else {
            lexer::segment(text)
                .into_iter()
                .enumerate()
                .map(|(i, piece)| StepDistribution::certain(i, piece))
                .collect()
        };
        BaseCompletion::from_steps(
            steps.into_iter().map(|s| cap_candidates(s, top_k)).collect(),
            FinishReason::Stop,
        )
    }
}

#[async_trait]
impl CompletionBackend for ScriptedBackend {
    async fn base_completion(
        &self,
        ctx: &CompletionContext,
        params: &GenerationParams,
    ) -> Result<BaseCompletion, BackendError> {
        let trace = self.trace_for(ctx)?;
        let mut steps: Vec<_> = trace
            .root
            .steps
            .iter()
            .cloned()
            .map(|s| cap_candidates(s, params.top_k))
            .collect();
        let mut finish = trace.finish_reason;
        if steps.len() > params.max_tokens {
            steps.truncate(params.max_tokens);
            finish = FinishReason::Length;
        }
        Ok(BaseCompletion::from_steps(steps, finish))
    }

    async fn continuation(
        &self,
        ctx: &CompletionContext,
        forced_prefix: &str,
        alt_token: &str,
    ) -> Result<String, BackendError> {
        let trace = self.trace_for(ctx)?;
        let forced = format!("{forced_prefix}{alt_token}");
        let (node, step, rank) = trace
            .root
            .resolve(0, &forced)
            .filter(|(n, s, r)| n.steps[*s].candidates[*r].text == alt_token)
            .ok_or_else(|| BackendError::Unscripted(format!("preview after {forced:?}")))?;
        match node.previews.get(&(step, rank)) {
            Some(Some(p)) => Ok(p[alt_token.len()..].to_string()),
            Some(None) => Err(BackendError::Transport(format!(
                "scripted preview failure at {step}:{rank}"
            ))),
            None => Ok(node.default_text(step + 1)),
        }
    }

    async fn samples(
        &self,
        ctx: &CompletionContext,
        committed_prefix: &str,
        n: usize,
        params: &GenerationParams,
    ) -> Result<SampleBatch, BackendError> {
        let trace = self.trace_for(ctx)?;
        let deterministic = params.temperature == 0.0;

        if committed_prefix.is_empty() {
            let samples = match &trace.globals {
                Some(globals) => globals
                    .iter()
                    .take(if deterministic { 1 } else { n })
                    .map(|g| {
                        let steps = if *g == trace.root.default_text(0) {
                            trace.root.steps_from(0)
                        } else {
                            lexer::segment(g)
                                .into_iter()
                                .enumerate()
                                .map(|(i, p)| StepDistribution::certain(i, p))
                                .collect()
                        };
                        BaseCompletion::from_steps(steps, trace.finish_reason)
                    })
                    .collect(),
                None => vec![trace.base_completion()],
            };
            return Ok(SampleBatch {
                samples: replicate_if_deterministic(samples, n, deterministic),
                requested: n,
            });
        }

        let (node, step, rank) = trace.root.resolve(0, committed_prefix).ok_or_else(|| {
            BackendError::Unscripted(format!("samples after {committed_prefix:?}"))
        })?;
        let samples = match node.suffixes.get(&(step, rank)) {
            Some(Some(list)) => list
                .iter()
                .enumerate()
                .take(if deterministic { 1 } else { n })
                .map(|(k, text)| Self::sample_completion(node, step, rank, k, text, params.top_k))
                .collect(),
            Some(None) => {
                return Err(BackendError::Transport(format!(
                    "scripted sample failure at {step}:{rank}"
                )))
            }
            None => {
                let text = node.default_text(step + 1);
                vec![Self::sample_completion(node, step, rank, usize::MAX, &text, params.top_k)]
            }
        };
        let explicit = node.suffixes.contains_key(&(step, rank));
        Ok(SampleBatch {
            samples: if explicit && !deterministic {
                samples
            } else {
                replicate_if_deterministic(samples, n, true)
            },
            requested: n,
        })
    }
}

/// A deterministic backend returns the same sample every time.
fn replicate_if_deterministic(
    samples: Vec<BaseCompletion>,
    n: usize,
    deterministic: bool,
) -> Vec<BaseCompletion> {
    if !deterministic || samples.is_empty() {
        return samples;
    }
    std::iter::repeat_n(samples[0].clone(), n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{request_preview, request_suffix_samples};

    const TRACE: &str = r#"{
        "steps": [
            {"candidates": [{"text": "x", "logprob": -0.1}]},
            {"candidates": [{"text": " =", "logprob": -0.01}]},
            {"candidates": [
                {"text": " foo", "logprob": -0.4},
                {"text": " bar", "logprob": -1.5},
                {"text": " baz", "logprob": -2.5}
            ]},
            {"candidates": [{"text": "(1)", "logprob": -0.2}]},
            {"candidates": [{"text": "\n", "logprob": -0.1}]},
            {"candidates": [{"text": "y", "logprob": -0.1}]}
        ],
        "previews": {"2:1": " bar(2, 3)\nz", "2:2": null},
        "suffixes": {"2:1": ["(9)\ny", "(1)\ny", "(2)\nw"]},
        "continuations": {"2:1:2": {"steps": [
            {"candidates": [{"text": "(2)", "logprob": -0.3}]},
            {"candidates": [{"text": "\n", "logprob": -0.1}]},
            {"candidates": [{"text": "w", "logprob": -0.7}, {"text": "v", "logprob": -0.9}]}
        ], "suffixes": {"2:1": ["q"]}}}
    }"#;

    fn backend() -> ScriptedBackend {
        ScriptedBackend::for_any_context(Trace::from_json(TRACE).unwrap())
    }

    fn ctx() -> CompletionContext {
        CompletionContext::new("def f():\n", "", "python")
    }

    fn sampling() -> GenerationParams {
        GenerationParams {
            temperature: 0.8,
            ..GenerationParams::default()
        }
    }

    #[tokio::test]
    async fn base_completion_echoes_trace() {
        let c = backend()
            .base_completion(&ctx(), &GenerationParams::default())
            .await
            .unwrap();
        assert_eq!(c.text, "x = foo(1)\ny");
        assert_eq!(c.steps.len(), 6);
        assert!(c.validate().is_ok());
        let capped = backend()
            .base_completion(
                &ctx(),
                &GenerationParams {
                    top_k: 2,
                    max_tokens: 3,
                    ..GenerationParams::default()
                },
            )
            .await
            .unwrap();
        assert_eq!(capped.steps.len(), 3);
        assert_eq!(capped.steps[2].candidates.len(), 2);
        assert_eq!(capped.finish_reason, FinishReason::Length);
    }

    #[tokio::test]
    async fn previews_scripted_default_and_failing() {
        let b = backend();
        assert_eq!(
            request_preview(&b, &ctx(), "x =", " bar").await.unwrap(),
            " bar(2, 3)"
        );
        // Rank 0 falls back to the recorded remainder of the line.
        assert_eq!(
            request_preview(&b, &ctx(), "x =", " foo").await.unwrap(),
            " foo(1)"
        );
        assert!(matches!(
            request_preview(&b, &ctx(), "x =", " baz").await,
            Err(BackendError::Transport(_))
        ));
        assert!(matches!(
            request_preview(&b, &ctx(), "nope", " baz").await,
            Err(BackendError::Unscripted(_))
        ));
    }

    #[tokio::test]
    async fn samples_follow_script_and_defaults() {
        let b = backend();
        let batch = request_suffix_samples(&b, &ctx(), "x = bar", 10, &sampling())
            .await
            .unwrap();
        assert!(batch.is_partial());
        let texts: Vec<_> = batch.samples.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["(9)\ny", "(1)\ny", "(2)\nw"]);
        // The sample equal to the recorded remainder reuses its steps.
        assert_eq!(batch.samples[1].steps.len(), 3);
        // The explicit continuation carries its own distributions.
        assert_eq!(batch.samples[2].steps[2].candidates.len(), 2);

        let one = request_suffix_samples(&b, &ctx(), "x = bar", 1, &GenerationParams::default())
            .await
            .unwrap();
        assert_eq!(one.samples.len(), 1);
        assert_eq!(one.samples[0].text, "(9)\ny");

        // Unscripted alternatives keep the recorded remainder.
        let d = request_suffix_samples(&b, &ctx(), "x = baz", 3, &sampling())
            .await
            .unwrap();
        assert_eq!(d.samples.len(), 3);
        assert!(d.samples.iter().all(|s| s.text == "(1)\ny"));
    }

    #[tokio::test]
    async fn resolves_inside_continuations() {
        let b = backend();
        let p = request_preview(&b, &ctx(), "x = bar(2)\n", "v").await.unwrap();
        assert_eq!(p, "v");
        let batch = request_suffix_samples(&b, &ctx(), "x = bar(2)\nv", 2, &sampling())
            .await
            .unwrap();
        let texts: Vec<_> = batch.samples.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["q"]);
    }

    #[tokio::test]
    async fn identical_requests_identical_responses() {
        let b = backend();
        for _ in 0..2 {
            let a = b.samples(&ctx(), "x = bar", 10, &sampling()).await.unwrap();
            let c = b.samples(&ctx(), "x = bar", 10, &sampling()).await.unwrap();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn rejects_bad_traces() {
        let unsorted = r#"{"steps": [{"candidates": [
            {"text": "a", "logprob": -2.0}, {"text": "b", "logprob": -0.1}]}]}"#;
        assert!(matches!(
            Trace::from_json(unsorted),
            Err(TraceError::Invalid { path, .. }) if path == "steps[0].candidates[1]"
        ));
        let dangling = r#"{"steps": [{"candidates": [{"text": "a", "logprob": -0.1}]}],
            "previews": {"0:1": "zz"}}"#;
        assert!(Trace::from_json(dangling).is_err());
        let bad_preview = r#"{"steps": [{"candidates": [
            {"text": "a", "logprob": -0.5}, {"text": "b", "logprob": -1.5}]}],
            "previews": {"0:1": "zz"}}"#;
        assert!(Trace::from_json(bad_preview).is_err());
        let extra = r#"{"steps": [], "bogus": 1}"#;
        assert!(matches!(Trace::from_json(extra), Err(TraceError::Json(_))));
        let mismatch = r#"{"steps": [{"candidates": [
            {"text": "a", "logprob": -0.5}, {"text": "b", "logprob": -1.5}]}],
            "suffixes": {"0:1": ["q"]},
            "continuations": {"0:1:0": {"steps": [{"candidates": [{"text": "r", "logprob": 0}]}]}}}"#;
        assert!(Trace::from_json(mismatch).is_err());
    }

    #[tokio::test]
    async fn context_lookup() {
        let with_ctx = r#"{"context": {"prefix": "a", "suffix": "b"},
            "steps": [{"candidates": [{"text": "z", "logprob": 0}]}]}"#;
        let b = ScriptedBackend::new([Trace::from_json(with_ctx).unwrap()]).unwrap();
        let params = GenerationParams::default();
        assert!(b
            .base_completion(&CompletionContext::new("a", "b", ""), &params)
            .await
            .is_ok());
        assert!(matches!(
            b.base_completion(&CompletionContext::new("a", "c", ""), &params).await,
            Err(BackendError::Unscripted(_))
        ));
    }
}

//! Pure computations over per-step token distributions.
//!
//! A completion is a sequence of generation steps. At each step the backend
//! reports its top-k candidates; the candidate that was emitted is the
//! *chosen* one (rank 0 for a greedy completion) and every other candidate
//! is an *alternative*. Importance scores from the analysis stage reweight
//! the alternatives, and the entropy of the reweighted distribution decides
//! whether the step is surfaced to the user as a critical decision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on the total probability mass of a truncated distribution.
pub const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodingError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("importance profile has {got} entries but the step has {expected} alternatives")]
    Misaligned { expected: usize, got: usize },
    #[error("invalid highlight config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, DecodingError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCandidate {
    pub text: String,
    pub prob: f64,
    pub rank: usize,
}

/// Top-k candidates at one generation step, sorted by descending probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    pub step_index: usize,
    pub candidates: Vec<TokenCandidate>,
    /// Rank of the candidate whose text appears in the completion.
    #[serde(default)]
    pub chosen: usize,
}

impl StepDistribution {
    /// Builds a step from `(text, prob)` pairs in backend order.
    ///
    /// Candidates are stably sorted by descending probability, so ties keep
    /// the order the backend reported them in. The chosen candidate is rank 0.
    pub fn new(step_index: usize, raw: Vec<(String, f64)>) -> Result<Self> {
        let mut raw = raw;
        raw.sort_by(|a, b| b.1.total_cmp(&a.1));
        let candidates = raw
            .into_iter()
            .enumerate()
            .map(|(rank, (text, prob))| TokenCandidate { text, prob, rank })
            .collect();
        let step = StepDistribution {
            step_index,
            candidates,
            chosen: 0,
        };
        step.validate()?;
        Ok(step)
    }

    /// A single-candidate step carrying the whole mass.
    pub fn certain(step_index: usize, text: impl Into<String>) -> Self {
        StepDistribution {
            step_index,
            candidates: vec![TokenCandidate {
                text: text.into(),
                prob: 1.0,
                rank: 0,
            }],
            chosen: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(DecodingError::InvalidDistribution(format!(
                "step {} has no candidates",
                self.step_index
            )));
        }
        let mut total = 0.0;
        for (i, c) in self.candidates.iter().enumerate() {
            if !(c.prob > 0.0 && c.prob <= 1.0) {
                return Err(DecodingError::InvalidDistribution(format!(
                    "step {} candidate {:?} has probability {} outside (0, 1]",
                    self.step_index, c.text, c.prob
                )));
            }
            if c.rank != i {
                return Err(DecodingError::InvalidDistribution(format!(
                    "step {} ranks are not contiguous from 0",
                    self.step_index
                )));
            }
            if i > 0 && c.prob > self.candidates[i - 1].prob {
                return Err(DecodingError::InvalidDistribution(format!(
                    "step {} candidates are not sorted by probability",
                    self.step_index
                )));
            }
            total += c.prob;
        }
        if total > 1.0 + MASS_TOLERANCE {
            return Err(DecodingError::InvalidDistribution(format!(
                "step {} probabilities sum to {total}",
                self.step_index
            )));
        }
        if self.chosen >= self.candidates.len() {
            return Err(DecodingError::InvalidDistribution(format!(
                "step {} chosen rank {} out of range",
                self.step_index, self.chosen
            )));
        }
        Ok(())
    }

    pub fn chosen_candidate(&self) -> &TokenCandidate {
        &self.candidates[self.chosen]
    }

    pub fn chosen_text(&self) -> &str {
        &self.candidates[self.chosen].text
    }

    /// Every candidate except the chosen one, in rank order.
    pub fn alternatives(&self) -> impl Iterator<Item = &TokenCandidate> {
        let chosen = self.chosen;
        self.candidates.iter().filter(move |c| c.rank != chosen)
    }

    pub fn alternative_count(&self) -> usize {
        self.candidates.len().saturating_sub(1)
    }

    pub fn probs(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.prob).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Significant,
    Minor,
    Incorrect,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Significant => "Significant",
            Category::Minor => "Minor",
            Category::Incorrect => "Incorrect",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Importance scores and categories for the alternatives of one step,
/// aligned with [`StepDistribution::alternatives`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    pub scores: Vec<f64>,
    pub categories: Vec<Category>,
}

impl ImportanceProfile {
    pub fn new(entries: impl IntoIterator<Item = (Category, f64)>) -> Self {
        let (categories, scores) = entries.into_iter().unzip();
        ImportanceProfile { scores, categories }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Score used for reweighting. Incorrect alternatives never count.
    pub fn effective_score(&self, i: usize) -> f64 {
        match self.categories[i] {
            Category::Incorrect => 0.0,
            _ => self.scores[i].clamp(0.0, 1.0),
        }
    }

    pub fn has_significant(&self) -> bool {
        self.categories.contains(&Category::Significant)
    }

    /// Step-level importance: the largest effective alternative score.
    pub fn step_importance(&self) -> f64 {
        (0..self.len())
            .map(|i| self.effective_score(i))
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.scores.len() != self.categories.len() {
            return Err(DecodingError::Misaligned {
                expected: self.categories.len(),
                got: self.scores.len(),
            });
        }
        for &s in &self.scores {
            if !(0.0..=1.0).contains(&s) {
                return Err(DecodingError::InvalidDistribution(format!(
                    "importance score {s} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighlightConfig {
    /// Baseline weight given to every alternative regardless of its score.
    pub alpha: f64,
    /// Exponent applied to raw probabilities; values below 1 flatten them.
    pub beta: f64,
    /// Minimum corrected entropy (nats) for a step to be highlighted.
    pub tau: f64,
    /// Corrected entropy (nats) that maps to full render intensity.
    pub h_max: f64,
}

impl Default for HighlightConfig {
    fn default() -> Self {
        HighlightConfig {
            alpha: 0.05,
            beta: 0.5,
            tau: 0.25,
            h_max: 1.4,
        }
    }
}

impl HighlightConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DecodingError::InvalidConfig(msg));
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("tau", self.tau),
            ("h_max", self.h_max),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.alpha < 0.0 {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must be in (0, 1], got {}", self.beta));
        }
        if self.tau < 0.0 {
            return bad(format!("tau must be >= 0, got {}", self.tau));
        }
        if self.h_max <= 0.0 {
            return bad(format!("h_max must be > 0, got {}", self.h_max));
        }
        if self.tau >= self.h_max {
            return bad(format!(
                "tau ({}) must be below h_max ({})",
                self.tau, self.h_max
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightAnnotation {
    pub step_index: usize,
    pub corrected_entropy: f64,
    pub highlighted: bool,
    pub intensity: f64,
    pub visible: bool,
}

impl HighlightAnnotation {
    /// Annotation for a step that has not been scored yet.
    pub fn unscored(step_index: usize) -> Self {
        HighlightAnnotation {
            step_index,
            corrected_entropy: 0.0,
            highlighted: false,
            intensity: 0.0,
            visible: true,
        }
    }
}

/// Shannon entropy in nats of a (possibly truncated) distribution.
///
/// The input is renormalized first, so top-k lists whose mass is below one
/// are treated as distributions over the retained candidates only.
pub fn shannon_entropy(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(DecodingError::InvalidDistribution(
            "empty probability list".into(),
        ));
    }
    let mut total = 0.0;
    for &p in probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(DecodingError::InvalidDistribution(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        total += p;
    }
    if total <= 0.0 {
        return Err(DecodingError::InvalidDistribution(
            "all probabilities are zero".into(),
        ));
    }
    if total > 1.0 + MASS_TOLERANCE {
        return Err(DecodingError::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    let h = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Reweights a step's candidates by the importance of their alternatives.
///
/// The chosen candidate gets weight `p^beta`; each alternative gets
/// `p^beta * (alpha + s)` where `s` is its effective score. The result is
/// normalized and keeps candidate order.
pub fn corrected_weights(
    dist: &StepDistribution,
    profile: &ImportanceProfile,
    cfg: &HighlightConfig,
) -> Result<Vec<f64>> {
    dist.validate()?;
    cfg.validate()?;
    profile.validate()?;
    let expected = dist.alternative_count();
    if profile.len() != expected {
        return Err(DecodingError::Misaligned {
            expected,
            got: profile.len(),
        });
    }
    let mut alt = 0;
    let weights: Vec<f64> = dist
        .candidates
        .iter()
        .map(|c| {
            let base = c.prob.powf(cfg.beta);
            if c.rank == dist.chosen {
                base
            } else {
                let w = base * (cfg.alpha + profile.effective_score(alt));
                alt += 1;
                w
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    // The chosen weight is strictly positive, so total > 0.
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn corrected_entropy(
    dist: &StepDistribution,
    profile: &ImportanceProfile,
    cfg: &HighlightConfig,
) -> Result<f64> {
    shannon_entropy(&corrected_weights(dist, profile, cfg)?)
}

/// Decides whether a step is a critical decision worth highlighting.
pub fn classify_step(
    dist: &StepDistribution,
    profile: &ImportanceProfile,
    cfg: &HighlightConfig,
) -> Result<HighlightAnnotation> {
    let h = corrected_entropy(dist, profile, cfg)?;
    Ok(annotate(dist.step_index, h, profile.has_significant(), cfg))
}

/// Applies the highlight rule to an already computed corrected entropy.
pub fn annotate(
    step_index: usize,
    corrected_entropy: f64,
    has_significant: bool,
    cfg: &HighlightConfig,
) -> HighlightAnnotation {
    let highlighted = has_significant && corrected_entropy >= cfg.tau;
    let intensity = if highlighted {
        (corrected_entropy / cfg.h_max).clamp(0.0, 1.0)
    } else {
        0.0
    };
    HighlightAnnotation {
        step_index,
        corrected_entropy,
        highlighted,
        intensity,
        visible: true,
    }
}

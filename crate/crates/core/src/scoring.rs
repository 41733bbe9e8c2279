//! Sample-level normality scores from per-patch matches.
//!
//! Every score is oriented so that higher means "more likely a known class".
//! Distance-style scores are negated rather than inverted.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bank::{GlobalBank, Label, MatchRecord, SampleEmbeddingSet, SampleId};
use crate::distance::l2;
use crate::error::{Error, Result};
use crate::matcher::BankIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScoreKind {
    /// Negated largest patch distance.
    Max,
    /// Negated mean patch distance.
    Mean,
    /// Mean log-probability of the patch class assignments.
    Entropy,
    /// Entropy score with each patch term weighted by its distance.
    WeightedEntropy,
    /// Negated distance between global embeddings (1NN baseline).
    NnGlobal,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 5] =
        [ScoreKind::Max, ScoreKind::Mean, ScoreKind::Entropy, ScoreKind::WeightedEntropy, ScoreKind::NnGlobal];

    /// Name used on the command line and in report headers.
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Max => "max",
            ScoreKind::Mean => "mean",
            ScoreKind::Entropy => "h",
            ScoreKind::WeightedEntropy => "hw",
            ScoreKind::NnGlobal => "nn",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScoringFunction(s.into()))
    }
}

/// Ordered, duplicate-free set of scoring functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoringConfig {
    functions: Vec<ScoreKind>,
}

impl ScoringConfig {
    pub fn new(functions: impl IntoIterator<Item = ScoreKind>) -> Result<Self> {
        let mut out: Vec<ScoreKind> = Vec::new();
        for f in functions {
            if !out.contains(&f) {
                out.push(f);
            }
        }
        if out.is_empty() {
            return Err(Error::NoScoringFunction);
        }
        Ok(Self { functions: out })
    }

    /// Parses a comma separated list such as `h,hw,max,mean`.
    pub fn parse(list: &str) -> Result<Self> {
        let kinds = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<ScoreKind>>>()?;
        Self::new(kinds)
    }

    /// The four patch-based scores.
    pub fn patch_scores() -> Self {
        Self {
            functions: vec![ScoreKind::Entropy, ScoreKind::WeightedEntropy, ScoreKind::Max, ScoreKind::Mean],
        }
    }

    pub fn functions(&self) -> &[ScoreKind] {
        &self.functions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub sample_id: SampleId,
    pub label: Label,
    /// Fraction of patches assigned to each class, indexed by class id.
    pub class_probabilities: Vec<f64>,
    /// Requested scores, in configuration order.
    pub scores: Vec<(ScoreKind, f64)>,
    pub matches: Vec<MatchRecord>,
}

impl ScoreReport {
    pub fn score(&self, kind: ScoreKind) -> Option<f64> {
        self.scores.iter().find(|(k, _)| *k == kind).map(|&(_, v)| v)
    }
}

/// Fraction of matches assigned to each of `class_count` classes.
pub fn class_probabilities(matches: &[MatchRecord], class_count: usize) -> Result<Vec<f64>> {
    if matches.is_empty() {
        return Err(Error::Empty("match list"));
    }
    let mut counts = vec![0usize; class_count];
    for m in matches {
        let slot = counts.get_mut(m.assigned_class.index()).ok_or(Error::NonDenseClasses {
            count: class_count,
            missing: m.assigned_class,
        })?;
        *slot += 1;
    }
    let total = matches.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

fn log_assignment(m: &MatchRecord, probs: &[f64]) -> f64 {
    let p = probs[m.assigned_class.index()];
    // a patch always counts towards its own class
    debug_assert!(p > 0.0, "assigned class has zero probability");
    libm::log(p)
}

/// Mean over patches of `ln P(assigned class)`; 0 when every patch agrees.
pub fn score_entropy(matches: &[MatchRecord], probs: &[f64]) -> f64 {
    let sum: f64 = matches.iter().map(|m| log_assignment(m, probs)).sum();
    sum / matches.len() as f64
}

/// Mean over patches of `distance * ln P(assigned class)`.
pub fn score_weighted_entropy(matches: &[MatchRecord], probs: &[f64]) -> f64 {
    let sum: f64 = matches.iter().map(|m| m.distance * log_assignment(m, probs)).sum();
    sum / matches.len() as f64
}

pub fn score_max(matches: &[MatchRecord]) -> f64 {
    -matches.iter().map(|m| m.distance).fold(f64::NEG_INFINITY, f64::max)
}

pub fn score_mean(matches: &[MatchRecord]) -> f64 {
    let sum: f64 = matches.iter().map(|m| m.distance).sum();
    -(sum / matches.len() as f64)
}

/// Negated distance from `sample_global` to the nearest support global embedding.
pub fn score_nn_global(globals: &GlobalBank, sample_global: &[f32]) -> Result<f64> {
    if sample_global.len() != globals.dim() {
        return Err(Error::DimensionMismatch { expected: globals.dim(), found: sample_global.len() });
    }
    let nearest = globals
        .entries()
        .iter()
        .map(|e| l2(&e.values, sample_global))
        .fold(f64::INFINITY, f64::min);
    Ok(-nearest)
}

/// Scores precomputed matches. `nn_global` is only evaluated when requested.
pub fn score_matches(
    sample: &SampleEmbeddingSet,
    matches: Vec<MatchRecord>,
    class_count: usize,
    globals: Option<&GlobalBank>,
    cfg: &ScoringConfig,
) -> Result<ScoreReport> {
    let probs = class_probabilities(&matches, class_count)?;
    let scores = cfg
        .functions()
        .iter()
        .map(|&kind| {
            let value = match kind {
                ScoreKind::Max => score_max(&matches),
                ScoreKind::Mean => score_mean(&matches),
                ScoreKind::Entropy => score_entropy(&matches, &probs),
                ScoreKind::WeightedEntropy => score_weighted_entropy(&matches, &probs),
                ScoreKind::NnGlobal => {
                    let bank = globals.ok_or(Error::MissingGlobalEmbeddings)?;
                    let g = sample.global().ok_or(Error::MissingGlobalEmbeddings)?;
                    score_nn_global(bank, g)?
                }
            };
            Ok((kind, value))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport {
        sample_id: sample.sample_id(),
        label: sample.label(),
        class_probabilities: probs,
        scores,
        matches,
    })
}

/// Matches every patch of `sample` against `index` and computes the
/// configured scores.
pub fn score_sample(index: &BankIndex, sample: &SampleEmbeddingSet, cfg: &ScoringConfig) -> Result<ScoreReport> {
    let matches = index.match_patches(sample)?;
    score_matches(sample, matches, index.class_count(), index.globals(), cfg)
}

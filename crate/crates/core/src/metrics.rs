//! Threshold-free evaluation: AUROC and FPR at 95% TPR.
//!
//! Known samples are the positives. A sample is accepted as known when its
//! normality score is at or above the threshold.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scoring::{ScoreKind, ScoreReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub function: ScoreKind,
    pub auroc: f64,
    pub fpr95: f64,
    pub n_known: usize,
    pub n_unknown: usize,
}

fn check(known: &[f64], unknown: &[f64]) -> Result<()> {
    if known.is_empty() {
        return Err(Error::EmptyPopulation("known"));
    }
    if unknown.is_empty() {
        return Err(Error::EmptyPopulation("unknown"));
    }
    if !known.iter().chain(unknown).all(|s| s.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    Ok(())
}

/// Mann-Whitney estimate of `P(known > unknown)`, ties counting one half.
///
/// Runs in `O(n log n)` and counts pairs in integers, so the result equals
/// the pairwise definition up to the final division.
pub fn auroc(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check(known, unknown)?;
    let mut all: Vec<(f64, bool)> = known
        .iter()
        .map(|&s| (s, true))
        .chain(unknown.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // wins counts strictly-greater pairs twice, ties once
    let mut doubled: u128 = 0;
    let mut unknown_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut k_group, mut u_group) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                k_group += 1;
            } else {
                u_group += 1;
            }
            j += 1;
        }
        doubled += 2 * k_group * unknown_below + k_group * u_group;
        unknown_below += u_group;
        i = j;
    }
    let pairs = 2 * known.len() as u128 * unknown.len() as u128;
    Ok(doubled as f64 / pairs as f64)
}

/// False positive rate at the largest threshold that still accepts at least
/// 95% of the known samples.
pub fn fpr95(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check(known, unknown)?;
    let n = known.len();
    // smallest accepted count with count / n >= 0.95
    let need = (95 * n).div_ceil(100);
    let mut sorted = known.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[need - 1];
    let accepted = unknown.iter().filter(|&&s| s >= threshold).count();
    Ok(accepted as f64 / unknown.len() as f64)
}

/// Splits reports by ground truth and evaluates one scoring function.
pub fn evaluate(reports: &[ScoreReport], kind: ScoreKind) -> Result<EvalReport> {
    let mut known = Vec::new();
    let mut unknown = Vec::new();
    for r in reports {
        let s = r.score(kind).ok_or(Error::InvalidConfig(alloc::format!("score `{kind}` was not computed")))?;
        if r.label.is_known() {
            known.push(s);
        } else {
            unknown.push(s);
        }
    }
    evaluate_scores(kind, &known, &unknown)
}

pub fn evaluate_scores(kind: ScoreKind, known: &[f64], unknown: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        function: kind,
        auroc: auroc(known, unknown)?,
        fpr95: fpr95(known, unknown)?,
        n_known: known.len(),
        n_unknown: unknown.len(),
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

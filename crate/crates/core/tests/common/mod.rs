//! Direct-from-definition oracles shared by the integration tests. None of
//! these call into the engine's distance, matching or scoring code.
#![allow(dead_code)]

use openpatch_core::bank::{BankMetadata, ClassMemoryBank, PatchEmbedding};
use openpatch_core::{ClassId, Label, SampleEmbeddingSet, UnifiedBank};

pub fn dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Naive nearest neighbour over `(class, row)` pairs in bank order; strict
/// comparison keeps the first minimum.
pub fn nearest(bank: &[(u32, Vec<f32>)], q: &[f32]) -> (usize, f64, u32) {
    let mut best = (0, f64::INFINITY, 0);
    for (i, (c, row)) in bank.iter().enumerate() {
        let d = dist(row, q);
        if d < best.1 {
            best = (i, d, *c);
        }
    }
    best
}

pub struct OracleScores {
    pub probs: Vec<f64>,
    pub entropy: f64,
    pub weighted: f64,
    pub max: f64,
    pub mean: f64,
}

/// Scores straight from the definitions, given per-patch (class, distance).
pub fn oracle_scores(assign: &[(u32, f64)], class_count: usize) -> OracleScores {
    let p = assign.len() as f64;
    let probs: Vec<f64> = (0..class_count as u32)
        .map(|c| assign.iter().filter(|(a, _)| *a == c).count() as f64 / p)
        .collect();
    let share = |c: u32| assign.iter().filter(|(a, _)| *a == c).count() as f64 / p;
    let entropy = assign.iter().map(|&(c, _)| share(c).ln()).sum::<f64>() / p;
    let weighted = assign.iter().map(|&(c, d)| d * share(c).ln()).sum::<f64>() / p;
    let max = -assign.iter().map(|&(_, d)| d).fold(f64::MIN, f64::max);
    let mean = -assign.iter().map(|&(_, d)| d).sum::<f64>() / p;
    OracleScores { probs, entropy, weighted, max, mean }
}

/// Pairwise AUROC with half credit for ties.
pub fn pairwise_auroc(known: &[f64], unknown: &[f64]) -> f64 {
    let mut credit = 0.0;
    for &k in known {
        for &u in unknown {
            if k > u {
                credit += 1.0;
            } else if k == u {
                credit += 0.5;
            }
        }
    }
    credit / (known.len() * unknown.len()) as f64
}

/// Sweeps every candidate threshold and keeps the largest one whose TPR
/// reaches 0.95.
pub fn sweep_fpr95(known: &[f64], unknown: &[f64]) -> f64 {
    let mut candidates: Vec<f64> = known.iter().chain(unknown).copied().collect();
    candidates.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for t in candidates {
        let tpr = known.iter().filter(|&&s| s >= t).count() as f64 / known.len() as f64;
        if tpr >= 0.95 {
            return unknown.iter().filter(|&&s| s >= t).count() as f64 / unknown.len() as f64;
        }
    }
    unreachable!("the smallest known score always reaches full TPR")
}

/// Exhaustive discrete k-center optimum: best radius over all `m`-subsets.
pub fn optimal_k_center(points: &[Vec<f32>], m: usize) -> f64 {
    fn rec(points: &[Vec<f32>], m: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == m {
            let r = points
                .iter()
                .map(|p| chosen.iter().map(|&c| dist(p, &points[c])).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            *best = best.min(r);
            return;
        }
        for i in start..points.len() {
            chosen.push(i);
            rec(points, m, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(points, m.min(points.len()), 0, &mut Vec::new(), &mut best);
    best
}

pub fn make_bank(classes: &[Vec<Vec<f32>>]) -> UnifiedBank {
    let banks = classes
        .iter()
        .enumerate()
        .map(|(c, rows)| {
            let patches = rows
                .iter()
                .enumerate()
                .map(|(i, v)| PatchEmbedding::new(c as u64, i as u32, v.clone()))
                .collect();
            ClassMemoryBank::new(ClassId(c as u32), patches).unwrap()
        })
        .collect();
    UnifiedBank::new(banks, BankMetadata::new(), None).unwrap()
}

/// Bank rows flattened in class order, as the oracle sees them.
pub fn flat_rows(classes: &[Vec<Vec<f32>>]) -> Vec<(u32, Vec<f32>)> {
    classes
        .iter()
        .enumerate()
        .flat_map(|(c, rows)| rows.iter().map(move |r| (c as u32, r.clone())))
        .collect()
}

pub fn probe(rows: Vec<Vec<f32>>) -> SampleEmbeddingSet {
    SampleEmbeddingSet::from_rows(1_000_000, Label::Unknown, rows).unwrap()
}

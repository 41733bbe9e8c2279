//! End-to-end composition: support set → unified bank → scores → metrics.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::bank::{meta, BankMetadata, ClassMemoryBank, GlobalBank, SampleEmbeddingSet, UnifiedBank};
use crate::coreset::{select_coreset, CoresetConfig};
use crate::error::Result;
use crate::matcher::BankIndex;
use crate::metrics::{evaluate, EvalReport};
use crate::scoring::{score_sample, ScoreReport, ScoringConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub coreset: CoresetConfig,
    pub scoring: ScoringConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { coreset: CoresetConfig::default(), scoring: ScoringConfig::patch_scores() }
    }
}

/// Builds one bank per class, reduces each with its own coreset, and joins
/// them. Keep ratio, seed and projection width are recorded as metadata.
pub fn build_bank(support: &[SampleEmbeddingSet], cfg: &CoresetConfig) -> Result<UnifiedBank> {
    cfg.validate()?;
    let banks = ClassMemoryBank::from_support(support)?
        .iter()
        .map(|b| select_coreset(b, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = BankMetadata::new();
    metadata.insert(meta::KEEP_RATIO.into(), format!("{}", cfg.keep_ratio));
    metadata.insert(meta::SEED.into(), cfg.seed.to_string());
    if let Some(d) = cfg.projection_dim {
        metadata.insert(meta::PROJECTION_DIM.into(), d.to_string());
    }
    UnifiedBank::new(banks, metadata, GlobalBank::from_support(support)?)
}

/// Scores every test sample, preserving input order.
pub fn score_samples(
    index: &BankIndex,
    test: &[SampleEmbeddingSet],
    cfg: &ScoringConfig,
) -> Result<Vec<ScoreReport>> {
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        test.par_iter().map(|s| score_sample(index, s, cfg)).collect()
    }
    #[cfg(not(feature = "rayon"))]
    {
        test.iter().map(|s| score_sample(index, s, cfg)).collect()
    }
}

/// One [`EvalReport`] per configured scoring function.
pub fn evaluate_all(reports: &[ScoreReport], cfg: &ScoringConfig) -> Result<Vec<EvalReport>> {
    cfg.functions().iter().map(|&k| evaluate(reports, k)).collect()
}

/// Full pipeline on in-memory data.
pub fn run(
    support: &[SampleEmbeddingSet],
    test: &[SampleEmbeddingSet],
    cfg: &PipelineConfig,
) -> Result<Vec<EvalReport>> {
    let bank = build_bank(support, &cfg.coreset)?;
    let index = BankIndex::build(&bank)?;
    let reports = score_samples(&index, test, &cfg.scoring)?;
    evaluate_all(&reports, &cfg.scoring)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{ClassId, Label};
    use crate::scoring::ScoreKind;
    use alloc::vec;

    fn s(id: u64, label: Label, rows: Vec<Vec<f32>>) -> SampleEmbeddingSet {
        SampleEmbeddingSet::from_rows(id, label, rows).unwrap()
    }

    #[test]
    fn bank_counts_follow_keep_ratio() {
        let support: Vec<_> = (0..10)
            .map(|i| s(i, Label::Known(ClassId((i % 2) as u32)), (0..10).map(|k| vec![k as f32, i as f32]).collect()))
            .collect();
        let cfg = CoresetConfig::new(0.2, 1).unwrap();
        let bank = build_bank(&support, &cfg).unwrap();
        assert_eq!(bank.banks().iter().map(|b| b.len()).collect::<Vec<_>>(), vec![10, 10]);
        assert_eq!(bank.metadata()["keep_ratio"], "0.2");
        assert_eq!(bank.metadata()["seed"], "1");

        let full = build_bank(&support, &CoresetConfig::new(1.0, 1).unwrap()).unwrap();
        assert_eq!(full.total_patches(), 100);
    }

    #[test]
    fn identical_sample_scores_zero() {
        let c0 = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let c1 = vec![vec![10.0, 10.0], vec![11.0, 10.0]];
        let support = vec![s(0, Label::Known(ClassId(0)), c0.clone()), s(1, Label::Known(ClassId(1)), c1)];
        let bank = build_bank(&support, &CoresetConfig::new(1.0, 0).unwrap()).unwrap();
        let index = BankIndex::build(&bank).unwrap();
        let report = score_sample(&index, &s(5, Label::Unknown, c0), &ScoringConfig::patch_scores()).unwrap();
        assert_eq!(report.class_probabilities, vec![1.0, 0.0]);
        assert_eq!(report.score(ScoreKind::Entropy), Some(0.0));
        assert_eq!(report.score(ScoreKind::WeightedEntropy), Some(0.0));
        assert_eq!(report.score(ScoreKind::Mean), Some(0.0));
    }
}

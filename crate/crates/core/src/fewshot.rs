//! K-shot evaluation: repeatedly subsample K support samples per class,
//! rebuild the bank, and aggregate the metrics across repeats.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bank::{ClassId, SampleEmbeddingSet};
use crate::error::{Error, Result};
use crate::metrics::{mean_std, EvalReport};
use crate::pipeline::{self, PipelineConfig};
use crate::scoring::ScoreKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FewShotConfig {
    /// Support samples drawn per class.
    pub k: usize,
    pub repeats: usize,
    /// Master seed; repeat `r` draws with `seed ^ r`.
    pub seed: u64,
}

impl FewShotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        Ok(())
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed ^ repeat as u64
    }
}

/// Support samples drawn for one class, as indices into the support slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDraw {
    pub class_id: ClassId,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatRun {
    pub repeat: usize,
    pub seed: u64,
    pub draws: Vec<ClassDraw>,
    pub evals: Vec<EvalReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub function: ScoreKind,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub fpr95_mean: f64,
    pub fpr95_std: f64,
    pub n_known: usize,
    pub n_unknown: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotReport {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub summaries: Vec<MetricSummary>,
    pub runs: Vec<RepeatRun>,
}

/// Draws `k` samples per class without replacement. Classes come out in
/// ascending id; indices within a class are sorted.
pub fn draw_support(support: &[SampleEmbeddingSet], k: usize, seed: u64) -> Result<Vec<ClassDraw>> {
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, s) in support.iter().enumerate() {
        let class = s.label().known().ok_or(Error::UnknownInSupport(s.sample_id()))?;
        by_class.entry(class).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::Empty("support set"));
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::InsufficientSupport { class, available: members.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(by_class
        .into_iter()
        .map(|(class_id, members)| {
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|j| members[j])
                .collect();
            picked.sort_unstable();
            ClassDraw { class_id, indices: picked }
        })
        .collect())
}

fn run_repeat(
    support: &[SampleEmbeddingSet],
    test: &[SampleEmbeddingSet],
    cfg: &FewShotConfig,
    pipeline_cfg: &PipelineConfig,
    repeat: usize,
) -> Result<RepeatRun> {
    let seed = cfg.repeat_seed(repeat);
    let draws = draw_support(support, cfg.k, seed)?;
    let mut chosen: Vec<usize> = draws.iter().flat_map(|d| d.indices.iter().copied()).collect();
    chosen.sort_unstable();
    let subset: Vec<SampleEmbeddingSet> = chosen.into_iter().map(|i| support[i].clone()).collect();
    let evals = pipeline::run(&subset, test, pipeline_cfg)?;
    Ok(RepeatRun { repeat, seed, draws, evals })
}

/// Runs the K-shot protocol and reports mean and standard deviation of
/// AUROC and FPR95 per scoring function.
pub fn fewshot_protocol(
    support: &[SampleEmbeddingSet],
    test: &[SampleEmbeddingSet],
    cfg: &FewShotConfig,
    pipeline_cfg: &PipelineConfig,
) -> Result<FewShotReport> {
    cfg.validate()?;
    // fail on an undersized class before doing any work
    draw_support(support, cfg.k, cfg.seed)?;

    #[cfg(feature = "rayon")]
    let runs: Vec<RepeatRun> = {
        use rayon::prelude::*;
        (0..cfg.repeats)
            .into_par_iter()
            .map(|r| run_repeat(support, test, cfg, pipeline_cfg, r))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "rayon"))]
    let runs: Vec<RepeatRun> = (0..cfg.repeats)
        .map(|r| run_repeat(support, test, cfg, pipeline_cfg, r))
        .collect::<Result<_>>()?;

    let summaries = pipeline_cfg
        .scoring
        .functions()
        .iter()
        .enumerate()
        .map(|(f, &function)| {
            let auroc: Vec<f64> = runs.iter().map(|r| r.evals[f].auroc).collect();
            let fpr: Vec<f64> = runs.iter().map(|r| r.evals[f].fpr95).collect();
            let (auroc_mean, auroc_std) = mean_std(&auroc);
            let (fpr95_mean, fpr95_std) = mean_std(&fpr);
            MetricSummary {
                function,
                auroc_mean,
                auroc_std,
                fpr95_mean,
                fpr95_std,
                n_known: runs[0].evals[f].n_known,
                n_unknown: runs[0].evals[f].n_unknown,
            }
        })
        .collect();
    Ok(FewShotReport { k: cfg.k, repeats: cfg.repeats, seed: cfg.seed, summaries, runs })
}

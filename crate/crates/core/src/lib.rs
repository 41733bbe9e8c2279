//! Training-free semantic novelty detection over patch embeddings.
//!
//! Known-class samples are split into per-class memory banks of patch
//! embeddings, each bank is compacted with a greedy k-center coreset, and
//! test samples are scored by matching every patch to its nearest bank entry.
//! A sample whose patches are recomposed from many different classes gets a
//! low normality score.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `rayon` feature
//! to parallelise scoring over samples and few-shot repeats.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod bank;
pub mod coreset;
pub mod distance;
pub mod error;
pub mod fewshot;
pub mod matcher;
pub mod metrics;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub use bank::{
    BankMetadata, ClassId, ClassMemoryBank, GlobalBank, GlobalEmbedding, Label, MatchRecord,
    PatchEmbedding, Provenance, SampleEmbeddingSet, SampleId, UnifiedBank,
};
pub use coreset::{coverage_radius, select_coreset, CoresetConfig};
pub use error::{Error, Result};
pub use fewshot::{fewshot_protocol, FewShotConfig, FewShotReport, MetricSummary};
pub use matcher::{build_index, match_patches, BankIndex};
pub use metrics::{auroc, fpr95, EvalReport};
pub use pipeline::PipelineConfig;
pub use scoring::{score_sample, ScoreKind, ScoreReport, ScoringConfig};
pub use synth::{generate, OodMode, SynthConfig, SynthData};

use alloc::string::String;

use crate::bank::{ClassId, SampleId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("patch index {patch_index} appears twice in sample {sample_id}")]
    DuplicatePatchIndex { sample_id: SampleId, patch_index: u32 },
    #[error("patch belongs to sample {found}, expected {expected}")]
    ForeignPatch { expected: SampleId, found: SampleId },
    #[error("sample {0} mixes patches with and without anchor points")]
    MixedAnchors(SampleId),
    #[error("keep ratio {0} is outside (0, 1]")]
    InvalidKeepRatio(f64),
    #[error("class ids must be dense 0..{count}, missing {missing}")]
    NonDenseClasses { count: usize, missing: ClassId },
    #[error("invalid label code {0}")]
    InvalidLabel(i32),
    #[error("support sample {0} has the UNKNOWN label")]
    UnknownInSupport(SampleId),
    #[error("class {class} has {available} support samples, fewer than k = {k}")]
    InsufficientSupport { class: ClassId, available: usize, k: usize },
    #[error("no scoring function selected")]
    NoScoringFunction,
    #[error("unknown scoring function `{0}`")]
    UnknownScoringFunction(String),
    #[error("global embeddings are missing")]
    MissingGlobalEmbeddings,
    #[error("score is not finite")]
    NonFiniteScore,
    #[error("no {0} samples to evaluate")]
    EmptyPopulation(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

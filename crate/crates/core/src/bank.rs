//! Domain types shared by every stage of the engine.
//!
//! Embedding scalars are stored as `f32`; everything derived from them
//! (distances, probabilities, scores) is carried in `f64`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type SampleId = u64;

/// Dense class identifier in `0..class_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl ClassId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ground-truth label of a sample: one of the known classes, or unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Known(ClassId),
    Unknown,
}

impl Label {
    /// On-disk code of [`Label::Unknown`].
    pub const UNKNOWN_CODE: i32 = -1;

    pub fn code(self) -> i32 {
        match self {
            Label::Known(c) => c.0 as i32,
            Label::Unknown => Self::UNKNOWN_CODE,
        }
    }

    pub fn from_code(code: i32) -> Result<Self> {
        match code {
            Self::UNKNOWN_CODE => Ok(Label::Unknown),
            c if c >= 0 => Ok(Label::Known(ClassId(c as u32))),
            c => Err(Error::InvalidLabel(c)),
        }
    }

    pub fn known(self) -> Option<ClassId> {
        match self {
            Label::Known(c) => Some(c),
            Label::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, Label::Known(_))
    }
}

/// Where a bank patch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub sample_id: SampleId,
    pub patch_index: u32,
}

/// One feature vector describing a local patch of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEmbedding {
    pub sample_id: SampleId,
    pub patch_index: u32,
    pub values: Vec<f32>,
    /// Patch centre in model coordinates, used for per-point colouring.
    pub anchor: Option<[f32; 3]>,
}

impl PatchEmbedding {
    pub fn new(sample_id: SampleId, patch_index: u32, values: Vec<f32>) -> Self {
        Self { sample_id, patch_index, values, anchor: None }
    }

    pub fn with_anchor(mut self, anchor: [f32; 3]) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { sample_id: self.sample_id, patch_index: self.patch_index }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.values.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.values.len() });
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("patch embedding"));
        }
        if let Some(a) = self.anchor {
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("anchor point"));
            }
        }
        Ok(())
    }
}

/// All patch embeddings of one point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEmbeddingSet {
    sample_id: SampleId,
    label: Label,
    dim: usize,
    patches: Vec<PatchEmbedding>,
    global: Option<Vec<f32>>,
}

impl SampleEmbeddingSet {
    pub fn new(
        sample_id: SampleId,
        label: Label,
        patches: Vec<PatchEmbedding>,
        global: Option<Vec<f32>>,
    ) -> Result<Self> {
        let first = patches.first().ok_or(Error::Empty("sample patch list"))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::Empty("patch embedding"));
        }
        let anchored = first.anchor.is_some();
        let mut seen = BTreeMap::new();
        for p in &patches {
            p.check(dim)?;
            if p.sample_id != sample_id {
                return Err(Error::ForeignPatch { expected: sample_id, found: p.sample_id });
            }
            if p.anchor.is_some() != anchored {
                return Err(Error::MixedAnchors(sample_id));
            }
            if seen.insert(p.patch_index, ()).is_some() {
                return Err(Error::DuplicatePatchIndex { sample_id, patch_index: p.patch_index });
            }
        }
        if let Some(g) = &global {
            if g.is_empty() {
                return Err(Error::Empty("global embedding"));
            }
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("global embedding"));
            }
        }
        Ok(Self { sample_id, label, dim, patches, global })
    }

    /// Builds a sample whose patch indices follow row order.
    pub fn from_rows(sample_id: SampleId, label: Label, rows: Vec<Vec<f32>>) -> Result<Self> {
        let patches = rows
            .into_iter()
            .enumerate()
            .map(|(k, values)| PatchEmbedding::new(sample_id, k as u32, values))
            .collect();
        Self::new(sample_id, label, patches, None)
    }

    pub fn with_global(self, global: Vec<f32>) -> Result<Self> {
        Self::new(self.sample_id, self.label, self.patches, Some(global))
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn sample_id(&self) -> SampleId {
        self.sample_id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patches(&self) -> &[PatchEmbedding] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn global(&self) -> Option<&[f32]> {
        self.global.as_deref()
    }

    pub fn has_anchors(&self) -> bool {
        self.patches[0].anchor.is_some()
    }

    pub fn into_patches(self) -> Vec<PatchEmbedding> {
        self.patches
    }
}

/// Patch embeddings of every support sample of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMemoryBank {
    class_id: ClassId,
    dim: usize,
    patches: Vec<PatchEmbedding>,
}

impl ClassMemoryBank {
    pub fn new(class_id: ClassId, patches: Vec<PatchEmbedding>) -> Result<Self> {
        let dim = patches.first().ok_or(Error::Empty("class memory bank"))?.dim();
        for p in &patches {
            p.check(dim)?;
        }
        Ok(Self { class_id, dim, patches })
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patches(&self) -> &[PatchEmbedding] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn provenance(&self) -> impl Iterator<Item = Provenance> + '_ {
        self.patches.iter().map(PatchEmbedding::provenance)
    }

    /// Groups support samples into one bank per class, in ascending class
    /// id. Class ids must be dense.
    pub fn from_support(support: &[SampleEmbeddingSet]) -> Result<Vec<ClassMemoryBank>> {
        let mut grouped: BTreeMap<ClassId, Vec<PatchEmbedding>> = BTreeMap::new();
        let dim = support.first().ok_or(Error::Empty("support set"))?.dim();
        for s in support {
            let class = s.label().known().ok_or(Error::UnknownInSupport(s.sample_id()))?;
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
            }
            grouped.entry(class).or_default().extend(s.patches().iter().cloned());
        }
        check_dense(grouped.keys().copied())?;
        grouped.into_iter().map(|(c, p)| ClassMemoryBank::new(c, p)).collect()
    }
}

fn check_dense(ids: impl Iterator<Item = ClassId>) -> Result<usize> {
    let ids: Vec<ClassId> = ids.collect();
    for (i, &c) in ids.iter().enumerate() {
        if c.index() != i {
            return Err(Error::NonDenseClasses { count: ids.len(), missing: ClassId(i as u32) });
        }
    }
    Ok(ids.len())
}

/// The pooled embedding of one support sample, for the global 1NN baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEmbedding {
    pub sample_id: SampleId,
    pub class_id: ClassId,
    pub values: Vec<f32>,
}

/// Global embeddings of the support set. Not subject to coreset selection.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBank {
    dim: usize,
    entries: Vec<GlobalEmbedding>,
}

impl GlobalBank {
    pub fn new(entries: Vec<GlobalEmbedding>) -> Result<Self> {
        let dim = entries.first().ok_or(Error::Empty("global embedding bank"))?.values.len();
        if dim == 0 {
            return Err(Error::Empty("global embedding"));
        }
        for e in &entries {
            if e.values.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.values.len() });
            }
            if !e.values.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("global embedding"));
            }
        }
        Ok(Self { dim, entries })
    }

    /// Collects global embeddings from support samples; `None` unless every
    /// sample carries one.
    pub fn from_support(support: &[SampleEmbeddingSet]) -> Result<Option<Self>> {
        let mut entries = Vec::with_capacity(support.len());
        for s in support {
            let Some(g) = s.global() else { return Ok(None) };
            let class_id = s.label().known().ok_or(Error::UnknownInSupport(s.sample_id()))?;
            entries.push(GlobalEmbedding { sample_id: s.sample_id(), class_id, values: g.to_vec() });
        }
        if entries.is_empty() {
            return Ok(None);
        }
        Self::new(entries).map(Some)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[GlobalEmbedding] {
        &self.entries
    }
}

/// Free-form bank metadata, ordered by key.
pub type BankMetadata = BTreeMap<String, String>;

/// Well-known [`BankMetadata`] keys.
pub mod meta {
    pub const LAYER: &str = "layer";
    pub const BACKBONE: &str = "backbone";
    pub const KEEP_RATIO: &str = "keep_ratio";
    pub const SEED: &str = "seed";
    pub const PROJECTION_DIM: &str = "projection_dim";
}

/// Disjoint union of the (coreset-reduced) class banks.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedBank {
    dim: usize,
    banks: Vec<ClassMemoryBank>,
    metadata: BankMetadata,
    globals: Option<GlobalBank>,
}

impl UnifiedBank {
    /// `banks` may come in any order; they are stored by ascending class id
    /// and must cover `0..banks.len()` exactly.
    pub fn new(
        mut banks: Vec<ClassMemoryBank>,
        metadata: BankMetadata,
        globals: Option<GlobalBank>,
    ) -> Result<Self> {
        let dim = banks.first().ok_or(Error::Empty("unified bank"))?.dim();
        banks.sort_by_key(ClassMemoryBank::class_id);
        for b in &banks {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: b.dim() });
            }
        }
        let count = check_dense(banks.iter().map(ClassMemoryBank::class_id))?;
        if let Some(g) = &globals {
            if let Some(e) = g.entries().iter().find(|e| e.class_id.index() >= count) {
                return Err(Error::NonDenseClasses { count, missing: e.class_id });
            }
        }
        Ok(Self { dim, banks, metadata, globals })
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.banks.len()
    }

    pub fn banks(&self) -> &[ClassMemoryBank] {
        &self.banks
    }

    pub fn bank(&self, class: ClassId) -> Option<&ClassMemoryBank> {
        self.banks.get(class.index())
    }

    pub fn total_patches(&self) -> usize {
        self.banks.iter().map(ClassMemoryBank::len).sum()
    }

    pub fn metadata(&self) -> &BankMetadata {
        &self.metadata
    }

    pub fn globals(&self) -> Option<&GlobalBank> {
        self.globals.as_ref()
    }

    pub fn has_anchors(&self) -> bool {
        self.banks.iter().flat_map(|b| b.patches()).all(|p| p.anchor.is_some())
    }
}

/// Nearest-bank-patch result for one test patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub patch_index: u32,
    /// Euclidean distance to the nearest bank patch.
    pub distance: f64,
    /// Class of that bank patch.
    pub assigned_class: ClassId,
    pub matched: Provenance,
}

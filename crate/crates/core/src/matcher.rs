//! Exact nearest-neighbour matching of test patches against the unified bank.

use alloc::vec::Vec;

use crate::bank::{ClassId, GlobalBank, MatchRecord, PatchEmbedding, Provenance, SampleEmbeddingSet, UnifiedBank};
use crate::distance::{dot, squared_norm};
use crate::error::{Error, Result};

/// Flattened, row-major view of a [`UnifiedBank`].
///
/// Rows enumerate the class banks in ascending class id and keep the order
/// within each class.
#[derive(Debug, Clone)]
pub struct BankIndex {
    dim: usize,
    class_count: usize,
    rows: Vec<f32>,
    classes: Vec<ClassId>,
    provenance: Vec<Provenance>,
    norms: Vec<f64>,
    globals: Option<GlobalBank>,
}

pub fn build_index(bank: &UnifiedBank) -> Result<BankIndex> {
    BankIndex::build(bank)
}

pub fn match_patches(index: &BankIndex, sample: &SampleEmbeddingSet) -> Result<Vec<MatchRecord>> {
    index.match_patches(sample)
}

impl BankIndex {
    pub fn build(bank: &UnifiedBank) -> Result<Self> {
        let dim = bank.dim();
        let total = bank.total_patches();
        if total == 0 {
            return Err(Error::Empty("unified bank"));
        }
        let mut rows = Vec::with_capacity(total * dim);
        let mut classes = Vec::with_capacity(total);
        let mut provenance = Vec::with_capacity(total);
        let mut norms = Vec::with_capacity(total);
        for class_bank in bank.banks() {
            for p in class_bank.patches() {
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
                }
                rows.extend_from_slice(&p.values);
                classes.push(class_bank.class_id());
                provenance.push(p.provenance());
                norms.push(squared_norm(&p.values));
            }
        }
        Ok(Self {
            dim,
            class_count: bank.class_count(),
            rows,
            classes,
            provenance,
            norms,
            globals: bank.globals().cloned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Cached squared L2 norm of every row.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn globals(&self) -> Option<&GlobalBank> {
        self.globals.as_ref()
    }

    /// Row index and Euclidean distance of the nearest row; ties go to the
    /// lowest row.
    pub fn nearest(&self, query: &[f32]) -> Result<(usize, f64)> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: query.len() });
        }
        if self.is_empty() {
            return Err(Error::Empty("bank index"));
        }
        let q_norm = squared_norm(query);
        let mut best = 0;
        let mut best_sq = f64::INFINITY;
        for (i, (row, &norm)) in self.rows.chunks_exact(self.dim).zip(&self.norms).enumerate() {
            let sq = q_norm + norm - 2.0 * dot(query, row);
            if sq < best_sq {
                best = i;
                best_sq = sq;
            }
        }
        Ok((best, libm::sqrt(best_sq.max(0.0))))
    }

    fn match_one(&self, patch: &PatchEmbedding) -> Result<MatchRecord> {
        let (row, distance) = self.nearest(&patch.values)?;
        Ok(MatchRecord {
            patch_index: patch.patch_index,
            distance,
            assigned_class: self.classes[row],
            matched: self.provenance[row],
        })
    }

    /// One [`MatchRecord`] per sample patch, in patch order.
    pub fn match_patches(&self, sample: &SampleEmbeddingSet) -> Result<Vec<MatchRecord>> {
        if sample.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: sample.dim() });
        }
        #[cfg(feature = "rayon")]
        {
            use rayon::prelude::*;
            sample.patches().par_iter().map(|p| self.match_one(p)).collect()
        }
        #[cfg(not(feature = "rayon"))]
        {
            sample.patches().iter().map(|p| self.match_one(p)).collect()
        }
    }
}

//! Greedy k-center (farthest-point) subselection of a class memory bank.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bank::ClassMemoryBank;
use crate::distance::{l2, squared_l2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoresetConfig {
    /// Fraction of each class bank to keep, in `(0, 1]`.
    pub keep_ratio: f64,
    /// Seeds the choice of the first centre (and the projection matrix).
    pub seed: u64,
    /// Run the selection on a Gaussian random projection of this width
    /// instead of the full embeddings. The result may differ from exact mode.
    pub projection_dim: Option<u32>,
}

impl Default for CoresetConfig {
    fn default() -> Self {
        Self { keep_ratio: 0.2, seed: 0, projection_dim: None }
    }
}

impl CoresetConfig {
    pub fn new(keep_ratio: f64, seed: u64) -> Result<Self> {
        let cfg = Self { keep_ratio, seed, projection_dim: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return Err(Error::InvalidKeepRatio(self.keep_ratio));
        }
        if self.projection_dim == Some(0) {
            return Err(Error::InvalidConfig("projection dimension must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(keep_ratio * n)`, clamped to `1..=n`.
    ///
    /// The product is shrunk by a relative 1e-12 before rounding up so that
    /// decimal ratios such as 0.07 (whose product with 100 is 7.000000000000001
    /// in binary) do not gain an extra patch.
    pub fn target_size(&self, n: usize) -> Result<usize> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Empty("class memory bank"));
        }
        let exact = self.keep_ratio * n as f64;
        let m = libm::ceil(exact * (1.0 - 1e-12)) as usize;
        Ok(m.clamp(1, n))
    }
}

/// Farthest-point traversal starting at `start`: returns `m` indices into
/// `points`, each new pick maximising its distance to the already chosen set.
/// Ties go to the lowest index.
pub fn farthest_point_order<P: AsRef<[f32]>>(points: &[P], m: usize, start: usize) -> Vec<usize> {
    let n = points.len();
    assert!(start < n, "start index {start} out of range for {n} points");
    let m = m.min(n);
    let mut order = Vec::with_capacity(m);
    if m == 0 {
        return order;
    }
    order.push(start);
    // squared distance of every point to its closest selected centre
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| squared_l2(p.as_ref(), points[start].as_ref()))
        .collect();
    while order.len() < m {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in nearest.iter().enumerate() {
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        order.push(best);
        let center = points[best].as_ref();
        for (d, p) in nearest.iter_mut().zip(points) {
            let nd = squared_l2(p.as_ref(), center);
            if nd < *d {
                *d = nd;
            }
        }
    }
    order
}

/// Reduces `bank` to `ceil(keep_ratio * n)` patches by greedy k-center
/// selection. The first centre is drawn uniformly using `cfg.seed`. Patches
/// are returned in selection order with their provenance intact.
pub fn select_coreset(bank: &ClassMemoryBank, cfg: &CoresetConfig) -> Result<ClassMemoryBank> {
    let n = bank.len();
    let m = cfg.target_size(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = rng.random_range(0..n);
    let rows: Vec<&[f32]> = bank.patches().iter().map(|p| p.values.as_slice()).collect();

    let order = match cfg.projection_dim {
        None => farthest_point_order(&rows, m, start),
        Some(d) => {
            let projected = random_projection(&rows, d as usize, &mut rng);
            farthest_point_order(&projected, m, start)
        }
    };
    let patches = order.into_iter().map(|i| bank.patches()[i].clone()).collect();
    ClassMemoryBank::new(bank.class_id(), patches)
}

/// Projects rows onto `width` dense Gaussian directions scaled by `1/sqrt(width)`.
fn random_projection(rows: &[&[f32]], width: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    let dim = rows.first().map_or(0, |r| r.len());
    let scale = 1.0 / libm::sqrt(width as f64);
    let matrix: Vec<f64> = (0..dim * width)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g * scale
        })
        .collect();
    rows.iter()
        .map(|row| {
            (0..width)
                .map(|j| {
                    row.iter()
                        .enumerate()
                        .map(|(c, &x)| f64::from(x) * matrix[c * width + j])
                        .sum::<f64>() as f32
                })
                .collect()
        })
        .collect()
}

/// Largest distance from any point of `full` to its nearest point in `selected`.
pub fn coverage_radius<A: AsRef<[f32]>, B: AsRef<[f32]>>(selected: &[A], full: &[B]) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::Empty("selected set"));
    }
    let radius = full
        .iter()
        .map(|p| {
            selected
                .iter()
                .map(|s| l2(p.as_ref(), s.as_ref()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(radius)
}

//! Regular axis-aligned partition of the input space.
//!
//! Two layouts are supported. `Slab` treats the grid as independent
//! per-dimension histograms: each bin is one dimension's interval extended
//! across all other dimensions, giving `bins_per_dim * dims` bins in total,
//! and every point belongs to one slab per dimension. `Product` is the full
//! cartesian cell grid with one bin per point; its bin count grows as
//! `bins_per_dim ^ dims`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Slab,
    Product,
}

impl std::fmt::Display for GridMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridMode::Slab => write!(f, "slab"),
            GridMode::Product => write!(f, "product"),
        }
    }
}

/// Flat bin identifier in `0..total_bins()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinIndex(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub mode: GridMode,
    lower: Vec<f64>,
    upper: Vec<f64>,
    bins: Vec<usize>,
    width: Vec<f64>,
}

impl Grid {
    /// Builds a grid over the given per-dimension bounds. Degenerate
    /// dimensions (min == max) are widened to `center +/- max(0.5,
    /// |center| * 1e-9)` so every cell has positive width.
    pub fn build(bounds: &[(f64, f64)], bins_per_dim: &[usize], mode: GridMode) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Empty("grid bounds"));
        }
        if bounds.len() != bins_per_dim.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                found: bins_per_dim.len(),
            });
        }
        let mut lower = Vec::with_capacity(bounds.len());
        let mut upper = Vec::with_capacity(bounds.len());
        let mut width = Vec::with_capacity(bounds.len());
        for (d, (&(lo, hi), &n)) in bounds.iter().zip(bins_per_dim).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite("grid bounds"));
            }
            if n == 0 {
                return Err(Error::param("bins_per_dim", "zero bins requested"));
            }
            if lo > hi {
                return Err(Error::param(
                    "bounds",
                    format!("dimension {d}: min {lo} exceeds max {hi}"),
                ));
            }
            let (lo, hi) = if lo == hi {
                let half = 0.5f64.max(lo.abs() * 1e-9);
                (lo - half, hi + half)
            } else {
                (lo, hi)
            };
            lower.push(lo);
            upper.push(hi);
            width.push((hi - lo) / n as f64);
        }
        let grid = Self {
            mode,
            lower,
            upper,
            bins: bins_per_dim.to_vec(),
            width,
        };
        // Guard against cell-index overflow in product layout.
        grid.total_bins_checked()?;
        Ok(grid)
    }

    /// Convenience constructor with the same bin count in every dimension.
    pub fn uniform(bounds: &[(f64, f64)], bins_per_dim: usize, mode: GridMode) -> Result<Self> {
        Self::build(bounds, &vec![bins_per_dim; bounds.len()], mode)
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn bins_per_dim(&self) -> &[usize] {
        &self.bins
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| (lo, hi))
            .collect()
    }

    fn total_bins_checked(&self) -> Result<usize> {
        match self.mode {
            GridMode::Slab => Ok(self.bins.iter().sum()),
            GridMode::Product => {
                let mut total = 1usize;
                for &n in &self.bins {
                    total = total
                        .checked_mul(n)
                        .filter(|&t| t <= 1 << 32)
                        .ok_or_else(|| {
                            Error::param("bins_per_dim", "product grid has too many cells")
                        })?;
                }
                Ok(total)
            }
        }
    }

    /// Total bin count J: sum of per-dimension counts in slab mode, product
    /// of them in product mode.
    pub fn total_bins(&self) -> usize {
        match self.mode {
            GridMode::Slab => self.bins.iter().sum(),
            GridMode::Product => self.bins.iter().product(),
        }
    }

    /// Cell coordinate of `x` along dimension `d`: `floor((x - lo) / width)`
    /// clamped to the valid range, so the exact upper bound and out-of-range
    /// points land in the edge cells.
    fn cell(&self, d: usize, x: f64) -> usize {
        let c = ((x - self.lower[d]) / self.width[d]).floor();
        let max = (self.bins[d] - 1) as f64;
        c.clamp(0.0, max) as usize
    }

    /// Flat row-major cell index of a point (the product-layout identifier).
    pub fn locate(&self, point: &[f64]) -> Result<BinIndex> {
        self.check_point(point)?;
        let mut flat = 0usize;
        for (d, &x) in point.iter().enumerate() {
            flat = flat * self.bins[d] + self.cell(d, x);
        }
        Ok(BinIndex(flat))
    }

    /// Appends the bin memberships of a point to `out`: the single product
    /// cell, or one slab per dimension in slab mode.
    pub fn memberships(&self, point: &[f64], out: &mut Vec<BinIndex>) -> Result<()> {
        match self.mode {
            GridMode::Product => out.push(self.locate(point)?),
            GridMode::Slab => {
                self.check_point(point)?;
                let mut offset = 0usize;
                for (d, &x) in point.iter().enumerate() {
                    out.push(BinIndex(offset + self.cell(d, x)));
                    offset += self.bins[d];
                }
            }
        }
        Ok(())
    }

    /// Memberships per point, `1` in product mode and `dims` in slab mode.
    pub fn memberships_per_point(&self) -> usize {
        match self.mode {
            GridMode::Product => 1,
            GridMode::Slab => self.dims(),
        }
    }

    /// Cell edge positions along one dimension (`bins + 1` values).
    pub fn cell_edges(&self, d: usize) -> Vec<f64> {
        (0..=self.bins[d])
            .map(|i| self.lower[d] + self.width[d] * i as f64)
            .collect()
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: point.len(),
            });
        }
        if point.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point coordinate"));
        }
        Ok(())
    }
}

//! KL divergence between pmf vectors and chunk-pair similarity metrics.
//!
//! `kl` is the relative entropy in nats with the usual `0 log 0 = 0`
//! convention; the second argument must be strictly positive wherever the
//! first has mass, which callers guarantee by smoothing it first. Per-bin
//! divergences compare only bins occupied in both chunks; the per-pair value
//! is either their plain mean or an occupancy-weighted mean using the
//! reference chunk's weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BinIndex;
use crate::pmf::{smooth_pmf, BinnedPmf};

/// Divergence summary for one chunk pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkDistance {
    /// The compared chunk indices `(i, i+1)`.
    pub pair: (usize, usize),
    /// Per-bin divergence for every bin occupied in both chunks.
    pub per_bin: Vec<(BinIndex, f64)>,
    /// Plain mean over compared bins.
    pub value_unweighted: f64,
    /// Occupancy-weighted mean over compared bins.
    pub value_weighted: f64,
    /// Bins excluded because they were empty on at least one side.
    pub skipped_bins: usize,
}

/// How per-bin divergences are combined into a per-pair value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateMode {
    /// Every compared bin has the same relevance.
    Unweighted,
    /// Bins weighted by the reference chunk's occupancy.
    Weighted,
}

/// Kullback-Leibler divergence `sum p_l ln(p_l / q_l)` in nats.
///
/// `p` entries may be zero (`0 log 0 = 0`); a zero in `q` where `p` has mass
/// signals a missing smoothing step and is an error. Tiny negative results
/// from rounding are clamped to zero.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::Empty("kl needs non-empty distributions"));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "{name} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "{name} sums to {sum}, not 1"
            )));
        }
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::InvalidDistribution(
                "q is zero where p has mass; smooth q first".into(),
            ));
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// Per-bin divergences between two estimates on the same grid, restricted to
/// bins occupied in both. Returns the list and the count of skipped bins.
/// The first argument is the reference distribution; the second is smoothed
/// with `epsilon` before comparison.
pub fn bin_divergences(
    a: &BinnedPmf,
    b: &BinnedPmf,
    epsilon: f64,
) -> Result<(Vec<(BinIndex, f64)>, usize)> {
    if a.grid != b.grid || a.classes != b.classes {
        return Err(Error::GridMismatch);
    }
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (j, (bin_a, bin_b)) in a.bins.iter().zip(&b.bins).enumerate() {
        if !(bin_a.occupied && bin_b.occupied) {
            skipped += 1;
            continue;
        }
        let q = smooth_pmf(&bin_b.class_probs, epsilon)?;
        out.push((BinIndex(j), kl(&bin_a.class_probs, &q)?));
    }
    Ok((out, skipped))
}

/// Combines per-bin divergences into a single value.
///
/// `gamma` holds the reference chunk's occupancy over all bins; it is
/// renormalized over the compared bins before weighting. With `jay_factor`
/// the weighted sum keeps the additional division by the compared-bin count,
/// mirroring the unweighted mean's normalization; without it the result is a
/// pure weighted mean.
pub fn aggregate(
    per_bin: &[(BinIndex, f64)],
    gamma: &[f64],
    mode: AggregateMode,
    jay_factor: bool,
) -> Result<f64> {
    if per_bin.is_empty() {
        return Err(Error::NoComparableBins);
    }
    let count = per_bin.len() as f64;
    match mode {
        AggregateMode::Unweighted => Ok(per_bin.iter().map(|&(_, d)| d).sum::<f64>() / count),
        AggregateMode::Weighted => {
            let mass: f64 = per_bin.iter().map(|&(j, _)| gamma[j.0]).sum();
            if mass <= 0.0 {
                return Err(Error::InvalidDistribution(
                    "reference occupancy over compared bins is zero".into(),
                ));
            }
            let weighted: f64 = per_bin.iter().map(|&(j, d)| gamma[j.0] / mass * d).sum();
            Ok(if jay_factor {
                weighted / count
            } else {
                weighted
            })
        }
    }
}

/// Full per-pair divergence: per-bin values plus both aggregates.
pub fn chunk_distance(
    a: &BinnedPmf,
    b: &BinnedPmf,
    pair: (usize, usize),
    epsilon: f64,
    jay_factor: bool,
) -> Result<ChunkDistance> {
    let (per_bin, skipped_bins) = bin_divergences(a, b, epsilon)?;
    let gamma = a.occupancy_weights();
    let value_unweighted = aggregate(&per_bin, &gamma, AggregateMode::Unweighted, jay_factor)?;
    let value_weighted = aggregate(&per_bin, &gamma, AggregateMode::Weighted, jay_factor)?;
    Ok(ChunkDistance {
        pair,
        per_bin,
        value_unweighted,
        value_weighted,
        skipped_bins,
    })
}

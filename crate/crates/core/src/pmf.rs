//! Per-bin class-conditional probability mass functions.
//!
//! For every grid bin, `estimate` counts the chunk's points by class and
//! turns the counts into a conditional pmf over labels, plus an occupancy
//! weight: the bin's share of all point-to-bin memberships. Bins no point
//! falls into are flagged unoccupied and carry a uniform placeholder pmf;
//! divergence computation skips them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stream::Chunk;

/// Class-conditional pmf and occupancy for a single bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPmf {
    /// `Pr(label = l | point in bin)`, length equals the class count.
    pub class_probs: Vec<f64>,
    /// Share of the chunk's bin memberships that fell here; sums to 1 over
    /// all bins of an estimate.
    pub occupancy: f64,
    /// Whether any point fell in this bin.
    pub occupied: bool,
    /// Number of points (memberships) in this bin.
    pub count: usize,
}

/// Class-conditional pmfs for every bin of a grid, estimated from one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedPmf {
    pub grid: Grid,
    pub classes: u32,
    pub bins: Vec<BinPmf>,
    /// Total memberships: chunk size in product mode, chunk size times
    /// dimension count in slab mode.
    pub total_memberships: usize,
}

impl BinnedPmf {
    pub fn occupancy_weights(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.occupancy).collect()
    }
}

/// Estimates per-bin class-conditional pmfs and occupancy weights from a
/// chunk. Occupied bins get `count(label l in bin) / count(bin)`; unoccupied
/// bins get the uniform placeholder and zero occupancy.
pub fn estimate(chunk: &Chunk, grid: &Grid, classes: u32) -> Result<BinnedPmf> {
    if classes == 0 {
        return Err(Error::param("classes", "class count must be at least 1"));
    }
    if chunk.points.is_empty() {
        return Err(Error::Empty("estimate needs a non-empty chunk"));
    }
    let n_bins = grid.total_bins();
    let n_classes = classes as usize;
    let mut counts = vec![0usize; n_bins * n_classes];
    let mut bin_totals = vec![0usize; n_bins];
    let mut memberships = Vec::with_capacity(grid.memberships_per_point());

    for point in &chunk.points {
        if point.label >= classes {
            return Err(Error::InvalidChunk(format!(
                "label {} out of range (L={classes})",
                point.label
            )));
        }
        memberships.clear();
        grid.memberships(&point.features, &mut memberships)?;
        for bin in &memberships {
            counts[bin.0 * n_classes + point.label as usize] += 1;
            bin_totals[bin.0] += 1;
        }
    }

    let total_memberships: usize = bin_totals.iter().sum();
    let uniform = 1.0 / n_classes as f64;
    let bins = (0..n_bins)
        .map(|j| {
            let count = bin_totals[j];
            if count == 0 {
                BinPmf {
                    class_probs: vec![uniform; n_classes],
                    occupancy: 0.0,
                    occupied: false,
                    count: 0,
                }
            } else {
                let class_probs = (0..n_classes)
                    .map(|l| counts[j * n_classes + l] as f64 / count as f64)
                    .collect();
                BinPmf {
                    class_probs,
                    occupancy: count as f64 / total_memberships as f64,
                    occupied: true,
                    count,
                }
            }
        })
        .collect();

    Ok(BinnedPmf {
        grid: grid.clone(),
        classes,
        bins,
        total_memberships,
    })
}

/// Replaces zero entries of a pmf with `epsilon` and renormalizes, producing
/// a strictly positive distribution. Vectors without zeros pass through
/// unchanged.
pub fn smooth_pmf(probs: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", "must be a positive finite real"));
    }
    if probs.is_empty() {
        return Err(Error::Empty("smooth_pmf needs a non-empty vector"));
    }
    if probs.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidDistribution(
            "entries must be finite and non-negative".into(),
        ));
    }
    if probs.iter().all(|&x| x > 0.0) {
        return Ok(probs.to_vec());
    }
    let raised: Vec<f64> = probs
        .iter()
        .map(|&x| if x == 0.0 { epsilon } else { x })
        .collect();
    let sum: f64 = raised.iter().sum();
    Ok(raised.iter().map(|&x| x / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridMode};
    use crate::rng::Xoshiro256PlusPlus;
    use crate::stream::LabeledPoint;

    fn chunk_of(features: &[&[f64]], labels: &[u32]) -> Chunk {
        Chunk {
            index: 0,
            points: features
                .iter()
                .zip(labels)
                .map(|(f, &l)| LabeledPoint {
                    features: f.to_vec(),
                    label: l,
                })
                .collect(),
        }
    }

    #[test]
    fn counting_matches_hand_computed_probs() {
        // One 1-d bin holding labels [0,0,1,1,1] must give (0.4, 0.6).
        let grid = Grid::build(&[(0.0, 1.0)], &[1], GridMode::Product).unwrap();
        let chunk = chunk_of(&[&[0.1], &[0.2], &[0.3], &[0.4], &[0.5]], &[0, 0, 1, 1, 1]);
        let pmf = estimate(&chunk, &grid, 2).unwrap();
        assert_eq!(pmf.bins[0].class_probs, vec![0.4, 0.6]);
        assert_eq!(pmf.bins[0].count, 5);
        assert_eq!(pmf.bins[0].occupancy, 1.0);
    }

    #[test]
    fn product_mode_occupancy_is_direct_ratio() {
        let grid = Grid::build(&[(0.0, 10.0)], &[2], GridMode::Product).unwrap();
        // 4 of 10 points land in the upper cell.
        let feats: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![if i < 6 { 1.0 } else { 9.0 }])
            .collect();
        let refs: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
        let chunk = chunk_of(&refs, &[0; 10]);
        let pmf = estimate(&chunk, &grid, 2).unwrap();
        assert_eq!(pmf.bins[1].occupancy, 0.4);
    }

    #[test]
    fn single_class_chunk_gives_one_hot_bins() {
        let grid = Grid::uniform(&[(0.0, 1.0), (0.0, 1.0)], 3, GridMode::Slab).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let points: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.next_f64(), rng.next_f64()])
            .collect();
        let refs: Vec<&[f64]> = points.iter().map(|f| f.as_slice()).collect();
        let chunk = chunk_of(&refs, &vec![1u32; 40]);
        let pmf = estimate(&chunk, &grid, 2).unwrap();
        for bin in pmf.bins.iter().filter(|b| b.occupied) {
            assert_eq!(bin.class_probs, vec![0.0, 1.0]);
        }
    }

    #[test]
    fn unoccupied_bins_carry_uniform_placeholder() {
        let grid = Grid::build(&[(0.0, 10.0)], &[5], GridMode::Product).unwrap();
        let chunk = chunk_of(&[&[0.5]], &[0]);
        let pmf = estimate(&chunk, &grid, 2).unwrap();
        assert!(pmf.bins[0].occupied);
        for bin in &pmf.bins[1..] {
            assert!(!bin.occupied);
            assert_eq!(bin.class_probs, vec![0.5, 0.5]);
            assert_eq!(bin.occupancy, 0.0);
        }
    }

    #[test]
    fn estimate_matches_brute_force_double_loop() {
        // Independent oracle: for every bin, loop over all points and test
        // membership from the edge lists directly.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(33);
        for trial in 0..40 {
            let dims = 1 + (trial % 3);
            let mode = if trial % 2 == 0 {
                GridMode::Slab
            } else {
                GridMode::Product
            };
            let k = 5 + (trial * 7) % 46;
            let bounds: Vec<(f64, f64)> = (0..dims).map(|_| (0.0, 1.0)).collect();
            let grid = Grid::uniform(&bounds, 4, mode).unwrap();
            let points: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..dims).map(|_| rng.next_f64()).collect())
                .collect();
            let labels: Vec<u32> = (0..k).map(|_| rng.next_below(3) as u32).collect();
            let refs: Vec<&[f64]> = points.iter().map(|f| f.as_slice()).collect();
            let chunk = chunk_of(&refs, &labels);
            let pmf = estimate(&chunk, &grid, 3).unwrap();

            let mut buf = Vec::new();
            for j in 0..grid.total_bins() {
                let mut by_class = [0usize; 3];
                for (p, &l) in points.iter().zip(&labels) {
                    buf.clear();
                    grid.memberships(p, &mut buf).unwrap();
                    if buf.iter().any(|b| b.0 == j) {
                        by_class[l as usize] += 1;
                    }
                }
                let total: usize = by_class.iter().sum();
                assert_eq!(pmf.bins[j].count, total);
                if total > 0 {
                    for l in 0..3 {
                        assert_eq!(
                            pmf.bins[j].class_probs[l],
                            by_class[l] as f64 / total as f64
                        );
                    }
                }
            }
            let gamma_sum: f64 = pmf.occupancy_weights().iter().sum();
            assert!((gamma_sum - 1.0).abs() < 1e-12);
            for bin in pmf.bins.iter().filter(|b| b.occupied) {
                let s: f64 = bin.class_probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_pmf_examples() {
        let out = smooth_pmf(&[1.0, 0.0], 1e-6).unwrap();
        assert!((out[0] - 1.0 / (1.0 + 1e-6)).abs() < 1e-15);
        assert!((out[1] - 1e-6 / (1.0 + 1e-6)).abs() < 1e-18);

        assert_eq!(smooth_pmf(&[0.5, 0.5], 0.1).unwrap(), vec![0.5, 0.5]);

        let out = smooth_pmf(&[0.0, 0.0, 1.0], 0.01).unwrap();
        assert!((out[0] - 0.01 / 1.02).abs() < 1e-15);
        assert!((out[1] - 0.01 / 1.02).abs() < 1e-15);
        assert!((out[2] - 1.0 / 1.02).abs() < 1e-15);
    }

    #[test]
    fn smooth_pmf_rejects_bad_epsilon() {
        assert!(smooth_pmf(&[1.0, 0.0], 0.0).is_err());
        assert!(smooth_pmf(&[1.0, 0.0], -1e-6).is_err());
        assert!(smooth_pmf(&[1.0, 0.0], f64::NAN).is_err());
    }

    #[test]
    fn smooth_pmf_is_positive_normalized_and_converges() {
        let input = [0.0, 0.25, 0.0, 0.75, 0.0];
        for &eps in &[1e-3, 1e-6, 1e-9] {
            let out = smooth_pmf(&input, eps).unwrap();
            assert!(out.iter().all(|&x| x > 0.0));
            let sum: f64 = out.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            // Pointwise convergence on the originally nonzero entries.
            let max_dev = input
                .iter()
                .zip(&out)
                .filter(|(&a, _)| a > 0.0)
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_dev < 10.0 * eps * input.len() as f64);
        }
    }
}

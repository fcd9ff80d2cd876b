//! Scoring detections against ground truth and the alpha sensitivity sweep.

use serde::{Deserialize, Serialize};

use crate::detector::{critical_segments, CriticalSegment, DriftReport};
use crate::error::{Error, Result};

/// Confusion-style tally of detections against ground-truth drifts under a
/// tolerance window, with the mean signed delay over matched pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub tolerance: usize,
    /// Matched `(truth, detection)` chunk-index pairs.
    pub pairs: Vec<(usize, usize)>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Mean of `detection - truth` over matched pairs, in chunks; absent
    /// when nothing matched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_delay: Option<f64>,
}

/// Greedy in-order matching: each detection takes the earliest unmatched
/// truth within `tolerance` chunks. Unmatched detections are false
/// positives, unmatched truths false negatives.
pub fn match_events(
    truth: &[usize],
    detections: &[usize],
    tolerance: usize,
) -> Result<MatchingResult> {
    for (name, list) in [("truth", truth), ("detections", detections)] {
        if !list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::param(
                "events",
                format!("{name} indices must be strictly increasing"),
            ));
        }
    }
    let mut matched = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for &d in detections {
        for (t_idx, &t) in truth.iter().enumerate() {
            if matched[t_idx] {
                continue;
            }
            if t.abs_diff(d) <= tolerance {
                matched[t_idx] = true;
                pairs.push((t, d));
                break;
            }
        }
    }
    let true_positives = pairs.len();
    let mean_delay = if pairs.is_empty() {
        None
    } else {
        Some(pairs.iter().map(|&(t, d)| d as f64 - t as f64).sum::<f64>() / pairs.len() as f64)
    };
    Ok(MatchingResult {
        tolerance,
        true_positives,
        false_positives: detections.len() - true_positives,
        false_negatives: truth.len() - true_positives,
        mean_delay,
        pairs,
    })
}

/// Result of one alpha setting in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    /// Number of critical points (segment enters).
    pub detections: usize,
    pub segments: Vec<CriticalSegment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingResult>,
}

/// Re-runs only the decision rule of a finished detection run for each
/// alpha; the divergence series and its gradient are shared. When ground
/// truth is available each row also carries the matching metrics.
pub fn alpha_sweep(
    report: &DriftReport,
    alphas: &[f64],
    truth: Option<&[usize]>,
    tolerance: usize,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::Empty("alpha_sweep needs at least one alpha"));
    }
    let gradient = report.gradient();
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(alpha > 0.0) {
            return Err(Error::param("alpha", "must be positive"));
        }
        let segments = critical_segments(
            &gradient,
            alpha,
            report.config.stats_window,
            report.config.warmup,
        );
        let enters: Vec<usize> = segments.iter().map(|s| s.enter).collect();
        let matching = match truth {
            Some(t) => Some(match_events(t, &enters, tolerance)?),
            None => None,
        };
        rows.push(SweepRow {
            alpha,
            detections: enters.len(),
            segments,
            matching,
        });
    }
    Ok(rows)
}

//! The online detection loop and the threshold decision rule.
//!
//! Per arriving chunk the detector builds a grid over the current pair of
//! chunks (or reuses a global one), estimates per-bin class-conditional
//! pmfs, computes the occupancy-weighted KL divergence between the pair, and
//! appends it to the divergence series. The series is smoothed, differenced,
//! and a gradient point is flagged critical when it rises more than
//! `alpha` standard deviations above the gradient mean. A critical segment
//! spans from the first flagged index (enter) until the gradient drops back
//! inside the band (exit).
//!
//! Two flavors of the rule coexist. `Detector::push` emits provisional
//! segment events as chunks arrive, standardizing over the gradient history
//! seen so far. The final report recomputes the rule over the complete
//! series (or a trailing window when `stats_window` is set), which matches
//! the batch evaluation and keeps online and offline runs in exact
//! agreement.

use serde::{Deserialize, Serialize};

use crate::divergence::{chunk_distance, ChunkDistance};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridMode};
use crate::pmf::estimate;
use crate::smoothing::{first_derivative, min_max_normalize, RunningMinMax, Smoother};
use crate::stream::{chunk_bounds, Chunk, StreamMeta};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Minimum band half-width, so an exactly constant gradient never flags.
const MIN_HALF_WIDTH: f64 = 1e-12;

/// Whether grids are rebuilt per chunk pair or built once from the first
/// chunk and reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScope {
    PerPair,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Threshold multiplier in the decision rule.
    pub alpha: f64,
    /// Smoothing constant for zero pmf entries.
    pub epsilon: f64,
    /// Grid layout: per-dimension slabs or the full product grid.
    pub grid_mode: GridMode,
    /// Bins per dimension.
    pub bins_per_dim: usize,
    /// Per-pair grids (default) or one global grid from the first chunk.
    pub grid_scope: GridScope,
    pub smoother: Smoother,
    /// Trailing window for the band statistics; absent means the full
    /// gradient series.
    pub stats_window: Option<usize>,
    /// Minimum gradient points before the rule may flag.
    pub warmup: usize,
    /// Keep the division by the compared-bin count in the weighted sum.
    pub jay_factor: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            epsilon: 1e-2,
            grid_mode: GridMode::Slab,
            bins_per_dim: 5,
            grid_scope: GridScope::PerPair,
            smoother: Smoother::default(),
            stats_window: None,
            warmup: 10,
            jay_factor: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::param("alpha", "must be a positive finite real"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::param("epsilon", "must be a positive finite real"));
        }
        if self.bins_per_dim == 0 {
            return Err(Error::param("bins_per_dim", "must be at least 1"));
        }
        if self.warmup < 2 {
            return Err(Error::param("warmup", "must be at least 2"));
        }
        if let Some(n) = self.stats_window {
            if n < 2 {
                return Err(Error::param("stats_window", "must be at least 2"));
            }
        }
        self.smoother.validate()
    }
}

/// A maximal run of critical gradient points, in chunk indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalSegment {
    /// Chunk index at which the gradient left the band.
    pub enter: usize,
    /// Chunk index at which it re-entered; absent if still outside at
    /// stream end.
    pub exit: Option<usize>,
}

/// Provisional notifications emitted by `Detector::push`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorEvent {
    SegmentOpened { enter: usize },
    SegmentClosed { enter: usize, exit: usize },
}

/// One row of the divergence series, indexed by pair number `k` (comparing
/// chunks `k` and `k+1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub k: usize,
    /// Occupancy-weighted divergence, the detection signal.
    pub raw: f64,
    /// Plain-mean divergence over the same bins.
    pub unweighted: f64,
    pub skipped_bins: usize,
    /// `raw` min-max scaled over the whole series.
    pub normalized: f64,
    /// Smoothed normalized value.
    pub smoothed: f64,
    /// First difference of the smoothed curve; absent on the last row.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Records discarded from a trailing partial chunk during ingestion.
    pub dropped_records: usize,
    /// Series indices where no bin was occupied in both chunks and the
    /// previous divergence value was carried forward.
    pub gap_pairs: Vec<usize>,
    /// Total bins excluded across all pairs.
    pub skipped_bins_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub schema_version: u32,
    pub config: DetectorConfig,
    pub meta: StreamMeta,
    /// Serialized grid when a single global grid was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_grid: Option<Grid>,
    pub series: Vec<SeriesRow>,
    pub segments: Vec<CriticalSegment>,
    /// Segment enter indices: the reported drift timestamps.
    pub critical_points: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl DriftReport {
    pub fn gradient(&self) -> Vec<f64> {
        self.series.iter().filter_map(|r| r.gradient).collect()
    }

    pub fn raw_series(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.raw).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Meta(format!("cannot parse drift report: {e}")))
    }
}

fn population_stats(window: &[f64]) -> (f64, f64) {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-index decision band over a gradient sequence: mean plus/minus
/// `alpha` population standard deviations, computed over the history up to
/// and including each index, or over the trailing `stats_window` points.
pub fn decision_band(l: &[f64], alpha: f64, stats_window: Option<usize>) -> Vec<(f64, f64)> {
    (0..l.len())
        .map(|k| {
            let start = match stats_window {
                Some(n) => (k + 1).saturating_sub(n),
                None => 0,
            };
            let (mean, sigma) = population_stats(&l[start..=k]);
            let half = (alpha * sigma).max(MIN_HALF_WIDTH);
            (mean - half, mean + half)
        })
        .collect()
}

/// Extracts critical segments from a complete gradient sequence.
///
/// A gradient point is critical when it exceeds the upper band bound; drift
/// pushes the divergence up, so only upward excursions count. With
/// `stats_window` unset the band is standardized over the whole sequence;
/// otherwise each index is compared against its trailing window. Indices
/// below `warmup` never flag. Segment boundaries are reported as chunk
/// indices: gradient point `k` compares the smoothed values of pairs `k`
/// and `k+1`, so it is observed when chunk `k + 2` arrives.
pub fn critical_segments(
    gradient: &[f64],
    alpha: f64,
    stats_window: Option<usize>,
    warmup: usize,
) -> Vec<CriticalSegment> {
    if gradient.len() < 2 {
        return Vec::new();
    }
    let full_stats = population_stats(gradient);
    let mut segments = Vec::new();
    let mut open: Option<usize> = None;
    for (k, &value) in gradient.iter().enumerate() {
        let flagged = if k < warmup {
            false
        } else {
            let (mean, sigma) = match stats_window {
                None => full_stats,
                Some(n) => population_stats(&gradient[(k + 1).saturating_sub(n)..=k]),
            };
            value - mean > (alpha * sigma).max(MIN_HALF_WIDTH)
        };
        match (flagged, open) {
            (true, None) => open = Some(k + 2),
            (false, Some(enter)) => {
                segments.push(CriticalSegment {
                    enter,
                    exit: Some(k + 2),
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(enter) = open {
        segments.push(CriticalSegment { enter, exit: None });
    }
    segments
}

/// Running mean and population variance accumulator.
#[derive(Debug, Clone, Default)]
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stats(&self) -> (f64, f64) {
        (self.mean, (self.m2 / self.count as f64).sqrt())
    }
}

/// Single-writer detection state machine driven by one chunk feed.
pub struct Detector {
    meta: StreamMeta,
    config: DetectorConfig,
    prev: Option<Chunk>,
    global_grid: Option<Grid>,
    raw: Vec<f64>,
    unweighted: Vec<f64>,
    skipped: Vec<usize>,
    gap_pairs: Vec<usize>,
    chunks_seen: usize,
    // Provisional online rule state over the causal raw-series pipeline.
    smoothed_raw: Vec<f64>,
    gradient_raw: Vec<f64>,
    grad_stats: Welford,
    grad_window: std::collections::VecDeque<f64>,
    open_segment: Option<usize>,
    normalizer: RunningMinMax,
    last_normalized: Option<f64>,
}

impl Detector {
    pub fn new(meta: StreamMeta, config: DetectorConfig) -> Result<Self> {
        meta.validate()?;
        config.validate()?;
        Ok(Self {
            meta,
            config,
            prev: None,
            global_grid: None,
            raw: Vec::new(),
            unweighted: Vec::new(),
            skipped: Vec::new(),
            gap_pairs: Vec::new(),
            chunks_seen: 0,
            smoothed_raw: Vec::new(),
            gradient_raw: Vec::new(),
            grad_stats: Welford::default(),
            grad_window: std::collections::VecDeque::new(),
            open_segment: None,
            normalizer: RunningMinMax::default(),
            last_normalized: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Running-min-max normalized value of the latest divergence, for live
    /// observation; the final report renormalizes over the whole series.
    pub fn last_normalized(&self) -> Option<f64> {
        self.last_normalized
    }

    fn grid_for_pair(&mut self, a: &Chunk, b: &Chunk) -> Result<Grid> {
        match self.config.grid_scope {
            GridScope::Global => Ok(self
                .global_grid
                .clone()
                .expect("global grid is built on the first chunk")),
            GridScope::PerPair => {
                let bounds = chunk_bounds([a, b])?;
                Grid::uniform(&bounds, self.config.bins_per_dim, self.config.grid_mode)
            }
        }
    }

    /// Feeds the next chunk. Returns provisional segment events derived from
    /// the gradient history seen so far; the final report recomputes
    /// segments over the complete series.
    pub fn push(&mut self, chunk: Chunk) -> Result<Vec<DetectorEvent>> {
        if chunk.points.is_empty() {
            return Err(Error::InvalidChunk("chunk has no points".into()));
        }
        if chunk.index != self.chunks_seen {
            return Err(Error::InvalidChunk(format!(
                "expected chunk {} next, got {}",
                self.chunks_seen, chunk.index
            )));
        }
        if chunk.points[0].features.len() != self.meta.dims {
            return Err(Error::DimensionMismatch {
                expected: self.meta.dims,
                found: chunk.points[0].features.len(),
            });
        }
        if self.chunks_seen == 0 && self.config.grid_scope == GridScope::Global {
            let bounds = chunk_bounds([&chunk])?;
            self.global_grid = Some(Grid::uniform(
                &bounds,
                self.config.bins_per_dim,
                self.config.grid_mode,
            )?);
        }

        let mut events = Vec::new();
        if let Some(prev) = self.prev.take() {
            let grid = self.grid_for_pair(&prev, &chunk)?;
            let pmf_a = estimate(&prev, &grid, self.meta.classes)?;
            let pmf_b = estimate(&chunk, &grid, self.meta.classes)?;
            let k = self.raw.len();
            match chunk_distance(
                &pmf_a,
                &pmf_b,
                (prev.index, chunk.index),
                self.config.epsilon,
                self.config.jay_factor,
            ) {
                Ok(cd) => self.push_distance(&cd),
                // A pathological pair must not kill a live monitor: carry
                // the previous value and record the gap.
                Err(Error::NoComparableBins) => {
                    let carried_w = self.raw.last().copied().unwrap_or(0.0);
                    let carried_u = self.unweighted.last().copied().unwrap_or(0.0);
                    let total = grid.total_bins();
                    self.raw.push(carried_w);
                    self.unweighted.push(carried_u);
                    self.skipped.push(total);
                    self.gap_pairs.push(k);
                }
                Err(e) => return Err(e),
            }
            self.last_normalized = Some(self.normalizer.push(self.raw[k]));
            if self.config.smoother.is_causal() {
                events = self.advance_provisional();
            }
        }
        self.prev = Some(chunk);
        self.chunks_seen += 1;
        Ok(events)
    }

    fn push_distance(&mut self, cd: &ChunkDistance) {
        self.raw.push(cd.value_weighted);
        self.unweighted.push(cd.value_unweighted);
        self.skipped.push(cd.skipped_bins);
    }

    fn advance_provisional(&mut self) -> Vec<DetectorEvent> {
        let window = match self.config.smoother {
            Smoother::MovingAverage { window } => window,
            Smoother::Lowess { .. } => unreachable!("provisional path is causal-only"),
        };
        let k = self.raw.len() - 1;
        let start = k.saturating_sub(window - 1);
        let slice = &self.raw[start..=k];
        self.smoothed_raw
            .push(slice.iter().sum::<f64>() / slice.len() as f64);
        if self.smoothed_raw.len() < 2 {
            return Vec::new();
        }
        let g = self.smoothed_raw[self.smoothed_raw.len() - 1]
            - self.smoothed_raw[self.smoothed_raw.len() - 2];
        self.gradient_raw.push(g);
        let gk = self.gradient_raw.len() - 1;

        let (mean, sigma) = match self.config.stats_window {
            None => {
                self.grad_stats.push(g);
                self.grad_stats.stats()
            }
            Some(n) => {
                self.grad_window.push_back(g);
                if self.grad_window.len() > n {
                    self.grad_window.pop_front();
                }
                let v: Vec<f64> = self.grad_window.iter().copied().collect();
                population_stats(&v)
            }
        };

        let mut events = Vec::new();
        if gk >= self.config.warmup {
            let flagged = g - mean > (self.config.alpha * sigma).max(MIN_HALF_WIDTH);
            match (flagged, self.open_segment) {
                (true, None) => {
                    let enter = gk + 2;
                    self.open_segment = Some(enter);
                    events.push(DetectorEvent::SegmentOpened { enter });
                }
                (false, Some(enter)) => {
                    let exit = gk + 2;
                    self.open_segment = None;
                    events.push(DetectorEvent::SegmentClosed { enter, exit });
                }
                _ => {}
            }
        }
        events
    }

    /// Finalizes the run: smooths the full normalized series, differences
    /// it, applies the decision rule and assembles the report.
    pub fn finish(self) -> Result<DriftReport> {
        if self.chunks_seen < 2 {
            return Err(Error::Empty("detection needs at least 2 chunks"));
        }
        let raw = self.raw;
        let normalized = min_max_normalize(&raw);
        let smoothed = self.config.smoother.apply(&normalized)?;
        let gradient = if smoothed.len() >= 2 {
            first_derivative(&smoothed)?
        } else {
            Vec::new()
        };
        let segments = critical_segments(
            &gradient,
            self.config.alpha,
            self.config.stats_window,
            self.config.warmup,
        );
        let critical_points = segments.iter().map(|s| s.enter).collect();
        let series = (0..raw.len())
            .map(|k| SeriesRow {
                k,
                raw: raw[k],
                unweighted: self.unweighted[k],
                skipped_bins: self.skipped[k],
                normalized: normalized[k],
                smoothed: smoothed[k],
                gradient: gradient.get(k).copied(),
            })
            .collect();
        let mut meta = self.meta;
        meta.n_chunks = Some(self.chunks_seen);
        Ok(DriftReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config: self.config,
            meta,
            global_grid: self.global_grid,
            series,
            segments,
            critical_points,
            diagnostics: Diagnostics {
                dropped_records: 0,
                gap_pairs: self.gap_pairs,
                skipped_bins_total: self.skipped.iter().sum(),
            },
        })
    }
}

/// Runs the full detection loop over a chunk sequence and returns the
/// report. Errors from the chunk source propagate.
pub fn detect_online<I>(chunks: I, meta: StreamMeta, config: DetectorConfig) -> Result<DriftReport>
where
    I: IntoIterator<Item = Result<Chunk>>,
{
    let mut detector = Detector::new(meta, config)?;
    for chunk in chunks {
        detector.push(chunk?)?;
    }
    detector.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_band_matches_hand_computed_example() {
        let l = [0.1, 0.1, 0.1, 0.1, 5.0];
        let band = decision_band(&l, 1.5, None);
        let (lo, hi) = band[4];
        assert!((lo - (-1.86)).abs() < 1e-9, "lo {lo}");
        assert!((hi - 4.02).abs() < 1e-9, "hi {hi}");
        assert!(l[4] > hi);
    }

    #[test]
    fn decision_band_trailing_window() {
        let l = [10.0, 10.0, 0.0, 0.0, 0.0];
        let band = decision_band(&l, 1.0, Some(3));
        // Window at index 4 is (0, 0, 0): zero sigma, floor half-width.
        let (lo, hi) = band[4];
        assert!((hi - lo - 2.0 * MIN_HALF_WIDTH).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_never_flags() {
        let gradient = vec![0.25; 40];
        let segments = critical_segments(&gradient, 1.5, None, 2);
        assert!(segments.is_empty());
    }

    #[test]
    fn band_scales_with_the_signal() {
        let mut gradient: Vec<f64> = (0..60).map(|k| ((k * 37 % 11) as f64) * 0.01).collect();
        gradient[40] = 5.0;
        let base = critical_segments(&gradient, 1.5, None, 5);
        let scaled: Vec<f64> = gradient.iter().map(|&x| x * 123.0).collect();
        let scaled_segments = critical_segments(&scaled, 1.5, None, 5);
        assert_eq!(base, scaled_segments);
        assert!(!base.is_empty());
    }

    #[test]
    fn segment_indices_are_chunk_aligned() {
        // One isolated spike at gradient index 10 flags exactly there.
        let mut gradient = vec![0.0; 30];
        gradient[10] = 1.0;
        // Break exact constancy elsewhere so sigma > 0.
        gradient[3] = 0.01;
        gradient[22] = -0.01;
        let segments = critical_segments(&gradient, 1.5, None, 2);
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].enter, 12);
        assert_eq!(segments[0].exit, Some(13));
    }

    #[test]
    fn trailing_excursion_has_open_exit() {
        let mut gradient = vec![0.0; 20];
        gradient[2] = 0.01;
        for g in gradient.iter_mut().skip(17) {
            *g = 2.0;
        }
        let segments = critical_segments(&gradient, 1.5, None, 2);
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].exit, None);
    }

    #[test]
    fn segments_alternate_and_never_overlap() {
        let mut gradient = vec![0.0; 100];
        gradient[1] = 0.001;
        for k in [20, 21, 22, 50, 51, 80] {
            gradient[k] = 3.0;
        }
        let segments = critical_segments(&gradient, 1.5, None, 2);
        assert_eq!(segments.len(), 3);
        for pair in segments.windows(2) {
            assert!(pair[0].exit.unwrap() <= pair[1].enter);
        }
        for s in &segments {
            if let Some(exit) = s.exit {
                assert!(exit > s.enter);
            }
        }
    }

    #[test]
    fn flagged_set_shrinks_as_alpha_grows() {
        let gradient: Vec<f64> = (0..200)
            .map(|k| {
                ((k * 7919 % 101) as f64 / 101.0 - 0.5) * 0.1 + if k == 120 { 4.0 } else { 0.0 }
            })
            .collect();
        let flagged_at = |alpha: f64| -> Vec<usize> {
            let (mean, sigma) = population_stats(&gradient);
            gradient
                .iter()
                .enumerate()
                .filter(|&(k, &g)| k >= 10 && g - mean > (alpha * sigma).max(MIN_HALF_WIDTH))
                .map(|(k, _)| k)
                .collect()
        };
        let a1 = flagged_at(1.0);
        let a2 = flagged_at(2.0);
        assert!(a2.iter().all(|k| a1.contains(k)));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = DetectorConfig::default();
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DetectorConfig::default();
        cfg.warmup = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = DetectorConfig::default();
        cfg.stats_window = Some(1);
        assert!(cfg.validate().is_err());
        assert!(DetectorConfig::default().validate().is_ok());
    }
}

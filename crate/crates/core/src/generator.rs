//! Synthetic drifting-stream generator.
//!
//! A stream interpolates between `n_drifts + 1` concepts. Each concept is a
//! per-class mixture of isotropic Gaussian clusters with freshly drawn
//! means, so class-conditional distributions change at known timestamps.
//! Around each drift center the generator blends the outgoing and incoming
//! concepts with a sigmoid whose steepness comes from `sigmoid_spacing`:
//! large values make the switch effectively instantaneous, smaller ones
//! spread it over several chunks of intermediate mixtures. Labels are
//! flipped independently with probability `class_flip`. Everything is
//! driven by one seedable portable generator, so a seed fully determines
//! the stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Xoshiro256PlusPlus, RNG_ALGORITHM};
use crate::stream::{Chunk, LabeledPoint, StreamMeta};

/// Box from which cluster means are drawn, per coordinate.
const MEAN_RANGE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub dims: usize,
    pub classes: u32,
    pub n_chunks: usize,
    pub chunk_size: usize,
    pub n_drifts: usize,
    /// Steepness control for the concept blend; 999 is effectively sudden.
    pub sigmoid_spacing: f64,
    /// Probability of replacing a label with a uniformly drawn other class.
    pub class_flip: f64,
    pub clusters_per_class: usize,
    /// Minimum distance between cluster means of different classes.
    pub separation: f64,
    /// Isotropic standard deviation of each cluster.
    pub covariance_scale: f64,
    /// Minimum distance each class mean must move between consecutive
    /// concepts, so every scheduled drift is a real distribution change.
    pub concept_shift: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 1410,
            dims: 4,
            classes: 2,
            n_chunks: 10_000,
            chunk_size: 250,
            n_drifts: 20,
            sigmoid_spacing: 99.0,
            class_flip: 0.01,
            clusters_per_class: 1,
            separation: 3.0,
            covariance_scale: 1.0,
            concept_shift: 4.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::param("dims", "must be at least 1"));
        }
        if self.classes == 0 {
            return Err(Error::param("classes", "must be at least 1"));
        }
        if self.n_chunks == 0 || self.chunk_size == 0 {
            return Err(Error::param("n_chunks/chunk_size", "must be at least 1"));
        }
        if self.n_drifts >= self.n_chunks {
            return Err(Error::param(
                "n_drifts",
                "must be smaller than the chunk count",
            ));
        }
        if !(0.0..1.0).contains(&self.class_flip) {
            return Err(Error::param("class_flip", "must lie in [0, 1)"));
        }
        if !(self.sigmoid_spacing > 0.0) {
            return Err(Error::param("sigmoid_spacing", "must be positive"));
        }
        if self.clusters_per_class == 0 {
            return Err(Error::param("clusters_per_class", "must be at least 1"));
        }
        if !(self.separation >= 0.0) {
            return Err(Error::param("separation", "must be non-negative"));
        }
        if !(self.covariance_scale > 0.0) {
            return Err(Error::param("covariance_scale", "must be positive"));
        }
        if !(self.concept_shift >= 0.0) {
            return Err(Error::param("concept_shift", "must be non-negative"));
        }
        Ok(())
    }
}

/// One stationary concept: per class, a set of Gaussian cluster means.
#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    /// `means[class][cluster]` is a point in feature space.
    pub means: Vec<Vec<Vec<f64>>>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Concept {
    /// Draws cluster means uniformly, rejecting layouts where means of
    /// different classes come closer than `separation` or where a class
    /// mean stays within `concept_shift` of its position in the previous
    /// concept.
    fn draw(
        rng: &mut Xoshiro256PlusPlus,
        cfg: &GeneratorConfig,
        previous: Option<&Concept>,
    ) -> Result<Self> {
        'attempt: for _ in 0..1000 {
            let means: Vec<Vec<Vec<f64>>> = (0..cfg.classes)
                .map(|_| {
                    (0..cfg.clusters_per_class)
                        .map(|_| {
                            (0..cfg.dims)
                                .map(|_| (rng.next_f64() * 2.0 - 1.0) * MEAN_RANGE)
                                .collect()
                        })
                        .collect()
                })
                .collect();
            for (ci, class_i) in means.iter().enumerate() {
                for class_j in means.iter().skip(ci + 1) {
                    for a in class_i {
                        for b in class_j {
                            if distance(a, b) < cfg.separation {
                                continue 'attempt;
                            }
                        }
                    }
                }
            }
            if let Some(prev) = previous {
                for (class_now, class_before) in means.iter().zip(&prev.means) {
                    for (a, b) in class_now.iter().zip(class_before) {
                        if distance(a, b) < cfg.concept_shift {
                            continue 'attempt;
                        }
                    }
                }
            }
            return Ok(Self { means });
        }
        Err(Error::param(
            "separation",
            "could not draw class means satisfying the separation and shift constraints",
        ))
    }
}

/// Evenly spaced interior drift centers: `round((k + 0.5) * n / m)`.
pub fn drift_schedule(n_chunks: usize, n_drifts: usize) -> Result<Vec<usize>> {
    if n_drifts == 0 {
        return Ok(Vec::new());
    }
    if n_drifts >= n_chunks {
        return Err(Error::param(
            "n_drifts",
            "must be smaller than the chunk count",
        ));
    }
    let schedule: Vec<usize> = (0..n_drifts)
        .map(|k| ((k as f64 + 0.5) * n_chunks as f64 / n_drifts as f64).round() as usize)
        .collect();
    debug_assert!(schedule[0] > 0);
    debug_assert!(schedule.windows(2).all(|w| w[0] < w[1]));
    Ok(schedule)
}

/// Maps the spacing control to the sigmoid steepness. Monotone in the
/// spacing, and calibrated against the divergence signal the pipeline can
/// resolve at the default chunk size: 999 completes a transition well
/// within a single chunk, while 99 spreads it over several chunks so the
/// mixture passes through visibly intermediate stages.
fn steepness(sigmoid_spacing: f64) -> f64 {
    let s = sigmoid_spacing / 3.0;
    s * s
}

/// The active transition at chunk `x`: returns `(c, w)` where the point
/// distribution is concept `c` with probability `1 - w` and concept `c + 1`
/// with probability `w`. Transitions hand over at midpoints between
/// consecutive centers; at a center the blend is exactly one half.
pub fn concept_weight(x: usize, schedule: &[usize], sigmoid_spacing: f64) -> (usize, f64) {
    if schedule.is_empty() {
        return (0, 0.0);
    }
    let xf = x as f64;
    let mut governing = schedule.len() - 1;
    for j in 0..schedule.len() - 1 {
        if xf < (schedule[j] + schedule[j + 1]) as f64 / 2.0 {
            governing = j;
            break;
        }
    }
    let j = governing;
    let left_gap = if j > 0 {
        (schedule[j] - schedule[j - 1]) as f64
    } else {
        2.0 * schedule[0] as f64
    };
    let right_gap = if j + 1 < schedule.len() {
        (schedule[j + 1] - schedule[j]) as f64
    } else {
        left_gap
    };
    let half_gap = (left_gap.min(right_gap) / 2.0).max(0.5);
    let s = steepness(sigmoid_spacing);
    let w = 1.0 / (1.0 + (-s * (xf - schedule[j] as f64) / half_gap).exp());
    (j, w)
}

/// Lazy chunk source; yields exactly `n_chunks` chunks.
pub struct GeneratedStream {
    config: GeneratorConfig,
    schedule: Vec<usize>,
    concepts: Vec<Concept>,
    rng: Xoshiro256PlusPlus,
    next_index: usize,
}

impl GeneratedStream {
    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }
}

impl Iterator for GeneratedStream {
    type Item = Chunk;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_index >= self.config.n_chunks {
            return None;
        }
        let index = self.next_index;
        self.next_index += 1;
        let cfg = &self.config;
        let (base, w) = concept_weight(index, &self.schedule, cfg.sigmoid_spacing);
        let mut points = Vec::with_capacity(cfg.chunk_size);
        for _ in 0..cfg.chunk_size {
            let use_incoming = self.rng.bernoulli(w);
            let concept = &self.concepts[base + use_incoming as usize];
            let class = self.rng.next_below(cfg.classes as u64) as u32;
            let cluster = self.rng.next_below(cfg.clusters_per_class as u64) as usize;
            let mean = &concept.means[class as usize][cluster];
            let features: Vec<f64> = mean
                .iter()
                .map(|&m| m + cfg.covariance_scale * self.rng.next_normal())
                .collect();
            let mut label = class;
            if cfg.classes > 1 && self.rng.bernoulli(cfg.class_flip) {
                let offset = 1 + self.rng.next_below(cfg.classes as u64 - 1) as u32;
                label = (label + offset) % cfg.classes;
            }
            points.push(LabeledPoint { features, label });
        }
        Some(Chunk { index, points })
    }
}

/// Builds the stream: draws the concepts from the seed, fixes the drift
/// schedule, and returns metadata plus the lazy chunk sequence.
pub fn generate(config: GeneratorConfig) -> Result<(StreamMeta, GeneratedStream)> {
    config.validate()?;
    let schedule = drift_schedule(config.n_chunks, config.n_drifts)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let mut concepts: Vec<Concept> = Vec::with_capacity(config.n_drifts + 1);
    for _ in 0..=config.n_drifts {
        let concept = Concept::draw(&mut rng, &config, concepts.last())?;
        concepts.push(concept);
    }
    let meta = StreamMeta {
        dims: config.dims,
        classes: config.classes,
        chunk_size: config.chunk_size,
        n_chunks: Some(config.n_chunks),
        ground_truth: Some(schedule.clone()),
        rng: Some(format!("{RNG_ALGORITHM}(seed={})", config.seed)),
    };
    Ok((
        meta,
        GeneratedStream {
            config,
            schedule,
            concepts,
            rng,
            next_index: 0,
        },
    ))
}

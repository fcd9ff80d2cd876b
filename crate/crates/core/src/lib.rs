//! Concept drift detection for chunked labeled data streams.
//!
//! The pipeline estimates per-bin class-conditional distributions over a
//! regular grid for each pair of consecutive chunks, tracks the
//! Kullback-Leibler divergence between them, smooths the resulting series,
//! and flags drift where the smoothed curve's gradient escapes a
//! standardized band. The crate also ships a seeded synthetic drifting
//! stream generator, tolerance-based detection scoring, an alpha
//! sensitivity sweep, and CUSUM/EWMA reference detectors over the same
//! signal.
//!
//! ```
//! use driftkl::detector::{detect_online, DetectorConfig};
//! use driftkl::generator::{generate, GeneratorConfig};
//!
//! let (meta, stream) = generate(GeneratorConfig {
//!     seed: 9,
//!     n_chunks: 60,
//!     chunk_size: 100,
//!     n_drifts: 1,
//!     ..GeneratorConfig::default()
//! })
//! .unwrap();
//! let report = detect_online(stream.map(Ok), meta, DetectorConfig::default()).unwrap();
//! assert_eq!(report.series.len(), 59);
//! ```

pub mod baselines;
pub mod detector;
pub mod divergence;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod grid;
pub mod pmf;
pub mod report;
pub mod rng;
pub mod smoothing;
pub mod stream;

pub use detector::{detect_online, CriticalSegment, Detector, DetectorConfig, DriftReport};
pub use error::{Error, Result};
pub use evaluation::{alpha_sweep, match_events, MatchingResult};
pub use generator::{generate, GeneratorConfig};
pub use stream::{Chunk, LabeledPoint, StreamMeta, StreamReader};

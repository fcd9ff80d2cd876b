//! Signal-level reference detectors for comparison output.
//!
//! Both consume the raw divergence series, not its gradient: they model
//! shifts in the mean level. A warmup prefix estimates the in-control mean
//! (and spread for the control chart); alarms are emitted at the index where
//! the statistic first crosses its limit, then the detector re-arms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WARMUP: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumConfig {
    /// Drift allowance subtracted from every deviation.
    pub allowance: f64,
    /// Alarm threshold on the cumulative statistic.
    pub threshold: f64,
    pub warmup: usize,
}

impl Default for CusumConfig {
    /// Defaults calibrated once against the weighted divergence series of
    /// the synthetic benchmark streams at their default settings.
    fn default() -> Self {
        Self {
            allowance: 0.002,
            threshold: 0.01,
            warmup: DEFAULT_WARMUP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwmaConfig {
    /// Decay of the exponentially weighted mean, in (0, 1].
    pub lambda: f64,
    /// Control-limit multiplier.
    pub limit: f64,
    pub warmup: usize,
}

impl Default for EwmaConfig {
    /// Defaults calibrated once against the weighted divergence series of
    /// the synthetic benchmark streams at their default settings.
    fn default() -> Self {
        Self {
            lambda: 0.3,
            limit: 6.0,
            warmup: DEFAULT_WARMUP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineConfig {
    Cusum(CusumConfig),
    Ewma(EwmaConfig),
}

impl BaselineConfig {
    pub fn alarms(&self, signal: &[f64]) -> Result<Vec<usize>> {
        match self {
            BaselineConfig::Cusum(cfg) => cusum(signal, cfg),
            BaselineConfig::Ewma(cfg) => ewma(signal, cfg),
        }
    }
}

fn warmup_stats(signal: &[f64], warmup: usize) -> Result<(f64, f64)> {
    if warmup < 2 {
        return Err(Error::param("warmup", "must be at least 2"));
    }
    if signal.len() <= warmup {
        return Err(Error::Empty("signal shorter than the warmup prefix"));
    }
    let prefix = &signal[..warmup];
    let mean = prefix.iter().sum::<f64>() / warmup as f64;
    let var = prefix.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / warmup as f64;
    Ok((mean, var.sqrt()))
}

/// One-sided cumulative-sum detector. The statistic accumulates deviations
/// above the warmup mean minus the allowance, alarms when it exceeds the
/// threshold, and resets to zero after each alarm.
pub fn cusum(signal: &[f64], cfg: &CusumConfig) -> Result<Vec<usize>> {
    if !(cfg.threshold > 0.0) {
        return Err(Error::param("threshold", "must be positive"));
    }
    if !(cfg.allowance >= 0.0) {
        return Err(Error::param("allowance", "must be non-negative"));
    }
    let (mean, _) = warmup_stats(signal, cfg.warmup)?;
    let mut g = 0.0f64;
    let mut alarms = Vec::new();
    for (k, &x) in signal.iter().enumerate().skip(cfg.warmup) {
        g = (g + x - mean - cfg.allowance).max(0.0);
        if g > cfg.threshold {
            alarms.push(k);
            g = 0.0;
        }
    }
    Ok(alarms)
}

/// Exponentially weighted moving-average control chart. Alarms at the index
/// where the smoothed value first leaves the control band, then suppresses
/// further alarms until it returns inside.
pub fn ewma(signal: &[f64], cfg: &EwmaConfig) -> Result<Vec<usize>> {
    if !(cfg.lambda > 0.0 && cfg.lambda <= 1.0) {
        return Err(Error::param("lambda", "must lie in (0, 1]"));
    }
    if !(cfg.limit > 0.0) {
        return Err(Error::param("limit", "must be positive"));
    }
    let (mean, sd) = warmup_stats(signal, cfg.warmup)?;
    // Floor the control width so a zero-variance warmup prefix cannot turn
    // float roundoff in the running mean into alarms.
    let width =
        (cfg.limit * sd * (cfg.lambda / (2.0 - cfg.lambda)).sqrt()).max((mean.abs() + 1.0) * 1e-12);
    let mut z = mean;
    let mut outside = false;
    let mut alarms = Vec::new();
    for (k, &x) in signal.iter().enumerate().skip(cfg.warmup) {
        z = cfg.lambda * x + (1.0 - cfg.lambda) * z;
        let is_out = (z - mean).abs() > width;
        if is_out && !outside {
            alarms.push(k);
        }
        outside = is_out;
    }
    Ok(alarms)
}

//! Smoothing of the divergence sequence and its first derivative.
//!
//! The moving average is trailing (causal): the value at index `k` averages
//! the window ending at `k`, so it can run online as chunks arrive. LOWESS
//! is the classic tricube-weighted local linear regression with optional
//! bisquare robustness passes; it looks at neighbors on both sides and is
//! offered for batch runs only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoother selection carried in the detector configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Smoother {
    MovingAverage { window: usize },
    Lowess { frac: f64, iters: usize },
}

impl Smoother {
    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        match *self {
            Smoother::MovingAverage { window } => moving_average(series, window),
            Smoother::Lowess { frac, iters } => lowess(series, frac, iters),
        }
    }

    /// Whether the smoothed value at `k` depends only on inputs up to `k`.
    pub fn is_causal(&self) -> bool {
        matches!(self, Smoother::MovingAverage { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Smoother::MovingAverage { window } => {
                if window == 0 {
                    return Err(Error::param("window", "must be at least 1"));
                }
            }
            Smoother::Lowess { frac, .. } => {
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::param("frac", "must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

impl Default for Smoother {
    fn default() -> Self {
        Smoother::MovingAverage { window: 5 }
    }
}

impl std::fmt::Display for Smoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Smoother::MovingAverage { window } => write!(f, "ma:{window}"),
            Smoother::Lowess { frac, iters } => write!(f, "lowess:{frac},{iters}"),
        }
    }
}

/// Trailing mean: `out[k] = mean(series[max(0, k - window + 1) ..= k])`.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::param("window", "must be at least 1"));
    }
    if series.is_empty() {
        return Err(Error::Empty("moving_average needs a non-empty series"));
    }
    Ok((0..series.len())
        .map(|k| {
            let start = k.saturating_sub(window - 1);
            let slice = &series[start..=k];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Tricube-weighted local linear regression over the nearest
/// `ceil(frac * n)` neighbors per point, with `iters` bisquare robustness
/// passes. Points are taken at unit spacing.
pub fn lowess(series: &[f64], frac: f64, iters: usize) -> Result<Vec<f64>> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::param("frac", "must lie in (0, 1]"));
    }
    if series.len() < 2 {
        return Err(Error::Empty("lowess needs at least 2 points"));
    }
    let n = series.len();
    let span = ((frac * n as f64).ceil() as usize).clamp(2, n);
    let mut robustness = vec![1.0; n];
    let mut fitted = vec![0.0; n];

    for pass in 0..=iters {
        for i in 0..n {
            // Nearest neighbors of an equally spaced point: a centered
            // span-wide window clamped to the series.
            let lo = i.saturating_sub((span - 1) / 2).min(n - span);
            let hi = lo + span - 1;
            let h = ((i - lo).max(hi - i)) as f64;

            let mut sw = 0.0;
            let mut swx = 0.0;
            let mut swy = 0.0;
            let mut swxx = 0.0;
            let mut swxy = 0.0;
            for j in lo..=hi {
                let dist = (j as f64 - i as f64).abs();
                let u = if h > 0.0 { dist / h } else { 0.0 };
                let mut w = if u < 1.0 {
                    let t = 1.0 - u * u * u;
                    t * t * t
                } else {
                    0.0
                };
                w *= robustness[j];
                if w <= 0.0 {
                    continue;
                }
                let x = j as f64;
                sw += w;
                swx += w * x;
                swy += w * series[j];
                swxx += w * x * x;
                swxy += w * x * series[j];
            }
            fitted[i] = if sw > 0.0 {
                let denom = sw * swxx - swx * swx;
                if denom.abs() > 1e-12 * sw * sw {
                    let slope = (sw * swxy - swx * swy) / denom;
                    let intercept = (swy - slope * swx) / sw;
                    intercept + slope * i as f64
                } else {
                    swy / sw
                }
            } else {
                series[i]
            };
        }

        if pass == iters {
            break;
        }
        // Bisquare reweighting from the residual scale.
        let mut abs_res: Vec<f64> = series
            .iter()
            .zip(&fitted)
            .map(|(&y, &f)| (y - f).abs())
            .collect();
        abs_res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if n % 2 == 1 {
            abs_res[n / 2]
        } else {
            0.5 * (abs_res[n / 2 - 1] + abs_res[n / 2])
        };
        if median <= 0.0 {
            break;
        }
        let cutoff = 6.0 * median;
        for j in 0..n {
            let u = (series[j] - fitted[j]).abs() / cutoff;
            robustness[j] = if u < 1.0 {
                let t = 1.0 - u * u;
                t * t
            } else {
                0.0
            };
        }
    }
    Ok(fitted)
}

/// First difference at unit spacing: `out[k] = series[k+1] - series[k]`.
pub fn first_derivative(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::Empty("first_derivative needs at least 2 points"));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Global min-max scaling to [0, 1]. A constant series maps to all 0.5.
pub fn min_max_normalize(series: &[f64]) -> Vec<f64> {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; series.len()];
    }
    series.iter().map(|&x| (x - lo) / (hi - lo)).collect()
}

/// Running min-max scaler for online use. Values are scaled by the range
/// seen so far and clamped to [0, 1], so early values may saturate until the
/// running extremes settle.
#[derive(Debug, Clone, Default)]
pub struct RunningMinMax {
    lo: Option<f64>,
    hi: Option<f64>,
}

impl RunningMinMax {
    pub fn push(&mut self, x: f64) -> f64 {
        let lo = self.lo.map_or(x, |v| v.min(x));
        let hi = self.hi.map_or(x, |v| v.max(x));
        self.lo = Some(lo);
        self.hi = Some(hi);
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

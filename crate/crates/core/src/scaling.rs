//! Fits and ratios for scaling studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("need at least two samples for a slope".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("log-log fit needs positive finite samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "log-log fit needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Strong-scaling summary for one thread count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreadScaling {
    pub threads: usize,
    pub seconds: f64,
    /// `t(baseline) / t(threads)`, with the first entry as baseline; exactly 1
    /// for any sample at the baseline thread count.
    pub speedup: f64,
    /// `speedup * baseline_threads / threads`.
    pub efficiency: f64,
}

/// Speedup and efficiency relative to the first `(threads, seconds)` sample.
pub fn thread_scaling(samples: &[(usize, f64)]) -> Result<Vec<ThreadScaling>> {
    let &(base_threads, base_seconds) = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("no thread samples".into()))?;
    if samples.iter().any(|&(t, s)| t == 0 || s.is_nan() || s <= 0.0) {
        return Err(Error::InvalidInput(
            "thread samples need positive threads and times".into(),
        ));
    }
    Ok(samples
        .iter()
        .map(|&(threads, seconds)| {
            let speedup = if threads == base_threads {
                1.0
            } else {
                base_seconds / seconds
            };
            ThreadScaling {
                threads,
                seconds,
                speedup,
                efficiency: speedup * base_threads as f64 / threads as f64,
            }
        })
        .collect())
}

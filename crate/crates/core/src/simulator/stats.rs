//! Batch means, across-disorder aggregation and convergence diagnostics.

use serde::{Deserialize, Serialize};

pub const DEFAULT_BATCHES: usize = 32;

/// A quenched estimate: mean over disorder samples of thermal time averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub mean: f64,
    pub stderr: f64,
    pub n_effective: f64,
    pub n_disorder: usize,
}

impl EstimatorSummary {
    pub fn scaled(&self, c: f64) -> Self {
        Self { mean: self.mean * c, stderr: self.stderr * c.abs(), ..*self }
    }

    /// `(mean - target) / stderr`; infinite when the stderr vanishes but the mean differs.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Time average of one chain-level series with its batch-means error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub mean: f64,
    pub stderr: f64,
    pub n_effective: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Nonoverlapping batch means. Leftover samples at the start are dropped.
pub fn batch_means(series: &[f64], n_batches: usize) -> SeriesSummary {
    let len = series.len();
    if len == 0 {
        return SeriesSummary { mean: f64::NAN, stderr: f64::NAN, n_effective: 0.0 };
    }
    let batches = n_batches.min(len / 2);
    if batches < 2 {
        return SeriesSummary { mean: mean(series), stderr: 0.0, n_effective: len as f64 };
    }
    let size = len / batches;
    let used = &series[len - size * batches..];
    let means: Vec<f64> = used.chunks_exact(size).map(mean).collect();
    let m = mean(used);
    let se = (sample_var(&means) / batches as f64).sqrt();
    let var = sample_var(used);
    let n_effective = if se > 0.0 { (var / (se * se)).min(used.len() as f64) } else { used.len() as f64 };
    SeriesSummary { mean: m, stderr: se, n_effective }
}

/// Combines per-disorder time averages.
///
/// The spread of the per-disorder means already contains their thermal noise;
/// the mean batch-means variance is a floor guarding against an unlucky small
/// spread when few disorder samples are available.
pub fn combine_disorders(per: &[SeriesSummary]) -> EstimatorSummary {
    let n = per.len();
    let means: Vec<f64> = per.iter().map(|s| s.mean).collect();
    let m = mean(&means);
    let across = sample_var(&means);
    let within = per.iter().map(|s| s.stderr * s.stderr).sum::<f64>() / n as f64;
    let stderr = if n > 1 { (across.max(within) / n as f64).sqrt() } else { within.sqrt() };
    EstimatorSummary { mean: m, stderr, n_effective: per.iter().map(|s| s.n_effective).sum(), n_disorder: n }
}

/// Split-chain potential scale reduction over equally long traces.
pub fn split_rhat(traces: &[Vec<f64>]) -> f64 {
    let half = traces.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 || traces.is_empty() {
        return f64::NAN;
    }
    let pieces: Vec<&[f64]> = traces.iter().flat_map(|t| [&t[..half], &t[half..2 * half]]).collect();
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let w = pieces.iter().map(|p| sample_var(p)).sum::<f64>() / pieces.len() as f64;
    let b_over_n = sample_var(&means);
    if w == 0.0 {
        return if b_over_n == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let nf = half as f64;
    (((nf - 1.0) / nf * w + b_over_n) / w).sqrt()
}

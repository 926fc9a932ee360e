//! Order-independent reductions and Monte Carlo summaries.
//!
//! Every aggregate in the crate goes through [`pairwise_sum`], so a result
//! depends only on the ordered list of per-replication values and never on
//! how the work was split across threads.

use serde::Serialize;

const LEAF: usize = 16;

/// Pairwise (tree) summation. The split points depend only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing the terms.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= LEAF {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_reps: usize,
    pub ci95: (f64, f64),
}

impl Estimate {
    /// Summarizes per-replication samples. Deviations are taken from the
    /// first sample, so a constant sample has a standard error of exactly 0.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "an estimate needs at least two samples");
        let shift = xs[0];
        let d_mean = pairwise_sum_by(n, &|i| xs[i] - shift) / n as f64;
        let ss = pairwise_sum_by(n, &|i| {
            let d = xs[i] - shift - d_mean;
            d * d
        });
        let sd = (ss / (n - 1) as f64).sqrt();
        Self::new(shift + d_mean, sd / (n as f64).sqrt(), n)
    }

    pub fn new(mean: f64, std_error: f64, n_reps: usize) -> Self {
        Self {
            mean,
            std_error,
            n_reps,
            ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
        }
    }

    /// Number of standard errors separating the mean from `target`.
    /// Infinite when the estimate is exact and differs from the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.std_error == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.std_error
        }
    }
}

/// Sample variance with the standard error of that variance, estimated from
/// the fourth central moment.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = pairwise_sum_by(xs.len(), &|i| (xs[i] - m).powi(2)) / n;
    let m4 = pairwise_sum_by(xs.len(), &|i| (xs[i] - m).powi(4)) / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2) / n).max(0.0).sqrt())
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let n = xs.len();
    let sxy = pairwise_sum_by(n, &|i| (xs[i] - mx) * (ys[i] - my));
    let sxx = pairwise_sum_by(n, &|i| (xs[i] - mx).powi(2));
    let syy = pairwise_sum_by(n, &|i| (ys[i] - my).powi(2));
    sxy / (sxx * syy).sqrt()
}

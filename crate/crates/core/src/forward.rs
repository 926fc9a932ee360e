//! Forward (Russo-Vallois) integration on a fixed grid.
//!
//! The forward integral of a càglàd integrand is the limit of left-endpoint
//! Riemann sums; here it is that sum on the simulation grid, reduced
//! pairwise. Nothing in this module looks at whether the integrand is
//! adapted: an integrand that reads `B(T0)` is integrated exactly like one
//! that reads only the past.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BrownianPath, SeedSpec, TimeGrid};
use crate::stats::{pairwise_sum_by, Estimate};

/// Integrand values `φ(t_k)` at the nodes `k = 0..=T/dt` for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProcess {
    grid: TimeGrid,
    samples: Vec<f64>,
}

impl SampledProcess {
    pub fn new(grid: &TimeGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.trade_steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} trading nodes",
                samples.len(),
                grid.trade_steps() + 1
            )));
        }
        Ok(Self {
            grid: *grid,
            samples,
        })
    }

    pub fn from_fn<F: FnMut(usize) -> f64>(grid: &TimeGrid, f: F) -> Self {
        Self {
            grid: *grid,
            samples: (0..=grid.trade_steps()).map(f).collect(),
        }
    }

    pub fn constant(grid: &TimeGrid, value: f64) -> Self {
        Self::from_fn(grid, |_| value)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|v| factor * v).collect(),
        }
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch(format!(
                "process on {:?}, path on {:?}",
                self.grid, grid
            )));
        }
        Ok(())
    }
}

/// `Σ_{j=1}^{T/dt} φ(t_{j-1}) (B(t_j) - B(t_{j-1}))`.
pub fn forward_integral(phi: &SampledProcess, path: &BrownianPath) -> Result<f64> {
    phi.check_grid(path.grid())?;
    let s = phi.samples();
    Ok(pairwise_sum_by(path.grid().trade_steps(), &|j| {
        s[j] * path.increment(j)
    }))
}

/// Itô left sum of an adapted integrand. `integrand(k, past)` sees only
/// `B(t_0), ..., B(t_k)`, so adaptedness holds by construction.
pub fn ito_integral<F>(integrand: F, path: &BrownianPath) -> f64
where
    F: Fn(usize, &[f64]) -> f64,
{
    let b = path.values();
    pairwise_sum_by(path.grid().trade_steps(), &|j| {
        integrand(j, &b[..=j]) * path.increment(j)
    })
}

/// `(∫ Gφ d⁻B, G ∫ φ d⁻B)`; the components agree up to round-off.
pub fn scale_out(g: f64, phi: &SampledProcess, path: &BrownianPath) -> Result<(f64, f64)> {
    let scaled = forward_integral(&phi.scaled(g), path)?;
    let factored = g * forward_integral(phi, path)?;
    Ok((scaled, factored))
}

/// Both sides of the forward-integral duality
/// `E[∫ φ d⁻B] = E[∫ E[D_{s+}φ(s) | F_s] ds]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub gap: f64,
}

impl DualityReport {
    /// Per-replication forward integrals and `Σ d_φ dt` values.
    pub fn from_samples(lhs: &[f64], rhs: &[f64]) -> Result<Self> {
        if lhs.len() < 2 || lhs.len() != rhs.len() {
            return Err(Error::TooFewReplications {
                need: 2,
                got: lhs.len().min(rhs.len()),
            });
        }
        let l = Estimate::from_samples(lhs);
        let r = Estimate::from_samples(rhs);
        Ok(Self {
            lhs_mean: l.mean,
            lhs_se: l.std_error,
            rhs_mean: r.mean,
            rhs_se: r.std_error,
            gap: l.mean - r.mean,
        })
    }

    /// `|gap| <= k (lhs_se + rhs_se)`.
    pub fn within(&self, k: f64) -> bool {
        self.gap.abs() <= k * (self.lhs_se + self.rhs_se)
    }
}

/// Monte Carlo estimate of both duality sides. `integrand` maps a path to
/// `(φ, d_φ)` where `d_φ(s)` is the caller's closed form of
/// `E[D_{s+}φ(s) | F_s]`.
pub fn duality_gap<F>(
    grid: &TimeGrid,
    n_reps: usize,
    master_seed: u64,
    integrand: F,
) -> Result<DualityReport>
where
    F: Fn(&BrownianPath) -> Result<(SampledProcess, SampledProcess)> + Sync,
{
    if n_reps < 2 {
        return Err(Error::TooFewReplications {
            need: 2,
            got: n_reps,
        });
    }
    let dt = grid.dt();
    let pairs: Vec<(f64, f64)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let path = BrownianPath::sample(grid, SeedSpec::new(master_seed, i));
            let (phi, d_phi) = integrand(&path)?;
            d_phi.check_grid(grid)?;
            let lhs = forward_integral(&phi, &path)?;
            let d = d_phi.samples();
            let rhs = pairwise_sum_by(grid.trade_steps(), &|j| d[j] * dt);
            Ok((lhs, rhs))
        })
        .collect::<Result<_>>()?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    DualityReport::from_samples(&lhs, &rhs)
}

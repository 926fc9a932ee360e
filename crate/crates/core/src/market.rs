//! Bond/stock market with deterministic coefficients and the self-financing
//! wealth of a fraction-of-wealth strategy.
//!
//! Two discretizations of the same dynamics are provided. The exponential
//! scheme is the closed-form solution with its stochastic part taken as the
//! left-endpoint forward sum; it is the reference used for all statistics.
//! The Euler scheme steps the wealth SDE directly and exists to check the
//! forward Itô formula numerically against the exponential scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{forward_integral, SampledProcess};
use crate::grid::{BrownianPath, TimeGrid};
use crate::stats::pairwise_sum_by;

/// Volatility floor.
pub const SIGMA_MIN: f64 = 1e-6;

/// A deterministic coefficient: one value for all times or one per trading node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Nodes(Vec<f64>),
}

impl Coefficient {
    fn resolve(&self, grid: &TimeGrid, name: &str) -> Result<Vec<f64>> {
        let n = grid.trade_steps() + 1;
        let v = match self {
            Coefficient::Constant(c) => vec![*c; n],
            Coefficient::Nodes(v) if v.len() == n => v.clone(),
            Coefficient::Nodes(v) => {
                return Err(Error::InvalidMarket(format!(
                    "{name} has {} node values, expected {n}",
                    v.len()
                )))
            }
        };
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMarket(format!(
                "{name} is not finite at node {k}"
            )));
        }
        Ok(v)
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

/// Interest rate `r`, stock drift `b` and volatility `σ` on the trading nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    grid: TimeGrid,
    r: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
}

impl MarketModel {
    pub fn new(
        grid: &TimeGrid,
        r: impl Into<Coefficient>,
        b: impl Into<Coefficient>,
        sigma: impl Into<Coefficient>,
    ) -> Result<Self> {
        let r = r.into().resolve(grid, "r")?;
        let b = b.into().resolve(grid, "b")?;
        let sigma = sigma.into().resolve(grid, "sigma")?;
        if let Some(k) = sigma.iter().position(|s| *s < SIGMA_MIN) {
            return Err(Error::InvalidMarket(format!(
                "sigma = {} at node {k} is below {SIGMA_MIN:e}",
                sigma[k]
            )));
        }
        Ok(Self {
            grid: *grid,
            r,
            b,
            sigma,
        })
    }

    pub fn constant(grid: &TimeGrid, r: f64, b: f64, sigma: f64) -> Result<Self> {
        Self::new(grid, r, b, sigma)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn r(&self, node: usize) -> f64 {
        self.r[node]
    }

    pub fn b(&self, node: usize) -> f64 {
        self.b[node]
    }

    pub fn sigma(&self, node: usize) -> f64 {
        self.sigma[node]
    }

    fn check(&self, pi: &SampledProcess, path: &BrownianPath) -> Result<()> {
        if &self.grid != path.grid() || &self.grid != pi.grid() {
            return Err(Error::GridMismatch(
                "market, strategy and path must share one grid".into(),
            ));
        }
        Ok(())
    }

    fn log_drift(&self, k: usize, pi: f64) -> f64 {
        let (r, b, s) = (self.r[k], self.b[k], self.sigma[k]);
        r + (b - r) * pi - 0.5 * s * s * pi * pi
    }
}

/// Wealth at every trading node, starting from `x[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    grid: TimeGrid,
    x: Vec<f64>,
}

impl WealthPath {
    pub fn new(grid: &TimeGrid, x: Vec<f64>) -> Result<Self> {
        if x.len() != grid.trade_steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} wealth values for {} trading nodes",
                x.len(),
                grid.trade_steps() + 1
            )));
        }
        Ok(Self { grid: *grid, x })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn terminal(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// First node whose wealth is not strictly positive.
    pub fn first_non_positive(&self) -> Option<(usize, f64)> {
        self.x
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v <= 0.0)
            .map(|(k, v)| (k, *v))
    }
}

/// Terminal log-wealth of the exponential scheme,
/// `Σ {r + (b-r)π - σ²π²/2} dt + ∫ πσ d⁻B`, both sums reduced pairwise.
pub fn log_wealth(market: &MarketModel, pi: &SampledProcess, path: &BrownianPath) -> Result<f64> {
    market.check(pi, path)?;
    let grid = market.grid();
    let p = pi.samples();
    let dt = grid.dt();
    let drift = pairwise_sum_by(grid.trade_steps(), &|k| market.log_drift(k, p[k]) * dt);
    let vol = SampledProcess::from_fn(grid, |k| p[k] * market.sigma(k));
    Ok(drift + forward_integral(&vol, path)?)
}

/// Exponential scheme: `X(t_k) = exp(Σ_{j<k} {r + (b-r)π - σ²π²/2}(t_j) dt + Σ_{j<k} π σ ΔB_j)`.
pub fn wealth_exponential(
    market: &MarketModel,
    pi: &SampledProcess,
    path: &BrownianPath,
) -> Result<WealthPath> {
    market.check(pi, path)?;
    let dt = market.grid.dt();
    let p = pi.samples();
    let n = market.grid.trade_steps();
    let mut x = Vec::with_capacity(n + 1);
    let mut exponent = 0.0;
    x.push(1.0);
    for (k, &pk) in p.iter().enumerate().take(n) {
        exponent += market.log_drift(k, pk) * dt + pk * market.sigma[k] * path.increment(k);
        x.push(exponent.exp());
    }
    WealthPath::new(&market.grid, x)
}

/// Forward Euler: `X(t_{k+1}) = X(t_k) (1 + [(1-π) r + π b] dt + π σ ΔB_k)`.
/// Non-positive values are kept as computed.
pub fn wealth_euler(
    market: &MarketModel,
    pi: &SampledProcess,
    path: &BrownianPath,
) -> Result<WealthPath> {
    market.check(pi, path)?;
    let dt = market.grid.dt();
    let p = pi.samples();
    let n = market.grid.trade_steps();
    let mut x = Vec::with_capacity(n + 1);
    let mut w = 1.0;
    x.push(w);
    for (k, &pk) in p.iter().enumerate().take(n) {
        let growth = ((1.0 - pk) * market.r[k] + pk * market.b[k]) * dt;
        w *= 1.0 + growth + pk * market.sigma[k] * path.increment(k);
        x.push(w);
    }
    WealthPath::new(&market.grid, x)
}

/// `ln X(T)`.
pub fn log_utility(wealth: &WealthPath) -> Result<f64> {
    let node = wealth.x.len() - 1;
    let value = wealth.terminal();
    if value.is_nan() || value <= 0.0 {
        return Err(Error::NonPositiveWealth { node, value });
    }
    Ok(value.ln())
}

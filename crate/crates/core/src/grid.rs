//! Time discretization, reproducible random streams and Brownian paths.
//!
//! Each replication draws from its own ChaCha8 stream: the key is expanded
//! from the master seed and the replication index selects the 64-bit stream
//! id. Standard normals come from the Marsaglia polar method, consuming
//! uniforms in a fixed order, so a path is a pure function of
//! `(grid, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform partition of `[0, T0]` on which the trading horizon `T` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    insider_horizon: f64,
    n_steps: usize,
    trade_steps: usize,
    dt: f64,
}

impl TimeGrid {
    /// Builds the grid, snapping `horizon` onto the nearest node when it is
    /// within `1e-12` (in node units) of one.
    pub fn new(horizon: f64, insider_horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && insider_horizon.is_finite()) {
            return Err(Error::InvalidGrid("horizons must be finite".into()));
        }
        if horizon <= 0.0 {
            return Err(Error::InvalidGrid(format!("T = {horizon} must be > 0")));
        }
        if horizon >= insider_horizon {
            return Err(Error::InvalidGrid(format!(
                "T = {horizon} must be < T0 = {insider_horizon}"
            )));
        }
        if n_steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "n_steps = {n_steps} must be >= 2"
            )));
        }
        let dt = insider_horizon / n_steps as f64;
        let ratio = horizon / dt;
        let node = ratio.round();
        if (ratio - node).abs() > 1e-12 || node < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "T = {horizon} is not a node of a grid with dt = {dt}"
            )));
        }
        let trade_steps = node as usize;
        Ok(Self {
            horizon: trade_steps as f64 * dt,
            insider_horizon,
            n_steps,
            trade_steps,
            dt,
        })
    }

    /// Trading horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Insider horizon `T0`.
    pub fn insider_horizon(&self) -> f64 {
        self.insider_horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Index of the node sitting at `T`.
    pub fn trade_steps(&self) -> usize {
        self.trade_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, node: usize) -> f64 {
        node as f64 * self.dt
    }

    /// The grid obtained by keeping every `factor`-th node.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0
            || !self.n_steps.is_multiple_of(factor)
            || !self.trade_steps.is_multiple_of(factor)
        {
            return Err(Error::InvalidGrid(format!(
                "factor {factor} does not divide n_steps = {} and the T node {}",
                self.n_steps, self.trade_steps
            )));
        }
        Self::new(self.horizon, self.insider_horizon, self.n_steps / factor)
    }
}

/// Identifies one replication's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        Self {
            master_seed,
            replication_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replication_index);
        rng
    }

    pub fn normals(&self) -> NormalStream<ChaCha8Rng> {
        NormalStream::new(self.rng())
    }
}

/// Standard normal variates by the Marsaglia polar method.
pub struct NormalStream<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> NormalStream<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Brownian motion sampled at every node of a grid, `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl BrownianPath {
    /// Samples `B` on `[0, T0]` from the stream of `seed`.
    pub fn sample(grid: &TimeGrid, seed: SeedSpec) -> Self {
        let mut normals = seed.normals();
        let sd = grid.dt().sqrt();
        let mut values = Vec::with_capacity(grid.n_steps() + 1);
        let mut b = 0.0;
        values.push(b);
        for _ in 0..grid.n_steps() {
            b += sd * normals.next_normal();
            values.push(b);
        }
        Self {
            grid: *grid,
            values,
        }
    }

    /// Builds a path from explicit node values.
    pub fn from_values(grid: &TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} path values for {} nodes",
                values.len(),
                grid.n_steps() + 1
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument("a Brownian path starts at 0".into()));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// `B(t_{k+1}) - B(t_k)`.
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    /// `B(T0)`.
    pub fn terminal(&self) -> f64 {
        self.values[self.grid.n_steps()]
    }

    /// `B(T)`.
    pub fn at_horizon(&self) -> f64 {
        self.values[self.grid.trade_steps()]
    }

    /// The same path observed on the grid coarsened by `factor`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(Self { grid, values })
    }

    /// Keeps the path on `[0, t_node]` and redraws every later increment
    /// from the stream of `seed`.
    pub fn resample_tail(&self, node: usize, seed: SeedSpec) -> Result<Self> {
        if node > self.grid.n_steps() {
            return Err(Error::OffGrid {
                node,
                max: self.grid.n_steps(),
            });
        }
        let mut normals = seed.normals();
        let sd = self.grid.dt().sqrt();
        let mut values = self.values[..=node].to_vec();
        let mut b = values[node];
        for _ in node..self.grid.n_steps() {
            b += sd * normals.next_normal();
            values.push(b);
        }
        Ok(Self {
            grid: self.grid,
            values,
        })
    }
}

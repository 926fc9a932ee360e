//! Closed-form conditional Donsker-delta quantities for Gaussian insider
//! information `Y = ∫_0^{T0} ψ dB`.
//!
//! Given `F_t`, `Y` is normal with mean `Y(t) = ∫_0^t ψ dB` and variance
//! `v_t = ∫_t^{T0} ψ² ds`. The conditional Donsker delta `E[δ_Y(y) | F_t]`
//! is that normal density, and `E[D_t δ_Y(y) | F_t]` is its derivative with
//! respect to the mean times `ψ(t)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BrownianPath, TimeGrid};

/// Smallest remaining variance `v_T` a kernel may leave at the horizon.
pub const V_MIN: f64 = 1e-10;

/// Piecewise-constant `ψ`, equal to `psi[k]` on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: TimeGrid,
    psi: Vec<f64>,
    // tail[k] = Σ_{j >= k} psi[j]^2 dt, tail[n_steps] = 0
    tail: Vec<f64>,
}

impl Kernel {
    /// `values` holds one entry per grid step on `[0, T0)`.
    pub fn from_values(grid: &TimeGrid, values: Vec<f64>) -> Result<Self> {
        let n = grid.n_steps();
        if values.len() != n {
            return Err(Error::InvalidKernel(format!(
                "{} kernel values for {n} grid steps",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "non-finite value at node {k}"
            )));
        }
        let dt = grid.dt();
        let mut tail = vec![0.0; n + 1];
        for k in (0..n).rev() {
            tail[k] = tail[k + 1] + values[k] * values[k] * dt;
        }
        let v_t = tail[grid.trade_steps()];
        if v_t < V_MIN {
            return Err(Error::InvalidKernel(format!(
                "remaining variance at T is {v_t:e}, below {V_MIN:e}"
            )));
        }
        Ok(Self {
            grid: *grid,
            psi: values,
            tail,
        })
    }

    /// `ψ ≡ value`.
    pub fn constant(grid: &TimeGrid, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.n_steps()])
    }

    /// `ψ_k = t_k`.
    pub fn ramp(grid: &TimeGrid) -> Result<Self> {
        Self::from_values(grid, (0..grid.n_steps()).map(|k| grid.time(k)).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    /// Right-limit value of `ψ` at a node; zero at `T0`.
    pub fn psi(&self, node: usize) -> f64 {
        self.psi.get(node).copied().unwrap_or(0.0)
    }

    /// `‖ψ‖²_{[t_node, T0]}`.
    pub fn tail_norm(&self, node: usize) -> Result<f64> {
        self.tail.get(node).copied().ok_or(Error::OffGrid {
            node,
            max: self.grid.n_steps(),
        })
    }

    /// `Y(t_k) = Σ_{j<k} ψ_j ΔB_j` at every node; the last entry is `Y`.
    pub fn signal(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        if path.grid() != &self.grid {
            return Err(Error::GridMismatch("kernel and path grids differ".into()));
        }
        let mut y = Vec::with_capacity(self.psi.len() + 1);
        let mut acc = 0.0;
        y.push(acc);
        for (k, psi) in self.psi.iter().enumerate() {
            acc += psi * path.increment(k);
            y.push(acc);
        }
        Ok(y)
    }

    /// Insider state at `node` for the given path.
    pub fn state(&self, path: &BrownianPath, node: usize) -> Result<InsiderState> {
        let y = self.signal(path)?;
        InsiderState::new(node, &y)
    }

    fn remaining_variance(&self, state: &InsiderState) -> Result<f64> {
        let v = self.tail_norm(state.node)?;
        if v <= 0.0 {
            return Err(Error::DegenerateConditioning(v, state.node));
        }
        Ok(v)
    }

    /// Law of `Y` given `F_t`.
    pub fn conditional_law(&self, state: &InsiderState) -> Result<ConditionalDensity> {
        Ok(ConditionalDensity {
            mean: state.y_t,
            variance: self.remaining_variance(state)?,
        })
    }
}

/// What an insider knows at a node: `Y(t)` and `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InsiderState {
    pub node: usize,
    pub y_t: f64,
    pub y: f64,
}

impl InsiderState {
    /// From the node values of [`Kernel::signal`].
    pub fn new(node: usize, signal: &[f64]) -> Result<Self> {
        let max = signal.len() - 1;
        if node > max {
            return Err(Error::OffGrid { node, max });
        }
        Ok(Self {
            node,
            y_t: signal[node],
            y: signal[max],
        })
    }
}

/// Normal density with mean `Y(t)` and variance `v_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalDensity {
    pub mean: f64,
    pub variance: f64,
}

impl ConditionalDensity {
    pub fn pdf(&self, y: f64) -> f64 {
        let d = self.mean - y;
        (-d * d / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }

    /// `∂/∂mean` of the density.
    pub fn mean_derivative(&self, y: f64) -> f64 {
        -self.pdf(y) * (self.mean - y) / self.variance
    }
}

/// `E[δ_Y(y) | F_t] = (2π v_t)^{-1/2} exp(-(Y(t) - y)² / (2 v_t))`.
pub fn conditional_density(kernel: &Kernel, state: &InsiderState, y: f64) -> Result<f64> {
    Ok(kernel.conditional_law(state)?.pdf(y))
}

/// `E[D_t δ_Y(y) | F_t] = -(2π v_t)^{-1/2} exp(-(Y(t) - y)² / (2 v_t)) (Y(t) - y) ψ(t) / v_t`.
pub fn conditional_delta_derivative(kernel: &Kernel, state: &InsiderState, y: f64) -> Result<f64> {
    let law = kernel.conditional_law(state)?;
    Ok(law.mean_derivative(y) * kernel.psi(state.node))
}

/// Information drift `α(t) = (Y - Y(t)) ψ(t) / v_t`.
pub fn information_drift(kernel: &Kernel, state: &InsiderState) -> Result<f64> {
    let v = kernel.remaining_variance(state)?;
    Ok((state.y - state.y_t) * kernel.psi(state.node) / v)
}

//! Insider portfolio optimization with forward stochastic integrals.
//!
//! A trader who knows `Y = ∫_0^{T0} ψ dB` in advance invests a fraction of
//! wealth in a stock whose Brownian driver `B` is simulated on a uniform grid.
//! The crate provides the forward (left-endpoint) integral, the Gaussian
//! conditional Donsker-delta closed forms, the information drift, the
//! optimal insider fraction, and Monte Carlo experiments that check them
//! against analytic values.
//!
//! ```
//! use insider_core::{excess_utility_analytic, Kernel, TimeGrid};
//!
//! let grid = TimeGrid::new(1.0, 2.0, 1024)?;
//! let kernel = Kernel::constant(&grid, 1.0)?;
//! let excess = excess_utility_analytic(&kernel)?;
//! assert!((excess - 0.5 * 2f64.ln()).abs() < 1e-12);
//! # Ok::<(), insider_core::Error>(())
//! ```

pub mod donsker;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod grid;
pub mod market;
pub mod stats;
pub mod strategy;

pub use donsker::{
    conditional_delta_derivative, conditional_density, information_drift, ConditionalDensity,
    InsiderState, Kernel,
};
pub use error::{Error, Result};
pub use experiments::{
    compare_strategies, decomposition_test, estimate_log_utility, excess_utility_analytic,
    excess_utility_discrete, expected_log_utility, optimality_scan, scheme_refinement,
    tail_resampled_law, DecompositionReport, DriftMode, PairedComparison, RefinementLevel,
    ScanResult, TailLaw,
};
pub use forward::{
    duality_gap, forward_integral, ito_integral, scale_out, DualityReport, SampledProcess,
};
pub use grid::{BrownianPath, SeedSpec, TimeGrid};
pub use market::{
    log_utility, log_wealth, wealth_euler, wealth_exponential, Coefficient, MarketModel, WealthPath,
};
pub use stats::Estimate;
pub use strategy::{
    insider_fraction, merton_fraction, pointwise_maximizer, pointwise_objective, Perturbation,
    Strategy,
};

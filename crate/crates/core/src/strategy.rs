//! Portfolio rules: the honest Merton fraction, the insider optimum and
//! perturbations of either.
//!
//! Every rule is evaluated on a path through [`Strategy::sample`]. Insider
//! rules read the path only through `Y(t)` and `Y`, which is what measurability
//! with respect to `F_t ∨ σ(Y)` amounts to for Gaussian `Y`.

use crate::donsker::{
    conditional_delta_derivative, conditional_density, information_drift, InsiderState, Kernel,
};
use crate::error::{Error, Result};
use crate::forward::SampledProcess;
use crate::grid::BrownianPath;
use crate::market::MarketModel;

/// `(b - r) / σ²` at a trading node.
pub fn merton_fraction(market: &MarketModel, node: usize) -> f64 {
    let s = market.sigma(node);
    (market.b(node) - market.r(node)) / (s * s)
}

/// Per-`(s, y)` integrand of the expected log-utility functional,
/// `(b-r) f p - σ² f² p / 2 + σ f q` with `p = E[δ_Y(y)|F_s]`,
/// `q = E[D_s δ_Y(y)|F_s]`.
pub fn pointwise_objective(excess: f64, sigma: f64, dens: f64, ddens: f64, f: f64) -> f64 {
    excess * f * dens - 0.5 * sigma * sigma * f * f * dens + sigma * f * ddens
}

/// Maximizer of [`pointwise_objective`] over `f`:
/// `(b - r)/σ² + q / (σ p)`.
pub fn pointwise_maximizer(excess: f64, sigma: f64, dens: f64, ddens: f64) -> Result<f64> {
    if dens.is_nan() || dens <= 0.0 {
        return Err(Error::NonPositiveDensity(dens));
    }
    Ok(excess / (sigma * sigma) + ddens / (sigma * dens))
}

/// Optimal insider fraction `(b - r)/σ² + α(t)/σ(t)`.
pub fn insider_fraction(
    market: &MarketModel,
    kernel: &Kernel,
    state: &InsiderState,
) -> Result<f64> {
    let node = state.node;
    Ok(merton_fraction(market, node) + information_drift(kernel, state)? / market.sigma(node))
}

/// The same quantity routed through the conditional density and its
/// Malliavin derivative at `y = Y`.
pub fn insider_fraction_from_densities(
    market: &MarketModel,
    kernel: &Kernel,
    state: &InsiderState,
) -> Result<f64> {
    let node = state.node;
    let dens = conditional_density(kernel, state, state.y)?;
    let ddens = conditional_delta_derivative(kernel, state, state.y)?;
    pointwise_maximizer(
        market.b(node) - market.r(node),
        market.sigma(node),
        dens,
        ddens,
    )
}

/// Direction `g(t, Y)` along which a strategy is perturbed.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// `g ≡ c`.
    Constant(f64),
    /// Deterministic `g(t_k)`, one value per trading node.
    Nodes(Vec<f64>),
    /// `g = α(t)/σ(t) = (Y - Y(t)) ψ(t) / (σ(t) v_t)`.
    DriftDirection(Kernel),
}

/// A fraction-of-wealth rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Merton,
    /// Optimal insider rule for `Y = ∫ ψ dB`.
    InsiderOptimal(Kernel),
    /// Optimal insider rule for `Y = B(T0)`, written with `B` directly:
    /// `(b - r)/σ² + (B(T0) - B(t)) / (σ (T0 - t))`.
    InsiderCorollary,
    Perturbed {
        base: Box<Strategy>,
        shape: Perturbation,
        eps: f64,
    },
    /// Explicit fraction per trading node.
    Table(Vec<f64>),
}

impl Strategy {
    pub fn constant(market: &MarketModel, value: f64) -> Self {
        Strategy::Table(vec![value; market.grid().trade_steps() + 1])
    }

    /// `base + eps · g`.
    pub fn perturb(base: Strategy, shape: Perturbation, eps: f64) -> Self {
        Strategy::Perturbed {
            base: Box::new(base),
            shape,
            eps,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Merton => "merton",
            Strategy::InsiderOptimal(_) => "insider_optimal",
            Strategy::InsiderCorollary => "insider_corollary",
            Strategy::Perturbed { .. } => "perturbed",
            Strategy::Table(_) => "table",
        }
    }

    /// True when the rule reads nothing but time and market coefficients.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Strategy::Merton | Strategy::Table(_) => true,
            Strategy::InsiderOptimal(_) | Strategy::InsiderCorollary => false,
            Strategy::Perturbed { base, shape, eps } => {
                base.is_deterministic()
                    && (*eps == 0.0 || !matches!(shape, Perturbation::DriftDirection(_)))
            }
        }
    }

    /// Fractions `π(t_k)` on the trading nodes of `path`.
    pub fn sample(&self, market: &MarketModel, path: &BrownianPath) -> Result<SampledProcess> {
        let grid = market.grid();
        if grid != path.grid() {
            return Err(Error::GridMismatch("market and path grids differ".into()));
        }
        let n = grid.trade_steps();
        let values = match self {
            Strategy::Merton => (0..=n).map(|k| merton_fraction(market, k)).collect(),
            Strategy::InsiderOptimal(kernel) => {
                let y = kernel.signal(path)?;
                (0..=n)
                    .map(|k| insider_fraction(market, kernel, &InsiderState::new(k, &y)?))
                    .collect::<Result<Vec<_>>>()?
            }
            Strategy::InsiderCorollary => {
                let t0 = grid.insider_horizon();
                let bt0 = path.terminal();
                (0..=n)
                    .map(|k| {
                        merton_fraction(market, k)
                            + (bt0 - path.value(k)) / (market.sigma(k) * (t0 - grid.time(k)))
                    })
                    .collect()
            }
            Strategy::Perturbed { base, shape, eps } => {
                let base = base.sample(market, path)?;
                let g = shape.sample(market, path)?;
                base.samples()
                    .iter()
                    .zip(g)
                    .map(|(p, g)| p + eps * g)
                    .collect()
            }
            Strategy::Table(v) => {
                if v.len() != n + 1 {
                    return Err(Error::InvalidStrategy(format!(
                        "table has {} values, expected {}",
                        v.len(),
                        n + 1
                    )));
                }
                v.clone()
            }
        };
        SampledProcess::new(grid, values)
    }
}

impl Perturbation {
    fn sample(&self, market: &MarketModel, path: &BrownianPath) -> Result<Vec<f64>> {
        let n = market.grid().trade_steps();
        match self {
            Perturbation::Constant(c) => Ok(vec![*c; n + 1]),
            Perturbation::Nodes(v) if v.len() == n + 1 => Ok(v.clone()),
            Perturbation::Nodes(v) => Err(Error::InvalidStrategy(format!(
                "perturbation has {} values, expected {}",
                v.len(),
                n + 1
            ))),
            Perturbation::DriftDirection(kernel) => {
                let y = kernel.signal(path)?;
                (0..=n)
                    .map(|k| {
                        Ok(
                            information_drift(kernel, &InsiderState::new(k, &y)?)?
                                / market.sigma(k),
                        )
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SeedSpec, TimeGrid};
    use proptest::prelude::{prop_assert, proptest};

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 2.0, 64).unwrap()
    }

    #[test]
    fn merton_examples() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        assert!((merton_fraction(&m, 0) - 1.0).abs() < 1e-12);
        let m = MarketModel::constant(&g, 0.05, 0.05, 0.2).unwrap();
        assert_eq!(merton_fraction(&m, 3), 0.0);
        let m = MarketModel::constant(&g, 0.01, 0.05, 0.1).unwrap();
        assert!((merton_fraction(&m, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn maximizer_examples() {
        assert_eq!(pointwise_maximizer(0.0, 0.2, 0.5, 0.0).unwrap(), 0.0);
        let f = pointwise_maximizer(0.04, 0.2, 0.3989, 0.2420).unwrap();
        let oracle = 0.04 / 0.04 + 0.2420 / (0.2 * 0.3989);
        assert!((f - oracle).abs() < 1e-12);
        assert!((f - 4.033).abs() < 1e-3);
        assert!(matches!(
            pointwise_maximizer(0.04, 0.2, 0.0, 0.1),
            Err(Error::NonPositiveDensity(_))
        ));
    }

    #[test]
    fn maximizer_beats_neighbours() {
        let (excess, sigma, dens, ddens) = (0.04, 0.2, 0.3989, 0.2420);
        let f = pointwise_maximizer(excess, sigma, dens, ddens).unwrap();
        let j = |x| pointwise_objective(excess, sigma, dens, ddens, x);
        for h in [1e-3, 1e-2, 1e-1] {
            assert!(j(f) > j(f + h));
            assert!(j(f) > j(f - h));
        }
    }

    #[test]
    fn corollary_arithmetic() {
        // T0 = 2, t = 1, B(2) - B(1) = 0.7
        let g = TimeGrid::new(1.0, 2.0, 2).unwrap();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let k = Kernel::constant(&g, 1.0).unwrap();
        let s = InsiderState {
            node: 1,
            y_t: -0.2,
            y: 0.5,
        };
        assert!((insider_fraction(&m, &k, &s).unwrap() - 4.5).abs() < 1e-12);
        let s = InsiderState {
            node: 1,
            y_t: 0.5,
            y: 0.5,
        };
        assert_eq!(
            insider_fraction(&m, &k, &s).unwrap(),
            merton_fraction(&m, 1)
        );
    }

    #[test]
    fn insider_routes_agree() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let k = Kernel::ramp(&g).unwrap();
        for rep in 0..20 {
            let p = BrownianPath::sample(&g, SeedSpec::new(2, rep));
            let y = k.signal(&p).unwrap();
            for node in 0..=g.trade_steps() {
                let s = InsiderState::new(node, &y).unwrap();
                let a = insider_fraction(&m, &k, &s).unwrap();
                let b = insider_fraction_from_densities(&m, &k, &s).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn corollary_matches_constant_kernel() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let opt = Strategy::InsiderOptimal(Kernel::constant(&g, 1.0).unwrap());
        let p = BrownianPath::sample(&g, SeedSpec::new(9, 9));
        let a = opt.sample(&m, &p).unwrap();
        let b = Strategy::InsiderCorollary.sample(&m, &p).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn perturb_examples() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let p = BrownianPath::sample(&g, SeedSpec::new(1, 1));
        let base = Strategy::InsiderOptimal(Kernel::constant(&g, 1.0).unwrap());
        let same = Strategy::perturb(base.clone(), Perturbation::Constant(3.0), 0.0);
        assert_eq!(base.sample(&m, &p).unwrap(), same.sample(&m, &p).unwrap());

        let up = Strategy::perturb(Strategy::Merton, Perturbation::Constant(1.0), 0.5);
        assert!(up
            .sample(&m, &p)
            .unwrap()
            .samples()
            .iter()
            .all(|v| (v - 1.5).abs() < 1e-12));
        assert!(up.is_deterministic());
        let drift = Strategy::perturb(
            Strategy::Merton,
            Perturbation::DriftDirection(Kernel::constant(&g, 1.0).unwrap()),
            1.0,
        );
        assert!(!drift.is_deterministic());
        // merton + α/σ is the insider rule
        let a = drift.sample(&m, &p).unwrap();
        let b = base.sample(&m, &p).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn table_length_checked() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let p = BrownianPath::sample(&g, SeedSpec::new(1, 1));
        assert!(Strategy::Table(vec![0.0; 3]).sample(&m, &p).is_err());
        assert!(Strategy::constant(&m, 0.0).sample(&m, &p).is_ok());
    }

    #[test]
    fn adaptedness_wall() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let k = Kernel::constant(&g, 1.0).unwrap();
        let insider = Strategy::InsiderOptimal(k);
        let p = BrownianPath::sample(&g, SeedSpec::new(4, 4));
        let node = 10;
        // Swapping two increments after t keeps Y(t) and Y = B(T0).
        let mut inc: Vec<f64> = (0..64).map(|j| p.increment(j)).collect();
        inc.swap(20, 50);
        let mut values = vec![0.0];
        for d in inc {
            values.push(values.last().unwrap() + d);
        }
        let q = BrownianPath::from_values(&g, values).unwrap();
        let a = insider.sample(&m, &p).unwrap();
        let b = insider.sample(&m, &q).unwrap();
        for j in 0..=node {
            assert!((a.samples()[j] - b.samples()[j]).abs() < 1e-12);
        }
        // Merton ignores the path entirely.
        assert_eq!(
            Strategy::Merton.sample(&m, &p).unwrap(),
            Strategy::Merton.sample(&m, &q).unwrap()
        );
    }

    proptest! {
        #[test]
        fn maximizer_is_argmax(
            excess in -0.5f64..0.5,
            sigma in 0.05f64..1.0,
            dens in 1e-3f64..2.0,
            ddens in -2.0f64..2.0,
            other in -50.0f64..50.0,
        ) {
            let f = pointwise_maximizer(excess, sigma, dens, ddens).unwrap();
            let j = |x| pointwise_objective(excess, sigma, dens, ddens, x);
            // exact gap is σ² p (other - f)² / 2
            let gap = 0.5 * sigma * sigma * dens * (other - f).powi(2);
            let tol = 1e-9 * (j(f).abs() + j(other).abs() + 1.0);
            prop_assert!((j(f) - j(other) - gap).abs() <= tol);
            prop_assert!(j(f) >= j(other) - tol);
        }
    }
}

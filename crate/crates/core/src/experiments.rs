//! Monte Carlo experiments and the analytic values they are checked against.
//!
//! Replication `i` always uses the stream `SeedSpec::new(master_seed, i)`;
//! replications run in parallel and their results are collected in index
//! order before a pairwise reduction. Paired experiments evaluate every arm
//! on the same path.

use rayon::prelude::*;
use serde::Serialize;

use crate::donsker::{information_drift, InsiderState, Kernel};
use crate::error::{Error, Result};
use crate::grid::{BrownianPath, SeedSpec, TimeGrid};
use crate::market::{log_utility, log_wealth, wealth_euler, MarketModel};
use crate::stats::{correlation, mean, pairwise_sum_by, variance_with_se, Estimate};
use crate::strategy::{merton_fraction, Perturbation, Strategy};

/// Runs `f` on the path of every replication, in index order.
pub fn replicate<T, F>(grid: &TimeGrid, n_reps: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&BrownianPath) -> Result<T> + Sync,
{
    (0..n_reps as u64)
        .into_par_iter()
        .map(|i| f(&BrownianPath::sample(grid, SeedSpec::new(master_seed, i))))
        .collect()
}

fn check_reps(n_reps: usize, need: usize) -> Result<()> {
    if n_reps < need {
        return Err(Error::TooFewReplications { need, got: n_reps });
    }
    Ok(())
}

/// Mean and standard error of `ln X(T)` under the exponential scheme.
pub fn estimate_log_utility(
    strategy: &Strategy,
    market: &MarketModel,
    n_reps: usize,
    master_seed: u64,
) -> Result<Estimate> {
    check_reps(n_reps, 2)?;
    let xs = replicate(market.grid(), n_reps, master_seed, |path| {
        log_wealth(market, &strategy.sample(market, path)?, path)
    })?;
    Ok(Estimate::from_samples(&xs))
}

/// Two strategies evaluated on common paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedComparison {
    pub first: Estimate,
    pub second: Estimate,
    /// Per-path `second - first`.
    pub difference: Estimate,
}

pub fn compare_strategies(
    first: &Strategy,
    second: &Strategy,
    market: &MarketModel,
    n_reps: usize,
    master_seed: u64,
) -> Result<PairedComparison> {
    check_reps(n_reps, 2)?;
    let pairs = replicate(market.grid(), n_reps, master_seed, |path| {
        Ok((
            log_wealth(market, &first.sample(market, path)?, path)?,
            log_wealth(market, &second.sample(market, path)?, path)?,
        ))
    })?;
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    Ok(PairedComparison {
        first: Estimate::from_samples(&a),
        second: Estimate::from_samples(&b),
        difference: Estimate::from_samples(&d),
    })
}

/// Continuous-time insider excess utility `½ ln(v_0 / v_T)`.
pub fn excess_utility_analytic(kernel: &Kernel) -> Result<f64> {
    let v0 = kernel.tail_norm(0)?;
    let node = kernel.grid().trade_steps();
    let vt = kernel.tail_norm(node)?;
    if vt <= 0.0 {
        return Err(Error::DegenerateConditioning(vt, node));
    }
    Ok(0.5 * (v0 / vt).ln())
}

/// Expected excess of the discretized insider wealth, `½ Σ_{k<T/dt} ψ_k² dt / v_k`.
/// Differs from [`excess_utility_analytic`] by `O(dt)`.
pub fn excess_utility_discrete(kernel: &Kernel) -> Result<f64> {
    let dt = kernel.grid().dt();
    let n = kernel.grid().trade_steps();
    let v = (0..n)
        .map(|k| kernel.tail_norm(k))
        .collect::<Result<Vec<_>>>()?;
    Ok(0.5 * pairwise_sum_by(n, &|k| kernel.psi(k).powi(2) * dt / v[k]))
}

/// `π(t_k) = a_k + c_k (Y - Y(t_k))` with deterministic `a`, `c`.
struct AffineRule {
    a: Vec<f64>,
    c: Vec<f64>,
    kernel: Option<Kernel>,
}

impl AffineRule {
    fn of(strategy: &Strategy, market: &MarketModel) -> Option<Self> {
        let grid = market.grid();
        let n = grid.trade_steps();
        let zeros = vec![0.0; n + 1];
        let insider = |kernel: Kernel| {
            let c = (0..=n)
                .map(|k| Some(kernel.psi(k) / (market.sigma(k) * kernel.tail_norm(k).ok()?)))
                .collect::<Option<Vec<_>>>()?;
            Some(AffineRule {
                a: (0..=n).map(|k| merton_fraction(market, k)).collect(),
                c,
                kernel: Some(kernel),
            })
        };
        match strategy {
            Strategy::Merton => Some(AffineRule {
                a: (0..=n).map(|k| merton_fraction(market, k)).collect(),
                c: zeros,
                kernel: None,
            }),
            Strategy::Table(v) if v.len() == n + 1 => Some(AffineRule {
                a: v.clone(),
                c: zeros,
                kernel: None,
            }),
            Strategy::Table(_) => None,
            Strategy::InsiderOptimal(kernel) => insider(kernel.clone()),
            Strategy::InsiderCorollary => insider(Kernel::constant(grid, 1.0).ok()?),
            Strategy::Perturbed { base, shape, eps } => {
                let mut rule = AffineRule::of(base, market)?;
                match shape {
                    Perturbation::Constant(g) => rule.a.iter_mut().for_each(|a| *a += eps * g),
                    Perturbation::Nodes(g) if g.len() == n + 1 => {
                        rule.a.iter_mut().zip(g).for_each(|(a, g)| *a += eps * g)
                    }
                    Perturbation::Nodes(_) => return None,
                    Perturbation::DriftDirection(kernel) => {
                        if rule.kernel.as_ref().is_some_and(|k| k != kernel) {
                            return None;
                        }
                        let dir = insider(kernel.clone())?;
                        rule.c
                            .iter_mut()
                            .zip(&dir.c)
                            .for_each(|(c, d)| *c += eps * d);
                        rule.kernel = Some(kernel.clone());
                    }
                }
                Some(rule)
            }
        }
    }
}

/// Exact expectation of the discretized `ln X(T)` for strategies that are
/// affine in `Y - Y(t)` with deterministic coefficients:
/// `Σ {r + (b-r) a - σ² (a² + c² v_k)/2 + σ c ψ_k} dt`.
/// `None` for rules outside that class.
pub fn expected_log_utility(strategy: &Strategy, market: &MarketModel) -> Option<f64> {
    let rule = AffineRule::of(strategy, market)?;
    let dt = market.grid().dt();
    let n = market.grid().trade_steps();
    let (psi, v): (Vec<f64>, Vec<f64>) = match &rule.kernel {
        Some(k) => (0..n)
            .map(|j| Some((k.psi(j), k.tail_norm(j).ok()?)))
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .unzip(),
        None => (vec![0.0; n], vec![0.0; n]),
    };
    Some(pairwise_sum_by(n, &|k| {
        let (r, b, s) = (market.r(k), market.b(k), market.sigma(k));
        let (a, c) = (rule.a[k], rule.c[k]);
        (r + (b - r) * a - 0.5 * s * s * (a * a + c * c * v[k]) + s * c * psi[k]) * dt
    }))
}

/// Drift removed from `B` in [`decomposition_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriftMode {
    /// The information drift of the kernel.
    Information,
    /// Nothing, so `B̃ = B` (control arm).
    Zero,
}

/// Statistics of `B̃(t) = B(t) - ∫_0^t α ds` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// z-statistic of the mean of `B̃(T)` across replications.
    pub mean_z: f64,
    /// Average over replications of `Σ (ΔB̃)² / T`.
    pub qv_ratio: f64,
    /// Sample correlation of `B̃(T)` with `Y`.
    pub corr_y: f64,
    pub n_reps: usize,
}

impl DecompositionReport {
    /// `|mean_z| <= 3`, `|qv_ratio - 1| <= 0.01`, `|corr_y| <= 3/√n`.
    pub fn passes(&self) -> bool {
        self.mean_z.abs() <= 3.0
            && (self.qv_ratio - 1.0).abs() <= 0.01
            && self.corr_y.abs() <= 3.0 / (self.n_reps as f64).sqrt()
    }
}

pub fn decomposition_test(
    kernel: &Kernel,
    n_reps: usize,
    master_seed: u64,
    mode: DriftMode,
) -> Result<DecompositionReport> {
    check_reps(n_reps, 2)?;
    let grid = *kernel.grid();
    let n = grid.trade_steps();
    let dt = grid.dt();
    let rows = replicate(&grid, n_reps, master_seed, |path| {
        let y = kernel.signal(path)?;
        let mut qv = 0.0;
        let mut b_tilde = 0.0;
        for k in 0..n {
            let alpha = match mode {
                DriftMode::Information => information_drift(kernel, &InsiderState::new(k, &y)?)?,
                DriftMode::Zero => 0.0,
            };
            let d = path.increment(k) - alpha * dt;
            b_tilde += d;
            qv += d * d;
        }
        Ok((b_tilde, qv / grid.horizon(), y[grid.n_steps()]))
    })?;
    let ends: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let qv: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let est = Estimate::from_samples(&ends);
    Ok(DecompositionReport {
        mean_z: est.z_score(0.0),
        qv_ratio: mean(&qv),
        corr_y: correlation(&ends, &ys),
        n_reps,
    })
}

/// Paired log-utility estimates of `base + eps · g` over a list of `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub points: Vec<(f64, Estimate)>,
    /// Step used for the finite differences.
    pub step: f64,
    /// Per-path central difference `(U(h) - U(-h)) / 2h`.
    pub slope: Estimate,
    /// Per-path second difference `(U(h) - 2U(0) + U(-h)) / h²`.
    pub curvature: Estimate,
}

impl ScanResult {
    /// Slope within `k` standard errors of zero.
    pub fn slope_flat(&self, k: f64) -> bool {
        self.slope.mean.abs() <= k * self.slope.std_error
    }
}

/// Requires `0` and at least one symmetric pair `±h` in `eps_list`; the
/// smallest such `h` is used for the differences.
pub fn optimality_scan(
    base: &Strategy,
    shape: &Perturbation,
    eps_list: &[f64],
    market: &MarketModel,
    n_reps: usize,
    master_seed: u64,
) -> Result<ScanResult> {
    check_reps(n_reps, 2)?;
    let zero = eps_list
        .iter()
        .position(|e| *e == 0.0)
        .ok_or_else(|| Error::InvalidArgument("eps list must contain 0".into()))?;
    let step = eps_list
        .iter()
        .filter(|e| **e > 0.0 && eps_list.contains(&-**e))
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !step.is_finite() {
        return Err(Error::InvalidArgument(
            "eps list needs a symmetric pair ±h".into(),
        ));
    }
    let plus = eps_list.iter().position(|e| *e == step).unwrap();
    let minus = eps_list.iter().position(|e| *e == -step).unwrap();
    let arms: Vec<Strategy> = eps_list
        .iter()
        .map(|&e| Strategy::perturb(base.clone(), shape.clone(), e))
        .collect();
    let rows = replicate(market.grid(), n_reps, master_seed, |path| {
        arms.iter()
            .map(|s| log_wealth(market, &s.sample(market, path)?, path))
            .collect::<Result<Vec<f64>>>()
    })?;
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let points = eps_list
        .iter()
        .enumerate()
        .map(|(j, &e)| (e, Estimate::from_samples(&column(j))))
        .collect();
    let slopes: Vec<f64> = rows
        .iter()
        .map(|r| (r[plus] - r[minus]) / (2.0 * step))
        .collect();
    let curv: Vec<f64> = rows
        .iter()
        .map(|r| (r[plus] - 2.0 * r[zero] + r[minus]) / (step * step))
        .collect();
    Ok(ScanResult {
        points,
        step,
        slope: Estimate::from_samples(&slopes),
        curvature: Estimate::from_samples(&curv),
    })
}

/// Gap between the Euler and exponential schemes at one grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementLevel {
    pub n_steps: usize,
    /// `E|ln X_euler(T) - ln X_exp(T)|`.
    pub mean_abs_gap: Estimate,
    /// `E[ln X_euler(T) - ln X_exp(T)]`.
    pub mean_gap: Estimate,
}

/// Compares the two wealth schemes on nested grids. Paths are sampled on
/// `fine` and coarsened by each factor, so every level sees the same
/// driving Brownian motion. `setup` builds the market and strategy for a grid.
pub fn scheme_refinement<F>(
    fine: &TimeGrid,
    factors: &[usize],
    n_reps: usize,
    master_seed: u64,
    setup: F,
) -> Result<Vec<RefinementLevel>>
where
    F: Fn(&TimeGrid) -> Result<(MarketModel, Strategy)>,
{
    check_reps(n_reps, 2)?;
    let models = factors
        .iter()
        .map(|&f| setup(&fine.coarsen(f)?))
        .collect::<Result<Vec<_>>>()?;
    let rows = replicate(fine, n_reps, master_seed, |path| {
        factors
            .iter()
            .zip(&models)
            .map(|(&f, (market, strategy))| {
                let coarse = path.coarsen(f)?;
                let pi = strategy.sample(market, &coarse)?;
                let euler = log_utility(&wealth_euler(market, &pi, &coarse)?)?;
                Ok(euler - log_wealth(market, &pi, &coarse)?)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(factors
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let gaps: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let abs: Vec<f64> = gaps.iter().map(|g| g.abs()).collect();
            RefinementLevel {
                n_steps: fine.n_steps() / f,
                mean_abs_gap: Estimate::from_samples(&abs),
                mean_gap: Estimate::from_samples(&gaps),
            }
        })
        .collect())
}

/// Empirical law of `Y` given the path up to `node`, from `n_resamples`
/// redraws of the increments after `node`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailLaw {
    pub conditional_mean: f64,
    pub conditional_variance: f64,
    pub mean: Estimate,
    pub variance: f64,
    pub variance_se: f64,
}

impl TailLaw {
    /// Mean and variance both within `k` standard errors of the closed form.
    pub fn matches(&self, k: f64) -> bool {
        (self.mean.mean - self.conditional_mean).abs() <= k * self.mean.std_error
            && (self.variance - self.conditional_variance).abs() <= k * self.variance_se
    }
}

pub fn tail_resampled_law(
    kernel: &Kernel,
    path: &BrownianPath,
    node: usize,
    n_resamples: usize,
    master_seed: u64,
) -> Result<TailLaw> {
    check_reps(n_resamples, 2)?;
    let state = kernel.state(path, node)?;
    let law = kernel.conditional_law(&state)?;
    let ys = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let q = path.resample_tail(node, SeedSpec::new(master_seed, i))?;
            Ok(*kernel.signal(&q)?.last().unwrap())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (variance, variance_se) = variance_with_se(&ys);
    Ok(TailLaw {
        conditional_mean: law.mean,
        conditional_variance: law.variance,
        mean: Estimate::from_samples(&ys),
        variance,
        variance_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 2.0, 64).unwrap()
    }

    #[test]
    fn zero_fraction_is_deterministic() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let e = estimate_log_utility(&Strategy::constant(&m, 0.0), &m, 100, 1).unwrap();
        assert!((e.mean - 0.03).abs() < 1e-14);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn needs_two_reps() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        assert!(estimate_log_utility(&Strategy::Merton, &m, 1, 1).is_err());
    }

    #[test]
    fn excess_analytic_constant_kernel() {
        let g = TimeGrid::new(1.0, 2.0, 1024).unwrap();
        let k = Kernel::constant(&g, 1.0).unwrap();
        let e = excess_utility_analytic(&k).unwrap();
        assert!((e - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!((e - 0.3465736).abs() < 1e-7);
    }

    #[test]
    fn excess_vanishes_with_horizon() {
        let mut last = f64::INFINITY;
        for n in [64, 256, 1024, 4096] {
            let g = TimeGrid::new(2.0 / n as f64, 2.0, n).unwrap();
            let e = excess_utility_analytic(&Kernel::constant(&g, 1.0).unwrap()).unwrap();
            assert!(e < last && e > 0.0);
            last = e;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn discrete_excess_is_first_order_close() {
        let mut prev = None;
        for n in [256, 512, 1024] {
            let g = TimeGrid::new(1.0, 2.0, n).unwrap();
            let k = Kernel::constant(&g, 1.0).unwrap();
            let gap = excess_utility_analytic(&k).unwrap() - excess_utility_discrete(&k).unwrap();
            assert!(gap > 0.0);
            if let Some(p) = prev {
                let ratio: f64 = p / gap;
                assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
            }
            prev = Some(gap);
        }
    }

    #[test]
    fn expected_log_utility_closed_forms() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let merton = expected_log_utility(&Strategy::Merton, &m).unwrap();
        // r + (b - r)² / (2σ²) = 0.03 + 0.0016 / 0.08
        assert!((merton - 0.05).abs() < 1e-14, "{merton}");
        let k = Kernel::constant(&g, 1.0).unwrap();
        let ins = expected_log_utility(&Strategy::InsiderOptimal(k.clone()), &m).unwrap();
        assert!((ins - merton - excess_utility_discrete(&k).unwrap()).abs() < 1e-14);
        let cor = expected_log_utility(&Strategy::InsiderCorollary, &m).unwrap();
        assert!((cor - ins).abs() < 1e-14);
        // U(eps) = U(0) - eps² Σ σ² g² dt / 2 for a constant direction
        let pert = Strategy::perturb(
            Strategy::InsiderOptimal(k.clone()),
            Perturbation::Constant(1.0),
            0.1,
        );
        let p = expected_log_utility(&pert, &m).unwrap();
        assert!((ins - p - 0.5 * 0.01 * 0.04).abs() < 1e-14);
        // merton + α/σ is the insider rule
        let via = Strategy::perturb(Strategy::Merton, Perturbation::DriftDirection(k), 1.0);
        assert!((expected_log_utility(&via, &m).unwrap() - ins).abs() < 1e-14);
    }

    #[test]
    fn degenerate_scan_direction() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let k = Kernel::constant(&g, 1.0).unwrap();
        let scan = optimality_scan(
            &Strategy::InsiderOptimal(k),
            &Perturbation::Constant(0.0),
            &[-0.1, 0.0, 0.1],
            &m,
            50,
            3,
        )
        .unwrap();
        let first = scan.points[0].1;
        assert!(scan.points.iter().all(|(_, e)| *e == first));
        assert_eq!(scan.slope.mean, 0.0);
    }

    #[test]
    fn scan_argument_errors() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let s = Strategy::Merton;
        let c = Perturbation::Constant(1.0);
        assert!(optimality_scan(&s, &c, &[0.1, -0.1], &m, 10, 0).is_err());
        assert!(optimality_scan(&s, &c, &[0.0, 0.1, -0.2], &m, 10, 0).is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let g = grid();
        let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
        let s = Strategy::InsiderOptimal(Kernel::ramp(&g).unwrap());
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_log_utility(&s, &m, 3000, 17).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}

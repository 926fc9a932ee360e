use insider_core::stats::{mean, variance_with_se};
use insider_core::*;

fn grid() -> TimeGrid {
    TimeGrid::new(1.0, 2.0, 64).unwrap()
}

#[test]
fn terminal_value_has_brownian_law() {
    let g = grid();
    let n = 100_000;
    let ends: Vec<f64> = (0..n)
        .map(|i| BrownianPath::sample(&g, SeedSpec::new(1, i)).terminal())
        .collect();
    // B(T0) ~ N(0, T0)
    assert!(mean(&ends).abs() <= 3.0 * (2.0 / n as f64).sqrt());
    let (var, se) = variance_with_se(&ends);
    assert!((var - 2.0).abs() <= 3.0 * se, "{var} ± {se}");
}

#[test]
fn covariance_is_min_of_times() {
    let g = grid();
    let n = 50_000;
    let (s, t) = (16, 48);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let p = BrownianPath::sample(&g, SeedSpec::new(2, i));
            (p.value(s), p.value(t))
        })
        .collect();
    let prods: Vec<f64> = pairs.iter().map(|(a, b)| a * b).collect();
    let est = Estimate::from_samples(&prods);
    assert!(est.z_score(g.time(s)).abs() <= 3.0, "{est:?}");
}

#[test]
fn increments_are_iid_normal() {
    let g = grid();
    let dt = g.dt();
    let z: Vec<f64> = (0..2000)
        .flat_map(|i| {
            let p = BrownianPath::sample(&g, SeedSpec::new(3, i));
            (0..g.n_steps())
                .map(move |k| p.increment(k) / dt.sqrt())
                .collect::<Vec<_>>()
        })
        .collect();
    let est = Estimate::from_samples(&z);
    assert!(est.z_score(0.0).abs() <= 3.0);
    let (var, se) = variance_with_se(&z);
    assert!((var - 1.0).abs() <= 3.0 * se);
    // lag-one correlation
    let lag: Vec<f64> = z.windows(2).map(|w| w[0] * w[1]).collect();
    assert!(Estimate::from_samples(&lag).z_score(0.0).abs() <= 3.0);
}

#[test]
fn replication_order_does_not_matter() {
    let g = grid();
    let forward: Vec<BrownianPath> = (0..50)
        .map(|i| BrownianPath::sample(&g, SeedSpec::new(9, i)))
        .collect();
    for i in (0..50).rev() {
        assert_eq!(
            BrownianPath::sample(&g, SeedSpec::new(9, i)),
            forward[i as usize]
        );
    }
}

#[test]
fn information_drift_moments() {
    let g = TimeGrid::new(1.0, 2.0, 256).unwrap();
    let n = 100_000;
    for kernel in [
        Kernel::constant(&g, 1.0).unwrap(),
        Kernel::ramp(&g).unwrap(),
    ] {
        let node = 100;
        let alphas: Vec<f64> = (0..n)
            .map(|i| {
                let p = BrownianPath::sample(&g, SeedSpec::new(4, i));
                information_drift(&kernel, &kernel.state(&p, node).unwrap()).unwrap()
            })
            .collect();
        let first = Estimate::from_samples(&alphas);
        assert!(first.z_score(0.0).abs() <= 3.0);
        let sq: Vec<f64> = alphas.iter().map(|a| a * a).collect();
        let target = kernel.psi(node).powi(2) / kernel.tail_norm(node).unwrap();
        let second = Estimate::from_samples(&sq);
        assert!(
            second.z_score(target).abs() <= 3.0,
            "{second:?} vs {target}"
        );
    }
}

#[test]
fn integrated_drift_energy_is_log_variance_ratio() {
    // ∫_0^T ψ²/v dt = ln(v_0 / v_T) for piecewise-constant ψ
    let g = TimeGrid::new(1.0, 2.0, 4096).unwrap();
    let k = Kernel::ramp(&g).unwrap();
    let energy = 2.0 * excess_utility_discrete(&k).unwrap();
    let exact = 2.0 * excess_utility_analytic(&k).unwrap();
    assert!((energy - exact).abs() < 2e-3 * exact);
}

#[test]
fn derivative_is_psi_times_mean_derivative() {
    let g = TimeGrid::new(1.0, 2.0, 64).unwrap();
    let k = Kernel::ramp(&g).unwrap();
    let p = BrownianPath::sample(&g, SeedSpec::new(6, 0));
    for node in [3, 17, 32] {
        let s = k.state(&p, node).unwrap();
        let h = 1e-5;
        for y in [-1.3, -0.2, 0.4, 2.0] {
            let d = conditional_delta_derivative(&k, &s, y).unwrap();
            let up = conditional_density(&k, &s, y + h).unwrap();
            let down = conditional_density(&k, &s, y - h).unwrap();
            // The closed form is ψ times the derivative in the conditional
            // mean, i.e. minus ψ times the derivative in y.
            let fd = -k.psi(node) * (up - down) / (2.0 * h);
            assert!((d - fd).abs() <= 1e-6 * d.abs(), "{d} vs {fd}");
        }
    }
}

#[test]
fn euler_gap_shrinks_at_strong_order_one_half() {
    let fine = TimeGrid::new(1.0, 2.0, 1024).unwrap();
    for insider in [false, true] {
        let levels = scheme_refinement(&fine, &[4, 2, 1], 5_000, 77, |g| {
            let m = MarketModel::constant(g, 0.03, 0.07, 0.2)?;
            let s = if insider {
                Strategy::InsiderOptimal(Kernel::constant(g, 1.0)?)
            } else {
                Strategy::Merton
            };
            Ok((m, s))
        })
        .unwrap();
        for w in levels.windows(2) {
            let ratio = w[0].mean_abs_gap.mean / w[1].mean_abs_gap.mean;
            assert!((1.25..=1.6).contains(&ratio), "ratio {ratio}");
        }
    }
}

#[test]
fn merton_scheme_gap_matches_leading_term() {
    // E|½c² Σ (dt - ΔB²)| = c² √(T dt / 2) √(2/π) for constant c = πσ
    let fine = TimeGrid::new(1.0, 2.0, 1024).unwrap();
    let levels = scheme_refinement(&fine, &[1], 20_000, 78, |g| {
        Ok((MarketModel::constant(g, 0.03, 0.07, 0.2)?, Strategy::Merton))
    })
    .unwrap();
    let c2 = 0.04;
    let predicted = c2 * (fine.dt() / 2.0).sqrt() * (2.0 / std::f64::consts::PI).sqrt();
    let got = levels[0].mean_abs_gap.mean;
    assert!(
        (got - predicted).abs() < 0.05 * predicted,
        "{got} vs {predicted}"
    );
}

#[test]
fn optimality_scan_from_merton_has_positive_slope() {
    let g = TimeGrid::new(1.0, 2.0, 256).unwrap();
    let m = MarketModel::constant(&g, 0.03, 0.07, 0.2).unwrap();
    let k = Kernel::constant(&g, 1.0).unwrap();
    let scan = optimality_scan(
        &Strategy::Merton,
        &Perturbation::DriftDirection(k.clone()),
        &[-0.1, 0.0, 0.1],
        &m,
        20_000,
        12,
    )
    .unwrap();
    // E[slope] = Σ ψ²/v dt = 2 × discrete excess
    let expected = 2.0 * excess_utility_discrete(&k).unwrap();
    assert!(scan.slope.mean > 0.0);
    assert!(scan.slope.z_score(expected).abs() <= 3.0);
}

#[test]
fn insider_dominates_merton_for_ramp_kernel() {
    let g = TimeGrid::new(1.0, 2.0, 256).unwrap();
    let m = MarketModel::constant(&g, 0.01, 0.05, 0.1).unwrap();
    let k = Kernel::ramp(&g).unwrap();
    let cmp = compare_strategies(
        &Strategy::Merton,
        &Strategy::InsiderOptimal(k.clone()),
        &m,
        50_000,
        5,
    )
    .unwrap();
    let expected = excess_utility_discrete(&k).unwrap();
    assert!(cmp.difference.mean > 0.0);
    assert!(cmp.difference.z_score(expected).abs() <= 3.0);
    let e = expected_log_utility(&Strategy::InsiderOptimal(k), &m).unwrap();
    assert!(cmp.second.z_score(e).abs() <= 3.0);
}

#[test]
fn decomposition_control_arm_keeps_correlation() {
    let g = TimeGrid::new(1.0, 2.0, 256).unwrap();
    let k = Kernel::constant(&g, 1.0).unwrap();
    let rep = decomposition_test(&k, 10_000, 21, DriftMode::Zero).unwrap();
    assert!(rep.mean_z.abs() <= 3.0);
    assert!((rep.qv_ratio - 1.0).abs() <= 0.01);
    // corr(B(1), B(2)) = 1/√2
    assert!((rep.corr_y - 0.5f64.sqrt()).abs() < 0.03);
    assert!(!rep.passes());
}

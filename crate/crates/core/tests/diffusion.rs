use robust_duality::diffusion::{
    admissibility_audit, default_suite, density_moment_analytic, density_moment_check, dual_value, dual_value_mc,
    duality_identity_check, girsanov_check, girsanov_density, log_moment_bound, martingale_separation_test,
    merton_value, robust_dual_value, robust_primal_value, simulate_in, simulate_paths, Generator, MembershipMode,
    MomentMc, SimulationSpec, StrategySpec, ThetaValidation, UncertaintySet,
};
use robust_duality::numerics::grid::log_grid;
use robust_duality::UtilityFunction;

const SEED: u64 = 20240601;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn two_generators() -> UncertaintySet {
    UncertaintySet::new(vec![Generator::scalar(0.05, 0.04), Generator::scalar(0.10, 0.09)], 1.0).unwrap()
}

/// `b^2 / c` along the segment between the two scalar generators, on a dense grid.
fn min_risk_on_segment(n: usize) -> (f64, f64) {
    (0..=n)
        .map(|i| {
            let w = i as f64 / n as f64;
            let (b, c) = (0.05 + 0.05 * w, 0.04 + 0.05 * w);
            (b * b / c, w)
        })
        .fold((f64::INFINITY, 0.0), |a, v| if v.0 < a.0 { v } else { a })
}

#[test]
fn ellipticity_certificates() {
    let cert = two_generators().require_elliptic().unwrap();
    assert!((cert.lambda_min - 0.04).abs() < 1e-14);
    // 1 + 0.05 + 0.04 + 1 / 0.04 from the first generator.
    assert!((cert.kappa - 26.09).abs() < 1e-10);

    let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let theta = UncertaintySet::new(vec![Generator::new(vec![0.0, 0.0], id.clone())], 1.0).unwrap();
    assert_eq!(theta.require_elliptic().unwrap().diagonal_lower_bound, id);

    let flat = UncertaintySet::new(vec![Generator::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]])], 1.0).unwrap();
    assert!(matches!(flat.validate(), ThetaValidation::Violated { generator: 0, .. }));
    assert!(flat.require_elliptic().is_err());
}

#[test]
fn kappa_grows_when_a_generator_is_added() {
    let theta = two_generators();
    let wider = theta.with_generator(Generator::scalar(0.0, 0.01)).unwrap();
    assert!(wider.kappa() >= theta.kappa());
    assert!((wider.kappa() - (1.0 + 0.01 + 100.0)).abs() < 1e-9);
}

#[test]
fn driftless_increments_have_the_right_moments() {
    let batch = simulate_paths(&SimulationSpec::scalar(0.0, 0.04, 1.0, 1, 100_000, SEED)).unwrap();
    let inc: Vec<f64> = (0..batch.paths).map(|m| batch.terminal_change(m)[0]).collect();
    let (mean, _) = mean_se(&inc);
    assert!(mean.abs() <= 4.0 * (0.04f64 / 1e5).sqrt(), "{mean}");
    let var = inc.iter().map(|x| x * x).sum::<f64>() / inc.len() as f64;
    // Var of the sample second moment is 2 c^2 / M.
    assert!((var - 0.04).abs() <= 4.0 * (2.0 * 0.04f64.powi(2) / 1e5).sqrt(), "{var}");
}

#[test]
fn drift_accumulates_over_steps() {
    let batch = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 100, 100_000, SEED)).unwrap();
    let change: Vec<f64> = (0..batch.paths).map(|m| batch.terminal_change(m)[0]).collect();
    let (mean, se) = mean_se(&change);
    assert!((mean - 0.05).abs() <= 4.0 * se, "{mean} +- {se}");
}

#[test]
fn same_seed_gives_identical_paths() {
    let spec = SimulationSpec::scalar(0.05, 0.04, 1.0, 10, 5000, SEED);
    let a = simulate_paths(&spec).unwrap();
    let b = simulate_paths(&spec).unwrap();
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn membership_is_enforced_or_flagged() {
    let theta = two_generators();
    let inside = SimulationSpec::scalar(0.075, 0.065, 1.0, 1, 10, SEED);
    assert!(!simulate_in(&theta, &inside, MembershipMode::Strict).unwrap().outside_hull);
    let outside = SimulationSpec::scalar(0.05, 0.09, 1.0, 1, 10, SEED);
    assert!(simulate_in(&theta, &outside, MembershipMode::Strict).is_err());
    assert!(simulate_in(&theta, &outside, MembershipMode::Exploratory).unwrap().outside_hull);
}

#[test]
fn girsanov_density_moments() {
    let zero = simulate_paths(&SimulationSpec::scalar(0.0, 0.04, 1.0, 10, 1000, SEED)).unwrap();
    assert!(girsanov_density(&zero).unwrap().dq_dp.iter().all(|&z| z == 1.0));

    let batch = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 10, 100_000, SEED)).unwrap();
    let z = girsanov_density(&batch).unwrap();
    let (m1, se1) = mean_se(&z.dq_dp);
    assert!((m1 - 1.0).abs() <= 4.0 * se1);
    let logs: Vec<f64> = z.dq_dp.iter().map(|v| v.ln()).collect();
    let (ml, sel) = mean_se(&logs);
    assert!((ml + 0.03125).abs() <= 4.0 * sel, "{ml}");
    let squares: Vec<f64> = z.dq_dp.iter().map(|v| v * v).collect();
    let (m2, se2) = mean_se(&squares);
    assert!((m2 - 0.0625f64.exp()).abs() <= 4.0 * se2, "{m2}");

    let r = girsanov_check(&batch, 4.0).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn density_moments_against_the_bound() {
    let theta = two_generators();
    let c = vec![vec![0.04]];
    assert_eq!(density_moment_analytic(1.0, &[0.05], &c, 1.0).unwrap(), 1.0);
    assert!((density_moment_analytic(2.0, &[0.05], &c, 1.0).unwrap() - 0.0625f64.exp()).abs() < 1e-14);
    for delta in [1.5, 2.0, 3.0] {
        for k in 0..2 {
            let r = density_moment_check(delta, &theta, k, None, 4.0).unwrap();
            assert!(r.log_analytic < r.log_bound);
            assert_eq!(r.log_bound, log_moment_bound(delta, 1.0, 1, 26.09f64));
        }
    }
    let r = density_moment_check(2.0, &theta, 0, Some(MomentMc { paths: 100_000, seed: SEED }), 4.0).unwrap();
    assert_eq!(r.mc_within, Some(true), "{r:?}");
}

#[test]
fn merton_closed_forms() {
    let c = vec![vec![0.04]];
    let log = UtilityFunction::log();
    assert!((merton_value(&log, 1.0, &[0.05], &c, 1.0).unwrap() - 0.03125).abs() < 1e-15);
    assert!((merton_value(&log, 3.0, &[0.05], &c, 1.0).unwrap() - (3f64.ln() + 0.03125)).abs() < 1e-15);
    let pow = UtilityFunction::power(0.5).unwrap();
    // 2 exp(p r / (2 (1 - p))) with r = 1/16.
    let closed = 2.0 * 0.03125f64.exp();
    assert!((merton_value(&pow, 1.0, &[0.05], &c, 1.0).unwrap() - closed).abs() < 1e-14);
}

#[test]
fn power_optimum_matches_a_strategy_search() {
    let batch = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 1, 100_000, SEED)).unwrap();
    let closed = merton_value(&UtilityFunction::power(0.5).unwrap(), 1.0, &[0.05], &[vec![0.04]], 1.0).unwrap();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=40 {
        let pi = 0.125 * i as f64;
        let gains = StrategySpec::proportional("pi", vec![pi], 1.0).terminal_gains(&batch).unwrap();
        let utils: Vec<f64> = gains.iter().map(|g| 2.0 * (1.0 + g).sqrt()).collect();
        let (m, se) = mean_se(&utils);
        if m > best.0 {
            best = (m, se, pi);
        }
    }
    // The optimal fraction is b / ((1 - p) c) = 2.5.
    assert!((best.0 - closed).abs() <= 4.0 * best.1, "{best:?} vs {closed}");
    assert!((best.2 - 2.5).abs() <= 0.5, "{best:?}");
}

#[test]
fn robust_values_over_the_hull() {
    let log = UtilityFunction::log();
    let single = UncertaintySet::new(vec![Generator::scalar(0.05, 0.04)], 1.0).unwrap();
    let r = robust_primal_value(&log, 1.0, &single).unwrap();
    assert!((r.value - merton_value(&log, 1.0, &[0.05], &[vec![0.04]], 1.0).unwrap()).abs() < 1e-14);

    let theta = two_generators();
    let r = robust_primal_value(&log, 1.0, &theta).unwrap();
    let (risk, w) = min_risk_on_segment(10_000);
    assert!((r.value - 0.5 * risk).abs() < 1e-10, "{} vs {}", r.value, 0.5 * risk);
    assert!((r.minimiser.weights[1] - w).abs() < 1e-4);
    assert!((r.minimiser.b[0] - 0.05).abs() < 1e-6 && (r.minimiser.c[0][0] - 0.04).abs() < 1e-6);

    let with_zero = theta.with_generator(Generator::scalar(0.0, 0.04)).unwrap();
    let r = robust_primal_value(&log, 2.0, &with_zero).unwrap();
    assert!((r.value - 2f64.ln()).abs() < 1e-10);
}

#[test]
fn dual_values() {
    let log = UtilityFunction::log();
    let c = vec![vec![0.04]];
    assert!((dual_value(&log, 1.0, &[0.05], &c, 1.0).unwrap() - (-1.0 + 0.03125)).abs() < 1e-15);
    let (risk, _) = min_risk_on_segment(10_000);
    let r = robust_dual_value(&log, 1.0, &two_generators()).unwrap();
    assert!((r.value - (-1.0 + 0.5 * risk)).abs() < 1e-10);

    let pow = UtilityFunction::power(0.5).unwrap();
    let exact = dual_value(&pow, 0.7, &[0.05], &c, 1.0).unwrap();
    let mc = dual_value_mc(&pow, 0.7, &[0.05], &c, 1.0, 100_000, SEED).unwrap();
    assert!((mc.mean - exact).abs() <= 4.0 * mc.se, "{mc:?} vs {exact}");
}

#[test]
fn diffusion_duality_identity() {
    let ys = log_grid(1e-3, 1e3, 121).unwrap();
    let pow = UtilityFunction::power(0.5).unwrap();
    let single = UncertaintySet::new(vec![Generator::scalar(0.05, 0.04)], 1.0).unwrap();
    assert!(duality_identity_check(&pow, 1.0, &single, &ys).unwrap().residual <= 1e-6);

    let theta = two_generators();
    let log = UtilityFunction::log();
    let r1 = duality_identity_check(&log, 1.0, &theta, &ys).unwrap();
    let r5 = duality_identity_check(&log, 5.0, &theta, &ys).unwrap();
    assert!(r1.residual <= 1e-6 && r5.residual <= 1e-6);
    assert!((r1.residual - r5.residual).abs() <= 1e-6);
    assert!(r1.minimiser_distance <= 1e-4, "{r1:?}");
}

#[test]
fn martingale_separation() {
    let null = simulate_paths(&SimulationSpec::scalar(0.0, 0.04, 1.0, 10, 100_000, SEED)).unwrap();
    let r = martingale_separation_test(&null, &default_suite(1, 10), 4.0).unwrap();
    assert!(r.driftless_batch && r.all_consistent(), "{r:?}");

    let drift = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 10, 100_000, SEED)).unwrap();
    let r = martingale_separation_test(&drift, &[StrategySpec::holdings("unit", vec![1.0], 1.0)], 4.0).unwrap();
    assert!(r.any_rejects() && r.rows[0].z > 4.0);
}

#[test]
fn admissibility_examples() {
    let batch = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 10, 10_000, SEED)).unwrap();
    let zero = admissibility_audit(&StrategySpec::holdings("zero", vec![0.0], 0.0), &batch).unwrap();
    assert!(zero.admissible && zero.violating_points == 0);
    let prop = admissibility_audit(&StrategySpec::proportional("prop", vec![2.5], 1.0), &batch).unwrap();
    assert!(prop.admissible && prop.min_gain > -1.0);
    let lev = admissibility_audit(&StrategySpec::holdings("lev", vec![1e3], 1.0), &batch).unwrap();
    assert!(!lev.admissible && lev.violating_paths > 0 && lev.min_gain < -1.0);
}

#[test]
fn optimal_wealth_stays_uniformly_integrable_in_mean() {
    // Cauchy-Schwarz under the driftless measure Q:
    // E_P[X^0.5] = E_Q[X^0.5 dP/dQ] <= sqrt(E_Q[X]) sqrt(E_Q[(dP/dQ)^2]).
    let batch = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 10, 100_000, SEED)).unwrap();
    let gains = StrategySpec::proportional("opt", vec![2.5], 1.0).terminal_gains(&batch).unwrap();
    let roots: Vec<f64> = gains.iter().map(|g| (1.0 + g).sqrt()).collect();
    let (m, se) = mean_se(&roots);
    let bound = (density_moment_analytic(2.0, &[0.05], &[vec![0.04]], 1.0).unwrap()).sqrt();
    assert!(m <= bound + 4.0 * se, "{m} vs {bound}");
}

use robust_duality::numerics::grid::log_grid;
use robust_duality::{conjugate_bound_v1, BoundKind, ConjugatePair, ExtReal, ShiftedFamily, UtilityFunction};

/// `sup_x [f(x) - x y]` over a dense grid on `[0, hi]`, refined around the best point.
fn grid_sup<F: Fn(f64) -> f64>(f: F, y: f64, hi: f64) -> f64 {
    let n = 200_000;
    let h = hi / n as f64;
    let (mut best_x, mut best) = (0.0, f(0.0));
    for i in 1..=n {
        let x = i as f64 * h;
        let v = f(x) - x * y;
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let lo = (best_x - h).max(0.0);
    let step = 2.0 * h / 20_000.0;
    for i in 0..=20_000 {
        let x = lo + i as f64 * step;
        best = best.max(f(x) - x * y);
    }
    best
}

fn grid_inf<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (lo.ln(), hi.ln());
    (0..=n).map(|i| f((a + (b - a) * i as f64 / n as f64).exp())).fold(f64::INFINITY, f64::min)
}

#[test]
fn utility_values() {
    assert_eq!(UtilityFunction::log().eval(1.0).unwrap(), ExtReal::Finite(0.0));
    assert_eq!(UtilityFunction::power(0.5).unwrap().eval(4.0).unwrap(), ExtReal::Finite(4.0));
    assert_eq!(UtilityFunction::log().eval(0.0).unwrap(), ExtReal::NegInf);
    assert_eq!(UtilityFunction::power(-0.5).unwrap().eval(0.0).unwrap(), ExtReal::NegInf);
    assert!(UtilityFunction::power(0.5).unwrap().eval(0.0).unwrap().is_finite());
    assert!(UtilityFunction::exponential(1.0).unwrap().eval(0.0).unwrap().is_finite());
}

#[test]
fn vanishing_average_slope() {
    for u in [UtilityFunction::log(), UtilityFunction::power(0.5).unwrap(), UtilityFunction::power(0.9).unwrap()] {
        let ratios: Vec<f64> = (2..=8).map(|k| u.eval_extended(10f64.powi(k)).to_f64() / 10f64.powi(k)).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{}: {ratios:?}", u.label());
        assert!(*ratios.last().unwrap() < 0.2, "{}", u.label());
    }
}

#[test]
fn conjugate_values_against_grid_suprema() {
    let log = ConjugatePair::new(UtilityFunction::log());
    let v = log.eval(1.0).unwrap().to_f64();
    assert!((v + 1.0).abs() < 1e-12);
    assert!((grid_sup(|x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }, 1.0, 20.0) - v).abs() < 1e-8);

    let pow = ConjugatePair::new(UtilityFunction::power(0.5).unwrap());
    let v = pow.eval(0.5).unwrap().to_f64();
    // sup 2 sqrt(x) - x / 2 is attained at x = 4.
    assert!((v - 2.0).abs() < 1e-12);
    assert!((grid_sup(|x| 2.0 * x.sqrt(), 0.5, 40.0) - v).abs() < 1e-8);

    for u in [UtilityFunction::log(), UtilityFunction::exponential(1.0).unwrap()] {
        assert_eq!(ConjugatePair::new(u).eval(-1.0).unwrap(), ExtReal::PosInf);
    }
}

#[test]
fn shifted_values() {
    let log = ConjugatePair::new(UtilityFunction::log());
    let v1 = ShiftedFamily::new(log.clone(), 1).unwrap();
    let a = v1.conjugate(0.5).unwrap().to_f64();
    assert!((a - (2f64.ln() - 0.5)).abs() < 1e-12);
    assert!((grid_sup(|x| (x + 1.0).ln(), 0.5, 20.0) - a).abs() < 1e-8);
    assert_eq!(v1.conjugate(2.0).unwrap().to_f64(), 0.0);

    let pow = ShiftedFamily::new(ConjugatePair::new(UtilityFunction::power(0.5).unwrap()), 1).unwrap();
    let b = pow.conjugate(0.25).unwrap().to_f64();
    assert!((b - 4.25).abs() < 1e-12);
    assert!((grid_sup(|x| 2.0 * (x + 1.0).sqrt(), 0.25, 100.0) - b).abs() < 1e-8);
}

#[test]
fn v1_bound_values() {
    assert_eq!(conjugate_bound_v1(BoundKind::Log, 1.0).unwrap(), 0.0);
    let half = conjugate_bound_v1(BoundKind::Log, 0.5).unwrap();
    assert!((half - (2f64.ln() - 0.5)).abs() < 1e-15);
    let v1 = ShiftedFamily::new(ConjugatePair::new(UtilityFunction::log()), 1).unwrap();
    assert!((v1.conjugate(0.5).unwrap().to_f64() - half).abs() < 1e-12);
    assert!((conjugate_bound_v1(BoundKind::Power { p: 0.5 }, 1.0).unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn biconjugate_examples() {
    let cases = [
        (UtilityFunction::log(), 1.0, 1e-8),
        (UtilityFunction::power(0.5).unwrap(), 1.0, 1e-8),
        (UtilityFunction::exponential(1.0).unwrap(), 2.0, 1e-6),
    ];
    for (u, x, tol) in cases {
        let pair = ConjugatePair::new(u.clone());
        let inf = grid_inf(|y| pair.eval(y).unwrap().to_f64() + x * y, 1e-6, 1e6);
        assert!((inf - u.eval_extended(x).to_f64()).abs() < tol, "{}: {inf} vs {}", u.label(), u.eval_extended(x).to_f64());
    }
}

#[test]
fn envelope_slope_matches_maximiser() {
    for u in [UtilityFunction::log(), UtilityFunction::power(0.5).unwrap(), UtilityFunction::power(-1.0).unwrap()] {
        let pair = ConjugatePair::numeric(u.clone());
        for y in [0.1, 0.5, 1.0, 3.0] {
            let h = 1e-5 * y;
            let slope = (pair.eval(y + h).unwrap().to_f64() - pair.eval(y - h).unwrap().to_f64()) / (2.0 * h);
            let x_hat = pair.maximiser(y).unwrap().unwrap();
            assert!((slope + x_hat).abs() < 1e-4 * x_hat.max(1.0), "{} y={y}: {slope} vs -{x_hat}", u.label());
        }
    }
}

#[test]
fn piecewise_linear_conjugate_is_exact() {
    // Knots at 0, 1, 3 with slopes 2, 1, 0.25 and U(0) = -1.
    let u = UtilityFunction::piecewise_linear(vec![0.0, 1.0, 3.0], vec![2.0, 1.0, 0.25], -1.0).unwrap();
    let pair = ConjugatePair::new(u.clone());
    let knots = [(0.0, -1.0), (1.0, 1.0), (3.0, 3.0)];
    for y in log_grid(0.25, 10.0, 60).unwrap() {
        let exact = knots.iter().map(|(s, v)| v - s * y).fold(f64::NEG_INFINITY, f64::max);
        assert!((pair.eval(y).unwrap().to_f64() - exact).abs() < 1e-12, "y={y}");
        assert!((grid_sup(|x| u.eval_extended(x).to_f64(), y, 50.0) - exact).abs() < 1e-6);
    }
    assert_eq!(pair.eval(0.2).unwrap(), ExtReal::PosInf);
}

#[test]
fn conjugate_is_nonincreasing_and_convex_on_grids() {
    let ys = log_grid(1e-4, 1e4, 200).unwrap();
    for u in [
        UtilityFunction::log(),
        UtilityFunction::power(0.3).unwrap(),
        UtilityFunction::power(-0.5).unwrap(),
        UtilityFunction::exponential(2.0).unwrap(),
    ] {
        let pair = ConjugatePair::new(u.clone());
        let v: Vec<f64> = ys.iter().map(|&y| pair.eval(y).unwrap().to_f64()).collect();
        for i in 1..ys.len() - 1 {
            assert!(v[i + 1] <= v[i] + 1e-12 * v[i].abs().max(1.0), "{}", u.label());
            // Convexity on an uneven grid: the middle value lies under the chord.
            let t = (ys[i] - ys[i - 1]) / (ys[i + 1] - ys[i - 1]);
            let chord = (1.0 - t) * v[i - 1] + t * v[i + 1];
            assert!(v[i] <= chord + 1e-10 * chord.abs().max(1.0), "{} at {}", u.label(), ys[i]);
        }
    }
}

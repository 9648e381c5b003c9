use proptest::prelude::*;

use robust_duality::diffusion::{market_price_of_risk, Generator, UncertaintySet};
use robust_duality::finite::{dual_solve, primal_solve, FiniteModel, FiniteProblem, SupportMode};
use robust_duality::{ConjugatePair, ShiftedFamily, UtilityFunction};

fn utility() -> impl Strategy<Value = UtilityFunction> {
    prop_oneof![
        Just(UtilityFunction::log()),
        (0.05f64..0.95).prop_map(|p| UtilityFunction::power(p).unwrap()),
        (-2.0f64..-0.1).prop_map(|p| UtilityFunction::power(p).unwrap()),
        (0.2f64..3.0).prop_map(|l| UtilityFunction::exponential(l).unwrap()),
    ]
}

fn u_at(u: &UtilityFunction, x: f64) -> f64 {
    u.eval_extended(x).to_f64()
}

fn v_at(pair: &ConjugatePair, y: f64) -> f64 {
    pair.eval(y).unwrap().to_f64()
}

fn spd() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // L L' + 0.05 I keeps the matrix well inside the cone.
    (0.1f64..1.0, -0.5f64..0.5, 0.1f64..1.0).prop_map(|(a, b, d)| {
        vec![vec![a * a + 0.05, a * b], vec![a * b, b * b + d * d + 0.05]]
    })
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn utility_is_increasing_and_concave(u in utility(), a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(u_at(&u, hi) >= u_at(&u, lo));
        let mid = 0.5 * (lo + hi);
        let chord = 0.5 * (u_at(&u, lo) + u_at(&u, hi));
        prop_assert!(u_at(&u, mid) >= chord - 1e-12 * chord.abs().max(1.0));
    }

    #[test]
    fn conjugate_is_decreasing_and_convex(u in utility(), a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let pair = ConjugatePair::new(u);
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(v_at(&pair, hi) <= v_at(&pair, lo) + 1e-12 * v_at(&pair, lo).abs().max(1.0));
        let mid = 0.5 * (lo + hi);
        let chord = 0.5 * (v_at(&pair, lo) + v_at(&pair, hi));
        prop_assert!(v_at(&pair, mid) <= chord + 1e-12 * chord.abs().max(1.0));
    }

    #[test]
    fn fenchel_inequality(u in utility(), x in 0.01f64..50.0, y in 0.01f64..50.0) {
        let pair = ConjugatePair::new(u.clone());
        let rhs = v_at(&pair, y) + x * y;
        prop_assert!(u_at(&u, x) <= rhs + 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn shifted_conjugates_are_ordered(
        which in 0usize..2,
        n in 1u64..500,
        extra in 1u64..500,
        y in 0.001f64..5.0,
    ) {
        let u = if which == 0 { UtilityFunction::log() } else { UtilityFunction::power(0.5).unwrap() };
        let pair = ConjugatePair::new(u);
        let vn = ShiftedFamily::new(pair.clone(), n).unwrap().conjugate(y).unwrap().to_f64();
        let vm = ShiftedFamily::new(pair.clone(), n + extra).unwrap().conjugate(y).unwrap().to_f64();
        let v = v_at(&pair, y);
        let tol = 1e-12 * v.abs().max(1.0);
        prop_assert!(vn >= vm - tol, "V_{n} = {vn} < V_{} = {vm}", n + extra);
        prop_assert!(vm >= v - tol);
    }

    #[test]
    fn market_price_of_risk_is_midpoint_convex(
        b1 in prop::collection::vec(-0.5f64..0.5, 2),
        b2 in prop::collection::vec(-0.5f64..0.5, 2),
        c1 in spd(),
        c2 in spd(),
    ) {
        let k1 = market_price_of_risk(&b1, &c1).unwrap();
        let k2 = market_price_of_risk(&b2, &c2).unwrap();
        let bm: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| 0.5 * (a + b)).collect();
        let cm: Vec<Vec<f64>> = c1
            .iter()
            .zip(&c2)
            .map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        let km = market_price_of_risk(&bm, &cm).unwrap();
        prop_assert!(km <= 0.5 * (k1 + k2) + 1e-10);
    }

    #[test]
    fn kappa_is_monotone_in_the_generators(
        b1 in prop::collection::vec(-0.5f64..0.5, 2),
        b2 in prop::collection::vec(-0.5f64..0.5, 2),
        c1 in spd(),
        c2 in spd(),
    ) {
        let theta = UncertaintySet::new(vec![Generator::new(b1, c1)], 1.0).unwrap();
        let wider = theta.with_generator(Generator::new(b2, c2)).unwrap();
        prop_assert!(wider.kappa() >= theta.kappa());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_duality_on_random_markets(
        up in 0.2f64..3.0,
        down in 0.2f64..3.0,
        mid in -0.5f64..0.5,
        p1 in simplex(3),
        p2 in simplex(3),
        two in any::<bool>(),
        u in utility(),
        x in 0.2f64..5.0,
        y in 0.05f64..5.0,
    ) {
        let mut priors = vec![p1];
        if two {
            priors.push(p2);
        }
        let json = serde_json::json!({
            "outcomes": ["a", "b", "c"],
            "increments": [[up], [mid], [-down]],
            "priors": priors,
            "budget": 1.0,
        });
        let model = FiniteModel::build(FiniteProblem::from_json(&json.to_string()).unwrap(), SupportMode::EquivalentClass).unwrap();
        let primal = primal_solve(&model.cone, &model.problem.priors, &u, x).unwrap().value;
        let pair = ConjugatePair::new(u);
        let dual = dual_solve(&model.polar, &model.problem.priors, &pair, y).unwrap().value.to_f64();
        let rhs = dual + x * y;
        prop_assert!(primal <= rhs + 1e-8 * rhs.abs().max(1.0), "u = {primal}, v + xy = {rhs}");
    }
}

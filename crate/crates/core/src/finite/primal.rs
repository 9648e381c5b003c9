use serde::Serialize;

use super::claims::ClaimCone;
use super::instance::PriorPolytope;
use crate::conjugate::{ConjugatePair, UtilityFunction, UtilityKind};
use crate::numerics::lp::{LinearProgram, LpError, Relation};
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 500;
/// Cuts are never placed where the marginal utility exceeds this.
const MAX_CUT_SLOPE: f64 = 1e8;
/// Box on claims relative to the budget; reaching it means the value is not finite.
const CLAIM_CAP: f64 = 1e6;
/// Relative gap between the LP bound and the best claim at which cutting stops.
const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalSolution {
    /// `u(x)`, the worst-case expected utility of `claim`.
    pub value: f64,
    /// Upper bound from the final cutting-plane LP.
    pub upper_bound: f64,
    /// Optimal claim (zero on outcomes where claims are not compared).
    pub claim: Vec<f64>,
    /// Direction weights of a strategy superhedging `claim` from the budget.
    pub strategy: Vec<f64>,
    pub iterations: usize,
}

/// `min_k E_{P_k}[U(g)]` with `0 * U(0) = 0` on outcomes a prior does not charge.
pub fn worst_case_utility(priors: &PriorPolytope, utility: &UtilityFunction, claim: &[f64]) -> f64 {
    priors
        .generators()
        .iter()
        .map(|p| {
            p.iter()
                .zip(claim)
                .filter(|(&pw, _)| pw > 0.0)
                .map(|(&pw, &g)| pw * utility.value(g.max(0.0)))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `u(x) = max { min_k E_{P_k}[U(g)] : g in C(x) }` by a cutting-plane method
/// on the hypographs of `U` at each outcome.
///
/// The LP carries `t <= sum_w P_k(w) w_w` for every prior, the budget rows
/// `g <= x + (H.S)_T`, the admissibility rows `(H.S)_t >= -c x`, and tangent
/// cuts `w_w <= U(z) + U'(z)(g_w - z)`. Each round adds a cut at the current
/// claim on every outcome where the LP overestimates `U`. Piecewise-linear
/// utilities are represented exactly by their pieces and need one round.
pub fn primal_solve(cone: &ClaimCone, priors: &PriorPolytope, utility: &UtilityFunction, x: f64) -> Result<PrimalSolution> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("budget must be positive, got {x}")));
    }
    let market = cone.market();
    let m = market.num_outcomes();
    let charged = priors.union_support();
    let compared = cone.compared();
    if charged.iter().zip(compared).any(|(&c, &k)| c && !k) {
        return Err(Error::invalid("claims must be compared on every outcome a prior charges"));
    }
    let pair = ConjugatePair::new(utility.clone());

    // Cuts stored as (outcome, slope, intercept): w <= intercept + slope * g.
    let mut cuts: Vec<(usize, f64, f64)> = Vec::new();
    let mut points: Vec<Vec<f64>> = vec![Vec::new(); m];
    let exact = match utility.kind() {
        UtilityKind::PiecewiseLinear { .. } => {
            let (b, s, u) = utility.breakpoints().unwrap();
            for w in (0..m).filter(|&w| charged[w]) {
                for i in 0..b.len() {
                    cuts.push((w, s[i], u[i] - s[i] * b[i]));
                }
            }
            true
        }
        _ => {
            for w in (0..m).filter(|&w| charged[w]) {
                for j in -10..=10 {
                    let z = x * 2f64.powi(j);
                    if let Some(cut) = tangent(utility, z) {
                        cuts.push((w, cut.0, cut.1));
                        points[w].push(z);
                    }
                }
            }
            false
        }
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut upper = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let mut lp = LinearProgram::maximize();
        let t = lp.add_free_var(1.0);
        let wv: Vec<Option<usize>> = (0..m).map(|w| charged[w].then(|| lp.add_free_var(0.0))).collect();
        let gv: Vec<Option<usize>> = (0..m)
            .map(|w| compared[w].then(|| lp.add_var(0.0, 0.0, CLAIM_CAP * x)))
            .collect();
        let h: Vec<usize> = market.directions().iter().map(|_| lp.add_free_var(0.0)).collect();
        // Fixed capital variable so that admissibility scales with the budget.
        let cap = lp.add_var(0.0, x, x);
        for p in priors.generators() {
            let mut row = vec![(t, 1.0)];
            for w in 0..m {
                if let Some(j) = wv[w] {
                    if p[w] > 0.0 {
                        row.push((j, -p[w]));
                    }
                }
            }
            lp.add_constraint(row, Relation::Le, 0.0);
        }
        for w in 0..m {
            if let Some(gj) = gv[w] {
                let mut row = vec![(gj, 1.0)];
                for (d, &j) in market.directions().iter().zip(&h) {
                    if d.gain[w] != 0.0 {
                        row.push((j, -d.gain[w]));
                    }
                }
                lp.add_constraint(row, Relation::Le, x);
            }
        }
        cone.add_admissibility_rows(&mut lp, &h, Some((cap, market.admissibility())));
        for &(w, slope, intercept) in &cuts {
            lp.add_constraint(vec![(wv[w].unwrap(), 1.0), (gv[w].unwrap(), -slope)], Relation::Le, intercept);
        }
        let sol = match lp.solve() {
            Ok(s) => s,
            Err(LpError::Unbounded) => {
                return Err(Error::Unbounded("cutting-plane LP is unbounded".into()));
            }
            Err(e) => return Err(e.into()),
        };
        upper = sol.objective;
        let claim: Vec<f64> = gv.iter().map(|g| g.map(|j| sol.x[j].max(0.0)).unwrap_or(0.0)).collect();
        if claim.iter().any(|&g| g >= 0.999 * CLAIM_CAP * x) {
            return Err(Error::Unbounded(format!(
                "optimal claim reaches the cap {} x; the robust value is not finite",
                CLAIM_CAP
            )));
        }
        let strategy: Vec<f64> = h.iter().map(|&j| sol.x[j]).collect();
        let lower = worst_case_utility(priors, utility, &claim);
        if best.as_ref().map_or(true, |b| lower > b.0) {
            best = Some((lower, claim.clone(), strategy));
        }
        let best_value = best.as_ref().unwrap().0;
        if exact || upper - best_value <= GAP_TOL * (1.0 + upper.abs()) {
            let (value, claim, strategy) = best.unwrap();
            return Ok(PrimalSolution {
                value,
                upper_bound: upper,
                claim,
                strategy,
                iterations: iteration,
            });
        }
        let mut added = false;
        for w in (0..m).filter(|&w| charged[w]) {
            let g = claim[w];
            let level = sol.x[wv[w].unwrap()];
            if utility.value(g) < level - 1e-14 * (1.0 + level.abs()) {
                let z = if utility.marginal(g) > MAX_CUT_SLOPE {
                    pair.maximiser(MAX_CUT_SLOPE)?.unwrap_or(g)
                } else {
                    g
                };
                let seen = points[w].iter().any(|&p: &f64| (p - z).abs() <= 1e-12 * (1.0 + z));
                if let (false, Some(cut)) = (seen, tangent(utility, z)) {
                    cuts.push((w, cut.0, cut.1));
                    points[w].push(z);
                    added = true;
                }
            }
        }
        if !added {
            let (value, claim, strategy) = best.unwrap();
            return Ok(PrimalSolution {
                value,
                upper_bound: upper,
                claim,
                strategy,
                iterations: iteration,
            });
        }
    }
    let b = best.unwrap();
    Err(Error::solver(format!(
        "cutting plane did not converge in {MAX_ITERATIONS} rounds: bounds [{}, {upper}]",
        b.0
    )))
}

/// Tangent `(slope, intercept)` at `z`, if finite and not too steep.
fn tangent(utility: &UtilityFunction, z: f64) -> Option<(f64, f64)> {
    if !(z > 0.0) {
        return None;
    }
    let slope = utility.marginal(z);
    let value = utility.value(z);
    if !(slope.is_finite() && value.is_finite()) || slope > MAX_CUT_SLOPE {
        return None;
    }
    Some((slope, value - slope * z))
}

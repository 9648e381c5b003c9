use serde::Serialize;

use super::claims::ClaimCone;
use super::dual::{dual_objective, dual_solve};
use super::instance::FiniteProblem;
use super::polar::{build_polar, check_no_arbitrage_assumption, PolarMeasureSet, SupportMode};
use super::primal::{primal_solve, worst_case_utility};
use crate::numerics::grid::log_grid;
use crate::numerics::scalar::golden_section_min;
use crate::{ConjugatePair, Error, ExtReal, Result, Tolerances, UtilityFunction};

/// A finite problem with its claim cone and polar set built for one support mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModel {
    pub problem: FiniteProblem,
    pub mode: SupportMode,
    pub polar: PolarMeasureSet,
    pub cone: ClaimCone,
}

impl FiniteModel {
    pub fn build(problem: FiniteProblem, mode: SupportMode) -> Result<Self> {
        let polar = build_polar(&problem.market, &problem.priors, mode)?;
        let cone = ClaimCone::new(&problem.market, &problem.priors, mode, problem.claim_generators.clone())?;
        Ok(FiniteModel {
            problem,
            mode,
            polar,
            cone,
        })
    }
}

/// Default dual grid: 61 points, log-uniform on `[1e-3, 1e3]`.
pub fn default_y_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 61).expect("static grid is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSample {
    pub y: f64,
    pub v: ExtReal,
}

/// Optimal primal claim and optimal dual triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityCertificate {
    pub claim: Vec<f64>,
    pub strategy: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub utility: String,
    pub mode: SupportMode,
    pub x: f64,
    /// Whether some polar measure is dominated by every prior generator.
    pub precondition_holds: bool,
    pub precondition_violation: Option<String>,
    pub u: Option<f64>,
    /// Upper bound on `u(x)` from the final cutting-plane LP.
    pub u_upper: Option<f64>,
    pub samples: Vec<DualSample>,
    /// `inf_y [v(y) + x y]` and its minimiser.
    pub dual_bound: Option<f64>,
    pub y_star: Option<f64>,
    /// The minimiser sits on the first or last grid point.
    pub y_at_grid_edge: bool,
    /// `|u(x) - inf_y [v(y) + x y]|`.
    pub residual: Option<f64>,
    pub certificate: Option<DualityCertificate>,
    pub primal_iterations: usize,
    pub dual_newton_steps: usize,
    pub dual_evaluations: usize,
    pub tolerances: Tolerances,
}

impl DualityReport {
    pub fn gap_within(&self, tol: f64) -> bool {
        self.residual.is_some_and(|r| r <= tol)
    }
}

/// Measures `|u(x) - inf_y [v(y) + x y]|` on a finite model.
///
/// `v(y) + x y` is convex in `y`; it is sampled on `y_grid` and the best
/// sample is refined by golden-section search in `ln y` between its grid
/// neighbours. When no polar measure is dominated by some prior the report
/// flags the precondition and carries no values.
pub fn duality_gap(
    model: &FiniteModel,
    utility: &UtilityFunction,
    x: f64,
    y_grid: &[f64],
    tolerances: Tolerances,
) -> Result<DualityReport> {
    tolerances.validate()?;
    if y_grid.is_empty() || y_grid.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::domain("dual grid must be nonempty with positive finite points"));
    }
    if y_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("dual grid must be strictly increasing"));
    }
    let priors = &model.problem.priors;
    let mut report = DualityReport {
        utility: utility.label(),
        mode: model.mode,
        x,
        precondition_holds: false,
        precondition_violation: None,
        u: None,
        u_upper: None,
        samples: Vec::new(),
        dual_bound: None,
        y_star: None,
        y_at_grid_edge: false,
        residual: None,
        certificate: None,
        primal_iterations: 0,
        dual_newton_steps: 0,
        dual_evaluations: 0,
        tolerances,
    };
    let na = check_no_arbitrage_assumption(priors, &model.polar)?;
    if let Some(v) = na.first_violation() {
        report.precondition_violation = v.violation.clone();
        return Ok(report);
    }
    report.precondition_holds = true;

    let primal = primal_solve(&model.cone, priors, utility, x)?;
    report.u = Some(primal.value);
    report.u_upper = Some(primal.upper_bound);
    report.primal_iterations = primal.iterations;

    let pair = ConjugatePair::new(utility.clone());
    let mut newton = 0;
    let mut evaluations = 0;
    let mut first_error: Option<Error> = None;
    let mut objective = |y: f64| -> (f64, Option<(Vec<f64>, Vec<f64>)>) {
        evaluations += 1;
        match dual_solve(&model.polar, priors, &pair, y) {
            Ok(s) => {
                newton += s.newton_steps;
                match s.value.finite() {
                    Some(v) => (v + x * y, Some((s.q, s.p))),
                    None => (f64::INFINITY, None),
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
                (f64::INFINITY, None)
            }
        }
    };

    let mut best: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
    let mut best_idx = 0;
    for (i, &y) in y_grid.iter().enumerate() {
        let (val, qp) = objective(y);
        report.samples.push(DualSample {
            y,
            v: if val.is_finite() { ExtReal::Finite(val - x * y) } else { ExtReal::PosInf },
        });
        if let Some((q, p)) = qp {
            if best.as_ref().map_or(true, |b| val < b.1) {
                best = Some((y, val, q, p));
                best_idx = i;
            }
        }
    }
    let Some(mut best) = best else {
        return Err(first_error.unwrap_or_else(|| Error::solver("dual value is infinite on the whole grid")));
    };
    let lo = y_grid[best_idx.saturating_sub(1)];
    let hi = y_grid[(best_idx + 1).min(y_grid.len() - 1)];
    if hi > lo {
        let (t, _) = golden_section_min(|t| objective(t.exp()).0, lo.ln(), hi.ln(), 1e-13);
        let y = t.exp();
        let (val, qp) = objective(y);
        if let Some((q, p)) = qp {
            if val < best.1 {
                best = (y, val, q, p);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let (y_star, bound, q, p) = best;
    report.y_at_grid_edge = best_idx == 0 || best_idx + 1 == y_grid.len();
    report.dual_bound = Some(bound);
    report.y_star = Some(y_star);
    report.residual = Some((primal.value - bound).abs());
    report.certificate = Some(DualityCertificate {
        claim: primal.claim,
        strategy: primal.strategy,
        q,
        p,
        y: y_star,
    });
    report.dual_newton_steps = newton;
    report.dual_evaluations = evaluations;
    Ok(report)
}

/// Links of the weak-duality chain
/// `u <= E_P[U(g)] <= E_P[V(y dQ/dP)] + y E_Q[g] <= v(y) + x y`
/// recomputed from the certificate alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reverification {
    /// `|min_k E_{P_k}[U(g)] - u|`.
    pub utility_error: f64,
    /// Superhedging price of the certificate claim.
    pub claim_price: f64,
    /// `E_Q[g]`, at most `x` for a feasible claim.
    pub claim_q_price: f64,
    /// `|E_P[V(y dQ/dP)] + x y - inf_y [v(y) + x y]|`.
    pub dual_error: f64,
    /// `v(y) + x y - u`, nonnegative by weak duality.
    pub weak_duality_slack: f64,
    /// `E_P[V(y dQ/dP)] + y E_Q[g] - E_P[U(g)]`, nonnegative pointwise.
    pub fenchel_slack: f64,
    pub passed: bool,
}

pub fn reverify(model: &FiniteModel, utility: &UtilityFunction, report: &DualityReport) -> Result<Reverification> {
    let (Some(u), Some(bound), Some(cert)) = (report.u, report.dual_bound, report.certificate.as_ref()) else {
        return Err(Error::invalid("report carries no certificate"));
    };
    let tol = report.tolerances.certificate;
    let x = report.x;
    let pair = ConjugatePair::new(utility.clone());
    let priors = &model.problem.priors;

    let wc = worst_case_utility(priors, utility, &cert.claim);
    // Admissibility scales with the budget, so price the claim per unit of budget.
    let unit: Vec<f64> = cert.claim.iter().map(|g| g / x).collect();
    let claim_price = x * model.cone.superhedge(&unit)?.price;
    let claim_q_price: f64 = cert.q.iter().zip(&cert.claim).map(|(q, g)| q * g).sum();
    let dual = dual_objective(&pair, cert.y, &cert.q, &cert.p)?
        .finite()
        .ok_or_else(|| Error::solver("certificate dual objective is infinite"))?;
    let dual_bound = dual + x * cert.y;
    let eu_p: f64 = cert
        .p
        .iter()
        .zip(&cert.claim)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &g)| p * utility.value(g.max(0.0)))
        .sum();
    let out = Reverification {
        utility_error: (wc - u).abs(),
        claim_price,
        claim_q_price,
        dual_error: (dual_bound - bound).abs(),
        weak_duality_slack: bound - u,
        fenchel_slack: dual + cert.y * claim_q_price - eu_p,
        passed: false,
    };
    let scale = 1.0 + u.abs().max(bound.abs());
    let passed = out.utility_error <= tol * scale
        && out.claim_price <= x * (1.0 + tol)
        && out.claim_q_price <= x * (1.0 + tol)
        && out.dual_error <= tol * scale
        && out.weak_duality_slack >= -report.tolerances.duality_gap
        && out.fenchel_slack >= -tol * scale
        && eu_p >= u - tol * scale;
    Ok(Reverification { passed, ..out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(priors: &str) -> FiniteModel {
        let text = format!(r#"{{"outcomes":["u","d"],"increments":[[1.0],[-1.0]],"priors":{priors},"budget":1.0}}"#);
        FiniteModel::build(FiniteProblem::from_json(&text).unwrap(), SupportMode::EquivalentClass).unwrap()
    }

    #[test]
    fn binomial_single_prior_log_has_zero_gap() {
        let m = model("[[0.5,0.5]]");
        let u = UtilityFunction::log();
        let r = duality_gap(&m, &u, 1.0, &default_y_grid(), Tolerances::default()).unwrap();
        assert!(r.u.unwrap().abs() < 1e-10);
        assert!(r.residual.unwrap() < 1e-8, "{:?}", r.residual);
        assert!(reverify(&m, &u, &r).unwrap().passed);
    }

    #[test]
    fn arbitrage_flags_precondition() {
        let text = r#"{"outcomes":["a","b"],"increments":[[1.0],[2.0]],"priors":[[0.5,0.5]],"budget":1.0}"#;
        let m = FiniteModel::build(FiniteProblem::from_json(text).unwrap(), SupportMode::EquivalentClass).unwrap();
        let r = duality_gap(&m, &UtilityFunction::log(), 1.0, &default_y_grid(), Tolerances::default()).unwrap();
        assert!(!r.precondition_holds);
        assert!(r.residual.is_none());
    }
}

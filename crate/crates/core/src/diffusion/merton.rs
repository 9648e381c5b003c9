use serde::Serialize;

use super::girsanov::girsanov_density;
use super::paths::{simulate_paths, SimulationSpec};
use super::theta::{market_price_of_risk, HullMinimum, UncertaintySet};
use crate::numerics::scalar::grid_then_refine_log;
use crate::numerics::stats::MeanEstimate;
use crate::{ConjugatePair, Error, Result, UtilityFunction, UtilityKind};

/// Utilities with closed-form optima in the Gaussian market.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ClosedForm {
    Log,
    Power(f64),
}

fn closed_form(u: &UtilityFunction) -> Result<ClosedForm> {
    match u.kind() {
        UtilityKind::Log => Ok(ClosedForm::Log),
        UtilityKind::Power { p } if *p != 0.0 => Ok(ClosedForm::Power(*p)),
        _ => Err(Error::domain(format!(
            "{} has no closed-form optimum in the diffusion market; only log and power are supported",
            u.label()
        ))),
    }
}

/// Optimal expected utility given the integrated risk `r = b' c^{-1} b T`.
fn merton_from_risk(u: ClosedForm, x: f64, r: f64) -> (f64, f64) {
    match u {
        ClosedForm::Log => (x.ln() + 0.5 * r, 0.5),
        ClosedForm::Power(p) => {
            let k = p / (2.0 * (1.0 - p));
            let v = x.powf(p) / p * (k * r).exp();
            (v, v * k)
        }
    }
}

/// Dual value `E_P[V(y dQ/dP)]` given the integrated risk, and its derivative in `r`.
fn dual_from_risk(u: ClosedForm, y: f64, r: f64) -> (f64, f64) {
    match u {
        ClosedForm::Log => (-y.ln() - 1.0 + 0.5 * r, 0.5),
        ClosedForm::Power(p) => {
            let q = p / (p - 1.0);
            let k = 0.5 * q * (q - 1.0);
            let v = (1.0 - p) / p * y.powf(q) * (k * r).exp();
            (v, v * k)
        }
    }
}

/// Optimal expected utility at constant characteristics:
/// `log x + b' c^{-1} b T / 2` for log and
/// `(x^p / p) exp(p b' c^{-1} b T / (2 (1 - p)))` for power.
pub fn merton_value(u: &UtilityFunction, x: f64, b: &[f64], c: &[Vec<f64>], horizon: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("budget must be positive, got {x}")));
    }
    let form = closed_form(u)?;
    let r = market_price_of_risk(b, c)? * horizon;
    Ok(merton_from_risk(form, x, r).0)
}

/// `E_P[V(y dQ/dP)]` at constant characteristics with `Q` the driftless companion.
pub fn dual_value(u: &UtilityFunction, y: f64, b: &[f64], c: &[Vec<f64>], horizon: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::domain(format!("multiplier must be positive, got {y}")));
    }
    let form = closed_form(u)?;
    let r = market_price_of_risk(b, c)? * horizon;
    Ok(dual_from_risk(form, y, r).0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustValue {
    pub value: f64,
    pub minimiser: HullMinimum,
}

/// Infimum over the hull of the optimal expected utility.
pub fn robust_primal_value(u: &UtilityFunction, x: f64, theta: &UncertaintySet) -> Result<RobustValue> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("budget must be positive, got {x}")));
    }
    let form = closed_form(u)?;
    theta.require_elliptic()?;
    let t = theta.horizon();
    let m = theta.minimise(|w| {
        let (r, g) = theta.risk_premium(w)?;
        let (v, dv) = merton_from_risk(form, x, r * t);
        Ok((v, g.iter().map(|gi| dv * t * gi).collect()))
    })?;
    Ok(RobustValue { value: m.value, minimiser: m })
}

/// Infimum over the hull of `E_P[V(y dQ/dP)]`.
pub fn robust_dual_value(u: &UtilityFunction, y: f64, theta: &UncertaintySet) -> Result<RobustValue> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("multiplier must be positive, got {y}")));
    }
    let form = closed_form(u)?;
    theta.require_elliptic()?;
    let t = theta.horizon();
    let m = theta.minimise(|w| {
        let (r, g) = theta.risk_premium(w)?;
        let (v, dv) = dual_from_risk(form, y, r * t);
        Ok((v, g.iter().map(|gi| dv * t * gi).collect()))
    })?;
    Ok(RobustValue { value: m.value, minimiser: m })
}

/// Monte Carlo estimate of `E_P[V(y Z_T)]` from paths simulated under `(b, c)`,
/// with `V` evaluated pathwise by the conjugate engine.
pub fn dual_value_mc(
    u: &UtilityFunction,
    y: f64,
    b: &[f64],
    c: &[Vec<f64>],
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    let batch = simulate_paths(&SimulationSpec::constant(b.to_vec(), c.to_vec(), horizon, 1, paths, seed))?;
    let z = girsanov_density(&batch)?;
    let pair = ConjugatePair::new(u.clone());
    let mut vals = Vec::with_capacity(paths);
    for &zt in &z.dq_dp {
        vals.push(
            pair.eval(y * zt)?
                .finite()
                .ok_or_else(|| Error::solver("conjugate is infinite on a simulated path"))?,
        );
    }
    Ok(MeanEstimate::from_slice(&vals))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionDualityReport {
    pub utility: String,
    pub x: f64,
    pub primal: f64,
    pub dual_bound: f64,
    pub y_star: f64,
    pub residual: f64,
    pub primal_weights: Vec<f64>,
    pub dual_weights: Vec<f64>,
    /// Largest coordinate difference between the two hull minimisers.
    pub minimiser_distance: f64,
}

/// `|u(x) - inf_y [v(y) + x y]|` with both sides restricted to constant
/// characteristics; the `y` infimum is sampled on `y_grid` and refined.
pub fn duality_identity_check(
    u: &UtilityFunction,
    x: f64,
    theta: &UncertaintySet,
    y_grid: &[f64],
) -> Result<DiffusionDualityReport> {
    if y_grid.is_empty() || y_grid.windows(2).any(|w| w[1] <= w[0]) || y_grid[0] <= 0.0 {
        return Err(Error::domain("dual grid must be positive and strictly increasing"));
    }
    let primal = robust_primal_value(u, x, theta)?;
    let mut failure = None;
    let (y_star, bound) = grid_then_refine_log(
        |y| match robust_dual_value(u, y, theta) {
            Ok(v) => v.value + x * y,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        y_grid,
    )
    .ok_or_else(|| Error::solver("dual value is infinite on the whole grid"))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let dual = robust_dual_value(u, y_star, theta)?;
    let distance = primal
        .minimiser
        .weights
        .iter()
        .zip(&dual.minimiser.weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(DiffusionDualityReport {
        utility: u.label(),
        x,
        primal: primal.value,
        dual_bound: bound,
        y_star,
        residual: (primal.value - bound).abs(),
        primal_weights: primal.minimiser.weights,
        dual_weights: dual.minimiser.weights,
        minimiser_distance: distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::theta::Generator;

    #[test]
    fn log_values() {
        let u = UtilityFunction::log();
        assert_eq!(merton_value(&u, 1.0, &[0.0], &[vec![0.04]], 1.0).unwrap(), 0.0);
        assert!((merton_value(&u, 1.0, &[0.05], &[vec![0.04]], 1.0).unwrap() - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn power_value() {
        let u = UtilityFunction::power(0.5).unwrap();
        let v = merton_value(&u, 1.0, &[0.05], &[vec![0.04]], 1.0).unwrap();
        assert!((v - 2.0 * 0.03125f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn exponential_is_refused() {
        let u = UtilityFunction::exponential(1.0).unwrap();
        assert!(matches!(merton_value(&u, 1.0, &[0.05], &[vec![0.04]], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_premium_point_gives_log_x() {
        let theta = UncertaintySet::new(vec![Generator::scalar(0.0, 0.04), Generator::scalar(0.1, 0.09)], 1.0).unwrap();
        let r = robust_primal_value(&UtilityFunction::log(), 2.0, &theta).unwrap();
        assert!((r.value - 2.0f64.ln()).abs() < 1e-15);
    }
}

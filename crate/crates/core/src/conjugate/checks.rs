//! Grid checks of the conjugate engine.
use serde::Serialize;

use super::pair::ConjugatePair;
use super::shifted::{conjugate_bound_v1, BoundKind, ShiftedFamily};
use super::utility::UtilityFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub points: usize,
    /// `max |numeric - analytic|`.
    pub max_abs: f64,
    /// `max |numeric - analytic| / max(1, |analytic|)`.
    pub max_scaled: f64,
    pub worst_abs_y: f64,
}

/// Numeric supremum against the closed form over `y_grid`.
pub fn analytic_agreement(u: &UtilityFunction, y_grid: &[f64]) -> Result<AgreementReport> {
    let closed = ConjugatePair::new(u.clone());
    let numeric = ConjugatePair::numeric(u.clone());
    let mut out = AgreementReport {
        points: y_grid.len(),
        max_abs: 0.0,
        max_scaled: 0.0,
        worst_abs_y: f64::NAN,
    };
    for &y in y_grid {
        let a = closed
            .analytic(y)
            .ok_or_else(|| Error::domain(format!("{} has no closed-form conjugate", u.label())))?
            .to_f64();
        let n = numeric.eval(y)?.to_f64();
        let err = if a == n { 0.0 } else { (a - n).abs() };
        if !err.is_finite() {
            return Err(Error::solver(format!("conjugate of {} not finite at y = {y:e}", u.label())));
        }
        if err > out.max_abs || out.worst_abs_y.is_nan() {
            out.max_abs = out.max_abs.max(err);
            out.worst_abs_y = y;
        }
        out.max_scaled = out.max_scaled.max(err / a.abs().max(1.0));
    }
    Ok(out)
}

/// `max_x |U(x) - inf_y [V(y) + x y]|` over `x_grid`.
pub fn max_biconjugate_residual(u: &UtilityFunction, x_grid: &[f64], y_grid: &[f64]) -> Result<f64> {
    let pair = ConjugatePair::new(u.clone());
    let mut worst = 0.0f64;
    for &x in x_grid {
        worst = worst.max(pair.biconjugate_residual(x, y_grid)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftedReport {
    pub indices: Vec<u64>,
    /// Largest increase `V_{n'}(y) - V_n(y)` for consecutive `n < n'`; at most 0 when decreasing.
    pub max_increase: f64,
    /// `max_y [V_N(y) - V(y)]` at the last index `N`.
    pub max_limit_gap: f64,
    /// `min_y [V_N(y) - V(y)]`, nonnegative since `U_N >= U`.
    pub min_limit_gap: f64,
}

pub fn shifted_convergence(u: &UtilityFunction, indices: &[u64], y_grid: &[f64]) -> Result<ShiftedReport> {
    if indices.is_empty() || indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("shift indices must be nonempty and increasing"));
    }
    let base = ConjugatePair::new(u.clone());
    let families: Vec<ShiftedFamily> = indices
        .iter()
        .map(|&n| ShiftedFamily::new(base.clone(), n))
        .collect::<Result<_>>()?;
    let mut max_increase = f64::NEG_INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    for &y in y_grid {
        let vals: Vec<f64> = families
            .iter()
            .map(|f| f.conjugate(y).map(|v| v.to_f64()))
            .collect::<Result<_>>()?;
        for w in vals.windows(2) {
            max_increase = max_increase.max(w[1] - w[0]);
        }
        let gap = vals.last().unwrap() - base.eval(y)?.to_f64();
        max_gap = max_gap.max(gap);
        min_gap = min_gap.min(gap);
    }
    Ok(ShiftedReport {
        indices: indices.to_vec(),
        max_increase,
        max_limit_gap: max_gap,
        min_limit_gap: min_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `max |V_1(y) - bound(y)|` for `y` in `(0, 1]`.
    pub max_equality_error: f64,
    /// `max [V_1(y) - bound(y)]` for `y > 1`; negative when the bound is strict.
    pub max_strict_margin: f64,
}

/// `V_1` of the log or power utility against its explicit bound, on a grid
/// in `(0, 1]` where they coincide and a grid in `(1, inf)` where the bound is strict.
pub fn v1_bound_check(kind: BoundKind, equal_grid: &[f64], strict_grid: &[f64]) -> Result<BoundReport> {
    let u = match kind {
        BoundKind::Log => UtilityFunction::log(),
        BoundKind::Power { p } => UtilityFunction::power(p)?,
    };
    let v1 = ShiftedFamily::new(ConjugatePair::new(u), 1)?;
    let mut eq = 0.0f64;
    for &y in equal_grid {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::domain(format!("equality grid point {y} is outside (0, 1]")));
        }
        eq = eq.max((v1.conjugate(y)?.to_f64() - conjugate_bound_v1(kind, y)?).abs());
    }
    let mut margin = f64::NEG_INFINITY;
    for &y in strict_grid {
        if !(y > 1.0) {
            return Err(Error::domain(format!("strict grid point {y} is not above 1")));
        }
        margin = margin.max(v1.conjugate(y)?.to_f64() - conjugate_bound_v1(kind, y)?);
    }
    Ok(BoundReport {
        max_equality_error: eq,
        max_strict_margin: margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::log_grid;

    #[test]
    fn log_agreement_is_tight() {
        let r = analytic_agreement(&UtilityFunction::log(), &log_grid(1e-3, 1e3, 31).unwrap()).unwrap();
        assert!(r.max_abs < 1e-10, "{r:?}");
    }

    #[test]
    fn log_bound_is_equal_then_strict() {
        let r = v1_bound_check(BoundKind::Log, &[0.1, 0.5, 1.0], &[1.5, 3.0]).unwrap();
        assert!(r.max_equality_error < 1e-14);
        assert!(r.max_strict_margin < 0.0);
    }
}

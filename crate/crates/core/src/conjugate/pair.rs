use serde::{Deserialize, Serialize};

use super::utility::{UtilityFunction, UtilityKind};
use crate::numerics::scalar::grid_then_refine_log;
use crate::{Error, ExtReal, Result};

/// How `V(y)` is evaluated for `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateRule {
    /// Closed form for log, power and exponential utilities.
    Analytic,
    /// Exact maximum over the breakpoints of a piecewise-linear utility.
    PiecewiseExact,
    /// Supremum over `x >= 0` located by bisection on the marginal utility.
    NumericSup,
}

/// A utility together with its conjugate `V(y) = sup_{x >= 0} [U(x) - x y]`,
/// extended to the whole line by `V(y) = +inf` for `y < 0` and
/// `V(0) = lim_{y -> 0} V(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePair {
    utility: UtilityFunction,
    rule: ConjugateRule,
}

/// Initial upper end of the bracket for the inner maximisation.
fn initial_upper(y: f64) -> f64 {
    1e6f64.max(10.0 / y)
}

impl ConjugatePair {
    pub fn new(utility: UtilityFunction) -> Self {
        let rule = match utility.kind() {
            UtilityKind::PiecewiseLinear { .. } => ConjugateRule::PiecewiseExact,
            _ => ConjugateRule::Analytic,
        };
        ConjugatePair { utility, rule }
    }

    /// Forces the numeric supremum for every kind.
    pub fn numeric(utility: UtilityFunction) -> Self {
        ConjugatePair {
            utility,
            rule: ConjugateRule::NumericSup,
        }
    }

    pub fn utility(&self) -> &UtilityFunction {
        &self.utility
    }

    pub fn rule(&self) -> ConjugateRule {
        self.rule
    }

    /// `V(0) = lim_{y -> 0} V(y) = sup_x U(x)`.
    pub fn value_at_zero(&self) -> ExtReal {
        self.utility.sup_value()
    }

    /// Extended conjugate at any real `y`.
    pub fn eval(&self, y: f64) -> Result<ExtReal> {
        if y.is_nan() {
            return Err(Error::domain("conjugate evaluated at NaN"));
        }
        if y < 0.0 {
            return Ok(ExtReal::PosInf);
        }
        if y == 0.0 {
            return Ok(self.value_at_zero());
        }
        match self.rule {
            ConjugateRule::Analytic => Ok(self.analytic(y).expect("analytic rule on a smooth kind")),
            ConjugateRule::PiecewiseExact => Ok(self.piecewise(y).expect("piecewise rule on a piecewise kind")),
            ConjugateRule::NumericSup => self.numeric_sup(y).map(|(v, _)| v),
        }
    }

    /// Closed form for `y > 0`, or `None` for piecewise-linear utilities.
    pub fn analytic(&self, y: f64) -> Option<ExtReal> {
        let v = match self.utility.kind() {
            UtilityKind::Log => -y.ln() - 1.0,
            UtilityKind::Power { p } => ((1.0 - p) / p) * y.powf(p / (p - 1.0)),
            UtilityKind::Exponential { lambda } => {
                if y < *lambda {
                    let r = y / lambda;
                    r * (r.ln() - 1.0)
                } else {
                    -1.0
                }
            }
            UtilityKind::PiecewiseLinear { .. } => return None,
        };
        Some(ExtReal::from_f64(v))
    }

    /// Exact conjugate of a piecewise-linear utility for `y > 0`.
    pub fn piecewise(&self, y: f64) -> Option<ExtReal> {
        let (b, s, u) = self.utility.breakpoints()?;
        if y < *s.last().unwrap() {
            return Some(ExtReal::PosInf);
        }
        let v = b
            .iter()
            .zip(u)
            .map(|(bi, ui)| ui - bi * y)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(ExtReal::Finite(v))
    }

    /// Numeric supremum for `y > 0`. Returns the value and a maximiser (the
    /// maximiser is `None` when the supremum is `+inf`).
    ///
    /// The inner problem is concave, so the maximiser is where the marginal
    /// utility crosses `y`. The bracket starts at `[0, max(1e6, 10 / y)]` and
    /// its upper end is pushed out by decades until the marginal utility there
    /// is at most `y`.
    pub fn numeric_sup(&self, y: f64) -> Result<(ExtReal, Option<f64>)> {
        let u = &self.utility;
        if !(y > 0.0) {
            return Err(Error::domain(format!("numeric conjugate needs y > 0, got {y}")));
        }
        if y < u.marginal_at_infinity() {
            return Ok((ExtReal::PosInf, None));
        }
        if u.marginal_at_zero() <= y {
            return Ok((ExtReal::from_f64(u.value(0.0)), Some(0.0)));
        }
        let mut hi = initial_upper(y);
        while u.marginal(hi) > y {
            hi *= 10.0;
            if !hi.is_finite() || hi > 1e300 {
                return Err(Error::Bracket {
                    y,
                    lower: 0.0,
                    upper: hi,
                    marginal: u.marginal(hi),
                });
            }
        }
        let mut lo = 1.0f64.min(hi);
        while u.marginal(lo) <= y {
            lo /= 10.0;
            if lo < 1e-300 {
                return Err(Error::Bracket {
                    y,
                    lower: lo,
                    upper: hi,
                    marginal: u.marginal(lo),
                });
            }
        }
        // Invariant: U'(lo) > y >= U'(hi).
        for _ in 0..2000 {
            let mid = (lo * hi).sqrt();
            if !(mid > lo && mid < hi) {
                break;
            }
            if u.marginal(mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let f = |x: f64| u.value(x) - x * y;
        let (x, v) = if f(lo) >= f(hi) { (lo, f(lo)) } else { (hi, f(hi)) };
        if !v.is_finite() {
            return Err(Error::solver(format!("numeric conjugate produced non-finite value {v} at y = {y}")));
        }
        Ok((ExtReal::Finite(v), Some(x)))
    }

    /// A maximiser of `U(x) - x y` for `y > 0`, or `None` when `V(y) = +inf`.
    pub fn maximiser(&self, y: f64) -> Result<Option<f64>> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("maximiser needs y > 0, got {y}")));
        }
        match self.utility.kind() {
            UtilityKind::Log => Ok(Some(1.0 / y)),
            UtilityKind::Power { p } => Ok(Some(y.powf(1.0 / (p - 1.0)))),
            UtilityKind::Exponential { lambda } => Ok(Some(if y < *lambda { (lambda / y).ln() / lambda } else { 0.0 })),
            UtilityKind::PiecewiseLinear { .. } => {
                let (b, s, _) = self.utility.breakpoints().unwrap();
                if y < *s.last().unwrap() {
                    return Ok(None);
                }
                // Smallest breakpoint after which every slope is at most y.
                let i = s.iter().position(|&si| si <= y).unwrap();
                Ok(Some(b[i]))
            }
        }
    }

    /// `(V(y), V'(y), V''(y))` for `y > 0` on the smooth kinds.
    pub fn derivatives(&self, y: f64) -> Option<(f64, f64, f64)> {
        match self.utility.kind() {
            UtilityKind::Log => Some((-y.ln() - 1.0, -1.0 / y, 1.0 / (y * y))),
            UtilityKind::Power { p } => {
                let q = p / (p - 1.0);
                let v = ((1.0 - p) / p) * y.powf(q);
                let d1 = -y.powf(q - 1.0);
                let d2 = y.powf(q - 2.0) / (1.0 - p);
                Some((v, d1, d2))
            }
            UtilityKind::Exponential { lambda } => {
                if y < *lambda {
                    let r = y / lambda;
                    Some((r * (r.ln() - 1.0), r.ln() / lambda, 1.0 / (lambda * y)))
                } else {
                    Some((-1.0, 0.0, 0.0))
                }
            }
            UtilityKind::PiecewiseLinear { .. } => None,
        }
    }

    /// `|U(x) - min_y [V(y) + x y]|` with the minimum taken over `y_grid`,
    /// refined between the neighbours of the best grid point, together with
    /// `y = 0` whenever `V(0)` is finite.
    pub fn biconjugate_residual(&self, x: f64, y_grid: &[f64]) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("biconjugate residual needs x > 0, got {x}")));
        }
        if y_grid.is_empty() {
            return Err(Error::domain("biconjugate residual needs a nonempty y grid"));
        }
        if y_grid.iter().any(|&y| !(y > 0.0)) || y_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("y grid must be positive and strictly increasing"));
        }
        let mut failure = None;
        let objective = |y: f64| match self.eval(y) {
            Ok(v) => v.to_f64() + x * y,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        };
        let best = grid_then_refine_log(objective, y_grid);
        if let Some(e) = failure {
            return Err(e);
        }
        let mut min = best.map(|b| b.1).unwrap_or(f64::INFINITY);
        if let Some(v0) = self.value_at_zero().finite() {
            min = min.min(v0);
        }
        let ux = self.utility.value(x);
        if !min.is_finite() {
            return Err(Error::solver(format!("biconjugate infimum is not finite at x = {x}")));
        }
        Ok((ux - min).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_spot_values() {
        let log = ConjugatePair::new(UtilityFunction::log());
        assert_eq!(log.eval(1.0).unwrap(), ExtReal::Finite(-1.0));
        assert_eq!(log.eval(-1.0).unwrap(), ExtReal::PosInf);
        assert_eq!(log.eval(0.0).unwrap(), ExtReal::PosInf);
        let pow = ConjugatePair::new(UtilityFunction::power(0.5).unwrap());
        assert!((pow.eval(0.5).unwrap().to_f64() - 2.0).abs() < 1e-15);
        let exp = ConjugatePair::new(UtilityFunction::exponential(1.0).unwrap());
        assert_eq!(exp.eval(0.0).unwrap(), ExtReal::ZERO);
        assert_eq!(exp.eval(3.0).unwrap(), ExtReal::Finite(-1.0));
    }

    #[test]
    fn numeric_sup_tracks_closed_form() {
        for u in [
            UtilityFunction::log(),
            UtilityFunction::power(0.5).unwrap(),
            UtilityFunction::power(-1.0).unwrap(),
            UtilityFunction::exponential(2.0).unwrap(),
        ] {
            let pair = ConjugatePair::new(u.clone());
            let num = ConjugatePair::numeric(u);
            for y in [1e-3, 0.1, 0.7, 1.0, 3.0, 50.0] {
                let a = pair.eval(y).unwrap().to_f64();
                let n = num.eval(y).unwrap().to_f64();
                assert!((a - n).abs() <= 1e-10 * a.abs().max(1.0), "y = {y}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn piecewise_conjugate() {
        // U = min(2x, x + 1, 3) - 1 shape: slopes 2, 1, 0 at breakpoints 0, 1, 3.
        let u = UtilityFunction::piecewise_linear(vec![0.0, 1.0, 3.0], vec![2.0, 1.0, 0.0], 0.0).unwrap();
        let pair = ConjugatePair::new(u.clone());
        assert_eq!(pair.eval(0.0).unwrap(), ExtReal::Finite(4.0));
        assert_eq!(pair.eval(0.5).unwrap(), ExtReal::Finite(4.0 - 1.5));
        assert_eq!(pair.eval(1.5).unwrap(), ExtReal::Finite(2.0 - 1.5));
        assert_eq!(pair.eval(2.5).unwrap(), ExtReal::Finite(0.0));
        let num = ConjugatePair::numeric(u);
        for y in [0.25, 0.5, 1.0, 1.5, 2.0, 2.5] {
            let a = pair.eval(y).unwrap().to_f64();
            let n = num.eval(y).unwrap().to_f64();
            assert!((a - n).abs() < 1e-9, "y = {y}: {a} vs {n}");
        }

        let unbounded = UtilityFunction::piecewise_linear(vec![0.0, 1.0], vec![2.0, 0.5], 0.0).unwrap();
        let pair = ConjugatePair::new(unbounded);
        assert_eq!(pair.eval(0.25).unwrap(), ExtReal::PosInf);
        assert_eq!(pair.eval(0.0).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn biconjugate_rejects_bad_grids() {
        let pair = ConjugatePair::new(UtilityFunction::log());
        assert!(pair.biconjugate_residual(1.0, &[]).is_err());
        assert!(pair.biconjugate_residual(0.0, &[1.0]).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::{Error, ExtReal, Result};

/// Parametric family of a utility function.
///
/// Exponential utility is `U(x) = -exp(-lambda x)`. A piecewise-linear utility
/// starts at `value_at_zero` and has slope `slopes[i]` on
/// `[breakpoints[i], breakpoints[i + 1])`, the last slope continuing to
/// infinity. The first breakpoint must be 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityKind {
    Log,
    Power {
        p: f64,
    },
    Exponential {
        lambda: f64,
    },
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        #[serde(default)]
        value_at_zero: f64,
    },
}

/// A concave nondecreasing utility on `[0, inf)` with its limit value at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UtilityKind", into = "UtilityKind")]
pub struct UtilityFunction {
    kind: UtilityKind,
    /// `U(b_i)` at every breakpoint; empty for the smooth kinds.
    knot_values: Vec<f64>,
}

impl TryFrom<UtilityKind> for UtilityFunction {
    type Error = Error;

    fn try_from(kind: UtilityKind) -> Result<Self> {
        UtilityFunction::new(kind)
    }
}

impl From<UtilityFunction> for UtilityKind {
    fn from(u: UtilityFunction) -> Self {
        u.kind
    }
}

impl UtilityFunction {
    pub fn new(kind: UtilityKind) -> Result<Self> {
        let mut knot_values = Vec::new();
        match &kind {
            UtilityKind::Log => {}
            UtilityKind::Power { p } => {
                if !(p.is_finite() && *p < 1.0 && *p != 0.0) {
                    return Err(Error::domain(format!("power exponent must lie in (-inf, 0) or (0, 1), got {p}")));
                }
            }
            UtilityKind::Exponential { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::domain(format!("exponential rate must be positive, got {lambda}")));
                }
            }
            UtilityKind::PiecewiseLinear {
                breakpoints,
                slopes,
                value_at_zero,
            } => {
                if breakpoints.is_empty() || breakpoints.len() != slopes.len() {
                    return Err(Error::domain("piecewise-linear utility needs one slope per breakpoint"));
                }
                if breakpoints[0] != 0.0 {
                    return Err(Error::domain("first breakpoint must be 0"));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|b| !b.is_finite()) {
                    return Err(Error::domain("breakpoints must be finite and strictly increasing"));
                }
                if slopes.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::domain("slopes must be finite and nonnegative"));
                }
                if slopes.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::domain("slopes must be nonincreasing for concavity"));
                }
                if !value_at_zero.is_finite() {
                    return Err(Error::domain("value at zero must be finite"));
                }
                let mut acc = *value_at_zero;
                knot_values.push(acc);
                for i in 1..breakpoints.len() {
                    acc += slopes[i - 1] * (breakpoints[i] - breakpoints[i - 1]);
                    knot_values.push(acc);
                }
            }
        }
        Ok(UtilityFunction { kind, knot_values })
    }

    pub fn log() -> Self {
        UtilityFunction::new(UtilityKind::Log).unwrap()
    }

    pub fn power(p: f64) -> Result<Self> {
        UtilityFunction::new(UtilityKind::Power { p })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        UtilityFunction::new(UtilityKind::Exponential { lambda })
    }

    pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: Vec<f64>, value_at_zero: f64) -> Result<Self> {
        UtilityFunction::new(UtilityKind::PiecewiseLinear {
            breakpoints,
            slopes,
            value_at_zero,
        })
    }

    pub fn kind(&self) -> &UtilityKind {
        &self.kind
    }

    /// Short label such as `log`, `power(0.5)`.
    pub fn label(&self) -> String {
        match &self.kind {
            UtilityKind::Log => "log".into(),
            UtilityKind::Power { p } => format!("power({p})"),
            UtilityKind::Exponential { lambda } => format!("exponential({lambda})"),
            UtilityKind::PiecewiseLinear { breakpoints, .. } => format!("piecewise_linear({} pieces)", breakpoints.len()),
        }
    }

    /// `U(x)` for `x >= 0`; at 0 the limit `lim_{x -> 0} U(x)`.
    pub fn eval(&self, x: f64) -> Result<ExtReal> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::domain(format!("utility evaluated at negative or NaN x = {x}")));
        }
        Ok(ExtReal::from_f64(self.value(x)))
    }

    /// `U(x)` as a raw float, `-inf` allowed at 0. Caller guarantees `x >= 0`.
    pub(crate) fn value(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match &self.kind {
            UtilityKind::Log => x.ln(),
            UtilityKind::Power { p } => {
                if x == 0.0 {
                    if *p > 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else if x == f64::INFINITY {
                    if *p > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    x.powf(*p) / p
                }
            }
            UtilityKind::Exponential { lambda } => -(-lambda * x).exp(),
            UtilityKind::PiecewiseLinear {
                breakpoints, slopes, ..
            } => {
                let i = breakpoints.partition_point(|&b| b <= x) - 1;
                self.knot_values[i] + slopes[i] * (x - breakpoints[i])
            }
        }
    }

    /// Extension to the whole line: `-inf` for negative arguments.
    pub fn eval_extended(&self, x: f64) -> ExtReal {
        if x < 0.0 {
            ExtReal::NegInf
        } else {
            ExtReal::from_f64(self.value(x))
        }
    }

    /// Right derivative `U'(x+)` for `x >= 0` (`+inf` at 0 for log and power).
    pub fn marginal(&self, x: f64) -> f64 {
        match &self.kind {
            UtilityKind::Log => 1.0 / x,
            UtilityKind::Power { p } => x.powf(p - 1.0),
            UtilityKind::Exponential { lambda } => lambda * (-lambda * x).exp(),
            UtilityKind::PiecewiseLinear {
                breakpoints, slopes, ..
            } => slopes[breakpoints.partition_point(|&b| b <= x) - 1],
        }
    }

    /// `U''(x)` for the smooth kinds; 0 for piecewise-linear.
    pub fn curvature(&self, x: f64) -> f64 {
        match &self.kind {
            UtilityKind::Log => -1.0 / (x * x),
            UtilityKind::Power { p } => (p - 1.0) * x.powf(p - 2.0),
            UtilityKind::Exponential { lambda } => -lambda * lambda * (-lambda * x).exp(),
            UtilityKind::PiecewiseLinear { .. } => 0.0,
        }
    }

    /// `U(0) = lim_{x -> 0} U(x)`.
    pub fn floor_value(&self) -> ExtReal {
        ExtReal::from_f64(self.value(0.0))
    }

    /// `U(inf) = lim_{x -> inf} U(x)`.
    pub fn sup_value(&self) -> ExtReal {
        match &self.kind {
            UtilityKind::Log => ExtReal::PosInf,
            UtilityKind::Power { p } => {
                if *p > 0.0 {
                    ExtReal::PosInf
                } else {
                    ExtReal::ZERO
                }
            }
            UtilityKind::Exponential { .. } => ExtReal::ZERO,
            UtilityKind::PiecewiseLinear { slopes, .. } => {
                if *slopes.last().unwrap() > 0.0 {
                    ExtReal::PosInf
                } else {
                    ExtReal::Finite(*self.knot_values.last().unwrap())
                }
            }
        }
    }

    /// `lim_{x -> 0} U'(x)`.
    pub fn marginal_at_zero(&self) -> f64 {
        match &self.kind {
            UtilityKind::Log | UtilityKind::Power { .. } => f64::INFINITY,
            UtilityKind::Exponential { lambda } => *lambda,
            UtilityKind::PiecewiseLinear { slopes, .. } => slopes[0],
        }
    }

    /// `lim_{x -> inf} U'(x)`.
    pub fn marginal_at_infinity(&self) -> f64 {
        match &self.kind {
            UtilityKind::PiecewiseLinear { slopes, .. } => *slopes.last().unwrap(),
            _ => 0.0,
        }
    }

    /// True when `U(0)` is finite, so `U` is real valued on `[0, inf)`.
    pub fn is_real_valued(&self) -> bool {
        self.floor_value().is_finite()
    }

    /// True when `U(0) = -inf`.
    pub fn is_minus_infinity_at_zero(&self) -> bool {
        self.floor_value() == ExtReal::NegInf
    }

    /// True when `U(x) / x -> 0` as `x -> inf`.
    pub fn has_vanishing_average_slope(&self) -> bool {
        self.marginal_at_infinity() == 0.0
    }

    pub(crate) fn breakpoints(&self) -> Option<(&[f64], &[f64], &[f64])> {
        match &self.kind {
            UtilityKind::PiecewiseLinear {
                breakpoints, slopes, ..
            } => Some((breakpoints, slopes, &self.knot_values)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(UtilityFunction::log().eval(1.0).unwrap(), ExtReal::ZERO);
        assert_eq!(UtilityFunction::power(0.5).unwrap().eval(4.0).unwrap(), ExtReal::Finite(4.0));
        assert_eq!(UtilityFunction::log().eval(0.0).unwrap(), ExtReal::NegInf);
        assert_eq!(UtilityFunction::power(-1.0).unwrap().eval(0.0).unwrap(), ExtReal::NegInf);
        assert_eq!(UtilityFunction::power(0.3).unwrap().eval(0.0).unwrap(), ExtReal::ZERO);
        assert_eq!(UtilityFunction::exponential(2.0).unwrap().eval(0.0).unwrap(), ExtReal::Finite(-1.0));
        assert!(UtilityFunction::log().eval(-1.0).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(UtilityFunction::power(0.0).is_err());
        assert!(UtilityFunction::power(1.0).is_err());
        assert!(UtilityFunction::exponential(0.0).is_err());
        assert!(UtilityFunction::piecewise_linear(vec![0.0, 1.0], vec![1.0, 2.0], 0.0).is_err());
        assert!(UtilityFunction::piecewise_linear(vec![0.5, 1.0], vec![2.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn piecewise_linear_evaluation() {
        let u = UtilityFunction::piecewise_linear(vec![0.0, 1.0, 3.0], vec![2.0, 1.0, 0.0], -1.0).unwrap();
        assert_eq!(u.value(0.0), -1.0);
        assert_eq!(u.value(0.5), 0.0);
        assert_eq!(u.value(1.0), 1.0);
        assert_eq!(u.value(2.0), 2.0);
        assert_eq!(u.value(10.0), 3.0);
        assert_eq!(u.marginal(1.0), 1.0);
        assert_eq!(u.sup_value(), ExtReal::Finite(3.0));
    }

    #[test]
    fn serde_round_trip() {
        let u = UtilityFunction::power(0.5).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"kind":"power","p":0.5}"#);
        let back: UtilityFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<UtilityFunction>(r#"{"kind":"power","p":2.0}"#).is_err());
    }
}

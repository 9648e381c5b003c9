use serde::{Deserialize, Serialize};

use super::pair::ConjugatePair;
use crate::{Error, ExtReal, Result};

/// The shifted utility `U_n(x) = U(x + 1/n)` and its conjugate `V_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedFamily {
    base: ConjugatePair,
    n: u64,
}

impl ShiftedFamily {
    pub fn new(base: ConjugatePair, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("shift index n must be at least 1"));
        }
        Ok(ShiftedFamily { base, n })
    }

    pub fn base(&self) -> &ConjugatePair {
        &self.base
    }

    pub fn index(&self) -> u64 {
        self.n
    }

    fn shift(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `U_n(x) = U(x + 1/n)` for `x >= 0`.
    pub fn utility(&self, x: f64) -> Result<ExtReal> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::domain(format!("shifted utility evaluated at x = {x}")));
        }
        self.base.utility().eval(x + self.shift())
    }

    /// `V_n(y) = sup_{x >= 0} [U(x + 1/n) - x y]` on the whole line.
    ///
    /// Substituting `z = x + 1/n` gives `sup_{z >= 1/n} [U(z) - z y] + y/n`.
    /// When the unconstrained maximiser lies at or beyond `1/n` this is
    /// `V(y) + y/n`; otherwise concavity puts the maximum at `z = 1/n`.
    pub fn conjugate(&self, y: f64) -> Result<ExtReal> {
        if y.is_nan() {
            return Err(Error::domain("shifted conjugate evaluated at NaN"));
        }
        if y < 0.0 {
            return Ok(ExtReal::PosInf);
        }
        if y == 0.0 {
            return Ok(self.base.value_at_zero());
        }
        let h = self.shift();
        match self.base.maximiser(y)? {
            None => Ok(ExtReal::PosInf),
            Some(x_hat) if x_hat >= h => Ok(self.base.eval(y)? + y * h),
            Some(_) => Ok(ExtReal::from_f64(self.base.utility().value(h))),
        }
    }
}

/// Utility families for which an explicit bound on `V_1` is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    Log,
    Power { p: f64 },
}

/// Upper bound on `V_1(y) = sup_{x >= 0} [U(x + 1) - x y]`:
/// `log(1/y) - 1 + y` for log utility and
/// `(1/p - 1) (1/y)^(p/(1-p)) + y` for power utility with `p` in `(0, 1)`.
pub fn conjugate_bound_v1(kind: BoundKind, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("V_1 bound needs y > 0, got {y}")));
    }
    match kind {
        BoundKind::Log => Ok((1.0 / y).ln() - 1.0 + y),
        BoundKind::Power { p } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain(format!("V_1 power bound needs p in (0, 1), got {p}")));
            }
            Ok((1.0 / p - 1.0) * (1.0 / y).powf(p / (1.0 - p)) + y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::UtilityFunction;

    #[test]
    fn log_shift_spot_values() {
        let f = ShiftedFamily::new(ConjugatePair::new(UtilityFunction::log()), 1).unwrap();
        let v = f.conjugate(0.5).unwrap().to_f64();
        assert!((v - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert_eq!(f.conjugate(2.0).unwrap(), ExtReal::ZERO);
        assert_eq!(f.utility(0.0).unwrap(), ExtReal::ZERO);
    }

    #[test]
    fn power_shift_spot_value() {
        let f = ShiftedFamily::new(ConjugatePair::new(UtilityFunction::power(0.5).unwrap()), 1).unwrap();
        let v = f.conjugate(0.25).unwrap().to_f64();
        assert!((v - 4.25).abs() < 1e-14);
    }

    #[test]
    fn bound_spot_values() {
        assert_eq!(conjugate_bound_v1(BoundKind::Log, 1.0).unwrap(), 0.0);
        assert_eq!(conjugate_bound_v1(BoundKind::Power { p: 0.5 }, 1.0).unwrap(), 2.0);
        assert!(conjugate_bound_v1(BoundKind::Power { p: -0.5 }, 1.0).is_err());
        assert!(conjugate_bound_v1(BoundKind::Log, 0.0).is_err());
        assert!(ShiftedFamily::new(ConjugatePair::new(UtilityFunction::log()), 0).is_err());
    }
}

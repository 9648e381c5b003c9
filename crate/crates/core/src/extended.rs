//! Extended reals with explicit infinities.
//!
//! Utilities may take the value `-inf` at zero and conjugates the value `+inf`
//! on the negative half-line. Those are carried as dedicated variants so that
//! no computation ever produces or compares a NaN.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps `f64` infinities onto the sentinel variants.
    ///
    /// Panics on NaN.
    pub fn from_f64(v: f64) -> Self {
        assert!(!v.is_nan(), "NaN cannot be represented as an extended real");
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Lossy conversion back to `f64` (infinities become `f64` infinities).
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// `weight * self` with the convention `0 * (+-inf) = 0`.
    pub fn weighted(self, weight: f64) -> Self {
        assert!(weight >= 0.0, "negative weight {weight}");
        if weight == 0.0 {
            return ExtReal::ZERO;
        }
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(weight * v),
            inf => inf,
        }
    }

    /// Sum that returns `None` for the indeterminate form `inf - inf`.
    pub fn checked_add(self, other: Self) -> Option<Self> {
        use ExtReal::*;
        match (self, other) {
            (PosInf, NegInf) | (NegInf, PosInf) => None,
            (PosInf, _) | (_, PosInf) => Some(PosInf),
            (NegInf, _) | (_, NegInf) => Some(NegInf),
            (Finite(a), Finite(b)) => Some(ExtReal::from_f64(a + b)),
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        Some(match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.partial_cmp(b)?,
        })
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    /// Panics on `inf - inf`; use [`ExtReal::checked_add`] when both signs can occur.
    fn add(self, rhs: Self) -> Self {
        self.checked_add(rhs)
            .expect("indeterminate extended-real sum inf - inf")
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> Self {
        self + ExtReal::from_f64(rhs)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> Self {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "+inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_places_infinities_at_the_ends() {
        let xs = [ExtReal::PosInf, ExtReal::Finite(-1e300), ExtReal::NegInf, ExtReal::ZERO];
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            sorted,
            vec![ExtReal::NegInf, ExtReal::Finite(-1e300), ExtReal::ZERO, ExtReal::PosInf]
        );
    }

    #[test]
    fn zero_weight_kills_infinity() {
        assert_eq!(ExtReal::PosInf.weighted(0.0), ExtReal::ZERO);
        assert_eq!(ExtReal::NegInf.weighted(0.5), ExtReal::NegInf);
        assert_eq!(ExtReal::Finite(2.0).weighted(0.25), ExtReal::Finite(0.5));
    }

    #[test]
    fn indeterminate_sum_is_rejected() {
        assert!(ExtReal::PosInf.checked_add(ExtReal::NegInf).is_none());
        assert_eq!(ExtReal::PosInf + 3.0, ExtReal::PosInf);
        assert_eq!(ExtReal::from_f64(f64::NEG_INFINITY), ExtReal::NegInf);
    }
}

/// Finite values serialise as numbers and infinities as the strings `"inf"` and `"-inf"`.
impl serde::Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
            ExtReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

//! Sample means with standard errors.
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Two-pass mean and unbiased variance, summed in index order.
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanEstimate { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        MeanEstimate { mean, se, n }
    }

    pub fn from_iter<I: IntoIterator<Item = f64>>(xs: I) -> Self {
        let v: Vec<f64> = xs.into_iter().collect();
        Self::from_slice(&v)
    }

    /// `(mean - target) / se`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.se
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.se
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_sample() {
        let e = MeanEstimate::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // variance 5/3, se = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(e.within(2.5 + 0.5, 1.0));
    }
}

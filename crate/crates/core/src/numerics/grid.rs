use crate::{Error, Result};

/// `n` log-uniformly spaced points from `lo` to `hi`, endpoints included.
///
/// Points are computed as `10^(a + k (b - a) / (n - 1))` so that exact powers
/// of ten on the lattice come out exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!("log grid needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(Error::domain("log grid needs at least two points"));
    }
    let a = lo.log10();
    let b = hi.log10();
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                let e = a + (b - a) * k as f64 / last;
                if e == e.round() {
                    10f64.powi(e as i32)
                } else {
                    10f64.powf(e)
                }
            }
        })
        .collect())
}

/// Uniform grid `lo, lo + step, ...` up to and including `hi` (within half a step).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo) {
        return Err(Error::domain(format!("uniform grid needs step > 0 and hi >= lo, got [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_hits_decades_exactly() {
        let g = log_grid(1e-6, 1e6, 513).unwrap();
        assert_eq!(g.len(), 513);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[256], 1.0);
        assert_eq!(g[512], 1e6);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(log_grid(0.0, 1.0, 10).is_err());
        assert!(log_grid(1.0, 1.0, 10).is_err());
        assert!(log_grid(1.0, 2.0, 1).is_err());
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn uniform_grid_includes_endpoint() {
        let g = uniform_grid(0.0, 4.0, 0.01).unwrap();
        assert_eq!(g.len(), 401);
        assert!((g[400] - 4.0).abs() < 1e-12);
    }
}

//! One-dimensional minimisation.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
///
/// Returns `(argmin, min)`. The endpoints are evaluated too, so a minimum on
/// the boundary is found exactly.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mut best = if f_hi < f_lo { (hi, f_hi) } else { (lo, f_lo) };

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if hi - lo <= tol * (1.0 + x1.abs().min(x2.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimises a function sampled on a sorted grid, then refines between the
/// neighbours of the best grid point with golden-section search in `ln`
/// coordinates. Points where `f` is infinite are skipped.
///
/// Returns `(argmin, min)`, or `None` when `f` is infinite on the whole grid.
pub fn grid_then_refine_log<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64]) -> Option<(f64, f64)> {
    let values: Vec<f64> = grid.iter().map(|&y| f(y)).collect();
    let (best_idx, &best_val) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let mut best = (grid[best_idx], best_val);
    if hi > lo {
        let (t, v) = golden_section_min(
            |t| {
                let fv = f(t.exp());
                if fv.is_nan() {
                    f64::INFINITY
                } else {
                    fv
                }
            },
            lo.ln(),
            hi.ln(),
            1e-13,
        );
        if v < best.1 {
            best = (t.exp(), v);
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_minimum() {
        let (x, v) = golden_section_min(|x| (x - 0.3) * (x - 0.3) + 1.0, 0.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_boundary_minimum() {
        let (x, v) = golden_section_min(|x| x, 1.0, 3.0, 1e-12);
        assert_eq!(x, 1.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn refine_improves_on_coarse_grid() {
        let grid = [0.01, 0.1, 1.0, 10.0, 100.0];
        // -ln y - 1 + 2 y has its minimum at y = 0.5 with value ln 2.
        let (y, v) = grid_then_refine_log(|y| -y.ln() - 1.0 + 2.0 * y, &grid).unwrap();
        assert!((y - 0.5).abs() < 1e-6);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn refine_reports_all_infinite() {
        assert!(grid_then_refine_log(|_| f64::INFINITY, &[1.0, 2.0]).is_none());
    }
}

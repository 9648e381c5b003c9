use serde::Serialize;

use super::instance::PriorPolytope;
use super::polar::PolarMeasureSet;
use crate::numerics::grid::uniform_grid;
use crate::numerics::lp::{LinearProgram, Relation};
use crate::numerics::simplex;
use crate::{Error, Result, UtilityFunction};

/// Largest product grid evaluated by the sup-inf brute force.
pub const MAX_GRID_POINTS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub y: f64,
    pub g_max: f64,
    pub step: f64,
    pub grid_points: usize,
    /// `max_g min_{P,Q} L(g; P, Q)` over the claim grid.
    pub sup_inf: f64,
    /// `min_{P,Q} max_g L(g; P, Q)`, attained by the reported pair.
    pub inf_sup: f64,
    /// Lower bound on `inf_sup` from the hull LP.
    pub inf_sup_lower: f64,
    /// `inf_sup - sup_inf`, nonnegative up to rounding.
    pub residual: f64,
    pub maximising_claim: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

/// Brute-force check of the exchange of `sup` and `inf` in
/// `L(g; P, Q) = E_P[U(g)] - y E_Q[g]` over claims on the grid
/// `{0, step, ..., g_max}` at every charged outcome.
///
/// For fixed `g`, `L` is affine in `P` and in `Q`, so the inner infimum is
/// attained at a pair of vertices. For fixed `(P, Q)` the supremum over the
/// product grid separates across outcomes, so `max_g L` is a maximum of
/// affine functions of the hull weights. Its minimum is found by an LP and
/// compared with the best vertex pair.
pub fn minimax_exchange_check(
    polar: &PolarMeasureSet,
    priors: &PriorPolytope,
    utility: &UtilityFunction,
    y: f64,
    g_max: f64,
    step: f64,
) -> Result<MinimaxReport> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("multiplier must be positive, got {y}")));
    }
    if polar.is_empty() {
        return Err(Error::invalid("polar set is empty"));
    }
    let qs = polar
        .vertices()
        .ok_or_else(|| Error::solver("polar vertices unavailable (too many bases)"))?;
    let grid = uniform_grid(0.0, g_max, step)?;
    let n = grid.len();
    let atoms: Vec<usize> = priors
        .union_support()
        .iter()
        .enumerate()
        .filter_map(|(w, &c)| c.then_some(w))
        .collect();
    let points = (n as f64).powi(atoms.len() as i32);
    if points > MAX_GRID_POINTS as f64 {
        return Err(Error::invalid(format!(
            "claim grid has {points:.3e} points, above the limit {MAX_GRID_POINTS}"
        )));
    }
    let ps = priors.generators();
    let uvals: Vec<f64> = grid.iter().map(|&g| utility.value(g)).collect();
    let term = |p: f64, q: f64, i: usize| -> f64 {
        let pu = if p > 0.0 { p * uvals[i] } else { 0.0 };
        pu - y * q * grid[i]
    };
    // tables[k][j][a][i]: contribution of atom `atoms[a]` at grid point `i`.
    let tables: Vec<Vec<Vec<Vec<f64>>>> = ps
        .iter()
        .map(|p| {
            qs.iter()
                .map(|q| atoms.iter().map(|&w| (0..n).map(|i| term(p[w], q[w], i)).collect()).collect())
                .collect()
        })
        .collect();

    // sup-inf over the product grid, odometer order.
    let mut idx = vec![0usize; atoms.len()];
    let mut sup_inf = f64::NEG_INFINITY;
    let mut arg = idx.clone();
    loop {
        let mut inner = f64::INFINITY;
        for per_q in &tables {
            for t in per_q {
                let mut s = 0.0;
                for (a, &i) in idx.iter().enumerate() {
                    s += t[a][i];
                }
                inner = inner.min(s);
            }
        }
        if inner > sup_inf {
            sup_inf = inner;
            arg.clone_from(&idx);
        }
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                break;
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == idx.len() {
            break;
        }
    }

    // inf-sup: vertex pairs first.
    let mut inf_sup = f64::INFINITY;
    let mut best_pair = (Vec::new(), Vec::new());
    for (k, per_q) in tables.iter().enumerate() {
        for (j, t) in per_q.iter().enumerate() {
            let mut s = 0.0;
            for row in t {
                s += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            if s < inf_sup {
                inf_sup = s;
                best_pair = (qs[j].clone(), ps[k].clone());
            }
        }
    }

    // Then the hull LP, with grid rows added while the iterate violates them;
    // its optimum is re-evaluated exactly.
    let skip_zero = !utility.floor_value().is_finite();
    let usable: Vec<usize> = (0..n).filter(|&i| !(skip_zero && grid[i] == 0.0)).collect();
    if usable.is_empty() {
        return Err(Error::invalid("claim grid has no point with finite utility"));
    }
    let mut active: Vec<Vec<usize>> = vec![vec![usable[0], usable[usable.len() / 2], usable[usable.len() - 1]]; atoms.len()];
    let (sol, alpha, beta) = loop {
        let mut lp = LinearProgram::minimize();
        let alpha: Vec<usize> = qs.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
        let beta: Vec<usize> = ps.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
        lp.add_constraint(alpha.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
        lp.add_constraint(beta.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
        let mut svars = Vec::with_capacity(atoms.len());
        for (a, &w) in atoms.iter().enumerate() {
            let s = lp.add_free_var(1.0);
            svars.push(s);
            for &i in &active[a] {
                // s - U(g_i) P(w) + y g_i Q(w) >= 0
                let mut row = vec![(s, 1.0)];
                for (k, &b) in beta.iter().enumerate() {
                    if ps[k][w] != 0.0 {
                        row.push((b, -uvals[i] * ps[k][w]));
                    }
                }
                for (j, &al) in alpha.iter().enumerate() {
                    if qs[j][w] != 0.0 && grid[i] != 0.0 {
                        row.push((al, y * grid[i] * qs[j][w]));
                    }
                }
                lp.add_constraint(row, Relation::Ge, 0.0);
            }
        }
        let sol = lp.solve()?;
        let a: Vec<f64> = alpha.iter().map(|&j| sol.x[j].max(0.0)).collect();
        let b: Vec<f64> = beta.iter().map(|&j| sol.x[j].max(0.0)).collect();
        let q = simplex::combine(&a, qs);
        let p = simplex::combine(&b, ps);
        let mut added = false;
        for (k, &w) in atoms.iter().enumerate() {
            let s = sol.x[svars[k]];
            let (best, top) = usable
                .iter()
                .map(|&i| (i, term(p[w], q[w], i)))
                .fold((usize::MAX, f64::NEG_INFINITY), |m, c| if c.1 > m.1 { c } else { m });
            if top > s + 1e-12 * (1.0 + s.abs()) && !active[k].contains(&best) {
                active[k].push(best);
                added = true;
            }
        }
        if !added {
            break (sol, alpha, beta);
        }
    };
    let a: Vec<f64> = alpha.iter().map(|&j| sol.x[j].max(0.0)).collect();
    let b: Vec<f64> = beta.iter().map(|&j| sol.x[j].max(0.0)).collect();
    let q = simplex::combine(&a, qs);
    let p = simplex::combine(&b, ps);
    let mut at_lp = 0.0;
    for &w in &atoms {
        at_lp += (0..n).map(|i| term(p[w], q[w], i)).fold(f64::NEG_INFINITY, f64::max);
    }
    if at_lp < inf_sup {
        inf_sup = at_lp;
        best_pair = (q, p);
    }

    Ok(MinimaxReport {
        y,
        g_max,
        step,
        grid_points: points as usize,
        sup_inf,
        inf_sup,
        inf_sup_lower: sol.objective,
        residual: inf_sup - sup_inf,
        maximising_claim: {
            let mut g = vec![0.0; priors.dim()];
            for (a, &w) in atoms.iter().enumerate() {
                g[w] = grid[arg[a]];
            }
            g
        },
        q: best_pair.0,
        p: best_pair.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::instance::FiniteMarketInstance;
    use crate::finite::polar::{build_polar, SupportMode};

    #[test]
    fn single_pair_has_exactly_zero_residual() {
        let market = FiniteMarketInstance::single_period(vec!["u".into(), "d".into()], vec![vec![1.0], vec![-1.0]]).unwrap();
        let priors = PriorPolytope::new(vec![vec![0.5, 0.5]]).unwrap();
        let polar = build_polar(&market, &priors, SupportMode::EquivalentClass).unwrap();
        let r = minimax_exchange_check(&polar, &priors, &UtilityFunction::log(), 1.0, 2.0, 0.05).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!((r.sup_inf - (-1.0)).abs() < 1e-12);
    }
}

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::instance::PriorPolytope;
use super::polar::PolarMeasureSet;
use crate::conjugate::{ConjugatePair, UtilityKind};
use crate::numerics::lp::{LinearProgram, Relation};
use crate::numerics::simplex;
use crate::{Error, ExtReal, Result};

/// Largest number of priors for which faces of the prior simplex are enumerated.
const MAX_FACE_PRIORS: usize = 16;
const MU_START: f64 = 1e-2;
const MU_END: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub y: f64,
    /// `v(y)`; `+inf` when no pair of measures gives a finite value.
    pub value: ExtReal,
    /// Minimising martingale measure and prior (empty when `value` is infinite).
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Best value over vertex pairs and face centroids alone.
    pub grid_value: ExtReal,
    pub faces_searched: usize,
    pub newton_steps: usize,
    pub diagnostic: Option<String>,
}

/// `sum_w P(w) V(y Q(w) / P(w))` with `0 V(0/0) = 0`, `+inf` where
/// `Q(w) > 0 = P(w)`, and `P(w) V(0)` where `Q(w) = 0 < P(w)`.
pub fn dual_objective(pair: &ConjugatePair, y: f64, q: &[f64], p: &[f64]) -> Result<ExtReal> {
    let mut total = ExtReal::ZERO;
    for (&qw, &pw) in q.iter().zip(p) {
        let term = if pw <= 0.0 {
            if qw > 0.0 {
                ExtReal::PosInf
            } else {
                ExtReal::ZERO
            }
        } else if qw <= 0.0 {
            pair.value_at_zero().weighted(pw)
        } else {
            pair.eval(snap_to_domain(pair, y * qw / pw))?.weighted(pw)
        };
        total = total
            .checked_add(term)
            .ok_or_else(|| Error::solver("dual objective hit inf - inf"))?;
    }
    Ok(total)
}

/// Ratios a few ulps below the left end of a piecewise-linear conjugate's
/// domain are moved onto it. Hull points on that edge are produced by rounding
/// `y Q / P` and would otherwise evaluate to `+inf`.
fn snap_to_domain(pair: &ConjugatePair, r: f64) -> f64 {
    const EDGE_TOL: f64 = 1e-12;
    match pair.utility().kind() {
        UtilityKind::PiecewiseLinear { slopes, .. } => {
            let s_last = *slopes.last().unwrap();
            if r < s_last && r >= s_last * (1.0 - EDGE_TOL) {
                s_last
            } else {
                r
            }
        }
        _ => r,
    }
}

/// A face of the prior simplex together with the polar vertices it can pair with.
struct Face {
    priors: Vec<usize>,
    vertices: Vec<usize>,
    /// Outcomes charged by the face's priors.
    support: Vec<bool>,
}

fn support_of(priors: &PriorPolytope, set: &[usize]) -> Vec<bool> {
    (0..priors.dim())
        .map(|w| set.iter().any(|&k| priors.generators()[k][w] > 0.0))
        .collect()
}

fn faces(priors: &PriorPolytope, qs: &[Vec<f64>], need_full_cover: bool) -> Result<Vec<Face>> {
    let k = priors.len();
    let all: Vec<usize> = (0..k).collect();
    let mut sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    if !need_full_cover || priors.supports_agree() {
        sets.insert(all);
    } else {
        if k > MAX_FACE_PRIORS {
            return Err(Error::solver(format!(
                "{k} priors with differing supports: face enumeration is capped at {MAX_FACE_PRIORS}"
            )));
        }
        for mask in 1u32..(1 << k) {
            let set: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let supp = support_of(priors, &set);
            // Close the set under priors whose support it already covers.
            let closed: Vec<usize> = (0..k)
                .filter(|&i| (0..priors.dim()).all(|w| priors.generators()[i][w] <= 0.0 || supp[w]))
                .collect();
            sets.insert(closed);
        }
    }
    let mut out = Vec::new();
    for set in sets {
        let support = support_of(priors, &set);
        let vertices: Vec<usize> = (0..qs.len())
            .filter(|&j| qs[j].iter().zip(&support).all(|(&q, &s)| q <= 0.0 || s))
            .collect();
        if vertices.is_empty() {
            continue;
        }
        if need_full_cover {
            let covered = (0..support.len()).all(|w| !support[w] || vertices.iter().any(|&j| qs[j][w] > 0.0));
            if !covered {
                continue;
            }
        }
        out.push(Face {
            priors: set,
            vertices,
            support,
        });
    }
    Ok(out)
}

/// `v(y) = inf_{Q in D} inf_{P in hull(priors)} E_P[V(y dQ/dP)]`.
///
/// `Q` and `P` are parameterised by barycentric weights over the polar
/// vertices and the priors. The objective is a sum of perspectives of `V`
/// and hence jointly convex in the weights. Vertex pairs and face centroids
/// seed the search; each face of the prior simplex whose relative interior
/// can carry a finite value is then minimised by a log-barrier Newton method
/// (smooth `V`) or a linear program over the epigraph of the perspective
/// (piecewise-linear `V`). Faces are only enumerated when the priors charge
/// different outcomes and `V(0) = +inf`; otherwise the closure of the
/// objective over the full product is continuous along segments into the
/// interior and a single search suffices.
pub fn dual_solve(polar: &PolarMeasureSet, priors: &PriorPolytope, pair: &ConjugatePair, y: f64) -> Result<DualSolution> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("dual value needs y > 0, got {y}")));
    }
    if polar.is_empty() {
        return Err(Error::invalid("polar set is empty"));
    }
    let vertices = polar
        .vertices()
        .ok_or_else(|| Error::solver("polar vertices unavailable (too many bases)"))?;
    let union = priors.union_support();
    // A measure charging an outcome no prior charges is never dominated.
    let qs: Vec<Vec<f64>> = vertices
        .iter()
        .filter(|q| q.iter().zip(&union).all(|(&qw, &u)| qw <= 0.0 || u))
        .cloned()
        .collect();
    let mut sol = DualSolution {
        y,
        value: ExtReal::PosInf,
        q: Vec::new(),
        p: Vec::new(),
        grid_value: ExtReal::PosInf,
        faces_searched: 0,
        newton_steps: 0,
        diagnostic: None,
    };
    if qs.is_empty() {
        sol.diagnostic = Some("no polar measure is dominated by the prior set".into());
        return Ok(sol);
    }
    let ps = priors.generators();

    let consider = |sol: &mut DualSolution, v: ExtReal, q: Vec<f64>, p: Vec<f64>| {
        if v < sol.value {
            sol.value = v;
            sol.q = q;
            sol.p = p;
        }
    };

    for q in &qs {
        for p in ps {
            let v = dual_objective(pair, y, q, p)?;
            sol.grid_value = sol.grid_value.min(v);
            consider(&mut sol, v, q.clone(), p.clone());
        }
    }

    let v0_infinite = !pair.value_at_zero().is_finite();
    let face_list = faces(priors, &qs, v0_infinite)?;
    for face in &face_list {
        let fq: Vec<Vec<f64>> = face.vertices.iter().map(|&j| qs[j].clone()).collect();
        let fp: Vec<Vec<f64>> = face.priors.iter().map(|&k| ps[k].clone()).collect();
        let qc = simplex::combine(&simplex::uniform(fq.len()), &fq);
        let pc = simplex::combine(&simplex::uniform(fp.len()), &fp);
        let v = dual_objective(pair, y, &qc, &pc)?;
        sol.grid_value = sol.grid_value.min(v);
        consider(&mut sol, v, qc, pc);

        sol.faces_searched += 1;
        let found = match pair.utility().kind() {
            UtilityKind::PiecewiseLinear { .. } => face_lp(pair, y, &fq, &fp, &face.support)?,
            _ => {
                let (q, p, steps) = face_barrier(pair, y, &fq, &fp, &face.support)?;
                sol.newton_steps += steps;
                Some((q, p))
            }
        };
        if let Some((q, p)) = found {
            let v = dual_objective(pair, y, &q, &p)?;
            consider(&mut sol, v, q, p);
        }
    }
    if !sol.value.is_finite() {
        sol.diagnostic = Some("every pair of measures gives an infinite dual objective".into());
        sol.q.clear();
        sol.p.clear();
    }
    Ok(sol)
}

/// Log-barrier Newton method on the product of two simplices.
fn face_barrier(
    pair: &ConjugatePair,
    y: f64,
    fq: &[Vec<f64>],
    fp: &[Vec<f64>],
    support: &[bool],
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let ja = fq.len();
    let kb = fp.len();
    let n = ja + kb;
    let atoms: Vec<usize> = (0..support.len()).filter(|&w| support[w]).collect();
    // Outcomes no vertex of the face charges contribute P(w) V(0), linear in P.
    let uncovered: Vec<bool> = atoms.iter().map(|&w| fq.iter().all(|q| q[w] <= 0.0)).collect();
    let v0 = pair.value_at_zero().to_f64();

    let eval = |z: &[f64], want_hess: bool| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let mut f = 0.0;
        let mut g = DVector::zeros(n);
        let mut h = if want_hess { DMatrix::zeros(n, n) } else { DMatrix::zeros(0, 0) };
        let mut a = DVector::zeros(n);
        for (idx, &w) in atoms.iter().enumerate() {
            let pw: f64 = (0..kb).map(|k| z[ja + k] * fp[k][w]).sum();
            if uncovered[idx] {
                f += pw * v0;
                for k in 0..kb {
                    g[ja + k] += v0 * fp[k][w];
                }
                continue;
            }
            let qw: f64 = (0..ja).map(|j| z[j] * fq[j][w]).sum();
            if !(pw > 0.0 && qw > 0.0) {
                return None;
            }
            let r = y * qw / pw;
            let (v, d1, d2) = pair.derivatives(r)?;
            f += pw * v;
            for j in 0..ja {
                g[j] += y * d1 * fq[j][w];
            }
            for k in 0..kb {
                g[ja + k] += (v - r * d1) * fp[k][w];
            }
            if want_hess && d2 > 0.0 {
                for j in 0..ja {
                    a[j] = y * fq[j][w];
                }
                for k in 0..kb {
                    a[ja + k] = -r * fp[k][w];
                }
                h.ger(d2 / pw, &a, &a, 1.0);
            }
        }
        f.is_finite().then_some((f, g, h))
    };

    let mut z: Vec<f64> = std::iter::repeat(1.0 / ja as f64)
        .take(ja)
        .chain(std::iter::repeat(1.0 / kb as f64).take(kb))
        .collect();
    if eval(&z, false).is_none() {
        return Err(Error::solver("dual barrier start point has an infinite objective"));
    }
    let mut steps = 0;
    let mut mu = MU_START;
    while mu >= MU_END {
        for _ in 0..100 {
            let (f, g, h) = eval(&z, true).expect("barrier iterate stays in the domain");
            let phi = f - mu * z.iter().map(|v| v.ln()).sum::<f64>();
            let mut kkt = DMatrix::zeros(n + 2, n + 2);
            let mut rhs = DVector::zeros(n + 2);
            for i in 0..n {
                for j in 0..n {
                    kkt[(i, j)] = h[(i, j)];
                }
                kkt[(i, i)] += mu / (z[i] * z[i]);
                rhs[i] = -(g[i] - mu / z[i]);
                let block = if i < ja { n } else { n + 1 };
                kkt[(i, block)] = 1.0;
                kkt[(block, i)] = 1.0;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                return Err(Error::solver("singular Newton system in the dual barrier"));
            };
            let dz: Vec<f64> = (0..n).map(|i| sol[i]).collect();
            let slope: f64 = (0..n).map(|i| (g[i] - mu / z[i]) * dz[i]).sum();
            if -slope <= 1e-15 * (1.0 + f.abs()) {
                break;
            }
            let mut step = 1.0f64;
            for i in 0..n {
                if dz[i] < 0.0 {
                    step = step.min(-0.99 * z[i] / dz[i]);
                }
            }
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
                if trial.iter().all(|&v| v > 0.0) {
                    if let Some((ft, _, _)) = eval(&trial, false) {
                        let phit = ft - mu * trial.iter().map(|v| v.ln()).sum::<f64>();
                        if phit <= phi + 1e-4 * step * slope {
                            z = trial;
                            accepted = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            steps += 1;
            if !accepted {
                break;
            }
        }
        mu *= 0.1;
    }
    let alpha = &z[..ja];
    let beta = &z[ja..];
    Ok((simplex::combine(alpha, fq), simplex::combine(beta, fp), steps))
}

/// Exact LP for piecewise-linear `V`: the perspective of
/// `V(r) = max_i [U(b_i) - b_i r]` on `r >= s_last` is
/// `max_i [U(b_i) P - b_i y Q]` subject to `y Q >= s_last P`.
fn face_lp(
    pair: &ConjugatePair,
    y: f64,
    fq: &[Vec<f64>],
    fp: &[Vec<f64>],
    support: &[bool],
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let UtilityKind::PiecewiseLinear { breakpoints, slopes, .. } = pair.utility().kind() else {
        unreachable!("face LP is only used for piecewise-linear utilities");
    };
    let knots: Vec<f64> = breakpoints
        .iter()
        .map(|&b| pair.utility().value(b))
        .collect();
    let s_last = *slopes.last().unwrap();
    let mut lp = LinearProgram::minimize();
    let alpha: Vec<usize> = fq.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
    let beta: Vec<usize> = fp.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
    lp.add_constraint(alpha.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    lp.add_constraint(beta.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    for w in (0..support.len()).filter(|&w| support[w]) {
        let s = lp.add_free_var(1.0);
        for (bi, ui) in breakpoints.iter().zip(&knots) {
            // s - U(b_i) P + b_i y Q >= 0
            let mut row = vec![(s, 1.0)];
            for (k, &j) in beta.iter().enumerate() {
                if fp[k][w] != 0.0 {
                    row.push((j, -ui * fp[k][w]));
                }
            }
            for (jq, &j) in alpha.iter().enumerate() {
                if fq[jq][w] != 0.0 && *bi != 0.0 {
                    row.push((j, bi * y * fq[jq][w]));
                }
            }
            lp.add_constraint(row, Relation::Ge, 0.0);
        }
        if s_last > 0.0 {
            let mut row = Vec::new();
            for (jq, &j) in alpha.iter().enumerate() {
                if fq[jq][w] != 0.0 {
                    row.push((j, y * fq[jq][w]));
                }
            }
            for (k, &j) in beta.iter().enumerate() {
                if fp[k][w] != 0.0 {
                    row.push((j, -s_last * fp[k][w]));
                }
            }
            if !row.is_empty() {
                lp.add_constraint(row, Relation::Ge, 0.0);
            }
        }
    }
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(crate::numerics::lp::LpError::Infeasible) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let a: Vec<f64> = alpha.iter().map(|&j| sol.x[j].max(0.0)).collect();
    let b: Vec<f64> = beta.iter().map(|&j| sol.x[j].max(0.0)).collect();
    let q = simplex::combine(&a, fq);
    let p = simplex::combine(&b, fp);
    let exact = dual_objective(pair, y, &q, &p)?;
    let agrees = exact
        .finite()
        .map_or(false, |v| (v - sol.objective).abs() <= 1e-9 * (1.0 + v.abs()));
    if agrees {
        return Ok(Some((q, p)));
    }
    // The LP optimum sits where Q charges an outcome P misses, so it is an
    // infimum of the objective rather than a minimum. The rows are linear, so
    // the segment towards a finite pair that charges those outcomes stays in
    // the domain and its value converges to the LP optimum.
    let missed: Vec<usize> = (0..q.len()).filter(|&w| q[w] > 0.0 && p[w] <= 0.0).collect();
    if let Some((qr, pr)) = interior_reference(y, fq, fp, support, s_last, &missed)? {
        for t in [1e-12, 1e-10, 1e-8, 1e-6] {
            let qt: Vec<f64> = q.iter().zip(&qr).map(|(a, c)| (1.0 - t) * a + t * c).collect();
            let pt: Vec<f64> = p.iter().zip(&pr).map(|(a, c)| (1.0 - t) * a + t * c).collect();
            if let Some(v) = dual_objective(pair, y, &qt, &pt)?.finite() {
                if (v - sol.objective).abs() <= 1e-7 * (1.0 + v.abs()) {
                    return Ok(Some((qt, pt)));
                }
            }
        }
    }
    Err(Error::solver(format!(
        "piecewise dual LP optimum {} is not attained under the absolute-continuity convention",
        sol.objective
    )))
}

/// Pair in the face with `Q <= K P` on the support, `y Q >= s_last P`, and the
/// largest common mass of `P` on the `missed` outcomes. `None` when that mass
/// cannot be made positive.
fn interior_reference(
    y: f64,
    fq: &[Vec<f64>],
    fp: &[Vec<f64>],
    support: &[bool],
    s_last: f64,
    missed: &[usize],
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    const RATIO_CAP: f64 = 1e6;
    let mut lp = LinearProgram::maximize();
    let alpha: Vec<usize> = fq.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
    let beta: Vec<usize> = fp.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
    let tau = lp.add_var(1.0, 0.0, 1.0);
    lp.add_constraint(alpha.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    lp.add_constraint(beta.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    let row = |cq: f64, cp: f64, w: usize| -> Vec<(usize, f64)> {
        let mut r = Vec::new();
        for (jq, &j) in alpha.iter().enumerate() {
            if fq[jq][w] != 0.0 && cq != 0.0 {
                r.push((j, cq * fq[jq][w]));
            }
        }
        for (k, &j) in beta.iter().enumerate() {
            if fp[k][w] != 0.0 && cp != 0.0 {
                r.push((j, cp * fp[k][w]));
            }
        }
        r
    };
    for w in (0..support.len()).filter(|&w| support[w]) {
        let r = row(-1.0, RATIO_CAP, w);
        if !r.is_empty() {
            lp.add_constraint(r, Relation::Ge, 0.0);
        }
        if s_last > 0.0 {
            let r = row(y, -s_last, w);
            if !r.is_empty() {
                lp.add_constraint(r, Relation::Ge, 0.0);
            }
        }
    }
    for &w in missed {
        let mut r = row(0.0, 1.0, w);
        r.push((tau, -1.0));
        lp.add_constraint(r, Relation::Ge, 0.0);
    }
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(crate::numerics::lp::LpError::Infeasible) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if !missed.is_empty() && sol.x[tau] <= 1e-12 {
        return Ok(None);
    }
    let a: Vec<f64> = alpha.iter().map(|&j| sol.x[j].max(0.0)).collect();
    let b: Vec<f64> = beta.iter().map(|&j| sol.x[j].max(0.0)).collect();
    Ok(Some((simplex::combine(&a, fq), simplex::combine(&b, fp))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::instance::FiniteMarketInstance;
    use crate::finite::polar::{build_polar, SupportMode};
    use crate::UtilityFunction;

    fn binomial(priors: Vec<Vec<f64>>) -> (PolarMeasureSet, PriorPolytope) {
        let market = FiniteMarketInstance::single_period(vec!["u".into(), "d".into()], vec![vec![1.0], vec![-1.0]]).unwrap();
        let priors = PriorPolytope::new(priors).unwrap();
        (build_polar(&market, &priors, SupportMode::EquivalentClass).unwrap(), priors)
    }

    #[test]
    fn log_binomial_values() {
        let log = ConjugatePair::new(UtilityFunction::log());
        let (d, p) = binomial(vec![vec![0.5, 0.5]]);
        let s = dual_solve(&d, &p, &log, 1.0).unwrap();
        assert!((s.value.to_f64() + 1.0).abs() < 1e-14);

        let (d, p) = binomial(vec![vec![2.0 / 3.0, 1.0 / 3.0]]);
        let s = dual_solve(&d, &p, &log, 1.0).unwrap();
        let kl = 2.0 / 3.0 * (4.0f64 / 3.0).ln() + 1.0 / 3.0 * (2.0f64 / 3.0).ln();
        assert!((s.value.to_f64() - (-1.0 + kl)).abs() < 1e-12);
    }

    #[test]
    fn two_priors_pick_the_balanced_mixture() {
        let log = ConjugatePair::new(UtilityFunction::log());
        let (d, p) = binomial(vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]);
        let s = dual_solve(&d, &p, &log, 1.0).unwrap();
        assert!((s.value.to_f64() + 1.0).abs() < 1e-10, "{}", s.value);
        assert!((s.p[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn objective_conventions() {
        let log = ConjugatePair::new(UtilityFunction::log());
        assert_eq!(dual_objective(&log, 1.0, &[0.5, 0.5], &[1.0, 0.0]).unwrap(), ExtReal::PosInf);
        assert_eq!(dual_objective(&log, 1.0, &[1.0, 0.0], &[0.5, 0.5]).unwrap(), ExtReal::PosInf);
        assert_eq!(dual_objective(&log, 1.0, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), ExtReal::Finite(-1.0));
        let exp = ConjugatePair::new(UtilityFunction::exponential(1.0).unwrap());
        assert_eq!(dual_objective(&exp, 1.0, &[1.0, 0.0], &[0.5, 0.5]).unwrap(), ExtReal::Finite(-0.5));
    }

    #[test]
    fn piecewise_dual_matches_direct_conjugate() {
        let u = UtilityFunction::piecewise_linear(vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.0], 0.0).unwrap();
        let pair = ConjugatePair::new(u);
        let (d, p) = binomial(vec![vec![0.5, 0.5]]);
        let s = dual_solve(&d, &p, &pair, 0.7).unwrap();
        assert!((s.value.to_f64() - pair.eval(0.7).unwrap().to_f64()).abs() < 1e-12);
    }
}

use serde::Serialize;

use super::instance::PriorPolytope;
use super::polar::PolarMeasureSet;
use super::primal::worst_case_utility;
use crate::{Error, Result, UtilityFunction};

/// Largest number of grid claims the oracle will evaluate.
pub const MAX_ORACLE_POINTS: u64 = 200_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceReport {
    pub x: f64,
    pub step: f64,
    /// Best worst-case utility over the grid claims.
    pub value: f64,
    pub claim: Vec<f64>,
    pub evaluated: u64,
}

/// Maximises `min_k E_{P_k}[U(g)]` over claims on the grid `step * N` at the
/// charged outcomes, subject to `E_Q[g] <= x` at every polar vertex.
///
/// The last charged coordinate is set to its largest feasible grid value,
/// which is optimal because `U` is nondecreasing; the other coordinates are
/// enumerated depth-first with pruning on the partial pairings.
pub fn brute_force_primal(
    polar: &PolarMeasureSet,
    priors: &PriorPolytope,
    utility: &UtilityFunction,
    x: f64,
    step: f64,
) -> Result<BruteForceReport> {
    if !(x > 0.0 && x.is_finite() && step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("need positive budget and step, got x = {x}, step = {step}")));
    }
    let qs = polar
        .vertices()
        .ok_or_else(|| Error::solver("polar vertices unavailable (too many bases)"))?;
    if qs.is_empty() {
        return Err(Error::invalid("polar set is empty"));
    }
    let atoms: Vec<usize> = priors
        .union_support()
        .iter()
        .enumerate()
        .filter_map(|(w, &c)| c.then_some(w))
        .collect();
    let mut caps = Vec::with_capacity(atoms.len());
    for &w in &atoms {
        let top = qs.iter().map(|q| q[w]).fold(0.0, f64::max);
        if top <= 0.0 {
            return Err(Error::Unbounded(format!(
                "no polar measure charges outcome {w}, so claims there are unbounded"
            )));
        }
        caps.push(((x / top) / step + 1e-9).floor() as u64);
    }
    let free = &caps[..caps.len() - 1];
    let points: f64 = free.iter().map(|&c| (c + 1) as f64).product();
    if points > MAX_ORACLE_POINTS as f64 {
        return Err(Error::invalid(format!(
            "oracle grid has up to {points:.3e} points, above the limit {MAX_ORACLE_POINTS}"
        )));
    }

    struct Search<'a> {
        qs: &'a [Vec<f64>],
        atoms: &'a [usize],
        caps: &'a [u64],
        priors: &'a PriorPolytope,
        utility: &'a UtilityFunction,
        x: f64,
        step: f64,
        claim: Vec<f64>,
        best: Option<(f64, Vec<f64>)>,
        evaluated: u64,
    }

    impl Search<'_> {
        fn descend(&mut self, depth: usize, partial: &[f64]) {
            let w = self.atoms[depth];
            if depth + 1 == self.atoms.len() {
                let mut top = self.caps[depth];
                for (q, &s) in self.qs.iter().zip(partial) {
                    if q[w] > 0.0 {
                        let room = ((self.x - s) / q[w] / self.step + 1e-9).floor();
                        top = top.min(room.max(0.0) as u64);
                    }
                }
                self.claim[w] = top as f64 * self.step;
                self.evaluated += 1;
                let v = worst_case_utility(self.priors, self.utility, &self.claim);
                if self.best.as_ref().map_or(true, |b| v > b.0) {
                    self.best = Some((v, self.claim.clone()));
                }
                return;
            }
            let mut next = partial.to_vec();
            for i in 0..=self.caps[depth] {
                let g = i as f64 * self.step;
                let mut feasible = true;
                for ((n, &s), q) in next.iter_mut().zip(partial).zip(self.qs) {
                    *n = s + q[w] * g;
                    if *n > self.x * (1.0 + 1e-12) {
                        feasible = false;
                    }
                }
                if !feasible {
                    break;
                }
                self.claim[w] = g;
                self.descend(depth + 1, &next);
            }
            self.claim[w] = 0.0;
        }
    }

    let mut search = Search {
        qs,
        atoms: &atoms,
        caps: &caps,
        priors,
        utility,
        x,
        step,
        claim: vec![0.0; priors.dim()],
        best: None,
        evaluated: 0,
    };
    search.descend(0, &vec![0.0; qs.len()]);
    let (value, claim) = search.best.expect("the zero claim is always feasible");
    Ok(BruteForceReport {
        x,
        step,
        value,
        claim,
        evaluated: search.evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::instance::FiniteMarketInstance;
    use crate::finite::polar::{build_polar, SupportMode};

    #[test]
    fn binomial_log_grid_optimum() {
        let market = FiniteMarketInstance::single_period(vec!["u".into(), "d".into()], vec![vec![1.0], vec![-1.0]]).unwrap();
        let priors = PriorPolytope::new(vec![vec![0.5, 0.5]]).unwrap();
        let polar = build_polar(&market, &priors, SupportMode::EquivalentClass).unwrap();
        let r = brute_force_primal(&polar, &priors, &UtilityFunction::log(), 1.0, 0.01).unwrap();
        // Claims (g, 2 - g); the optimum g = 1 lies on the grid.
        assert!(r.value.abs() < 1e-12);
        assert!((r.claim[0] - 1.0).abs() < 1e-9);
    }
}

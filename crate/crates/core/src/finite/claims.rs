use serde::Serialize;

use super::instance::{FiniteMarketInstance, PriorPolytope};
use super::polar::{PolarMeasureSet, SupportMode};
use crate::numerics::lp::{LinearProgram, LpError, Relation};
use crate::numerics::polytope::basic_feasible_solutions;
use crate::{Error, Result};

/// Bound used for claims on outcomes that no polar measure charges, where
/// the candidate polytope would otherwise be unbounded.
pub const UNCHARGED_CLAIM_CAP: f64 = 1e3;

/// Relative slack allowed on superhedging prices.
const PRICE_TOL: f64 = 1e-9;

/// The claim set `C = {g >= 0 : g <= 1 + (H.S)_T, (H.S)_t >= -c}` for a
/// unit budget, compared on the outcomes selected by the support mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimCone {
    market: FiniteMarketInstance,
    compared: Vec<bool>,
    generators: Vec<Vec<f64>>,
}

/// Cheapest superhedge of a claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Superhedge {
    /// Smallest initial capital that dominates the claim; `-inf` when the
    /// market allows unbounded riskless profit.
    pub price: f64,
    /// Direction weights of a strategy attaining the price.
    pub strategy: Vec<f64>,
}

impl ClaimCone {
    /// With `explicit = None` the generators are the constant claim 1 and
    /// `1 +- s gain` for every elementary direction, where `s` is the largest
    /// scale that keeps the claim nonnegative and admissible.
    pub fn new(
        market: &FiniteMarketInstance,
        priors: &PriorPolytope,
        mode: SupportMode,
        explicit: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let m = market.num_outcomes();
        let compared = match mode {
            SupportMode::EquivalentClass => priors.union_support(),
            SupportMode::AllMeasures => vec![true; m],
        };
        let generators = match explicit {
            Some(g) => {
                if g.iter().any(|v| v.len() != m || v.iter().any(|x| !(x.is_finite() && *x >= 0.0))) {
                    return Err(Error::invalid("claim generators must be nonnegative vectors over the outcomes"));
                }
                g
            }
            None => {
                let mut g = vec![vec![1.0; m]];
                let c = market.admissibility();
                for dir in market.directions() {
                    let peak = dir
                        .gain
                        .iter()
                        .zip(&compared)
                        .filter(|(_, &k)| k)
                        .fold(0.0f64, |a, (v, _)| a.max(v.abs()));
                    if peak == 0.0 {
                        continue;
                    }
                    let s = c.min(1.0) / peak;
                    for sign in [1.0, -1.0] {
                        g.push(dir.gain.iter().map(|v| 1.0 + sign * s * v).collect());
                    }
                }
                g
            }
        };
        Ok(ClaimCone {
            market: market.clone(),
            compared,
            generators,
        })
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// Outcomes on which claims are compared.
    pub fn compared(&self) -> &[bool] {
        &self.compared
    }

    pub fn market(&self) -> &FiniteMarketInstance {
        &self.market
    }

    /// Adds the admissibility rows `(H.S)_t >= -floor` for every period and
    /// compared outcome, skipping duplicates.
    pub(crate) fn add_admissibility_rows(&self, lp: &mut LinearProgram, h: &[usize], floor: Option<(usize, f64)>) {
        let dirs = self.market.directions();
        let mut seen: Vec<Vec<(usize, u64)>> = Vec::new();
        for t in 1..=self.market.num_periods() {
            for (w, _) in self.compared.iter().enumerate().filter(|(_, &k)| k) {
                let coeffs: Vec<(usize, f64)> = dirs
                    .iter()
                    .zip(h)
                    .filter(|(d, _)| d.period < t && d.gain[w] != 0.0)
                    .map(|(d, &j)| (j, d.gain[w]))
                    .collect();
                if coeffs.is_empty() {
                    continue;
                }
                let key: Vec<(usize, u64)> = coeffs.iter().map(|&(j, a)| (j, a.to_bits())).collect();
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                match floor {
                    // gains + floor_coeff * x >= 0
                    Some((x, scale)) => {
                        let mut row = coeffs;
                        row.push((x, scale));
                        lp.add_constraint(row, Relation::Ge, 0.0);
                    }
                    None => lp.add_constraint(coeffs, Relation::Ge, -self.market.admissibility()),
                }
            }
        }
    }

    /// `min { x : x + (H.S)_T >= claim on compared outcomes, (H.S)_t >= -c }`.
    pub fn superhedge(&self, claim: &[f64]) -> Result<Superhedge> {
        if claim.len() != self.market.num_outcomes() {
            return Err(Error::invalid("claim length does not match the outcome count"));
        }
        let mut lp = LinearProgram::minimize();
        let x = lp.add_free_var(1.0);
        let h: Vec<usize> = self.market.directions().iter().map(|_| lp.add_free_var(0.0)).collect();
        for (w, _) in self.compared.iter().enumerate().filter(|(_, &k)| k) {
            let mut row = vec![(x, 1.0)];
            for (d, &j) in self.market.directions().iter().zip(&h) {
                if d.gain[w] != 0.0 {
                    row.push((j, d.gain[w]));
                }
            }
            lp.add_constraint(row, Relation::Ge, claim[w]);
        }
        self.add_admissibility_rows(&mut lp, &h, None);
        match lp.solve() {
            Ok(sol) => Ok(Superhedge {
                price: sol.x[x],
                strategy: h.iter().map(|&j| sol.x[j]).collect(),
            }),
            Err(LpError::Unbounded) => Ok(Superhedge {
                price: f64::NEG_INFINITY,
                strategy: Vec::new(),
            }),
            Err(e) => Err(e.into()),
        }
    }

    /// Membership in `C(budget) = budget * C`.
    pub fn contains(&self, claim: &[f64], budget: f64) -> Result<bool> {
        if !(budget > 0.0) {
            return Err(Error::domain(format!("budget must be positive, got {budget}")));
        }
        if claim.iter().zip(&self.compared).any(|(&v, &k)| k && v < 0.0) {
            return Ok(false);
        }
        let scaled: Vec<f64> = claim.iter().map(|v| v / budget).collect();
        Ok(self.superhedge(&scaled)?.price <= 1.0 + PRICE_TOL)
    }

    /// A strategy with nonnegative terminal gains that are positive somewhere,
    /// if one exists.
    pub fn arbitrage_witness(&self) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut lp = LinearProgram::maximize();
        let h: Vec<usize> = self.market.directions().iter().map(|_| lp.add_free_var(0.0)).collect();
        let mut gain_vars = Vec::new();
        for (w, _) in self.compared.iter().enumerate().filter(|(_, &k)| k) {
            let gw = lp.add_var(1.0, 0.0, 1.0);
            let mut row = vec![(gw, -1.0)];
            for (d, &j) in self.market.directions().iter().zip(&h) {
                if d.gain[w] != 0.0 {
                    row.push((j, d.gain[w]));
                }
            }
            lp.add_constraint(row, Relation::Eq, 0.0);
            gain_vars.push(gw);
        }
        self.add_admissibility_rows(&mut lp, &h, None);
        let sol = lp.solve()?;
        if sol.objective <= 1e-9 {
            return Ok(None);
        }
        let strategy: Vec<f64> = h.iter().map(|&j| sol.x[j]).collect();
        let gains = self.market.terminal_gains(&strategy);
        Ok(Some((strategy, gains)))
    }
}

/// A candidate claim from the bipolar check with its superhedge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateHedge {
    pub claim: Vec<f64>,
    pub price: f64,
    pub strategy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BipolarReport {
    pub passed: bool,
    pub polar_empty: bool,
    /// Strategy and gains of an arbitrage when the polar set is empty.
    pub arbitrage_strategy: Option<Vec<f64>>,
    pub arbitrage_gains: Option<Vec<f64>>,
    /// `max_g max_{Q in D} E_Q[g] - 1` over the generators (should be <= 0).
    pub generator_excess: f64,
    /// Largest martingale-row violation over the polar of the generators.
    pub martingale_gap: f64,
    pub candidates_checked: usize,
    pub max_superhedge_price: f64,
    pub violating_claim: Option<Vec<f64>>,
    pub hedges: Vec<CandidateHedge>,
}

/// Finite-space bipolar check.
///
/// (2) The polar of the generators equals the polar of the whole claim set:
/// every polar measure prices every generator at most 1, and every measure
/// pricing the generators at most 1 satisfies the martingale equalities.
/// (3) Every nonnegative claim priced at most 1 by all polar measures is
/// superhedgeable from unit capital. The candidate set is a polytope, the
/// superhedging price is convex, so checking its vertices suffices.
pub fn verify_bipolar(cone: &ClaimCone, polar: &PolarMeasureSet) -> Result<BipolarReport> {
    let mut report = BipolarReport {
        passed: false,
        polar_empty: polar.is_empty(),
        arbitrage_strategy: None,
        arbitrage_gains: None,
        generator_excess: 0.0,
        martingale_gap: 0.0,
        candidates_checked: 0,
        max_superhedge_price: f64::NEG_INFINITY,
        violating_claim: None,
        hedges: Vec::new(),
    };
    if polar.is_empty() {
        if let Some((h, g)) = cone.arbitrage_witness()? {
            report.arbitrage_strategy = Some(h);
            report.arbitrage_gains = Some(g);
        }
        return Ok(report);
    }
    let m = cone.market.num_outcomes();
    let allowed = polar.allowed();

    // (2a) polar(C) inside polar(generators).
    for g in &cone.generators {
        let best = polar.max_pairing(g)?.expect("nonempty polar set");
        report.generator_excess = report.generator_excess.max(best - 1.0);
    }
    // (2b) polar(generators) inside polar(C).
    for row in polar.martingale_rows() {
        let scale = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        for maximize in [true, false] {
            let mut lp = if maximize {
                LinearProgram::maximize()
            } else {
                LinearProgram::minimize()
            };
            let vars: Vec<Option<usize>> = (0..m)
                .map(|w| allowed[w].then(|| lp.add_var(row[w], 0.0, f64::INFINITY)))
                .collect();
            lp.add_constraint(vars.iter().flatten().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
            for g in &cone.generators {
                let coeffs: Vec<(usize, f64)> = vars
                    .iter()
                    .zip(g)
                    .filter_map(|(v, &a)| v.filter(|_| a != 0.0).map(|j| (j, a)))
                    .collect();
                lp.add_constraint(coeffs, Relation::Le, 1.0);
            }
            let sol = lp.solve()?;
            report.martingale_gap = report.martingale_gap.max(sol.objective.abs() / scale);
        }
    }

    // (3) vertices of the candidate polytope are superhedgeable.
    let vertices = polar
        .vertices()
        .ok_or_else(|| Error::solver("polar vertices unavailable (too many bases); bipolar check (3) not run"))?;
    let cols: Vec<usize> = (0..m).filter(|&w| cone.compared[w]).collect();
    let charged: Vec<bool> = cols.iter().map(|&w| vertices.iter().any(|q| q[w] > 0.0)).collect();
    let n_c = cols.len();
    let n_u = charged.iter().filter(|&&c| !c).count();
    let n = n_c + vertices.len() + n_u;
    let mut eq = Vec::new();
    let mut rhs = Vec::new();
    for (j, q) in vertices.iter().enumerate() {
        let mut row = vec![0.0; n];
        for (k, &w) in cols.iter().enumerate() {
            row[k] = q[w];
        }
        row[n_c + j] = 1.0;
        eq.push(row);
        rhs.push(1.0);
    }
    let mut u = 0;
    for (k, &c) in charged.iter().enumerate() {
        if !c {
            let mut row = vec![0.0; n];
            row[k] = 1.0;
            row[n_c + vertices.len() + u] = 1.0;
            u += 1;
            eq.push(row);
            rhs.push(UNCHARGED_CLAIM_CAP);
        }
    }
    let candidates = basic_feasible_solutions(&eq, &rhs, super::polar::MAX_BASES)?
        .ok_or_else(|| Error::solver("candidate polytope has too many bases; bipolar check (3) not run"))?;
    let mut ok3 = true;
    for z in candidates {
        let mut claim = vec![0.0; m];
        for (k, &w) in cols.iter().enumerate() {
            claim[w] = z[k];
        }
        let hedge = cone.superhedge(&claim)?;
        report.candidates_checked += 1;
        report.max_superhedge_price = report.max_superhedge_price.max(hedge.price);
        if hedge.price > 1.0 + PRICE_TOL && ok3 {
            ok3 = false;
            report.violating_claim = Some(claim.clone());
        }
        report.hedges.push(CandidateHedge {
            claim,
            price: hedge.price,
            strategy: hedge.strategy,
        });
    }
    report.passed = ok3 && report.generator_excess <= 1e-10 && report.martingale_gap <= 1e-10;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::polar::build_polar;

    fn setup(inc: &[f64], prior: Vec<f64>) -> (ClaimCone, PolarMeasureSet) {
        let m = inc.len();
        let market = FiniteMarketInstance::single_period(
            (0..m).map(|i| format!("w{i}")).collect(),
            inc.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap();
        let priors = PriorPolytope::new(vec![prior]).unwrap();
        let polar = build_polar(&market, &priors, SupportMode::EquivalentClass).unwrap();
        let cone = ClaimCone::new(&market, &priors, SupportMode::EquivalentClass, None).unwrap();
        (cone, polar)
    }

    #[test]
    fn binomial_superhedge_and_bipolar() {
        let (cone, polar) = setup(&[1.0, -1.0], vec![0.5, 0.5]);
        let h = cone.superhedge(&[2.0, 0.0]).unwrap();
        assert!((h.price - 1.0).abs() < 1e-12);
        assert!((h.strategy[0] - 1.0).abs() < 1e-12);
        let r = verify_bipolar(&cone, &polar).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.candidates_checked, 3);
    }

    #[test]
    fn trinomial_superhedge() {
        let (cone, polar) = setup(&[2.0, 0.0, -1.0], vec![0.5, 0.3, 0.2]);
        assert!(cone.contains(&[1.5, 1.0, 0.5], 1.0).unwrap());
        assert!(cone.contains(&[3.0, 2.0, 1.0], 2.0).unwrap());
        assert!(!cone.contains(&[1.5, 1.1, 0.5], 1.0).unwrap());
        assert!(verify_bipolar(&cone, &polar).unwrap().passed);
    }

    #[test]
    fn arbitrage_is_witnessed() {
        let (cone, polar) = setup(&[1.0, 2.0], vec![0.5, 0.5]);
        let r = verify_bipolar(&cone, &polar).unwrap();
        assert!(!r.passed && r.polar_empty);
        let gains = r.arbitrage_gains.unwrap();
        assert!(gains.iter().all(|&g| g >= 0.0) && gains.iter().any(|&g| g > 0.0));
    }
}

use serde::{Deserialize, Serialize};

use super::instance::{FiniteMarketInstance, PriorPolytope};
use crate::numerics::lp::{LinearProgram, LpError, Relation};
use crate::numerics::polytope::basic_feasible_solutions;
use crate::Result;

/// Upper limit on candidate bases tried during vertex enumeration.
pub const MAX_BASES: usize = 200_000;

/// Which measures may belong to the polar set, and correspondingly on which
/// outcomes claims are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// Measures dominated by the prior set; claims are compared only on the
    /// outcomes some prior charges (quasi-sure comparison).
    #[default]
    EquivalentClass,
    /// All probability measures; claims are compared on every outcome.
    AllMeasures,
}

/// The polar set of the claim set: martingale measures on the admissible
/// support, as a constraint system plus (when affordable) its vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarMeasureSet {
    mode: SupportMode,
    allowed: Vec<bool>,
    rows: Vec<Vec<f64>>,
    vertices: Option<Vec<Vec<f64>>>,
    empty: bool,
}

impl PolarMeasureSet {
    pub fn mode(&self) -> SupportMode {
        self.mode
    }

    /// Outcomes on which members of the set may put mass.
    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    /// One martingale row per trading direction: `sum_w Q(w) row(w) = 0`.
    pub fn martingale_rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// An empty polar set means the martingale system is infeasible, which on
    /// a finite space signals an arbitrage opportunity.
    pub fn arbitrage_suspected(&self) -> bool {
        self.empty
    }

    /// Largest violation of the defining constraints by `q`.
    pub fn violation(&self, q: &[f64]) -> f64 {
        let mut v = (q.iter().sum::<f64>() - 1.0).abs();
        for (w, &qw) in q.iter().enumerate() {
            v = v.max(-qw);
            if !self.allowed[w] {
                v = v.max(qw.abs());
            }
        }
        for row in &self.rows {
            let s: f64 = row.iter().zip(q).map(|(a, b)| a * b).sum();
            v = v.max(s.abs());
        }
        v
    }

    pub fn contains(&self, q: &[f64], tol: f64) -> bool {
        q.len() == self.allowed.len() && self.violation(q) <= tol
    }

    /// The polytope as an LP over the allowed outcomes with objective
    /// `cost . Q`. Returns the LP and the variable index of each outcome.
    pub(crate) fn base_lp(&self, maximize: bool, cost: &[f64]) -> (LinearProgram, Vec<Option<usize>>) {
        let mut lp = if maximize {
            LinearProgram::maximize()
        } else {
            LinearProgram::minimize()
        };
        let vars: Vec<Option<usize>> = self
            .allowed
            .iter()
            .zip(cost)
            .map(|(&a, &c)| if a { Some(lp.add_var(c, 0.0, f64::INFINITY)) } else { None })
            .collect();
        lp.add_constraint(vars.iter().flatten().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
        for row in &self.rows {
            let coeffs: Vec<(usize, f64)> = vars
                .iter()
                .zip(row)
                .filter_map(|(v, &a)| v.filter(|_| a != 0.0).map(|j| (j, a)))
                .collect();
            if !coeffs.is_empty() {
                lp.add_constraint(coeffs, Relation::Eq, 0.0);
            }
        }
        (lp, vars)
    }

    /// `max_{Q in D} E_Q[claim]`, or `None` when the set is empty.
    pub fn max_pairing(&self, claim: &[f64]) -> Result<Option<f64>> {
        if self.empty {
            return Ok(None);
        }
        let (lp, _) = self.base_lp(true, claim);
        Ok(Some(lp.solve()?.objective))
    }
}

/// Builds the polar set of the claim set `{g : g <= 1 + (H.S)_T}`.
///
/// Testing `E_Q[1 + (H.S)_T] <= 1` against every elementary direction and its
/// negative forces `E_Q[gain] = 0` for each, i.e. the node-wise martingale
/// equalities. Vertices are enumerated as basic feasible solutions whenever
/// the number of candidate bases stays below [`MAX_BASES`].
pub fn build_polar(market: &FiniteMarketInstance, priors: &PriorPolytope, mode: SupportMode) -> Result<PolarMeasureSet> {
    let m = market.num_outcomes();
    let allowed = match mode {
        SupportMode::EquivalentClass => priors.union_support(),
        SupportMode::AllMeasures => vec![true; m],
    };
    let rows: Vec<Vec<f64>> = market.directions().iter().map(|d| d.gain.clone()).collect();
    let mut set = PolarMeasureSet {
        mode,
        allowed,
        rows,
        vertices: None,
        empty: false,
    };

    let (lp, _) = set.base_lp(false, &vec![0.0; m]);
    match lp.solve() {
        Ok(_) => {}
        Err(LpError::Infeasible) => {
            set.empty = true;
            set.vertices = Some(Vec::new());
            return Ok(set);
        }
        Err(e) => return Err(e.into()),
    }

    let cols: Vec<usize> = (0..m).filter(|&w| set.allowed[w]).collect();
    let mut eq: Vec<Vec<f64>> = set
        .rows
        .iter()
        .map(|r| cols.iter().map(|&w| r[w]).collect::<Vec<f64>>())
        .filter(|r| r.iter().any(|&a| a != 0.0))
        .collect();
    eq.push(vec![1.0; cols.len()]);
    let mut rhs = vec![0.0; eq.len()];
    *rhs.last_mut().unwrap() = 1.0;
    if let Some(vs) = basic_feasible_solutions(&eq, &rhs, MAX_BASES)? {
        let mut full: Vec<Vec<f64>> = vs
            .into_iter()
            .map(|v| {
                let mut q = vec![0.0; m];
                for (k, &w) in cols.iter().enumerate() {
                    q[w] = v[k];
                }
                q
            })
            .collect();
        full.sort_by(|a, b| a.partial_cmp(b).unwrap());
        set.empty = full.is_empty();
        set.vertices = Some(full);
    }
    Ok(set)
}

/// Outcome of the absolute-continuity check for one prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorCertificate {
    pub prior: usize,
    /// A polar measure dominated by the prior, if one exists.
    pub measure: Option<Vec<f64>>,
    /// Whether the certificate charges every outcome the prior charges.
    pub equivalent: bool,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoArbitrageReport {
    pub certificates: Vec<PriorCertificate>,
}

impl NoArbitrageReport {
    pub fn holds(&self) -> bool {
        self.certificates.iter().all(|c| c.measure.is_some())
    }

    pub fn first_violation(&self) -> Option<&PriorCertificate> {
        self.certificates.iter().find(|c| c.measure.is_none())
    }
}

/// For every prior `P`, finds `Q` in the polar set with `Q << P`, choosing the
/// one that maximises the smallest mass on the support of `P`.
pub fn check_no_arbitrage_assumption(priors: &PriorPolytope, polar: &PolarMeasureSet) -> Result<NoArbitrageReport> {
    let mut certificates = Vec::with_capacity(priors.len());
    for (k, prior) in priors.generators().iter().enumerate() {
        if polar.is_empty() {
            certificates.push(PriorCertificate {
                prior: k,
                measure: None,
                equivalent: false,
                violation: Some("polar set is empty: the martingale system is infeasible".into()),
            });
            continue;
        }
        let mut lp = LinearProgram::maximize();
        let tau = lp.add_var(1.0, f64::NEG_INFINITY, 1.0);
        let vars: Vec<Option<usize>> = prior
            .iter()
            .zip(polar.allowed())
            .map(|(&p, &a)| if p > 0.0 && a { Some(lp.add_var(0.0, 0.0, f64::INFINITY)) } else { None })
            .collect();
        lp.add_constraint(vars.iter().flatten().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
        for row in polar.martingale_rows() {
            let coeffs: Vec<(usize, f64)> = vars
                .iter()
                .zip(row)
                .filter_map(|(v, &a)| v.filter(|_| a != 0.0).map(|j| (j, a)))
                .collect();
            if !coeffs.is_empty() {
                lp.add_constraint(coeffs, Relation::Eq, 0.0);
            }
        }
        for &j in vars.iter().flatten() {
            lp.add_constraint(vec![(tau, 1.0), (j, -1.0)], Relation::Le, 0.0);
        }
        let has_vars = vars.iter().any(|v| v.is_some());
        let solved = if has_vars { lp.solve() } else { Err(LpError::Infeasible) };
        match solved {
            Ok(sol) => {
                let q: Vec<f64> = vars.iter().map(|v| v.map(|j| sol.x[j].max(0.0)).unwrap_or(0.0)).collect();
                certificates.push(PriorCertificate {
                    prior: k,
                    measure: Some(q),
                    equivalent: sol.x[tau] > 1e-12,
                    violation: None,
                });
            }
            Err(LpError::Infeasible) => certificates.push(PriorCertificate {
                prior: k,
                measure: None,
                equivalent: false,
                violation: Some(format!("no polar measure is absolutely continuous with respect to prior {k}")),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(NoArbitrageReport { certificates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(inc: &[f64]) -> FiniteMarketInstance {
        let m = inc.len();
        FiniteMarketInstance::single_period(
            (0..m).map(|i| format!("w{i}")).collect(),
            inc.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn binomial_has_single_martingale_measure() {
        let priors = PriorPolytope::new(vec![vec![0.7, 0.3]]).unwrap();
        let d = build_polar(&market(&[1.0, -1.0]), &priors, SupportMode::EquivalentClass).unwrap();
        assert_eq!(d.vertices().unwrap(), &[vec![0.5, 0.5]]);
        let cert = check_no_arbitrage_assumption(&priors, &d).unwrap();
        assert!(cert.holds());
        assert_eq!(cert.certificates[0].measure.as_ref().unwrap(), &vec![0.5, 0.5]);
    }

    #[test]
    fn trinomial_vertices() {
        let priors = PriorPolytope::new(vec![vec![0.5, 0.3, 0.2]]).unwrap();
        let d = build_polar(&market(&[2.0, 0.0, -1.0]), &priors, SupportMode::EquivalentClass).unwrap();
        let v = d.vertices().unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], vec![0.0, 1.0, 0.0]);
        assert!((v[1][0] - 1.0 / 3.0).abs() < 1e-15 && (v[1][2] - 2.0 / 3.0).abs() < 1e-15);
        for q in v {
            assert!(d.contains(q, 1e-12));
        }
        assert!((d.max_pairing(&[3.0, 0.0, 0.0]).unwrap().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn riskless_market_gives_restricted_simplex() {
        let priors = PriorPolytope::new(vec![vec![1.0, 0.0]]).unwrap();
        let eq = build_polar(&market(&[0.0, 0.0]), &priors, SupportMode::EquivalentClass).unwrap();
        assert_eq!(eq.vertices().unwrap(), &[vec![1.0, 0.0]]);
        let all = build_polar(&market(&[0.0, 0.0]), &priors, SupportMode::AllMeasures).unwrap();
        assert_eq!(all.vertices().unwrap(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let cert = check_no_arbitrage_assumption(&priors, &all).unwrap();
        assert_eq!(cert.certificates[0].measure.as_ref().unwrap(), &vec![1.0, 0.0]);
    }

    #[test]
    fn arbitrage_gives_empty_polar() {
        let priors = PriorPolytope::new(vec![vec![0.5, 0.5]]).unwrap();
        let d = build_polar(&market(&[1.0, 2.0]), &priors, SupportMode::EquivalentClass).unwrap();
        assert!(d.is_empty() && d.arbitrage_suspected());
        let cert = check_no_arbitrage_assumption(&priors, &d).unwrap();
        assert!(!cert.holds());
        assert!(cert.first_violation().unwrap().violation.is_some());
    }
}

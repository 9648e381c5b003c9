use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Price increments as stored on disk: `[outcome][asset]` for one period or
/// `[period][outcome][asset]` for a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Increments {
    SinglePeriod(Vec<Vec<f64>>),
    MultiPeriod(Vec<Vec<Vec<f64>>>),
}

/// On-disk layout of a finite market instance.
///
/// `nodes[t]` partitions the outcomes into the information cells known
/// before trading in period `t`; it may be omitted for one period.
/// `admissibility` is the floor `c` on the gains of a unit-budget strategy
/// and defaults to 1, i.e. wealth may not go negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub outcomes: Vec<String>,
    pub increments: Increments,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<Vec<Vec<usize>>>>,
    pub priors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_generators: Option<Vec<Vec<f64>>>,
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<f64>,
}

/// One elementary trading direction: hold one unit of `asset` during
/// `period` on the information cell `cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDirection {
    pub period: usize,
    pub cell: usize,
    pub asset: usize,
    /// Gain of the direction on every outcome (zero off the cell).
    pub gain: Vec<f64>,
}

/// Finite outcome space with a (possibly multi-period) tree of increments.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMarketInstance {
    outcomes: Vec<String>,
    increments: Vec<Vec<Vec<f64>>>,
    nodes: Vec<Vec<Vec<usize>>>,
    admissibility: f64,
    directions: Vec<GainDirection>,
}

impl FiniteMarketInstance {
    pub fn single_period(outcomes: Vec<String>, increments: Vec<Vec<f64>>) -> Result<Self> {
        let m = increments.len();
        Self::new(outcomes, vec![increments], vec![vec![(0..m).collect()]], 1.0)
    }

    pub fn new(
        outcomes: Vec<String>,
        increments: Vec<Vec<Vec<f64>>>,
        nodes: Vec<Vec<Vec<usize>>>,
        admissibility: f64,
    ) -> Result<Self> {
        let m = outcomes.len();
        if m < 2 {
            return Err(Error::invalid(format!("need at least two outcomes, got {m}")));
        }
        let periods = increments.len();
        if periods == 0 {
            return Err(Error::invalid("need at least one period of increments"));
        }
        let d = increments[0].first().map(|r| r.len()).unwrap_or(0);
        if d == 0 {
            return Err(Error::invalid("need at least one asset"));
        }
        for (t, inc) in increments.iter().enumerate() {
            if inc.len() != m {
                return Err(Error::invalid(format!("period {t} has {} increment rows for {m} outcomes", inc.len())));
            }
            if inc.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
                return Err(Error::invalid(format!("period {t} increments must be finite with {d} assets")));
            }
        }
        if nodes.len() != periods {
            return Err(Error::invalid(format!("{} node partitions for {periods} periods", nodes.len())));
        }
        let mut cell_of: Vec<Vec<usize>> = Vec::with_capacity(periods);
        for (t, part) in nodes.iter().enumerate() {
            let mut owner = vec![usize::MAX; m];
            for (k, cell) in part.iter().enumerate() {
                if cell.is_empty() {
                    return Err(Error::invalid(format!("period {t} has an empty cell")));
                }
                for &w in cell {
                    if w >= m || owner[w] != usize::MAX {
                        return Err(Error::invalid(format!("period {t} cells do not partition the outcomes")));
                    }
                    owner[w] = k;
                }
            }
            if owner.contains(&usize::MAX) {
                return Err(Error::invalid(format!("period {t} cells leave an outcome unreachable")));
            }
            cell_of.push(owner);
        }
        if nodes[0].len() != 1 {
            return Err(Error::invalid("the first period must have a single root cell"));
        }
        for t in 1..periods {
            // Later partitions refine earlier ones.
            for cell in &nodes[t] {
                let parent = cell_of[t - 1][cell[0]];
                if cell.iter().any(|&w| cell_of[t - 1][w] != parent) {
                    return Err(Error::invalid(format!("period {t} cells do not refine period {}", t - 1)));
                }
            }
            // Increments of period t-1 are known at time t.
            for cell in &nodes[t] {
                let first = &increments[t - 1][cell[0]];
                if cell.iter().any(|&w| &increments[t - 1][w] != first) {
                    return Err(Error::invalid(format!(
                        "period {} increments are not constant on the cells of period {t}",
                        t - 1
                    )));
                }
            }
        }
        if !(admissibility.is_finite() && admissibility > 0.0) {
            return Err(Error::invalid(format!("admissibility floor must be positive, got {admissibility}")));
        }
        let mut directions = Vec::new();
        for (t, part) in nodes.iter().enumerate() {
            for (k, cell) in part.iter().enumerate() {
                for a in 0..d {
                    let mut gain = vec![0.0; m];
                    for &w in cell {
                        gain[w] = increments[t][w][a];
                    }
                    directions.push(GainDirection {
                        period: t,
                        cell: k,
                        asset: a,
                        gain,
                    });
                }
            }
        }
        Ok(FiniteMarketInstance {
            outcomes,
            increments,
            nodes,
            admissibility,
            directions,
        })
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn num_assets(&self) -> usize {
        self.increments[0][0].len()
    }

    pub fn num_periods(&self) -> usize {
        self.increments.len()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn increments(&self) -> &[Vec<Vec<f64>>] {
        &self.increments
    }

    pub fn nodes(&self) -> &[Vec<Vec<usize>>] {
        &self.nodes
    }

    pub fn admissibility(&self) -> f64 {
        self.admissibility
    }

    /// Elementary trading directions; a strategy is a real weight on each.
    pub fn directions(&self) -> &[GainDirection] {
        &self.directions
    }

    /// Terminal gains `(H . S)_T` of a strategy given by direction weights.
    pub fn terminal_gains(&self, h: &[f64]) -> Vec<f64> {
        self.gains_until(h, self.num_periods())
    }

    /// Cumulative gains `(H . S)_t` after `t` periods.
    pub fn gains_until(&self, h: &[f64], t: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.num_outcomes()];
        for (dir, &w) in self.directions.iter().zip(h) {
            if dir.period < t && w != 0.0 {
                for (gi, di) in g.iter_mut().zip(&dir.gain) {
                    *gi += w * di;
                }
            }
        }
        g
    }

    /// Largest absolute increment over all periods, outcomes and assets.
    pub fn max_abs_increment(&self) -> f64 {
        self.increments
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Convex hull of finitely many probability vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PriorPolytope {
    generators: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for PriorPolytope {
    type Error = Error;

    fn try_from(g: Vec<Vec<f64>>) -> Result<Self> {
        PriorPolytope::new(g)
    }
}

impl From<PriorPolytope> for Vec<Vec<f64>> {
    fn from(p: PriorPolytope) -> Self {
        p.generators
    }
}

impl PriorPolytope {
    pub fn new(generators: Vec<Vec<f64>>) -> Result<Self> {
        let m = match generators.first() {
            Some(g) => g.len(),
            None => return Err(Error::invalid("prior set needs at least one generator")),
        };
        for (k, g) in generators.iter().enumerate() {
            if g.len() != m {
                return Err(Error::invalid(format!("prior {k} has length {} instead of {m}", g.len())));
            }
            if g.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(format!("prior {k} has a negative or non-finite entry")));
            }
            let s: f64 = g.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::invalid(format!("prior {k} sums to {s}, not 1")));
            }
        }
        Ok(PriorPolytope { generators })
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators[0].len()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn support(&self, k: usize) -> Vec<bool> {
        self.generators[k].iter().map(|&p| p > 0.0).collect()
    }

    /// Atoms charged by at least one generator.
    pub fn union_support(&self) -> Vec<bool> {
        (0..self.dim())
            .map(|w| self.generators.iter().any(|g| g[w] > 0.0))
            .collect()
    }

    /// True when every generator charges the same atoms.
    pub fn supports_agree(&self) -> bool {
        (1..self.len()).all(|k| self.support(k) == self.support(0))
    }
}

/// A market, a prior set and a budget, as loaded from an instance file.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProblem {
    pub market: FiniteMarketInstance,
    pub priors: PriorPolytope,
    pub claim_generators: Option<Vec<Vec<f64>>>,
    pub budget: f64,
}

impl FiniteProblem {
    pub fn from_file_data(file: InstanceFile) -> Result<Self> {
        let m = file.outcomes.len();
        let (increments, nodes) = match file.increments {
            Increments::SinglePeriod(inc) => {
                let nodes = file.nodes.unwrap_or_else(|| vec![vec![(0..m).collect()]]);
                (vec![inc], nodes)
            }
            Increments::MultiPeriod(inc) => {
                let nodes = file
                    .nodes
                    .ok_or_else(|| Error::invalid("multi-period increments need a nodes partition per period"))?;
                (inc, nodes)
            }
        };
        let market = FiniteMarketInstance::new(file.outcomes, increments, nodes, file.admissibility.unwrap_or(1.0))?;
        let priors = PriorPolytope::new(file.priors)?;
        if priors.dim() != m {
            return Err(Error::invalid(format!("priors have {} entries for {m} outcomes", priors.dim())));
        }
        if let Some(gens) = &file.claim_generators {
            if gens.iter().any(|g| g.len() != m || g.iter().any(|v| !(v.is_finite() && *v >= 0.0))) {
                return Err(Error::invalid("claim generators must be nonnegative vectors over the outcomes"));
            }
        }
        if !(file.budget.is_finite() && file.budget > 0.0) {
            return Err(Error::invalid(format!("budget must be positive, got {}", file.budget)));
        }
        Ok(FiniteProblem {
            market,
            priors,
            claim_generators: file.claim_generators,
            budget: file.budget,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_data(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

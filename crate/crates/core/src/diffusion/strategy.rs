use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::paths::PathBatch;
use crate::numerics::stats::MeanEstimate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Constant number of units of each asset.
    Holdings { units: Vec<f64> },
    /// Units held over each grid step; one row per step.
    StepFunction { units: Vec<Vec<f64>> },
    /// `units` on `(0, tau]`, `tau` the first grid time at which some
    /// coordinate of `S - S_0` reaches `band` in absolute value.
    StoppedBand { units: Vec<f64>, band: f64 },
    /// Wealth-proportional holdings `H = pi X` from initial wealth `x`, stepped
    /// exactly in log-wealth so that wealth stays positive.
    Proportional { pi: Vec<f64>, x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: StrategyKind,
    /// Gains must stay at or above `-floor`.
    pub floor: f64,
}

impl StrategySpec {
    pub fn holdings(name: impl Into<String>, units: Vec<f64>, floor: f64) -> Self {
        StrategySpec {
            name: name.into(),
            kind: StrategyKind::Holdings { units },
            floor,
        }
    }

    pub fn stopped_band(name: impl Into<String>, units: Vec<f64>, band: f64, floor: f64) -> Self {
        StrategySpec {
            name: name.into(),
            kind: StrategyKind::StoppedBand { units, band },
            floor,
        }
    }

    pub fn proportional(name: impl Into<String>, pi: Vec<f64>, x: f64) -> Self {
        StrategySpec {
            name: name.into(),
            kind: StrategyKind::Proportional { pi, x },
            floor: x,
        }
    }

    fn check(&self, batch: &PathBatch) -> Result<()> {
        let d = batch.dim;
        let bad_dim = |v: &[f64]| v.len() != d;
        let ok = match &self.kind {
            StrategyKind::Holdings { units } => !bad_dim(units),
            StrategyKind::StepFunction { units } => units.len() == batch.steps && units.iter().all(|u| !bad_dim(u)),
            StrategyKind::StoppedBand { units, band } => !bad_dim(units) && *band > 0.0,
            StrategyKind::Proportional { pi, x } => !bad_dim(pi) && *x > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("strategy {} does not fit the batch", self.name)))
        }
    }

    /// Gains process `(H . S)` at every grid time of path `m`.
    pub fn gains_path(&self, batch: &PathBatch, m: usize) -> Vec<f64> {
        let d = batch.dim;
        let p = batch.path(m);
        let dt = batch.dt();
        let mut out = Vec::with_capacity(batch.steps + 1);
        out.push(0.0);
        let mut g = 0.0;
        let mut stopped = false;
        let mut log_wealth = 0.0;
        for n in 0..batch.steps {
            let ds = |i: usize| p[(n + 1) * d + i] - p[n * d + i];
            match &self.kind {
                StrategyKind::Holdings { units } => {
                    g += (0..d).map(|i| units[i] * ds(i)).sum::<f64>();
                }
                StrategyKind::StepFunction { units } => {
                    g += (0..d).map(|i| units[n][i] * ds(i)).sum::<f64>();
                }
                StrategyKind::StoppedBand { units, band } => {
                    if !stopped {
                        g += (0..d).map(|i| units[i] * ds(i)).sum::<f64>();
                        stopped = (0..d).any(|i| (p[(n + 1) * d + i] - p[i]).abs() >= *band);
                    }
                }
                StrategyKind::Proportional { pi, x } => {
                    if n == 0 {
                        log_wealth = x.ln();
                    }
                    let c = &batch.step_characteristics(n).c;
                    let quad: f64 = (0..d).map(|i| (0..d).map(|j| pi[i] * c[i][j] * pi[j]).sum::<f64>()).sum();
                    log_wealth += (0..d).map(|i| pi[i] * ds(i)).sum::<f64>() - 0.5 * quad * dt;
                    g = log_wealth.exp() - x;
                }
            }
            out.push(g);
        }
        out
    }

    pub fn terminal_gains(&self, batch: &PathBatch) -> Result<Vec<f64>> {
        self.check(batch)?;
        Ok((0..batch.paths)
            .into_par_iter()
            .map(|m| *self.gains_path(batch, m).last().unwrap())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub strategy: String,
    pub floor: f64,
    /// Paths whose gains go below `-floor` at some grid time.
    pub violating_paths: usize,
    /// Grid points, over all paths, with gains below `-floor`.
    pub violating_points: usize,
    pub min_gain: f64,
    pub admissible: bool,
}

pub fn admissibility_audit(spec: &StrategySpec, batch: &PathBatch) -> Result<AdmissibilityReport> {
    spec.check(batch)?;
    let per_path: Vec<(usize, f64)> = (0..batch.paths)
        .into_par_iter()
        .map(|m| {
            let g = spec.gains_path(batch, m);
            let bad = g.iter().filter(|&&v| v < -spec.floor).count();
            (bad, g.iter().copied().fold(f64::INFINITY, f64::min))
        })
        .collect();
    let violating_paths = per_path.iter().filter(|(b, _)| *b > 0).count();
    let violating_points = per_path.iter().map(|(b, _)| b).sum();
    Ok(AdmissibilityReport {
        strategy: spec.name.clone(),
        floor: spec.floor,
        violating_paths,
        violating_points,
        min_gain: per_path.iter().map(|(_, g)| *g).fold(f64::INFINITY, f64::min),
        admissible: violating_paths == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationRow {
    pub strategy: String,
    pub gains: MeanEstimate,
    pub z: f64,
    /// `|z| <= sigmas`.
    pub consistent_with_zero: bool,
    /// `z > sigmas`: the expected gain is significantly positive, which no
    /// martingale measure allows.
    pub rejects: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub sigmas: f64,
    /// The batch was simulated with zero drift on every step.
    pub driftless_batch: bool,
    pub rows: Vec<SeparationRow>,
}

impl SeparationReport {
    pub fn all_consistent(&self) -> bool {
        self.rows.iter().all(|r| r.consistent_with_zero)
    }

    pub fn any_rejects(&self) -> bool {
        self.rows.iter().any(|r| r.rejects)
    }
}

/// Tests `E_Q[(H . S)_T] = 0` for each strategy on a batch simulated under a
/// candidate martingale measure.
pub fn martingale_separation_test(batch: &PathBatch, strategies: &[StrategySpec], sigmas: f64) -> Result<SeparationReport> {
    let mut rows = Vec::with_capacity(strategies.len());
    for s in strategies {
        let gains = MeanEstimate::from_slice(&s.terminal_gains(batch)?);
        let z = gains.z_score(0.0);
        rows.push(SeparationRow {
            strategy: s.name.clone(),
            gains,
            z,
            consistent_with_zero: z.abs() <= sigmas,
            rejects: z > sigmas,
        });
    }
    Ok(SeparationReport {
        sigmas,
        driftless_batch: batch.characteristics.iter().all(|g| g.b.iter().all(|&b| b == 0.0)),
        rows,
    })
}

/// Default suite: unit holding, a short and a long step function, and a
/// stopped band strategy.
pub fn default_suite(dim: usize, steps: usize) -> Vec<StrategySpec> {
    let ones = vec![1.0; dim];
    let half = steps / 2;
    let early: Vec<Vec<f64>> = (0..steps).map(|n| if n < half.max(1) { ones.clone() } else { vec![0.0; dim] }).collect();
    let alternating: Vec<Vec<f64>> = (0..steps).map(|n| vec![if n % 2 == 0 { 2.0 } else { 0.5 }; dim]).collect();
    vec![
        StrategySpec::holdings("unit", ones.clone(), 1.0),
        StrategySpec {
            name: "early_half".into(),
            kind: StrategyKind::StepFunction { units: early },
            floor: 1.0,
        },
        StrategySpec {
            name: "alternating".into(),
            kind: StrategyKind::StepFunction { units: alternating },
            floor: 1.0,
        },
        StrategySpec::stopped_band("stopped_band", ones, 0.1, 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::paths::{simulate_paths, SimulationSpec};

    #[test]
    fn zero_holding_never_violates() {
        let batch = simulate_paths(&SimulationSpec::scalar(0.0, 0.04, 1.0, 20, 500, 1)).unwrap();
        let r = admissibility_audit(&StrategySpec::holdings("zero", vec![0.0], 0.0), &batch).unwrap();
        assert_eq!(r.violating_points, 0);
    }

    #[test]
    fn proportional_wealth_stays_positive() {
        let batch = simulate_paths(&SimulationSpec::scalar(0.05, 0.04, 1.0, 50, 2000, 2)).unwrap();
        let r = admissibility_audit(&StrategySpec::proportional("pi1", vec![1.0], 1.0), &batch).unwrap();
        assert!(r.admissible);
        assert!(r.min_gain > -1.0);
    }

    #[test]
    fn leverage_violates() {
        let batch = simulate_paths(&SimulationSpec::scalar(0.0, 0.09, 1.0, 50, 2000, 3)).unwrap();
        let r = admissibility_audit(&StrategySpec::holdings("lev", vec![1e3], 1.0), &batch).unwrap();
        assert!(!r.admissible && r.violating_paths > 0);
    }
}

use std::path::PathBuf;

use robust_duality::finite::{
    brute_force_primal, duality_gap, minimax_exchange_check, reverify, verify_bipolar, FiniteModel, FiniteProblem,
    SupportMode,
};
use robust_duality::{UtilityFunction, UtilityKind};
use serde::{Deserialize, Serialize};

use super::{positive, LogGrid};
use crate::config::LoadedConfig;
use crate::error::{at_load, LabError};
use crate::registry::{Experiment, Job};
use crate::report::Row;

fn utilities(kinds: &[UtilityKind]) -> Result<Vec<UtilityFunction>, LabError> {
    if kinds.is_empty() {
        return Err(LabError::config("at least one utility is required"));
    }
    kinds
        .iter()
        .map(|k| UtilityFunction::new(k.clone()).map_err(|e| LabError::config(e.to_string())))
        .collect()
}

fn load_problem(cfg: &LoadedConfig, path: Option<PathBuf>) -> Result<FiniteProblem, LabError> {
    let path = match path {
        Some(p) => {
            let full = cfg.resolve(&p);
            if !full.is_file() {
                return Err(LabError::io(
                    &full,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "instance file not found"),
                ));
            }
            full
        }
        None => cfg.input()?,
    };
    FiniteProblem::load(&path).map_err(|e| LabError::config(format!("{}: {}", path.display(), at_load(e))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualityParams {
    pub utilities: Vec<UtilityKind>,
    /// Budgets to test; the instance budget when empty.
    pub budgets: Vec<f64>,
    pub support_mode: SupportMode,
    pub y_grid: LogGrid,
    /// Step of the brute-force grid oracle; no oracle when absent.
    pub oracle_step: Option<f64>,
    pub oracle_tolerance: f64,
}

impl Default for DualityParams {
    fn default() -> Self {
        DualityParams {
            utilities: vec![UtilityKind::Log, UtilityKind::Power { p: 0.5 }],
            budgets: vec![0.5, 1.0, 2.0],
            support_mode: SupportMode::EquivalentClass,
            y_grid: LogGrid::new(1e-3, 1e3, 61),
            oracle_step: Some(0.01),
            oracle_tolerance: 2e-3,
        }
    }
}

pub fn duality_experiment() -> Experiment {
    Experiment {
        id: "finite-duality",
        description: "finite-market duality gap with certificate re-verification and a brute-force primal oracle",
        fields: &[
            "input",
            "tolerances.duality_gap",
            "tolerances.certificate",
            "params.utilities",
            "params.budgets",
            "params.support_mode",
            "params.y_grid",
            "params.oracle_step",
            "params.oracle_tolerance",
        ],
        plan: plan_duality,
    }
}

fn plan_duality(cfg: &LoadedConfig) -> Result<Job, LabError> {
    let p: DualityParams = cfg.params()?;
    let problem = load_problem(cfg, None)?;
    let us = utilities(&p.utilities)?;
    let y = p.y_grid.values()?;
    let budgets = if p.budgets.is_empty() { vec![problem.budget] } else { p.budgets.clone() };
    for &x in &budgets {
        positive("budget", x)?;
    }
    if let Some(s) = p.oracle_step {
        positive("oracle_step", s)?;
    }
    positive("oracle_tolerance", p.oracle_tolerance)?;
    let tol = cfg.config.tolerances;
    Ok(Box::new(move || {
        let model = FiniteModel::build(problem, p.support_mode)?;
        let mut rows = Vec::new();
        for u in &us {
            for &x in &budgets {
                let case = format!("{} x={x}", u.label());
                let report = duality_gap(&model, u, x, &y, tol)?;
                let (Some(value), Some(residual)) = (report.u, report.residual) else {
                    let why = report.precondition_violation.clone().unwrap_or_else(|| "no optimum".into());
                    rows.push(Row::new("duality_gap", format!("{case} ({why})"), f64::NAN, f64::NAN, tol.duality_gap, false));
                    continue;
                };
                rows.push(Row::within("duality_gap", case.clone(), value, residual, tol.duality_gap));
                let rv = reverify(&model, u, &report)?;
                let err = rv.utility_error.max(rv.dual_error);
                rows.push(Row::new("reverify", case.clone(), rv.weak_duality_slack, err, tol.certificate, rv.passed));
                if let Some(step) = p.oracle_step {
                    let o = brute_force_primal(&model.polar, &model.problem.priors, u, x, step)?;
                    // The grid value can only fall short of the optimum.
                    let shortfall = value - o.value;
                    rows.push(Row::new(
                        "brute_force",
                        case,
                        o.value,
                        shortfall,
                        p.oracle_tolerance,
                        shortfall >= -tol.duality_gap && shortfall <= p.oracle_tolerance,
                    ));
                }
            }
        }
        Ok(rows)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    NoArbitrage,
    Arbitrage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipolarCase {
    pub path: PathBuf,
    pub expect: Expectation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BipolarParams {
    /// Instances to check; the `input` file, expected arbitrage-free, when empty.
    pub instances: Vec<BipolarCase>,
    pub support_mode: SupportMode,
}

pub fn bipolar_experiment() -> Experiment {
    Experiment {
        id: "bipolar-check",
        description: "polar of the claim generators vs the claim set, superhedging of the bipolar candidates, arbitrage witnesses",
        fields: &["input", "tolerances.lp", "params.instances", "params.support_mode"],
        plan: plan_bipolar,
    }
}

fn plan_bipolar(cfg: &LoadedConfig) -> Result<Job, LabError> {
    let p: BipolarParams = cfg.params()?;
    let mut cases = Vec::new();
    if p.instances.is_empty() {
        let path = cfg.input()?;
        cases.push((path.display().to_string(), load_problem(cfg, None)?, Expectation::NoArbitrage));
    }
    for c in &p.instances {
        cases.push((c.path.display().to_string(), load_problem(cfg, Some(c.path.clone()))?, c.expect));
    }
    let lp_tol = cfg.config.tolerances.lp;
    let mode = p.support_mode;
    Ok(Box::new(move || {
        let mut rows = Vec::new();
        for (name, problem, expect) in cases {
            let model = FiniteModel::build(problem, mode)?;
            let r = verify_bipolar(&model.cone, &model.polar)?;
            match expect {
                Expectation::NoArbitrage => {
                    let excess = r.generator_excess.max(r.martingale_gap).max(r.max_superhedge_price - 1.0);
                    rows.push(Row::new("bipolar", name, r.max_superhedge_price, excess.max(0.0), lp_tol, r.passed));
                }
                Expectation::Arbitrage => {
                    let found = r.polar_empty && r.arbitrage_strategy.is_some();
                    let gain = r.arbitrage_gains.as_ref().map_or(f64::NAN, |g| g.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                    rows.push(Row::new("arbitrage_witness", name, gain, 0.0, 0.0, found));
                }
            }
        }
        Ok(rows)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaxParams {
    pub utility: UtilityKind,
    pub multipliers: Vec<f64>,
    pub g_max: f64,
    pub step: f64,
    pub tolerance: f64,
    pub support_mode: SupportMode,
}

impl Default for MinimaxParams {
    fn default() -> Self {
        MinimaxParams {
            utility: UtilityKind::Log,
            multipliers: vec![1.0],
            g_max: 4.0,
            step: 0.01,
            tolerance: 2e-3,
            support_mode: SupportMode::EquivalentClass,
        }
    }
}

pub fn minimax_experiment() -> Experiment {
    Experiment {
        id: "minimax-exchange",
        description: "sup-inf vs inf-sup of the Lagrangian over a claim grid and the prior and polar hulls",
        fields: &[
            "input",
            "params.utility",
            "params.multipliers",
            "params.g_max",
            "params.step",
            "params.tolerance",
            "params.support_mode",
        ],
        plan: plan_minimax,
    }
}

fn plan_minimax(cfg: &LoadedConfig) -> Result<Job, LabError> {
    let p: MinimaxParams = cfg.params()?;
    let problem = load_problem(cfg, None)?;
    let u = utilities(std::slice::from_ref(&p.utility))?.remove(0);
    if p.multipliers.is_empty() {
        return Err(LabError::config("at least one multiplier is required"));
    }
    for &y in &p.multipliers {
        positive("multiplier", y)?;
    }
    positive("g_max", p.g_max)?;
    positive("step", p.step)?;
    positive("tolerance", p.tolerance)?;
    Ok(Box::new(move || {
        let model = FiniteModel::build(problem, p.support_mode)?;
        let mut rows = Vec::new();
        for &y in &p.multipliers {
            let r = minimax_exchange_check(&model.polar, &model.problem.priors, &u, y, p.g_max, p.step)?;
            let case = format!("{} y={y}", u.label());
            rows.push(Row::new(
                "minimax_gap",
                case,
                r.sup_inf,
                r.residual,
                p.tolerance,
                r.residual.abs() <= p.tolerance,
            ));
        }
        Ok(rows)
    }))
}

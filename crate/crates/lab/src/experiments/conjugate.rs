use robust_duality::conjugate::checks::{analytic_agreement, max_biconjugate_residual, shifted_convergence, v1_bound_check};
use robust_duality::{BoundKind, UtilityFunction, UtilityKind};
use serde::{Deserialize, Serialize};

use super::{positive, LogGrid};
use crate::config::LoadedConfig;
use crate::error::LabError;
use crate::registry::{Experiment, Job};
use crate::report::Row;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    Absolute,
    /// Error divided by `max(1, |V(y)|)`.
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub utilities: Vec<UtilityKind>,
    pub y_grid: LogGrid,
    pub error_mode: ErrorMode,
    pub x_grid: LogGrid,
    pub biconjugate_tolerance: f64,
    pub shifted_utilities: Vec<UtilityKind>,
    pub shift_indices: Vec<u64>,
    pub shift_grid: LogGrid,
    pub shift_tolerance: f64,
    pub bounds: Vec<BoundKind>,
    pub bound_equal_grid: LogGrid,
    pub bound_strict_grid: LogGrid,
}

impl Default for Params {
    fn default() -> Self {
        let mut utilities = vec![UtilityKind::Log];
        utilities.extend([-1.0, -0.5, 0.3, 0.5, 0.9].map(|p| UtilityKind::Power { p }));
        utilities.extend([0.5, 1.0, 2.0].map(|lambda| UtilityKind::Exponential { lambda }));
        Params {
            utilities,
            y_grid: LogGrid::new(1e-6, 1e6, 513),
            error_mode: ErrorMode::Absolute,
            x_grid: LogGrid::new(1e-2, 5.0, 100),
            biconjugate_tolerance: 1e-6,
            shifted_utilities: vec![UtilityKind::Log, UtilityKind::Power { p: 0.5 }],
            shift_indices: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000],
            shift_grid: LogGrid::new(1e-3, 5.0, 50),
            shift_tolerance: 1e-3,
            bounds: vec![BoundKind::Log, BoundKind::Power { p: 0.5 }],
            bound_equal_grid: LogGrid::new(1e-4, 1.0, 100),
            bound_strict_grid: LogGrid::new(1.01, 100.0, 100),
        }
    }
}

fn utility(kind: &UtilityKind) -> Result<UtilityFunction, LabError> {
    UtilityFunction::new(kind.clone()).map_err(|e| LabError::config(e.to_string()))
}

fn bound_label(k: &BoundKind) -> String {
    match k {
        BoundKind::Log => "log".into(),
        BoundKind::Power { p } => format!("power({p})"),
    }
}

pub fn experiment() -> Experiment {
    Experiment {
        id: "conjugate-suite",
        description: "numeric vs closed-form conjugates, biconjugate residuals, shifted-family convergence, V_1 bounds",
        fields: &[
            "tolerances.analytic",
            "params.utilities",
            "params.y_grid",
            "params.error_mode",
            "params.x_grid",
            "params.shift_indices",
            "params.shift_grid",
            "params.bounds",
        ],
        plan,
    }
}

fn plan(cfg: &LoadedConfig) -> Result<Job, LabError> {
    let p: Params = cfg.params()?;
    let tol = cfg.config.tolerances.analytic;
    let utilities: Vec<UtilityFunction> = p.utilities.iter().map(utility).collect::<Result<_, _>>()?;
    let shifted: Vec<UtilityFunction> = p.shifted_utilities.iter().map(utility).collect::<Result<_, _>>()?;
    let y = p.y_grid.values()?;
    let x = p.x_grid.values()?;
    let sy = p.shift_grid.values()?;
    let eq = p.bound_equal_grid.values()?;
    let strict = p.bound_strict_grid.values()?;
    positive("biconjugate_tolerance", p.biconjugate_tolerance)?;
    positive("shift_tolerance", p.shift_tolerance)?;
    Ok(Box::new(move || {
        let mut rows = Vec::new();
        for u in &utilities {
            let a = analytic_agreement(u, &y)?;
            let err = match p.error_mode {
                ErrorMode::Absolute => a.max_abs,
                ErrorMode::Scaled => a.max_scaled,
            };
            rows.push(Row::within("analytic_agreement", u.label(), a.max_abs, err, tol));
            let b = max_biconjugate_residual(u, &x, &y)?;
            rows.push(Row::within("biconjugate", u.label(), b, b, p.biconjugate_tolerance));
        }
        for u in &shifted {
            let s = shifted_convergence(u, &p.shift_indices, &sy)?;
            let increase = s.max_increase.max(0.0);
            rows.push(Row::within("shifted_decreasing", u.label(), s.max_increase, increase, 1e-12));
            let below = (-s.min_limit_gap).max(0.0);
            rows.push(Row::new(
                "shifted_limit",
                u.label(),
                s.max_limit_gap,
                s.max_limit_gap,
                p.shift_tolerance,
                s.max_limit_gap <= p.shift_tolerance && below <= 1e-12,
            ));
        }
        for k in &p.bounds {
            let r = v1_bound_check(*k, &eq, &strict)?;
            rows.push(Row::within("v1_bound_equality", bound_label(k), r.max_equality_error, r.max_equality_error, tol));
            rows.push(Row::new(
                "v1_bound_strict",
                bound_label(k),
                r.max_strict_margin,
                r.max_strict_margin,
                0.0,
                r.max_strict_margin < 0.0,
            ));
        }
        Ok(rows)
    }))
}

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::paths::{simulate_paths, PathBatch, SimulationSpec};
use super::theta::{market_price_of_risk, UncertaintySet};
use crate::numerics::stats::MeanEstimate;
use crate::{Error, Result};

/// Above this value of `delta * b' c^{-1} b * T` the Monte Carlo moment
/// estimator is refused.
pub const MC_MOMENT_LIMIT: f64 = 20.0;

/// Per-path terminal density of the companion martingale measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySample {
    /// `dQ/dP` evaluated on each path.
    pub dq_dp: Vec<f64>,
    /// `dP/dQ = 1 / (dQ/dP)`.
    pub dp_dq: Vec<f64>,
    pub log_dq_dp: Vec<f64>,
}

/// Log-likelihood of the law with drift `target` against the batch's own law,
/// same covariance:
/// `sum_n [ (c^{-1} h) . (dS_n - b_n dt) - h' c^{-1} h dt / 2 ]`, `h = target - b_n`.
pub fn log_likelihood_ratio(batch: &PathBatch, target: &[f64]) -> Result<Vec<f64>> {
    let d = batch.dim;
    if target.len() != d {
        return Err(Error::domain(format!("target drift does not have dimension {d}")));
    }
    let dt = batch.dt();
    let n_steps = batch.steps;
    let n_char = batch.characteristics.len();
    // Per-characteristic theta = c^{-1} h and compensator h' c^{-1} h dt / 2.
    let mut per = Vec::with_capacity(n_char);
    for g in &batch.characteristics {
        let h = DVector::from_column_slice(target) - g.b_vector();
        let chol = g
            .c_matrix()
            .cholesky()
            .ok_or_else(|| Error::domain("covariance is not positive definite"))?;
        let theta = chol.solve(&h);
        let comp = 0.5 * h.dot(&theta) * dt;
        let drift = g.b_vector() * dt;
        per.push((theta, comp, drift));
    }
    let out = (0..batch.paths)
        .into_par_iter()
        .map(|m| {
            let p = batch.path(m);
            let mut acc = 0.0;
            for n in 0..n_steps {
                let (theta, comp, drift) = &per[if n_char == 1 { 0 } else { n }];
                let mut dot = 0.0;
                for i in 0..d {
                    dot += theta[i] * (p[(n + 1) * d + i] - p[n * d + i] - drift[i]);
                }
                acc += dot - comp;
            }
            acc
        })
        .collect();
    Ok(out)
}

/// `Z_T = E(-int c^{-1} b . dM)_T` for the batch, with `M` the increments
/// minus `b dt`. Its law is the driftless companion of the batch's law.
pub fn girsanov_density(batch: &PathBatch) -> Result<DensitySample> {
    let log_dq_dp = log_likelihood_ratio(batch, &vec![0.0; batch.dim])?;
    let dq_dp: Vec<f64> = log_dq_dp.iter().map(|l| l.exp()).collect();
    let dp_dq = log_dq_dp.iter().map(|l| (-l).exp()).collect();
    Ok(DensitySample { dq_dp, dp_dq, log_dq_dp })
}

/// `int b' c^{-1} b dt` over the batch's characteristics.
pub fn integrated_risk(batch: &PathBatch) -> Result<f64> {
    let dt = batch.dt();
    let mut total = 0.0;
    for n in 0..batch.steps {
        let g = batch.step_characteristics(n);
        total += market_price_of_risk(&g.b, &g.c)? * dt;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GirsanovReport {
    pub paths: usize,
    pub integrated_risk: f64,
    pub mean_z: MeanEstimate,
    pub mean_log_z: MeanEstimate,
    /// `-int b' c^{-1} b dt / 2`.
    pub expected_log_z: f64,
    pub mean_z_squared: MeanEstimate,
    /// `exp(int b' c^{-1} b dt)`.
    pub expected_z_squared: f64,
    /// `E_P[Z_T (S_T - S_0)]` per coordinate.
    pub reweighted_drift: Vec<MeanEstimate>,
    /// `E_P[S_T - S_0]` per coordinate, for comparison.
    pub raw_drift: Vec<MeanEstimate>,
    pub sigmas: f64,
    pub martingale_ok: bool,
    pub log_mean_ok: bool,
    pub drift_removed: bool,
    pub positive: bool,
}

impl GirsanovReport {
    pub fn passed(&self) -> bool {
        self.positive && self.martingale_ok && self.log_mean_ok && self.drift_removed
    }
}

pub fn girsanov_check(batch: &PathBatch, sigmas: f64) -> Result<GirsanovReport> {
    let sample = girsanov_density(batch)?;
    let risk = integrated_risk(batch)?;
    let mean_z = MeanEstimate::from_slice(&sample.dq_dp);
    let mean_log_z = MeanEstimate::from_slice(&sample.log_dq_dp);
    let mean_z_squared = MeanEstimate::from_iter(sample.dq_dp.iter().map(|z| z * z));
    let mut reweighted = Vec::with_capacity(batch.dim);
    let mut raw = Vec::with_capacity(batch.dim);
    let changes: Vec<Vec<f64>> = (0..batch.paths).map(|m| batch.terminal_change(m)).collect();
    for i in 0..batch.dim {
        reweighted.push(MeanEstimate::from_iter(
            changes.iter().zip(&sample.dq_dp).map(|(c, z)| z * c[i]),
        ));
        raw.push(MeanEstimate::from_iter(changes.iter().map(|c| c[i])));
    }
    let expected_log_z = -0.5 * risk;
    Ok(GirsanovReport {
        paths: batch.paths,
        integrated_risk: risk,
        martingale_ok: mean_z.within(1.0, sigmas),
        log_mean_ok: mean_log_z.within(expected_log_z, sigmas),
        drift_removed: reweighted.iter().all(|e| e.within(0.0, sigmas)),
        positive: sample.dq_dp.iter().chain(&sample.dp_dq).all(|&z| z > 0.0 && z.is_finite()),
        mean_z,
        mean_log_z,
        expected_log_z,
        mean_z_squared,
        expected_z_squared: risk.exp(),
        reweighted_drift: reweighted,
        raw_drift: raw,
        sigmas,
    })
}

/// `E_Q[(dP/dQ)^delta] = exp((delta^2 - delta) T b' c^{-1} b / 2)` for constant characteristics.
pub fn density_moment_analytic(delta: f64, b: &[f64], c: &[Vec<f64>], horizon: f64) -> Result<f64> {
    Ok(log_density_moment(delta, market_price_of_risk(b, c)?, horizon).exp())
}

fn log_density_moment(delta: f64, risk: f64, horizon: f64) -> f64 {
    0.5 * (delta * delta - delta) * horizon * risk
}

/// Log of the generic bound `exp((delta^2 - delta) T d^2 K^3 / 2)`.
pub fn log_moment_bound(delta: f64, horizon: f64, dim: usize, kappa: f64) -> f64 {
    0.5 * (delta * delta - delta) * horizon * (dim * dim) as f64 * kappa.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentMc {
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMomentReport {
    pub delta: f64,
    pub generator: usize,
    pub risk: f64,
    pub analytic: f64,
    pub log_analytic: f64,
    /// Log of the generic bound; the bound itself overflows for moderate `K`.
    pub log_bound: f64,
    /// The bound is stated for `delta >= 1`.
    pub bound_applies: bool,
    pub dominated: bool,
    pub strictly_dominated: bool,
    pub mc: Option<MeanEstimate>,
    pub mc_within: Option<bool>,
    pub sigmas: f64,
}

/// Compares the analytic moment of `dP/dQ` under the companion measure with the
/// generic bound, and optionally with a Monte Carlo estimate from paths
/// simulated under `Q` (zero drift, covariance of the generator).
pub fn density_moment_check(
    delta: f64,
    theta: &UncertaintySet,
    generator: usize,
    mc: Option<MomentMc>,
    sigmas: f64,
) -> Result<DensityMomentReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    let cert = theta.require_elliptic()?;
    let g = theta
        .generators()
        .get(generator)
        .ok_or_else(|| Error::domain(format!("no generator {generator}")))?;
    let t = theta.horizon();
    let risk = market_price_of_risk(&g.b, &g.c)?;
    let log_analytic = log_density_moment(delta, risk, t);
    let log_bound = log_moment_bound(delta, t, theta.dim(), cert.kappa);
    let (mc_est, mc_within) = match mc {
        None => (None, None),
        Some(s) => {
            if delta * risk * t > MC_MOMENT_LIMIT {
                return Err(Error::MonteCarlo(format!(
                    "delta * b'c^-1 b * T = {:.3} exceeds {MC_MOMENT_LIMIT}; the estimator variance is unusable, use the analytic-only mode",
                    delta * risk * t
                )));
            }
            let spec = SimulationSpec::constant(vec![0.0; theta.dim()], g.c.clone(), t, 1, s.paths, s.seed);
            let batch = simulate_paths(&spec)?;
            let log_dp_dq = log_likelihood_ratio(&batch, &g.b)?;
            let est = MeanEstimate::from_iter(log_dp_dq.iter().map(|l| (delta * l).exp()));
            (Some(est), Some(est.within(log_analytic.exp(), sigmas)))
        }
    };
    Ok(DensityMomentReport {
        delta,
        generator,
        risk,
        analytic: log_analytic.exp(),
        log_analytic,
        log_bound,
        bound_applies: delta >= 1.0,
        dominated: log_analytic <= log_bound,
        strictly_dominated: log_analytic < log_bound,
        mc: mc_est,
        mc_within,
        sigmas,
    })
}

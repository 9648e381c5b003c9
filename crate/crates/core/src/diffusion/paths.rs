use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::theta::{Generator, UncertaintySet};
use crate::{Error, Result};

/// Paths per RNG stream. Stream `k` of the seed drives paths `[k B, (k + 1) B)`.
pub const BLOCK_PATHS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Increments drawn from `N(b dt, c dt)`; constant characteristics only.
    ExactGaussian,
    /// Step-wise characteristics from a schedule.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipMode {
    /// Characteristics outside the hull are an error.
    Strict,
    /// Characteristics outside the hull are simulated and flagged.
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    /// One generator for constant characteristics, or one per step.
    pub characteristics: Vec<Generator>,
    pub s0: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimulationSpec {
    pub fn constant(b: Vec<f64>, c: Vec<Vec<f64>>, horizon: f64, steps: usize, paths: usize, seed: u64) -> Self {
        let d = b.len();
        SimulationSpec {
            characteristics: vec![Generator::new(b, c)],
            s0: vec![0.0; d],
            horizon,
            steps,
            paths,
            seed,
            scheme: Scheme::ExactGaussian,
        }
    }

    pub fn scalar(b: f64, c: f64, horizon: f64, steps: usize, paths: usize, seed: u64) -> Self {
        Self::constant(vec![b], vec![vec![c]], horizon, steps, paths, seed)
    }
}

/// `M` paths of `N + 1` points in `R^d`, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub paths: usize,
    pub steps: usize,
    pub dim: usize,
    pub horizon: f64,
    pub characteristics: Vec<Generator>,
    pub seed: u64,
    pub scheme: Scheme,
    /// Set when some characteristic lies outside the uncertainty set.
    pub outside_hull: bool,
    values: Vec<f64>,
}

impl PathBatch {
    pub(crate) fn from_parts(
        paths: usize,
        steps: usize,
        dim: usize,
        horizon: f64,
        characteristics: Vec<Generator>,
        seed: u64,
        scheme: Scheme,
        values: Vec<f64>,
    ) -> Self {
        PathBatch {
            paths,
            steps,
            dim,
            horizon,
            characteristics,
            seed,
            scheme,
            outside_hull: false,
            values,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All points of path `m`, `(N + 1) * d` values.
    pub fn path(&self, m: usize) -> &[f64] {
        let len = (self.steps + 1) * self.dim;
        &self.values[m * len..(m + 1) * len]
    }

    pub fn point(&self, m: usize, n: usize) -> &[f64] {
        let p = self.path(m);
        &p[n * self.dim..(n + 1) * self.dim]
    }

    /// `S_T - S_0` on path `m`.
    pub fn terminal_change(&self, m: usize) -> Vec<f64> {
        let a = self.point(m, 0);
        let b = self.point(m, self.steps);
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }

    /// Characteristics in force on step `n`.
    pub fn step_characteristics(&self, n: usize) -> &Generator {
        if self.characteristics.len() == 1 {
            &self.characteristics[0]
        } else {
            &self.characteristics[n]
        }
    }
}

fn check_spec(spec: &SimulationSpec) -> Result<usize> {
    if spec.steps == 0 || spec.paths == 0 {
        return Err(Error::domain("need at least one step and one path"));
    }
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return Err(Error::domain(format!("horizon must be positive, got {}", spec.horizon)));
    }
    let n_char = spec.characteristics.len();
    match spec.scheme {
        Scheme::ExactGaussian if n_char != 1 => {
            return Err(Error::domain("exact Gaussian scheme needs constant characteristics"))
        }
        Scheme::Euler if n_char != 1 && n_char != spec.steps => {
            return Err(Error::domain(format!(
                "schedule has {n_char} entries, expected 1 or {}",
                spec.steps
            )))
        }
        _ => {}
    }
    let d = spec.s0.len();
    if d == 0 {
        return Err(Error::domain("initial value must have at least one coordinate"));
    }
    for g in &spec.characteristics {
        if g.dim() != d || g.c.len() != d || g.c.iter().any(|r| r.len() != d) {
            return Err(Error::domain(format!("characteristics do not have dimension {d}")));
        }
    }
    Ok(d)
}

/// Simulates `dS = b dt + c^{1/2} dW` on a uniform grid.
///
/// Paths are filled in blocks of [`BLOCK_PATHS`]; each block has its own
/// ChaCha8 stream of `seed`, so the batch does not depend on the thread count.
pub fn simulate_paths(spec: &SimulationSpec) -> Result<PathBatch> {
    let d = check_spec(spec)?;
    let n = spec.steps;
    let dt = spec.horizon / n as f64;
    let sq = dt.sqrt();
    let mut factors = Vec::with_capacity(spec.characteristics.len());
    for g in &spec.characteristics {
        let l = g
            .c_matrix()
            .cholesky()
            .ok_or_else(|| Error::domain("covariance is not positive definite"))?
            .l();
        factors.push((g.b_vector() * dt, l * sq));
    }
    let factors: Vec<(DVector<f64>, DMatrix<f64>)> = factors;
    let len = (n + 1) * d;
    let mut values = vec![0.0; spec.paths * len];
    values
        .par_chunks_mut(BLOCK_PATHS * len)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(block as u64);
            let mut z = DVector::<f64>::zeros(d);
            for path in chunk.chunks_mut(len) {
                path[..d].copy_from_slice(&spec.s0);
                for step in 0..n {
                    let (drift, l) = &factors[if factors.len() == 1 { 0 } else { step }];
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    let inc = drift + l * &z;
                    for i in 0..d {
                        path[(step + 1) * d + i] = path[step * d + i] + inc[i];
                    }
                }
            }
        });
    Ok(PathBatch::from_parts(
        spec.paths,
        n,
        d,
        spec.horizon,
        spec.characteristics.clone(),
        spec.seed,
        spec.scheme,
        values,
    ))
}

/// [`simulate_paths`] after checking every characteristic against `theta`.
pub fn simulate_in(theta: &UncertaintySet, spec: &SimulationSpec, mode: MembershipMode) -> Result<PathBatch> {
    let mut outside = false;
    for (k, g) in spec.characteristics.iter().enumerate() {
        if !theta.contains(&g.b, &g.c)?.member {
            if mode == MembershipMode::Strict {
                return Err(Error::domain(format!(
                    "characteristics {k} (b = {:?}, c = {:?}) lie outside the uncertainty set",
                    g.b, g.c
                )));
            }
            outside = true;
        }
    }
    let mut batch = simulate_paths(spec)?;
    batch.outside_hull = outside;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_batch() {
        let spec = SimulationSpec::scalar(0.05, 0.04, 1.0, 4, 3000, 7);
        let a = simulate_paths(&spec).unwrap();
        let b = simulate_paths(&spec).unwrap();
        assert_eq!(a.values(), b.values());
        let c = simulate_paths(&SimulationSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn strict_mode_rejects_outside_points() {
        let theta = UncertaintySet::new(vec![Generator::scalar(0.05, 0.04), Generator::scalar(0.10, 0.09)], 1.0).unwrap();
        let spec = SimulationSpec::scalar(0.2, 0.04, 1.0, 1, 10, 1);
        assert!(simulate_in(&theta, &spec, MembershipMode::Strict).is_err());
        let b = simulate_in(&theta, &spec, MembershipMode::Exploratory).unwrap();
        assert!(b.outside_hull);
    }
}

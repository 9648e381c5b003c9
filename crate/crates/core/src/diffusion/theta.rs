use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::lp::{LinearProgram, LpError, Relation};
use crate::numerics::simplex;
use crate::{Error, Result};

/// Default lower bound on the smallest eigenvalue of every covariance generator.
pub const DEFAULT_ELLIPTICITY_FLOOR: f64 = 1e-6;

/// Hull membership tolerance on the summed absolute residual.
pub const HULL_TOL: f64 = 1e-10;

/// One extreme point `(b, c)` of the uncertainty set, per unit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
}

impl Generator {
    pub fn new(b: Vec<f64>, c: Vec<Vec<f64>>) -> Self {
        Generator { b, c }
    }

    /// Scalar generator for `d = 1`.
    pub fn scalar(b: f64, c: f64) -> Self {
        Generator { b: vec![b], c: vec![vec![c]] }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn b_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b)
    }

    pub fn c_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.c[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaConfig {
    pub horizon: f64,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default = "default_floor")]
    pub ellipticity_floor: f64,
    pub generators: Vec<Generator>,
}

fn default_floor() -> f64 {
    DEFAULT_ELLIPTICITY_FLOOR
}

/// Convex hull of finitely many drift and covariance pairs over `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintySet {
    generators: Vec<Generator>,
    horizon: f64,
    dim: usize,
    ellipticity_floor: f64,
}

/// Output of [`UncertaintySet::validate`] when every generator is elliptic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityCertificate {
    /// Smallest eigenvalue over all covariance generators.
    pub lambda_min: f64,
    /// `lambda_min * Id`, dominated by every covariance in the hull.
    pub diagonal_lower_bound: Vec<Vec<f64>>,
    pub kappa: f64,
    pub per_generator_lambda_min: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ThetaValidation {
    Certified(EllipticityCertificate),
    Violated { generator: usize, min_eigenvalue: f64, floor: f64 },
}

impl ThetaValidation {
    pub fn certificate(&self) -> Option<&EllipticityCertificate> {
        match self {
            ThetaValidation::Certified(c) => Some(c),
            ThetaValidation::Violated { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullMembership {
    pub member: bool,
    /// Summed absolute residual of the best hull combination.
    pub residual: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HullSearch {
    ProjectedGradient,
    /// Dense lattice over hull weights with the given resolution.
    Grid { resolution: usize },
}

/// Minimiser of a convex function of the hull weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullMinimum {
    pub weights: Vec<f64>,
    pub value: f64,
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub iterations: usize,
    pub method: HullSearch,
}

fn symmetric_eigenvalues(c: &DMatrix<f64>) -> DVector<f64> {
    c.clone().symmetric_eigenvalues()
}

impl UncertaintySet {
    pub fn new(generators: Vec<Generator>, horizon: f64) -> Result<Self> {
        Self::with_floor(generators, horizon, DEFAULT_ELLIPTICITY_FLOOR)
    }

    pub fn with_floor(generators: Vec<Generator>, horizon: f64, ellipticity_floor: f64) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::invalid("uncertainty set needs at least one generator"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if !(ellipticity_floor > 0.0 && ellipticity_floor.is_finite()) {
            return Err(Error::invalid(format!("ellipticity floor must be positive, got {ellipticity_floor}")));
        }
        let dim = generators[0].dim();
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        for (k, g) in generators.iter().enumerate() {
            if g.b.len() != dim || g.c.len() != dim || g.c.iter().any(|r| r.len() != dim) {
                return Err(Error::invalid(format!("generator {k} does not have dimension {dim}")));
            }
            if g.b.iter().chain(g.c.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("generator {k} has a non-finite entry")));
            }
            let scale = g.c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for i in 0..dim {
                for j in 0..i {
                    if (g.c[i][j] - g.c[j][i]).abs() > 1e-12 * scale {
                        return Err(Error::invalid(format!(
                            "generator {k}: covariance is not symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(UncertaintySet {
            generators,
            horizon,
            dim,
            ellipticity_floor,
        })
    }

    pub fn from_config(cfg: ThetaConfig) -> Result<Self> {
        let set = Self::with_floor(cfg.generators, cfg.horizon, cfg.ellipticity_floor)?;
        if let Some(d) = cfg.dimension {
            if d != set.dim {
                return Err(Error::invalid(format!("declared dimension {d}, generators have {}", set.dim)));
            }
        }
        Ok(set)
    }

    /// Reads a TOML or JSON config, chosen by file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: ThetaConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text)?,
        };
        Self::from_config(cfg)
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ellipticity_floor(&self) -> f64 {
        self.ellipticity_floor
    }

    /// Same set with one more generator.
    pub fn with_generator(&self, g: Generator) -> Result<Self> {
        let mut gens = self.generators.clone();
        gens.push(g);
        Self::with_floor(gens, self.horizon, self.ellipticity_floor)
    }

    /// `1 + max_k (|b_k| + |c_k| + |c_k^{-1}|)`, Euclidean norm for `b` and
    /// spectral norms for the matrices. The bracket is convex on the hull, so
    /// its supremum is attained at a generator.
    pub fn kappa(&self) -> f64 {
        let mut worst = 0.0f64;
        for g in &self.generators {
            let eig = symmetric_eigenvalues(&g.c_matrix());
            let lmax = eig.max();
            let lmin = eig.min();
            let inv = if lmin > 0.0 { 1.0 / lmin } else { f64::INFINITY };
            worst = worst.max(g.b_vector().norm() + lmax + inv);
        }
        1.0 + worst
    }

    pub fn validate(&self) -> ThetaValidation {
        let mut per = Vec::with_capacity(self.generators.len());
        for (k, g) in self.generators.iter().enumerate() {
            let lmin = symmetric_eigenvalues(&g.c_matrix()).min();
            if !(lmin >= self.ellipticity_floor) {
                return ThetaValidation::Violated {
                    generator: k,
                    min_eigenvalue: lmin,
                    floor: self.ellipticity_floor,
                };
            }
            per.push(lmin);
        }
        let lambda_min = per.iter().copied().fold(f64::INFINITY, f64::min);
        let diag = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| if i == j { lambda_min } else { 0.0 }).collect())
            .collect();
        ThetaValidation::Certified(EllipticityCertificate {
            lambda_min,
            diagonal_lower_bound: diag,
            kappa: self.kappa(),
            per_generator_lambda_min: per,
        })
    }

    pub fn require_elliptic(&self) -> Result<EllipticityCertificate> {
        match self.validate() {
            ThetaValidation::Certified(c) => Ok(c),
            ThetaValidation::Violated { generator, min_eigenvalue, floor } => Err(Error::invalid(format!(
                "generator {generator} has smallest covariance eigenvalue {min_eigenvalue:e} below the floor {floor:e}"
            ))),
        }
    }

    /// `(b, c)` at hull weights `w`.
    pub fn point(&self, w: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim;
        let mut b = DVector::zeros(d);
        let mut c = DMatrix::zeros(d, d);
        for (g, &wk) in self.generators.iter().zip(w) {
            if wk != 0.0 {
                b += g.b_vector() * wk;
                c += g.c_matrix() * wk;
            }
        }
        (b, c)
    }

    /// Whether `(b, c)` is a convex combination of the generators, by an LP on
    /// the summed absolute residual of the drift and upper-triangular covariance entries.
    pub fn contains(&self, b: &[f64], c: &[Vec<f64>]) -> Result<HullMembership> {
        let d = self.dim;
        if b.len() != d || c.len() != d || c.iter().any(|r| r.len() != d) {
            return Err(Error::domain(format!("characteristics do not have dimension {d}")));
        }
        let mut lp = LinearProgram::minimize();
        let w: Vec<usize> = self.generators.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
        lp.add_constraint(w.iter().map(|&j| (j, 1.0)).collect(), Relation::Eq, 1.0);
        let mut equation = |coef: Vec<f64>, target: f64| {
            let plus = lp.add_var(1.0, 0.0, f64::INFINITY);
            let minus = lp.add_var(1.0, 0.0, f64::INFINITY);
            let mut row: Vec<(usize, f64)> = w.iter().zip(&coef).filter(|(_, &a)| a != 0.0).map(|(&j, &a)| (j, a)).collect();
            row.push((plus, 1.0));
            row.push((minus, -1.0));
            lp.add_constraint(row, Relation::Eq, target);
        };
        for i in 0..d {
            equation(self.generators.iter().map(|g| g.b[i]).collect(), b[i]);
        }
        for i in 0..d {
            for j in i..d {
                equation(self.generators.iter().map(|g| g.c[i][j]).collect(), c[i][j]);
            }
        }
        let sol = match lp.solve() {
            Ok(s) => s,
            Err(LpError::Infeasible) => {
                return Ok(HullMembership {
                    member: false,
                    residual: f64::INFINITY,
                    weights: vec![],
                })
            }
            Err(e) => return Err(e.into()),
        };
        let weights: Vec<f64> = w.iter().map(|&j| sol.x[j].max(0.0)).collect();
        Ok(HullMembership {
            member: sol.objective <= HULL_TOL,
            residual: sol.objective.max(0.0),
            weights,
        })
    }

    /// Market price of risk `b' c^{-1} b` at hull weights `w`, with its gradient
    /// `2 u' b_k - u' c_k u`, `u = c^{-1} b`.
    pub fn risk_premium(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (b, c) = self.point(w);
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::domain("covariance at hull point is not positive definite"))?;
        let u = chol.solve(&b);
        let value = b.dot(&u);
        let grad = self
            .generators
            .iter()
            .map(|g| 2.0 * u.dot(&g.b_vector()) - (g.c_matrix() * &u).dot(&u))
            .collect();
        Ok((value, grad))
    }

    /// Minimises a convex function of the hull weights by projected gradient
    /// descent with Armijo backtracking, started from every generator and the
    /// centroid. Falls back to a lattice over the weights when no start reaches
    /// stationarity.
    pub fn minimise<F>(&self, mut f: F) -> Result<HullMinimum>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        const MAX_ITER: usize = 5_000;
        const STATIONARY: f64 = 1e-12;
        let k = self.generators.len();
        let mut starts: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        starts.push(simplex::uniform(k));
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut iterations = 0;
        let mut converged = false;
        for start in starts {
            let mut w = start;
            let (mut fw, mut grad) = f(&w)?;
            let mut step: f64 = 1.0;
            let mut ok = false;
            for _ in 0..MAX_ITER {
                iterations += 1;
                let full: Vec<f64> = simplex::project(&w.iter().zip(&grad).map(|(a, g)| a - g).collect::<Vec<_>>());
                let measure: f64 = full.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
                if measure <= STATIONARY {
                    ok = true;
                    break;
                }
                let mut accepted = false;
                step = f64::min(step * 2.0, 1e6);
                while step > 1e-20 {
                    let trial = simplex::project(&w.iter().zip(&grad).map(|(a, g)| a - step * g).collect::<Vec<_>>());
                    let decrease: f64 = grad.iter().zip(trial.iter().zip(&w)).map(|(g, (t, a))| g * (t - a)).sum();
                    let (ft, gt) = f(&trial)?;
                    if ft <= fw + 1e-4 * decrease {
                        accepted = ft < fw || trial == w;
                        w = trial;
                        fw = ft;
                        grad = gt;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    // No descent at machine precision: stationary up to rounding.
                    ok = true;
                    break;
                }
            }
            converged |= ok;
            if ok && best.as_ref().map_or(true, |b| fw < b.1) {
                best = Some((w, fw));
            }
        }
        let (weights, value, method) = match (best, converged) {
            (Some((w, v)), true) => (w, v, HullSearch::ProjectedGradient),
            _ => {
                let resolution = match k {
                    1 => 1,
                    2 => 10_000,
                    3 => 300,
                    4 => 40,
                    _ => 10,
                };
                let mut best: Option<(Vec<f64>, f64)> = None;
                for w in simplex::lattice(k, resolution) {
                    let (v, _) = f(&w)?;
                    if best.as_ref().map_or(true, |b| v < b.1) {
                        best = Some((w, v));
                    }
                }
                let (w, v) = best.expect("lattice is nonempty");
                (w, v, HullSearch::Grid { resolution })
            }
        };
        let (b, c) = self.point(&weights);
        Ok(HullMinimum {
            value,
            b: b.iter().copied().collect(),
            c: (0..self.dim).map(|i| (0..self.dim).map(|j| c[(i, j)]).collect()).collect(),
            weights,
            iterations,
            method,
        })
    }
}

/// `b' c^{-1} b` for explicit characteristics.
pub fn market_price_of_risk(b: &[f64], c: &[Vec<f64>]) -> Result<f64> {
    let d = b.len();
    let cm = DMatrix::from_fn(d, d, |i, j| c[i][j]);
    let bv = DVector::from_column_slice(b);
    let chol = cm
        .cholesky()
        .ok_or_else(|| Error::domain("covariance is not positive definite"))?;
    Ok(bv.dot(&chol.solve(&bv)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_gen() -> UncertaintySet {
        UncertaintySet::new(vec![Generator::scalar(0.05, 0.04), Generator::scalar(0.10, 0.09)], 1.0).unwrap()
    }

    #[test]
    fn scalar_certificate() {
        let v = two_gen().validate();
        let c = v.certificate().unwrap();
        assert_eq!(c.lambda_min, 0.04);
        assert_eq!(c.diagonal_lower_bound, vec![vec![0.04]]);
        assert!((c.kappa - 26.09).abs() < 1e-12);
    }

    #[test]
    fn zero_eigenvalue_is_a_violation() {
        let s = UncertaintySet::new(vec![Generator::new(vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]])], 1.0).unwrap();
        assert!(matches!(s.validate(), ThetaValidation::Violated { generator: 0, .. }));
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let g = Generator::new(vec![0.0, 0.0], vec![vec![1.0, 0.2], vec![0.1, 1.0]]);
        assert!(UncertaintySet::new(vec![g], 1.0).is_err());
    }

    #[test]
    fn hull_membership() {
        let s = two_gen();
        assert!(s.contains(&[0.075], &[vec![0.065]]).unwrap().member);
        assert!(!s.contains(&[0.075], &[vec![0.05]]).unwrap().member);
    }

    #[test]
    fn minimiser_on_segment_is_first_generator() {
        let s = two_gen();
        let m = s.minimise(|w| s.risk_premium(w)).unwrap();
        assert!((m.value - 0.0625).abs() < 1e-14);
        assert!((m.weights[0] - 1.0).abs() < 1e-12);
        assert_eq!(m.method, HullSearch::ProjectedGradient);
    }
}

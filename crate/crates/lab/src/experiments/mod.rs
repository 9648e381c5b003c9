//! Registered experiments. Each one turns a loaded config into a job that
//! produces report rows.
pub mod conjugate;
pub mod diffusion;
pub mod finite;

use robust_duality::numerics::grid::log_grid;
use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// `points` log-uniform values on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl LogGrid {
    pub const fn new(lo: f64, hi: f64, points: usize) -> Self {
        LogGrid { lo, hi, points }
    }

    pub fn values(&self) -> Result<Vec<f64>, LabError> {
        log_grid(self.lo, self.hi, self.points).map_err(|e| LabError::config(format!("grid {self:?}: {e}")))
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<(), LabError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::config(format!("{name} must be positive, got {v}")))
    }
}

use serde::{Deserialize, Serialize};

/// Central tolerance defaults. Every report echoes the values it was run with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Analytic closed form vs numeric supremum.
    pub analytic: f64,
    /// Brute-force grid oracles.
    pub brute_force: f64,
    /// Primal feasibility of LP certificates.
    pub lp: f64,
    /// Finite-market duality gap contract.
    pub duality_gap: f64,
    /// Certificate re-verification.
    pub certificate: f64,
    /// Width of Monte Carlo acceptance bands, in standard errors.
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            analytic: 1e-8,
            brute_force: 1e-6,
            lp: 1e-10,
            duality_gap: 1e-5,
            certificate: 1e-8,
            mc_sigmas: 4.0,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            ("analytic", self.analytic),
            ("brute_force", self.brute_force),
            ("lp", self.lp),
            ("duality_gap", self.duality_gap),
            ("certificate", self.certificate),
            ("mc_sigmas", self.mc_sigmas),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(crate::Error::invalid(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

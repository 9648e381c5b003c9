//! Market with uncertain drift and covariance.
//!
//! The canonical process follows `dS = b dt + c^{1/2} dW` with `(b, c)` in the
//! convex hull of finitely many generators. Robust values are computed over
//! constant characteristics, where log and power utilities have closed forms,
//! and checked by Monte Carlo.
pub mod dump;
pub mod girsanov;
pub mod merton;
pub mod paths;
pub mod strategy;
pub mod theta;

pub use girsanov::{
    density_moment_analytic, density_moment_check, girsanov_check, girsanov_density, log_likelihood_ratio,
    log_moment_bound, DensityMomentReport, DensitySample, GirsanovReport, MomentMc,
};
pub use merton::{
    dual_value, dual_value_mc, duality_identity_check, merton_value, robust_dual_value, robust_primal_value,
    DiffusionDualityReport, RobustValue,
};
pub use paths::{simulate_in, simulate_paths, MembershipMode, PathBatch, Scheme, SimulationSpec};
pub use strategy::{
    admissibility_audit, default_suite, martingale_separation_test, AdmissibilityReport, SeparationReport,
    StrategyKind, StrategySpec,
};
pub use theta::{
    market_price_of_risk, EllipticityCertificate, Generator, HullMembership, HullMinimum, HullSearch, ThetaConfig,
    ThetaValidation, UncertaintySet,
};

//! Finite-outcome markets.

pub mod claims;
pub mod dual;
pub mod duality;
pub mod instance;
pub mod minimax;
pub mod oracle;
pub mod polar;
pub mod primal;

pub use claims::{verify_bipolar, BipolarReport, CandidateHedge, ClaimCone, Superhedge};
pub use dual::{dual_objective, dual_solve, DualSolution};
pub use duality::{default_y_grid, duality_gap, reverify, DualSample, DualityCertificate, DualityReport, FiniteModel, Reverification};
pub use instance::{FiniteMarketInstance, FiniteProblem, GainDirection, Increments, InstanceFile, PriorPolytope};
pub use minimax::{minimax_exchange_check, MinimaxReport};
pub use oracle::{brute_force_primal, BruteForceReport};
pub use polar::{build_polar, check_no_arbitrage_assumption, NoArbitrageReport, PolarMeasureSet, PriorCertificate, SupportMode};
pub use primal::{primal_solve, worst_case_utility, PrimalSolution};

//! Numerical laboratory for robust utility maximization duality.
//!
//! The crate is organised in three layers:
//!
//! - [`conjugate`]: utility functions, their Fenchel conjugates on the whole
//!   line, and the shifted families `U_n(x) = U(x + 1/n)`.
//! - [`finite`]: exact finite-outcome markets. Builds the claim set and its
//!   polar set of martingale measures, verifies the bipolar relation, and
//!   solves the robust primal and dual problems so that the duality gap can be
//!   measured directly.
//! - [`diffusion`]: a continuous-path market whose drift and covariance range
//!   over a compact convex set. Provides path simulation, Girsanov densities,
//!   density-moment bounds and closed-form robust oracles.
//!
//! Shared numerical building blocks (a dense simplex LP solver, vertex
//! enumeration, scalar minimisation, grids) live in [`numerics`].

pub mod conjugate;
pub mod diffusion;
pub mod error;
pub mod extended;
pub mod finite;
pub mod numerics;
pub mod tolerances;

pub use conjugate::{conjugate_bound_v1, BoundKind, ConjugatePair, ShiftedFamily, UtilityFunction, UtilityKind};
pub use error::{Error, Result};
pub use extended::ExtReal;
pub use tolerances::Tolerances;

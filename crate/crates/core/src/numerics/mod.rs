//! Small dense numerical building blocks shared by the solvers.

pub mod grid;
pub mod lp;
pub mod polytope;
pub mod scalar;
pub mod simplex;
pub mod stats;

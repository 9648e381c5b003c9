//! Utility functions, Fenchel conjugates and shifted families.

pub mod checks;
mod pair;
mod shifted;
mod utility;

pub use pair::{ConjugatePair, ConjugateRule};
pub use shifted::{conjugate_bound_v1, BoundKind, ShiftedFamily};
pub use utility::{UtilityFunction, UtilityKind};

//! Singular-value / eigenvalue cross-correlations of bi-unitarily invariant
//! complex random matrices with Pólya-ensemble singular values.

#[cfg(feature = "cli")]
pub mod cli;
pub mod correlations;
pub mod dd;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod quad;
pub mod specfun;
pub mod verify;

pub use dd::{Dd, Real};
pub use ensembles::{EnsembleModel, Family, KernelEval, Precision};
pub use error::{Error, Result};
pub use quad::{QuadKind, QuadratureSpec};

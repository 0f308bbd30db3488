//! A numerical laboratory for a weighted shift on l2 whose spectral
//! radius exceeds one, yet whose origin becomes exponentially stable once
//! a C1 perturbation built from nilpotent truncations of the shift is
//! switched on.
//!
//! Everything runs on finitely supported vectors with log-domain
//! coefficients, so trajectories remain exact (up to real rounding) at
//! norms like `M^(-2^40)`, far past linear-scale underflow.

pub mod certificates;
pub mod cutoff;
pub mod logspace;
pub mod nonlinear;
pub mod shift;
pub mod sparse;
pub mod trajectory;
pub mod weights;

pub use logspace::LogScalar;
pub use sparse::SparseVec;
pub use weights::Params;

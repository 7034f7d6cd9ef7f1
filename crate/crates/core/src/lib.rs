//! Numerics for non-autonomous Julia sets of the quadratic family
//! `f_l(z) = l/2 (z^2 - 1) + 1`, `|l| > 40`.
//!
//! The crate enumerates inverse-branch preimage trees fiber by fiber and
//! builds on them:
//!
//! * [`param_seq`]: parameter sequences and their sign-schedule perturbations,
//! * [`family`]: the closed-form map, its derivative and inverse branches,
//! * [`orbits`]: preimage-tree enumeration (Julia clouds, cylinder leaves,
//!   motion-paired leaves),
//! * [`transfer`]: transfer-operator sums, conformal atoms, eigenvalue ratios,
//! * [`pressure`]: finite-n pressure curves and Bowen zeros,
//! * [`dimension_oracle`]: an independent box-counting estimator,
//! * [`experiments`]: perturbation experiments (sandwich, motion, kink, gap),
//! * [`export`] and [`verify`]: CSV rendering and the bundled invariant suite.

pub mod dimension_oracle;
pub mod error;
pub mod experiments;
pub mod export;
pub mod family;
pub mod numeric;
pub mod orbits;
pub mod param_seq;
pub mod pressure;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use param_seq::{Parameters, PerturbedSequence, Sequence, SequenceSpec, Sign, SignSchedule};

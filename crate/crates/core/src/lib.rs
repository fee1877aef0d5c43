//! Online packing linear programs under the random-permutation arrival model.
//!
//! The crate provides:
//!
//! * [`instance`]: the packing LP data model, validation, row normalization,
//!   general-position noise and the generator families used in experiments.
//! * [`solver`]: an exact bounded-variable simplex returning primal and dual
//!   optima, plus a vertex-enumeration oracle for tiny instances.
//! * [`pricing`]: dual-price classification `x(p)`, budget occupations and the
//!   structural checks (sampled complementary slackness, prefix chains).
//! * [`perturb`]: the grid net of directions on the unit ℓ∞ sphere and the
//!   column snapping transform used by the robust algorithms.
//! * [`online`]: one-time pricing, the staged `(s, δ)` variant, their robust
//!   counterparts and a greedy baseline, all driven by a permutation stream.
//! * [`harness`]: Monte Carlo experiments, sweeps, the sampling-without-
//!   replacement Bernstein bound and report emission.

pub mod error;
pub mod harness;
pub mod instance;
pub mod online;
pub mod perturb;
pub mod pricing;
pub mod solver;

pub use error::{Error, Result, Violation};
pub use instance::{Family, GeneratorSpec, PackingInstance};
pub use online::{Algorithm, HaltMode, OnlineRunTrace, PermutationStream};
pub use perturb::DeltaNet;
pub use pricing::{Classification, Occupation};
pub use solver::OfflineSolution;

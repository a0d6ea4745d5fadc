//! Certificates and numerical verification for time-discounted incremental
//! input/output-to-state stability (i-IOSS) of discrete-time systems.
//!
//! The crate is organised around four layers:
//!
//! - [`comparison`]: class-K / class-KL comparison functions, the κ
//!   construction from a decrease function, summability envelopes and the
//!   sum-to-max conversion for exponentially discounted terms.
//! - [`linear`]: explicit max-form and sum-form certificates for linear
//!   systems `x⁺ = Ax + Bu + Ew`, `y = Cx + Du + Fv`, together with the
//!   dense linear algebra they need (Jacobi eigen-decomposition, PBH test,
//!   filter-Riccati observer gain, Kronecker Lyapunov solve).
//! - [`nonlinear`]: KL bounds built from user-supplied i-IOSS Lyapunov data,
//!   plus sampling-based falsification of the Lyapunov conditions.
//! - [`verifier`]: trajectory-pair and observer simulation, bound evaluation
//!   and Monte-Carlo campaigns.
//!
//! [`campaign`] wires these into the JSON scenario runners used by the CLI.

pub mod campaign;
pub mod comparison;
pub mod linear;
pub mod matrix_serde;
pub mod nonlinear;
pub mod rng;
pub mod system;
pub mod systems;
pub mod verifier;

pub use comparison::{ComparisonError, KlFn, MaxBoundFamily, ScalarFn, SumBoundFamily};
pub use linear::{CertError, LinearSystem, MaxCertificate, SumCertificate};
pub use system::{BoxDomain, Dims, Dynamics};

//! Symbolic-numeric toolkit for meromorphic affine connections on compact
//! complex surfaces of algebraic dimension one.
//!
//! The library works on the universal cover in adapted coordinates
//! `(z1, z2)` (base, fiber).  It provides:
//!
//! - [`mero`]: an immutable expression engine for meromorphic functions of
//!   `(z1, z2)` with exact symbolic differentiation and pole-aware numeric
//!   evaluation,
//! - [`elliptic`]: numerical Weierstrass functions, lattice invariants and
//!   quasi-period characters for a lattice `Z + tau Z`,
//! - [`connection`]: connection matrices, pullback under surface
//!   automorphisms, curvature, torsion and invariance residuals,
//! - [`atlas`]: deck/automorphism groups for Hopf surfaces, primary and
//!   secondary Kodaira surfaces, two-tori and principal elliptic bundles
//!   over hyperbolic curves,
//! - [`catalog`]: constructors for the classified connection families and
//!   the jet/oper automorphy machinery,
//! - [`verifier`]: residual suites producing deterministic structured
//!   reports,
//! - [`selftest`]: the end-to-end certification suite used by the CLI and
//!   the acceptance tests.

pub mod atlas;
pub mod catalog;
pub mod connection;
pub mod elliptic;
pub mod jsonspec;
pub mod mero;
pub mod sampling;
pub mod selftest;
pub mod verifier;

pub use connection::{ConnectionMatrix, SurfaceAutomorphism};
pub use elliptic::EllipticContext;
pub use mero::{EvalResult, MeroExpr};
pub use verifier::{VerificationReport, VerifyConfig};

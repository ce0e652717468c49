//! Constructors for the classified families of meromorphic affine
//! connections, plus the jet/oper automorphy machinery.
//!
//! Ground truth throughout is the invariance functional-equation system of
//! each deck group, certified downstream by the verifier; where a printed
//! matrix disagrees with the system, the constructor implements the form the
//! system forces and the divergence is logged in the verification report.

mod hopf;
mod kodaira;
mod oper;
mod secondary;

pub use hopf::{
    hopf_connection, hopf_connection_printed_g12, hopf_monomial, hopf_scaling_exponent, HopfParams,
    RationalFn,
};
pub use kodaira::{kodaira_form_i, kodaira_form_ii, solve_hck, FormIIParams, FormIParams};
pub use oper::{
    connection_from_oper, hyperbolic_deck, hyperbolic_standard_connection,
    invariant_zero_sector_instance, oper_automorphy_matrices, oper_automorphy_printed,
    oper_cocycle_residual, oper_equivariance_residual, oper_from_connection, transfer_residual,
    weight_blocks, OperMatrix, OperMembership,
};
pub use secondary::{secondary_connection, SecondaryParams, SecondaryVariant};

use num_complex::Complex64;
use thiserror::Error;

use crate::connection::ConnectionMatrix;
use crate::elliptic::EllipticContext;
use crate::mero::{MeroError, MeroExpr, C64};
use crate::sampling::{SampleBox, Sampler};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("entry `{0}` is not Lambda'-elliptic (residual {1:.3e})")]
    NotElliptic(String, f64),
    #[error("the auxiliary coefficient system is unsolvable: {0}")]
    ConstraintUnsolvable(String),
    #[error("connection is outside the codimension-three subspace (residual {0:.3e})")]
    NotInSubspace(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Mero(#[from] MeroError),
}

fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

/// Sampled residual of `delta_{lambda'}(e) = e(z1 + lambda') - e(z1)` over
/// the two lattice generators; zero means `e` lies in `E_0`.
pub fn ellipticity_residual(e: &MeroExpr, ctx: &EllipticContext, seed: u64) -> f64 {
    let mut sampler = Sampler::new(SampleBox::elliptic(ctx.tau), seed);
    let pts = match sampler.collect_valid(std::slice::from_ref(e), 12, Some(ctx)) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    let mut worst: f64 = 0.0;
    let mut measured = 0usize;
    for lp in [c(1.0, 0.0), ctx.tau] {
        for &(z1, z2) in &pts {
            let a = e.eval(z1 + lp, z2, Some(ctx));
            let b = e.eval(z1, z2, Some(ctx));
            if let (Some(a), Some(b)) = (a.value(), b.value()) {
                worst = worst.max((a - b).norm());
                measured += 1;
            }
        }
    }
    if measured < 8 {
        f64::INFINITY
    } else {
        worst
    }
}

/// Residual of the twist law `e(nu z1 + theta) = factor * e(z1)`, sampled.
pub fn twist_residual(
    e: &MeroExpr,
    nu: C64,
    theta: C64,
    factor: C64,
    ctx: &EllipticContext,
    seed: u64,
) -> f64 {
    let mut sampler = Sampler::new(SampleBox::elliptic(ctx.tau), seed);
    let pts = match sampler.collect_valid(std::slice::from_ref(e), 12, Some(ctx)) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    let mut worst: f64 = 0.0;
    let mut measured = 0usize;
    for &(z1, z2) in &pts {
        let a = e.eval(nu * z1 + theta, z2, Some(ctx));
        let b = e.eval(z1, z2, Some(ctx));
        if let (Some(a), Some(b)) = (a.value(), b.value()) {
            worst = worst.max((a - factor * b).norm());
            measured += 1;
        }
    }
    if measured < 4 {
        f64::INFINITY
    } else {
        worst
    }
}

/// Tolerance of the ellipticity pre-checks.
pub const ELLIPTIC_PRECHECK_TOL: f64 = 1e-9;

/// Builds the two-torus family member from eight `Lambda'`-elliptic entries,
/// ordered `f11, f12, f21, f22, g11, g12, g21, g22`.
pub fn torus_connection(
    ctx: &EllipticContext,
    entries: [MeroExpr; 8],
) -> Result<ConnectionMatrix, CatalogError> {
    let names = ["f11", "f12", "f21", "f22", "g11", "g12", "g21", "g22"];
    for (e, name) in entries.iter().zip(names) {
        let r = ellipticity_residual(e, ctx, 97);
        if r > ELLIPTIC_PRECHECK_TOL {
            return Err(CatalogError::NotElliptic(name.into(), r));
        }
    }
    let [f11, f12, f21, f22, g11, g12, g21, g22] = entries;
    Ok(ConnectionMatrix::new(
        [[f11, f12], [f21, f22]],
        [[g11, g12], [g21, g22]],
        Some(ctx.clone()),
    ))
}

//! Secondary Kodaira families: form II members that survive the extra cyclic
//! generator `(z1, z2) -> (nu z1 + theta, mu z2 + b z1 + c)`.
//!
//! For `nu^k = 1` the carrier spaces are the twist eigenspaces
//! `{f elliptic : f(nu z1 + theta) = nu^{-k} f(z1)}`; with `nu = -1`,
//! `theta = 0` and the quotient invariant taken to be `wp` these are the odd
//! (`k = 1`) and even (`k = 0 mod 2`) elliptic functions.  Parameters are
//! checked against their twist law numerically before use.

use crate::connection::ConnectionMatrix;
use crate::elliptic::{E1Character, EllipticContext};
use crate::mero::{MeroExpr, C64};

use super::{ellipticity_residual, twist_residual, CatalogError, ELLIPTIC_PRECHECK_TOL};
use crate::atlas::SurfaceModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondaryVariant {
    /// `mu = nu^2 = 1`, `theta = 0`: three twisted coefficients plus an
    /// untwisted corner, coupled through the character representative.
    A,
    /// The always-available form `dz1 (x) [[c11, 0], [c21, c11]]`.
    B,
}

/// Parameters of a secondary member; unused slots stay zero for variant B.
#[derive(Debug, Clone)]
pub struct SecondaryParams {
    pub gamma11: MeroExpr,
    pub gamma22: MeroExpr,
    pub delta21: MeroExpr,
    pub gamma21: MeroExpr,
}

impl SecondaryParams {
    pub fn zero() -> Self {
        SecondaryParams {
            gamma11: MeroExpr::zero(),
            gamma22: MeroExpr::zero(),
            delta21: MeroExpr::zero(),
            gamma21: MeroExpr::zero(),
        }
    }
}

fn model_data(
    model: &SurfaceModel,
) -> Result<(&EllipticContext, C64, C64, C64, C64), CatalogError> {
    match model {
        SurfaceModel::SecondaryKodaira {
            base,
            nu,
            theta,
            mu,
            b,
            ..
        } => {
            let ctx = base.elliptic_ctx().ok_or_else(|| {
                CatalogError::InvalidParam("secondary model needs an elliptic base".into())
            })?;
            Ok((ctx, *nu, *theta, *mu, *b))
        }
        _ => Err(CatalogError::InvalidParam(
            "secondary_connection needs a SecondaryKodaira model".into(),
        )),
    }
}

fn check_twist(
    name: &str,
    e: &MeroExpr,
    nu: C64,
    theta: C64,
    factor: C64,
    ctx: &EllipticContext,
) -> Result<(), CatalogError> {
    if e.is_zero() {
        return Ok(());
    }
    let r = ellipticity_residual(e, ctx, 107);
    if r > ELLIPTIC_PRECHECK_TOL {
        return Err(CatalogError::NotElliptic(name.into(), r));
    }
    let r = twist_residual(e, nu, theta, factor, ctx, 109);
    if r > ELLIPTIC_PRECHECK_TOL {
        return Err(CatalogError::InvalidParam(format!(
            "`{name}` violates its twist law (residual {r:.3e})"
        )));
    }
    Ok(())
}

/// Builds the secondary member for the given variant.
///
/// Variant A (`mu = nu^2 = 1`, `theta = 0`): with `E = c11 - c22 - d21`,
///
/// ```text
/// F = [[c11, 0], [Z E - (b/2) E + c21, c22]],   G = [[0, 0], [d21, 0]]
/// ```
///
/// where `c11, c22, d21` carry the `nu^{-1}` twist, `c21` the trivial one,
/// and `b` is the linear coefficient of the extra generator's fiber shift.
///
/// Variant B: `F = [[c11, 0], [c21, c11]]`, `G = 0`, with `c11` twisted by
/// `nu^{-1}` and `c21` by `mu/nu^2`.
pub fn secondary_connection(
    variant: SecondaryVariant,
    model: &SurfaceModel,
    params: &SecondaryParams,
) -> Result<ConnectionMatrix, CatalogError> {
    let (ctx, nu, theta, mu, b) = model_data(model)?;
    match variant {
        SecondaryVariant::A => {
            if (mu - C64::new(1.0, 0.0)).norm() > 1e-12
                || (nu * nu - C64::new(1.0, 0.0)).norm() > 1e-12
                || theta.norm() > 1e-12
            {
                return Err(CatalogError::InvalidParam(
                    "variant A needs mu = nu^2 = 1 and theta = 0".into(),
                ));
            }
            let inv_nu = C64::new(1.0, 0.0) / nu;
            check_twist("gamma11", &params.gamma11, nu, theta, inv_nu, ctx)?;
            check_twist("gamma22", &params.gamma22, nu, theta, inv_nu, ctx)?;
            check_twist("delta21", &params.delta21, nu, theta, inv_nu, ctx)?;
            check_twist(
                "gamma21",
                &params.gamma21,
                nu,
                theta,
                C64::new(1.0, 0.0),
                ctx,
            )?;
            let z = E1Character::conjugation(ctx).zexpr();
            let e = MeroExpr::sum(vec![
                params.gamma11.clone(),
                params.gamma22.neg(),
                params.delta21.neg(),
            ]);
            let f21 = MeroExpr::sum(vec![
                &z * &e,
                e.scale(-b / C64::new(2.0, 0.0)),
                params.gamma21.clone(),
            ]);
            Ok(ConnectionMatrix::new(
                [
                    [params.gamma11.clone(), MeroExpr::zero()],
                    [f21, params.gamma22.clone()],
                ],
                [
                    [MeroExpr::zero(), MeroExpr::zero()],
                    [params.delta21.clone(), MeroExpr::zero()],
                ],
                Some(ctx.clone()),
            ))
        }
        SecondaryVariant::B => {
            let inv_nu = C64::new(1.0, 0.0) / nu;
            let corner_factor = mu / (nu * nu);
            check_twist("gamma11", &params.gamma11, nu, theta, inv_nu, ctx)?;
            check_twist("gamma21", &params.gamma21, nu, theta, corner_factor, ctx)?;
            if !params.gamma22.is_zero() || !params.delta21.is_zero() {
                return Err(CatalogError::InvalidParam(
                    "variant B uses only gamma11 and gamma21".into(),
                ));
            }
            Ok(ConnectionMatrix::new(
                [
                    [params.gamma11.clone(), MeroExpr::zero()],
                    [params.gamma21.clone(), params.gamma11.clone()],
                ],
                [
                    [MeroExpr::zero(), MeroExpr::zero()],
                    [MeroExpr::zero(), MeroExpr::zero()],
                ],
                Some(ctx.clone()),
            ))
        }
    }
}

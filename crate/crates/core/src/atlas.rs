//! Parameterized deck/automorphism groups for each surface class, exposed as
//! generator lists of [`SurfaceAutomorphism`].

use num_complex::Complex64;
use thiserror::Error;

use crate::connection::{BaseMap, SurfaceAutomorphism};
use crate::elliptic::EllipticContext;
use crate::mero::{MeroExpr, C64};
use crate::sampling::SampleBox;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("invalid surface model: {0}")]
    InvalidModel(String),
}

fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

/// Tagged surface class with defining parameters.
#[derive(Debug, Clone)]
pub enum SurfaceModel {
    /// Quotient of `C^2 \ {0}` by `(z1, z2) -> (lambda z1, lambda^{1/d} z2)`.
    Hopf { lambda: C64, d: u32 },
    /// Principal elliptic bundle over `C/Lambda'` with Heisenberg-type deck
    /// group; `beta` are the free fiber-shift constants of the two base
    /// generators.
    PrimaryKodaira {
        ctx: EllipticContext,
        fiber_tau: C64,
        beta: [C64; 2],
    },
    /// Quotient of `C^2` by four translations.
    TwoTorus {
        ctx: EllipticContext,
        fiber_tau: C64,
        shifts: [C64; 2],
    },
    /// Finite free quotient of a primary Kodaira surface by
    /// `(z1, z2) -> (nu z1 + theta, mu z2 + b z1 + c)`.
    SecondaryKodaira {
        base: Box<SurfaceModel>,
        nu: C64,
        theta: C64,
        mu: C64,
        b: C64,
        c: C64,
    },
    /// Principal elliptic bundle over a hyperbolic curve; each generator is a
    /// real unit-determinant matrix acting by Moebius maps on `H`, lifted
    /// with the fiber shift `log(c z1 + d)` on the principal branch.
    HyperbolicPrincipal {
        gens: Vec<[[f64; 2]; 2]>,
        fiber_tau: C64,
    },
}

impl SurfaceModel {
    /// A default hyperbolic test group: two hyperbolic unit-determinant
    /// matrices generating a free group.
    pub fn hyperbolic_default() -> Self {
        SurfaceModel::HyperbolicPrincipal {
            gens: vec![[[2.0, 1.0], [1.0, 1.0]], [[1.0, 1.0], [1.0, 2.0]]],
            fiber_tau: c(0.0, 1.0),
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            SurfaceModel::Hopf { .. } => "hopf",
            SurfaceModel::PrimaryKodaira { .. } => "primary_kodaira",
            SurfaceModel::TwoTorus { .. } => "two_torus",
            SurfaceModel::SecondaryKodaira { .. } => "secondary_kodaira",
            SurfaceModel::HyperbolicPrincipal { .. } => "hyperbolic",
        }
    }

    /// The elliptic context of the base lattice, when there is one.
    pub fn elliptic_ctx(&self) -> Option<&EllipticContext> {
        match self {
            SurfaceModel::Hopf { .. } => None,
            SurfaceModel::PrimaryKodaira { ctx, .. } => Some(ctx),
            SurfaceModel::TwoTorus { ctx, .. } => Some(ctx),
            SurfaceModel::SecondaryKodaira { base, .. } => base.elliptic_ctx(),
            SurfaceModel::HyperbolicPrincipal { .. } => None,
        }
    }

    /// Sampling domain adapted to the cover.
    pub fn sample_box(&self) -> SampleBox {
        match self {
            SurfaceModel::Hopf { .. } => SampleBox::hopf(),
            SurfaceModel::PrimaryKodaira { ctx, .. } | SurfaceModel::TwoTorus { ctx, .. } => {
                SampleBox::elliptic(ctx.tau)
            }
            SurfaceModel::SecondaryKodaira { base, .. } => base.sample_box(),
            SurfaceModel::HyperbolicPrincipal { .. } => SampleBox::hyperbolic(),
        }
    }

    fn validate(&self) -> Result<(), AtlasError> {
        match self {
            SurfaceModel::Hopf { lambda, d } => {
                let r = lambda.norm();
                if !(r > 0.0 && r < 1.0) {
                    return Err(AtlasError::InvalidModel(format!(
                        "hopf requires 0 < |lambda| < 1, got {r}"
                    )));
                }
                if *d < 1 {
                    return Err(AtlasError::InvalidModel("hopf requires d >= 1".into()));
                }
            }
            SurfaceModel::PrimaryKodaira { fiber_tau, .. }
            | SurfaceModel::TwoTorus { fiber_tau, .. } => {
                if fiber_tau.im <= 0.0 {
                    return Err(AtlasError::InvalidModel(
                        "fiber_tau must lie in the upper half plane".into(),
                    ));
                }
            }
            SurfaceModel::SecondaryKodaira { base, nu, mu, .. } => {
                base.validate()?;
                let order = (1u32..=6).find(|k| (nu.powu(*k) - c(1.0, 0.0)).norm() <= 1e-9);
                if order.is_none() {
                    return Err(AtlasError::InvalidModel(
                        "nu must be a root of unity of order <= 6".into(),
                    ));
                }
                let is_power = (0u32..=6).any(|j| (nu.powu(j) - mu).norm() <= 1e-9);
                if !is_power {
                    return Err(AtlasError::InvalidModel("mu must be a power of nu".into()));
                }
            }
            SurfaceModel::HyperbolicPrincipal { gens, .. } => {
                if gens.is_empty() {
                    return Err(AtlasError::InvalidModel(
                        "hyperbolic model needs at least one generator".into(),
                    ));
                }
                for m in gens {
                    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                    if (det - 1.0).abs() > 1e-12 {
                        return Err(AtlasError::InvalidModel(format!(
                            "generator determinant {det} != 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Deck generators of the cover.
    pub fn deck_generators(&self) -> Result<Vec<SurfaceAutomorphism>, AtlasError> {
        self.validate()?;
        Ok(match self {
            SurfaceModel::Hopf { lambda, d } => {
                // principal branch of lambda^{1/d}, fixed at model construction
                let mu = (lambda.ln() / c(*d as f64, 0.0)).exp();
                vec![SurfaceAutomorphism::new(
                    "gamma_d",
                    BaseMap::Affine {
                        a: *lambda,
                        b: c(0.0, 0.0),
                    },
                    mu,
                    MeroExpr::zero(),
                )]
            }
            SurfaceModel::PrimaryKodaira {
                ctx,
                fiber_tau,
                beta,
            } => {
                let mut v = fiber_translations(*fiber_tau);
                for (i, (name, lp)) in [("phi_1", c(1.0, 0.0)), ("phi_tau", ctx.tau)]
                    .into_iter()
                    .enumerate()
                {
                    let shift = MeroExpr::sum(vec![
                        MeroExpr::z1().scale(lp.conj()),
                        MeroExpr::constant(beta[i]),
                    ]);
                    v.push(SurfaceAutomorphism::new(
                        name,
                        BaseMap::Affine {
                            a: c(1.0, 0.0),
                            b: lp,
                        },
                        c(1.0, 0.0),
                        shift,
                    ));
                }
                v
            }
            SurfaceModel::TwoTorus {
                ctx,
                fiber_tau,
                shifts,
            } => {
                let mut v = fiber_translations(*fiber_tau);
                for (i, (name, lp)) in [("phi_1", c(1.0, 0.0)), ("phi_tau", ctx.tau)]
                    .into_iter()
                    .enumerate()
                {
                    v.push(SurfaceAutomorphism::new(
                        name,
                        BaseMap::Affine {
                            a: c(1.0, 0.0),
                            b: lp,
                        },
                        c(1.0, 0.0),
                        MeroExpr::constant(shifts[i]),
                    ));
                }
                v
            }
            SurfaceModel::SecondaryKodaira {
                base,
                nu,
                theta,
                mu,
                b,
                c: cc,
            } => {
                let mut v = base.deck_generators()?;
                let shift = MeroExpr::sum(vec![MeroExpr::z1().scale(*b), MeroExpr::constant(*cc)]);
                v.push(SurfaceAutomorphism::new(
                    "psi_tilde",
                    BaseMap::Affine { a: *nu, b: *theta },
                    *mu,
                    shift,
                ));
                v
            }
            SurfaceModel::HyperbolicPrincipal { gens, fiber_tau } => {
                let mut v = fiber_translations(*fiber_tau);
                for (i, m) in gens.iter().enumerate() {
                    v.push(hyperbolic_lift(&format!("phi_gamma{}", i + 1), m));
                }
                v
            }
        })
    }
}

fn fiber_translations(fiber_tau: C64) -> Vec<SurfaceAutomorphism> {
    vec![
        SurfaceAutomorphism::fiber_translation("psi_1", c(1.0, 0.0)),
        SurfaceAutomorphism::fiber_translation("psi_2", fiber_tau),
    ]
}

/// Lift of a Moebius generator to the cover, with the `log(c z1 + d)` fiber
/// shift on the principal branch.
pub fn hyperbolic_lift(name: &str, m: &[[f64; 2]; 2]) -> SurfaceAutomorphism {
    let (a, b, cc, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let base = BaseMap::Moebius {
        a: c(a, 0.0),
        b: c(b, 0.0),
        c: c(cc, 0.0),
        d: c(d, 0.0),
    };
    let shift = if cc == 0.0 {
        MeroExpr::constant(c(d, 0.0).ln())
    } else {
        MeroExpr::log_of(MeroExpr::sum(vec![
            MeroExpr::z1().scale(c(cc, 0.0)),
            MeroExpr::constant(c(d, 0.0)),
        ]))
    };
    SurfaceAutomorphism::new(name, base, c(1.0, 0.0), shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::compose_automorphism;

    fn ctx() -> EllipticContext {
        EllipticContext::new(c(0.21, 1.3)).unwrap()
    }

    #[test]
    fn hopf_original_surface_generator() {
        // lambda = 1/2, d = 1: (z1, z2) -> (z1/2, z2/2)
        let m = SurfaceModel::Hopf {
            lambda: c(0.5, 0.0),
            d: 1,
        };
        let g = m.deck_generators().unwrap();
        assert_eq!(g.len(), 1);
        let (w1, w2) = g[0]
            .apply_point_pair(c(2.0, 0.0), c(4.0, 0.0), None)
            .unwrap();
        assert!((w1 - c(1.0, 0.0)).norm() <= 1e-15);
        assert!((w2 - c(2.0, 0.0)).norm() <= 1e-15);
    }

    #[test]
    fn hopf_invariants_enforced() {
        assert!(SurfaceModel::Hopf {
            lambda: c(2.0, 0.0),
            d: 1
        }
        .deck_generators()
        .is_err());
    }

    #[test]
    fn torus_generators_have_identity_jacobian() {
        let m = SurfaceModel::TwoTorus {
            ctx: ctx(),
            fiber_tau: c(0.4, 0.9),
            shifts: [c(0.0, 0.0); 2],
        };
        for g in m.deck_generators().unwrap() {
            let j = g.jacobian().unwrap();
            assert!(j[0][0].is_one());
            assert!(j[1][0].is_zero());
            assert_eq!(j[1][1].as_const().unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn kodaira_deck_group_is_heisenberg_like() {
        // phi_{l1} o phi_{l2} differs from phi_{l1+l2} by a fiber translation:
        // equal base maps, equal Jacobians, constant fiber difference.
        let ctx = ctx();
        let m = SurfaceModel::PrimaryKodaira {
            ctx: ctx.clone(),
            fiber_tau: c(0.4, 0.9),
            beta: [c(0.0, 0.0); 2],
        };
        let g = m.deck_generators().unwrap();
        let (p1, pt) = (&g[2], &g[3]);
        let comp = p1.compose(pt).unwrap();
        let comp_rev = pt.compose(p1).unwrap();
        // commutator acts trivially on the base and shifts the fiber by a
        // constant, measured at two points
        let mut diffs = Vec::new();
        for (z1, z2) in [(c(0.3, 0.2), c(0.1, 0.4)), (c(-0.7, 0.5), c(0.9, -0.2))] {
            let (a1, a2) = comp.apply_point_pair(z1, z2, Some(&ctx)).unwrap();
            let (b1, b2) = comp_rev.apply_point_pair(z1, z2, Some(&ctx)).unwrap();
            assert!((a1 - b1).norm() <= 1e-12);
            diffs.push(a2 - b2);
        }
        assert!(
            (diffs[0] - diffs[1]).norm() <= 1e-12,
            "commutator not central"
        );
        assert!(diffs[0].norm() > 1e-6, "commutator should be nontrivial");
    }

    #[test]
    fn secondary_requires_root_of_unity() {
        let base = SurfaceModel::PrimaryKodaira {
            ctx: ctx(),
            fiber_tau: c(0.4, 0.9),
            beta: [c(0.0, 0.0); 2],
        };
        let bad = SurfaceModel::SecondaryKodaira {
            base: Box::new(base),
            nu: c(1.1, 0.0),
            theta: c(0.0, 0.0),
            mu: c(1.0, 0.0),
            b: c(0.0, 0.0),
            c: c(0.0, 0.0),
        };
        assert!(bad.deck_generators().is_err());
    }

    #[test]
    fn hyperbolic_jacobians_are_lower_triangular() {
        let m = SurfaceModel::hyperbolic_default();
        let ctxn = None;
        for g in m.deck_generators().unwrap() {
            let j = g.jacobian().unwrap();
            assert!(j[0][1].is_zero());
            // h' and the fiber-shift derivative evaluate cleanly on H
            let z = c(0.3, 0.9);
            assert!(j[0][0].eval(z, c(0.0, 0.0), ctxn).is_value());
            assert!(j[1][0].eval(z, c(0.0, 0.0), ctxn).is_value());
        }
    }

    #[test]
    fn composed_elliptic_generator_survives_base_shift() {
        // wp composed with a lattice translation stays numerically equal to wp
        let ctx = ctx();
        let m = SurfaceModel::PrimaryKodaira {
            ctx: ctx.clone(),
            fiber_tau: c(0.4, 0.9),
            beta: [c(0.0, 0.0); 2],
        };
        let g = m.deck_generators().unwrap();
        let e = MeroExpr::wp();
        let eo = compose_automorphism(&e, &g[2]).unwrap();
        let (eq, dev) = MeroExpr::numeric_equal(
            &eo,
            &e,
            &SampleBox::elliptic(ctx.tau),
            40,
            1e-9,
            23,
            Some(&ctx),
        )
        .unwrap();
        assert!(eq, "dev {dev}");
    }
}

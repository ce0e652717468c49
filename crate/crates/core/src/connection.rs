//! Connection matrices on universal covers and their transformation under
//! surface automorphisms.
//!
//! A meromorphic affine connection is stored through its matrix
//! `A = F dz1 + G dz2` in the frame `(d/dz1, d/dz2)`, with
//! `F[k][j] = Gamma^k_{1j}` and `G[k][j] = Gamma^k_{2j}` (row = upper index).
//! Pullback under an automorphism `a` with Jacobian `J` is the gauge
//! transformation `J^-1 (A o a, forms pulled back) J + J^-1 dJ`; dropping the
//! inhomogeneous term gives the transport of difference tensors.

use num_complex::Complex64;
use thiserror::Error;

use crate::elliptic::EllipticContext;
use crate::mero::{Coord, EvalResult, MeroError, MeroExpr, C64};
use crate::sampling::{SampleBox, Sampler, UnableToSample, MAGNITUDE_GUARD};

pub type Mat2 = [[MeroExpr; 2]; 2];

#[derive(Debug, Error)]
pub enum ConnectionError {
    #[error(transparent)]
    Mero(#[from] MeroError),
    #[error(transparent)]
    Sampling(#[from] UnableToSample),
}

fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

/// Base component of a surface automorphism: `h(z1)`.
#[derive(Debug, Clone)]
pub enum BaseMap {
    Affine {
        a: C64,
        b: C64,
    },
    /// Unit-determinant Moebius map `(a z1 + b)/(c z1 + d)`.
    Moebius {
        a: C64,
        b: C64,
        c: C64,
        d: C64,
    },
}

impl BaseMap {
    pub fn identity() -> Self {
        BaseMap::Affine {
            a: c(1.0, 0.0),
            b: c(0.0, 0.0),
        }
    }

    /// Normalizes a 2x2 complex matrix to determinant one.
    pub fn moebius_normalized(a: C64, b: C64, cc: C64, d: C64) -> Self {
        let det = a * d - b * cc;
        let s = det.sqrt();
        BaseMap::Moebius {
            a: a / s,
            b: b / s,
            c: cc / s,
            d: d / s,
        }
    }

    pub fn expr(&self) -> MeroExpr {
        let z1 = MeroExpr::z1();
        match self {
            BaseMap::Affine { a, b } => MeroExpr::sum(vec![z1.scale(*a), MeroExpr::constant(*b)]),
            BaseMap::Moebius { a, b, c: cc, d } => MeroExpr::quot(
                MeroExpr::sum(vec![z1.scale(*a), MeroExpr::constant(*b)]),
                MeroExpr::sum(vec![MeroExpr::z1().scale(*cc), MeroExpr::constant(*d)]),
            ),
        }
    }

    pub fn apply(&self, z: C64) -> C64 {
        match self {
            BaseMap::Affine { a, b } => a * z + b,
            BaseMap::Moebius { a, b, c: cc, d } => (a * z + b) / (cc * z + d),
        }
    }

    /// Composition `self o other` as matrices acting by Moebius maps.
    pub fn compose(&self, other: &BaseMap) -> BaseMap {
        match (self, other) {
            (BaseMap::Affine { a: a1, b: b1 }, BaseMap::Affine { a: a2, b: b2 }) => {
                BaseMap::Affine {
                    a: a1 * a2,
                    b: a1 * b2 + b1,
                }
            }
            _ => {
                let (a1, b1, c1, d1) = self.as_matrix();
                let (a2, b2, c2, d2) = other.as_matrix();
                BaseMap::moebius_normalized(
                    a1 * a2 + b1 * c2,
                    a1 * b2 + b1 * d2,
                    c1 * a2 + d1 * c2,
                    c1 * b2 + d1 * d2,
                )
            }
        }
    }

    fn as_matrix(&self) -> (C64, C64, C64, C64) {
        match self {
            BaseMap::Affine { a, b } => (*a, *b, c(0.0, 0.0), c(1.0, 0.0)),
            BaseMap::Moebius { a, b, c: cc, d } => (*a, *b, *cc, *d),
        }
    }

    pub fn validate(&self) -> bool {
        match self {
            BaseMap::Affine { a, .. } => a.norm() > 0.0,
            BaseMap::Moebius { a, b, c: cc, d } => ((a * d - b * cc) - c(1.0, 0.0)).norm() <= 1e-12,
        }
    }
}

/// A cover automorphism `(z1, z2) -> (h(z1), mu z2 + f(z1))`.
#[derive(Debug, Clone)]
pub struct SurfaceAutomorphism {
    pub name: String,
    pub base: BaseMap,
    pub fiber_scale: C64,
    pub fiber_shift: MeroExpr,
}

impl SurfaceAutomorphism {
    pub fn new(
        name: impl Into<String>,
        base: BaseMap,
        fiber_scale: C64,
        fiber_shift: MeroExpr,
    ) -> Self {
        SurfaceAutomorphism {
            name: name.into(),
            base,
            fiber_scale,
            fiber_shift,
        }
    }

    pub fn identity() -> Self {
        Self::new(
            "identity",
            BaseMap::identity(),
            c(1.0, 0.0),
            MeroExpr::zero(),
        )
    }

    /// Pure fiber translation `(z1, z2 + t)`.
    pub fn fiber_translation(name: impl Into<String>, t: C64) -> Self {
        Self::new(
            name,
            BaseMap::identity(),
            c(1.0, 0.0),
            MeroExpr::constant(t),
        )
    }

    /// Fiber-coordinate image `mu z2 + f(z1)` as an expression.
    pub fn fiber_expr(&self) -> MeroExpr {
        MeroExpr::sum(vec![
            MeroExpr::z2().scale(self.fiber_scale),
            self.fiber_shift.clone(),
        ])
    }

    /// Function composition: `(self o other)(z) = self(other(z))`.
    pub fn compose(&self, other: &SurfaceAutomorphism) -> Result<SurfaceAutomorphism, MeroError> {
        let base = self.base.compose(&other.base);
        let scale = self.fiber_scale * other.fiber_scale;
        // mu_a (mu_b z2 + f_b) + f_a(h_b(z1))
        let shift = MeroExpr::sum(vec![
            other.fiber_shift.scale(self.fiber_scale),
            self.fiber_shift
                .substitute(&other.base.expr(), &MeroExpr::z2())?,
        ]);
        Ok(SurfaceAutomorphism::new(
            format!("{}*{}", self.name, other.name),
            base,
            scale,
            shift,
        ))
    }

    /// Jacobian `[[h', 0], [f', mu]]` as expressions.
    pub fn jacobian(&self) -> Result<Mat2, MeroError> {
        let hp = self.base.expr().differentiate(Coord::Z1)?;
        let fp = self.fiber_shift.differentiate(Coord::Z1)?;
        Ok([
            [hp, MeroExpr::zero()],
            [fp, MeroExpr::constant(self.fiber_scale)],
        ])
    }

    /// Apply at a point, returning both image coordinates.
    pub fn apply_point_pair(
        &self,
        z1: C64,
        z2: C64,
        ctx: Option<&EllipticContext>,
    ) -> Option<(C64, C64)> {
        match self.fiber_shift.eval(z1, z2, ctx) {
            EvalResult::Value(s) => Some((self.base.apply(z1), self.fiber_scale * z2 + s)),
            _ => None,
        }
    }
}

/// Matrix of a meromorphic affine connection on the cover.
#[derive(Debug, Clone)]
pub struct ConnectionMatrix {
    pub f: Mat2,
    pub g: Mat2,
    pub ctx: Option<EllipticContext>,
}

pub fn mat2_zero() -> Mat2 {
    [
        [MeroExpr::zero(), MeroExpr::zero()],
        [MeroExpr::zero(), MeroExpr::zero()],
    ]
}

pub fn mat2_map(m: &Mat2, mut f: impl FnMut(&MeroExpr) -> MeroExpr) -> Mat2 {
    [[f(&m[0][0]), f(&m[0][1])], [f(&m[1][0]), f(&m[1][1])]]
}

pub fn mat2_try_map(
    m: &Mat2,
    mut f: impl FnMut(&MeroExpr) -> Result<MeroExpr, MeroError>,
) -> Result<Mat2, MeroError> {
    Ok([[f(&m[0][0])?, f(&m[0][1])?], [f(&m[1][0])?, f(&m[1][1])?]])
}

pub fn mat2_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [&a[0][0] + &b[0][0], &a[0][1] + &b[0][1]],
        [&a[1][0] + &b[1][0], &a[1][1] + &b[1][1]],
    ]
}

pub fn mat2_sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [&a[0][0] - &b[0][0], &a[0][1] - &b[0][1]],
        [&a[1][0] - &b[1][0], &a[1][1] - &b[1][1]],
    ]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let entry = |i: usize, j: usize| MeroExpr::sum(vec![&a[i][0] * &b[0][j], &a[i][1] * &b[1][j]]);
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

pub fn mat2_scale(a: &Mat2, s: &MeroExpr) -> Mat2 {
    mat2_map(a, |e| e * s)
}

impl ConnectionMatrix {
    pub fn new(f: Mat2, g: Mat2, ctx: Option<EllipticContext>) -> Self {
        ConnectionMatrix { f, g, ctx }
    }

    /// The zero matrix: the standard affine structure of the cover.
    pub fn zero(ctx: Option<EllipticContext>) -> Self {
        ConnectionMatrix::new(mat2_zero(), mat2_zero(), ctx)
    }

    pub fn entries(&self) -> Vec<MeroExpr> {
        let mut v = Vec::with_capacity(8);
        for i in 0..2 {
            for j in 0..2 {
                v.push(self.f[i][j].clone());
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                v.push(self.g[i][j].clone());
            }
        }
        v
    }
}

/// Substitute the automorphism into an expression: `e o a`.
pub fn compose_automorphism(e: &MeroExpr, a: &SurfaceAutomorphism) -> Result<MeroExpr, MeroError> {
    e.substitute(&a.base.expr(), &a.fiber_expr())
}

fn jacobian_inverse(j: &Mat2) -> Mat2 {
    // J = [[hp, 0], [fp, mu]] lower triangular
    let hp = &j[0][0];
    let fp = &j[1][0];
    let mu = &j[1][1];
    let inv_hp = MeroExpr::quot(MeroExpr::one(), hp.clone());
    let inv_mu = MeroExpr::quot(MeroExpr::one(), mu.clone());
    let off = MeroExpr::quot(fp.neg(), hp * mu);
    [[inv_hp, MeroExpr::zero()], [off, inv_mu]]
}

fn pullback_impl(
    conn: &ConnectionMatrix,
    a: &SurfaceAutomorphism,
    with_gauge_term: bool,
) -> Result<ConnectionMatrix, MeroError> {
    let j = a.jacobian()?;
    let j_inv = jacobian_inverse(&j);
    let hp = j[0][0].clone();
    let fp = j[1][0].clone();
    let mu = MeroExpr::constant(a.fiber_scale);

    let f_o = mat2_try_map(&conn.f, |e| compose_automorphism(e, a))?;
    let g_o = mat2_try_map(&conn.g, |e| compose_automorphism(e, a))?;

    // dz1-coefficient of the pulled-back form: (F o a) h' + (G o a) f'
    let m = mat2_add(&mat2_scale(&f_o, &hp), &mat2_scale(&g_o, &fp));
    let mut f_new = mat2_mul(&mat2_mul(&j_inv, &m), &j);
    if with_gauge_term {
        let dj = [
            [j[0][0].differentiate(Coord::Z1)?, MeroExpr::zero()],
            [j[1][0].differentiate(Coord::Z1)?, MeroExpr::zero()],
        ];
        f_new = mat2_add(&f_new, &mat2_mul(&j_inv, &dj));
    }
    let g_new = mat2_mul(&mat2_mul(&j_inv, &mat2_scale(&g_o, &mu)), &j);
    Ok(ConnectionMatrix::new(f_new, g_new, conn.ctx.clone()))
}

/// Pullback of a connection: `J^-1 (A o a) J + J^-1 dJ` with the 1-form legs
/// pulled back through `a`.
pub fn pullback(
    conn: &ConnectionMatrix,
    a: &SurfaceAutomorphism,
) -> Result<ConnectionMatrix, MeroError> {
    pullback_impl(conn, a, true)
}

/// Transport of a difference tensor (an `End`-valued 1-form): the same gauge
/// transformation without the inhomogeneous `J^-1 dJ` term.
pub fn pullback_tensor(
    conn: &ConnectionMatrix,
    a: &SurfaceAutomorphism,
) -> Result<ConnectionMatrix, MeroError> {
    pullback_impl(conn, a, false)
}

/// Curvature coefficient of `dz1 ^ dz2`: `d1 G - d2 F + F G - G F`.
pub fn curvature(conn: &ConnectionMatrix) -> Result<Mat2, MeroError> {
    let d1g = mat2_try_map(&conn.g, |e| e.differentiate(Coord::Z1))?;
    let d2f = mat2_try_map(&conn.f, |e| e.differentiate(Coord::Z2))?;
    let fg = mat2_mul(&conn.f, &conn.g);
    let gf = mat2_mul(&conn.g, &conn.f);
    Ok(mat2_add(&mat2_sub(&d1g, &d2f), &mat2_sub(&fg, &gf)))
}

/// Torsion components `T^k = Gamma^k_{12} - Gamma^k_{21}`, i.e.
/// `F[k][1] - G[k][0]`.
pub fn torsion(conn: &ConnectionMatrix) -> [MeroExpr; 2] {
    [&conn.f[0][1] - &conn.g[0][0], &conn.f[1][1] - &conn.g[1][0]]
}

/// Maximum absolute deviation between two connection matrices over sample
/// points at which all 16 entries stay below the magnitude guard.
pub fn max_deviation(
    a: &ConnectionMatrix,
    b: &ConnectionMatrix,
    domain: &SampleBox,
    n: usize,
    seed: u64,
    ctx: Option<&EllipticContext>,
) -> Result<(f64, usize), UnableToSample> {
    let mut exprs = a.entries();
    exprs.extend(b.entries());
    let mut sampler = Sampler::new(domain.clone(), seed);
    let pts = sampler.collect_valid(&exprs, n, ctx)?;
    let used = pts.len();
    let mut max_dev: f64 = 0.0;
    for (z1, z2) in pts {
        for (ea, eb) in a.entries().iter().zip(b.entries().iter()) {
            let va = ea.eval(z1, z2, ctx).value().expect("filtered");
            let vb = eb.eval(z1, z2, ctx).value().expect("filtered");
            max_dev = max_dev.max((va - vb).norm());
        }
    }
    Ok((max_dev, used))
}

/// Invariance residual: `max |pullback(c, a) - c|` over accepted samples.
pub fn invariance_residual(
    conn: &ConnectionMatrix,
    a: &SurfaceAutomorphism,
    domain: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<(f64, usize), ConnectionError> {
    let pulled = pullback(conn, a)?;
    let ctx = conn.ctx.as_ref();
    Ok(max_deviation(&pulled, conn, domain, n, seed, ctx)?)
}

/// Residual of the difference-tensor transport (no inhomogeneous term); the
/// single-generator equations of the hyperbolic case act on these tensors.
pub fn tensor_invariance_residual(
    conn: &ConnectionMatrix,
    a: &SurfaceAutomorphism,
    domain: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<(f64, usize), ConnectionError> {
    let pulled = pullback_tensor(conn, a)?;
    let ctx = conn.ctx.as_ref();
    Ok(max_deviation(&pulled, conn, domain, n, seed, ctx)?)
}

/// Maximum entry magnitude of a 2x2 expression matrix over samples.
pub fn max_matrix_magnitude(
    m: &Mat2,
    domain: &SampleBox,
    n: usize,
    seed: u64,
    ctx: Option<&EllipticContext>,
) -> Result<f64, UnableToSample> {
    let exprs: Vec<MeroExpr> = m.iter().flatten().cloned().collect();
    let mut sampler = Sampler::new(domain.clone(), seed);
    let pts = sampler.collect_valid(&exprs, n, ctx)?;
    let mut max_abs: f64 = 0.0;
    for (z1, z2) in pts {
        for e in &exprs {
            if let EvalResult::Value(v) = e.eval(z1, z2, ctx) {
                max_abs = max_abs.max(v.norm());
            }
        }
    }
    let _ = MAGNITUDE_GUARD;
    Ok(max_abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z1() -> MeroExpr {
        MeroExpr::z1()
    }
    fn z2() -> MeroExpr {
        MeroExpr::z2()
    }

    fn random_connection() -> ConnectionMatrix {
        // rational entries with poles off the sampling annulus
        let e = |a: f64, b: f64| {
            MeroExpr::quot(
                MeroExpr::sum(vec![z1().scale(c(a, b)), z2().scale(c(b, -a))]),
                MeroExpr::sum(vec![z1(), MeroExpr::constant(c(4.0, 1.0))]),
            )
        };
        ConnectionMatrix::new(
            [[e(0.3, 0.1), e(-0.2, 0.4)], [e(0.7, -0.3), e(1.1, 0.2)]],
            [[e(-0.5, 0.6), e(0.25, -0.15)], [e(0.4, 0.9), e(-0.8, -0.2)]],
            None,
        )
    }

    fn hopf_generator(lambda: C64, d: u32) -> SurfaceAutomorphism {
        let mu = (lambda.ln() / c(d as f64, 0.0)).exp();
        SurfaceAutomorphism::new(
            "gamma_d",
            BaseMap::Affine {
                a: lambda,
                b: c(0.0, 0.0),
            },
            mu,
            MeroExpr::zero(),
        )
    }

    #[test]
    fn compose_with_fiber_translation() {
        // z2 o psi1 = z2 + 1
        let psi1 = SurfaceAutomorphism::fiber_translation("psi1", c(1.0, 0.0));
        let e = compose_automorphism(&z2(), &psi1).unwrap();
        let expect = &z2() + &MeroExpr::one();
        assert_eq!(e, expect);
    }

    #[test]
    fn compose_identity_is_identity() {
        let e = MeroExpr::quot(&z1() * &z1(), &z2() + &MeroExpr::one());
        let got = compose_automorphism(&e, &SurfaceAutomorphism::identity()).unwrap();
        assert_eq!(got, e);
    }

    #[test]
    fn hopf_field_generator_is_deck_invariant() {
        // X = z1/z2^d is fixed by (lambda z1, lambda^{1/d} z2)
        for d in [1u32, 2, 3] {
            let x = MeroExpr::quot(z1(), MeroExpr::pow(z2(), d as i32));
            let g = hopf_generator(c(0.5, 0.0), d);
            let xo = compose_automorphism(&x, &g).unwrap();
            let (eq, dev) =
                MeroExpr::numeric_equal(&xo, &x, &SampleBox::hopf(), 50, 1e-12, 5, None).unwrap();
            assert!(eq, "d={d} dev {dev}");
        }
    }

    #[test]
    fn pullback_by_identity_is_identity() {
        let conn = random_connection();
        let pulled = pullback(&conn, &SurfaceAutomorphism::identity()).unwrap();
        let (dev, _) = max_deviation(&pulled, &conn, &SampleBox::hopf(), 30, 2, None).unwrap();
        assert!(dev <= 1e-12, "dev {dev}");
    }

    #[test]
    fn pullback_of_zero_by_constant_jacobian_is_zero() {
        let zero = ConnectionMatrix::zero(None);
        let g = hopf_generator(c(0.5, 0.0), 2);
        let pulled = pullback(&zero, &g).unwrap();
        let (dev, _) = max_deviation(&pulled, &zero, &SampleBox::hopf(), 30, 3, None).unwrap();
        assert!(dev <= 1e-13, "dev {dev}");
        // and G-part stays identically zero
        for i in 0..2 {
            for j in 0..2 {
                assert!(pulled.g[i][j].is_zero());
            }
        }
    }

    #[test]
    fn pullback_functoriality() {
        // pullback(pullback(c, a), b) == pullback(c, a o b)
        let conn = random_connection();
        let a = SurfaceAutomorphism::new(
            "a",
            BaseMap::Affine {
                a: c(0.8, 0.3),
                b: c(0.2, -0.1),
            },
            c(0.9, -0.2),
            MeroExpr::sum(vec![
                z1().scale(c(0.4, 0.1)),
                MeroExpr::constant(c(0.1, 0.2)),
            ]),
        );
        let b = SurfaceAutomorphism::new(
            "b",
            BaseMap::Moebius {
                a: c(1.0, 0.0),
                b: c(0.5, 0.0),
                c: c(0.0, 0.0),
                d: c(1.0, 0.0),
            },
            c(1.3, 0.4),
            MeroExpr::pow(z1(), 2).scale(c(0.05, -0.02)),
        );
        let lhs = pullback(&pullback(&conn, &a).unwrap(), &b).unwrap();
        let rhs = pullback(&conn, &a.compose(&b).unwrap()).unwrap();
        let (dev, _) = max_deviation(&lhs, &rhs, &SampleBox::hopf(), 40, 11, None).unwrap();
        assert!(dev <= 1e-9, "functoriality dev {dev}");
    }

    #[test]
    fn curvature_of_zero_vanishes() {
        let zero = ConnectionMatrix::zero(None);
        let r = curvature(&zero).unwrap();
        for row in &r {
            for e in row {
                assert!(e.is_zero());
            }
        }
        let t = torsion(&zero);
        assert!(t[0].is_zero() && t[1].is_zero());
    }

    #[test]
    fn curvature_transforms_tensorially() {
        // curvature(pullback(c,a)) == (mu h') J^-1 (R o a) J
        let conn = random_connection();
        let a = SurfaceAutomorphism::new(
            "a",
            BaseMap::Affine {
                a: c(1.2, -0.4),
                b: c(0.3, 0.2),
            },
            c(0.7, 0.5),
            MeroExpr::pow(z1(), 2).scale(c(0.1, 0.05)),
        );
        let lhs = curvature(&pullback(&conn, &a).unwrap()).unwrap();
        let r = curvature(&conn).unwrap();
        let r_o = mat2_try_map(&r, |e| compose_automorphism(e, &a)).unwrap();
        let j = a.jacobian().unwrap();
        let j_inv = jacobian_inverse(&j);
        let factor = &j[0][0] * &MeroExpr::constant(a.fiber_scale);
        let rhs = mat2_scale(&mat2_mul(&mat2_mul(&j_inv, &r_o), &j), &factor);
        let la = ConnectionMatrix::new(lhs, mat2_zero(), None);
        let rb = ConnectionMatrix::new(rhs, mat2_zero(), None);
        let (dev, _) = max_deviation(&la, &rb, &SampleBox::hopf(), 40, 13, None).unwrap();
        assert!(dev <= 1e-8, "tensoriality dev {dev}");
    }

    #[test]
    fn residual_zero_for_identity_and_positive_for_broken_symmetry() {
        let conn = random_connection();
        let (r, _) = invariance_residual(
            &conn,
            &SurfaceAutomorphism::identity(),
            &SampleBox::hopf(),
            30,
            4,
        )
        .unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn hyperbolic_standard_connection_is_invariant() {
        // F = [[0,1],[0,0]], G = I on H x C is invariant under every
        // (gamma z1, z2 + log j_gamma) and under fiber translations.
        let f = [
            [MeroExpr::zero(), MeroExpr::one()],
            [MeroExpr::zero(), MeroExpr::zero()],
        ];
        let g = [
            [MeroExpr::one(), MeroExpr::zero()],
            [MeroExpr::zero(), MeroExpr::one()],
        ];
        let conn = ConnectionMatrix::new(f, g, None);
        for (a, b, cc, d) in [
            (2.0, 1.0, 1.0, 1.0),
            (1.0, 1.0, 1.0, 2.0),
            (3.0, 2.0, 4.0, 3.0),
        ] {
            let base = BaseMap::moebius_normalized(c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0));
            let shift = MeroExpr::log_of(MeroExpr::sum(vec![
                z1().scale(c(cc, 0.0)),
                MeroExpr::constant(c(d, 0.0)),
            ]));
            let phi = SurfaceAutomorphism::new("phi", base, c(1.0, 0.0), shift);
            let (r, _) =
                invariance_residual(&conn, &phi, &SampleBox::hyperbolic(), 40, 17).unwrap();
            assert!(r <= 1e-10, "residual {r} for ({a},{b},{cc},{d})");
        }
        let psi = SurfaceAutomorphism::fiber_translation("psi", c(1.0, 0.0));
        let (r, _) = invariance_residual(&conn, &psi, &SampleBox::hyperbolic(), 20, 19).unwrap();
        assert!(r <= 1e-12);
    }
}

//! Immutable expression engine for meromorphic functions in the cover
//! coordinates `(z1, z2)`.
//!
//! Trees are reference-counted and never mutated after construction, so they
//! are freely shareable across threads.  Simplification is conservative
//! (flatten sums/products, fold constants, cancel structurally identical
//! factors); no correctness claim in this crate depends on simplification,
//! every equality is certified numerically downstream.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::elliptic::EllipticContext;
use crate::sampling::{SampleBox, Sampler, UnableToSample};

pub type C64 = Complex64;

/// Relative denominator guard: an evaluation is a pole when
/// `|den| < POLE_EPS * (1 + |num|)`.
pub const POLE_EPS: f64 = 1e-12;
/// Near-pole guard used to reject samples before they pollute residual maxima.
pub const NEAR_POLE_EPS: f64 = 1e-6;
/// Maximum nesting depth of univariate compositions.
pub const MAX_COMPOSE_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum MeroError {
    #[error("no derivative rule registered for generator `{0}`")]
    DerivativeUnavailable(String),
    #[error("composition depth exceeds {MAX_COMPOSE_DEPTH}")]
    DepthExceeded,
}

/// Result of a pointwise evaluation.  Poles are values, not errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalResult {
    Value(C64),
    /// Within the soft guard of a pole; carries the relative denominator size.
    NearPole(f64),
    Pole,
}

impl EvalResult {
    pub fn value(self) -> Option<C64> {
        match self {
            EvalResult::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_value(self) -> bool {
        matches!(self, EvalResult::Value(_))
    }

    fn join2(a: EvalResult, b: EvalResult, f: impl FnOnce(C64, C64) -> C64) -> EvalResult {
        match (a, b) {
            (EvalResult::Pole, _) | (_, EvalResult::Pole) => EvalResult::Pole,
            (EvalResult::NearPole(x), EvalResult::NearPole(y)) => EvalResult::NearPole(x.min(y)),
            (EvalResult::NearPole(x), _) | (_, EvalResult::NearPole(x)) => EvalResult::NearPole(x),
            (EvalResult::Value(x), EvalResult::Value(y)) => EvalResult::Value(f(x, y)),
        }
    }
}

/// Guarded division; this is the single place pole classification happens.
pub fn guarded_div(num: C64, den: C64) -> EvalResult {
    let scale = 1.0 + num.norm();
    let d = den.norm();
    if d < POLE_EPS * scale {
        EvalResult::Pole
    } else if d < NEAR_POLE_EPS * scale {
        EvalResult::NearPole(d / scale)
    } else {
        EvalResult::Value(num / den)
    }
}

/// Coordinate tag for differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Z1,
    Z2,
}

/// Named univariate function; `Uni(f, g)` represents `f(g)` where `g` is an
/// expression in `z1` (compositions with surface automorphisms stay here).
#[derive(Clone)]
pub enum Univariate {
    Wp,
    WpPrime,
    Zeta,
    /// Principal branch of the logarithm.
    Log,
    Gen(Arc<GenDef>),
}

impl Univariate {
    pub fn name(&self) -> &str {
        match self {
            Univariate::Wp => "wp",
            Univariate::WpPrime => "wpprime",
            Univariate::Zeta => "zeta",
            Univariate::Log => "log",
            Univariate::Gen(g) => &g.name,
        }
    }
}

impl PartialEq for Univariate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Univariate::Wp, Univariate::Wp)
            | (Univariate::WpPrime, Univariate::WpPrime)
            | (Univariate::Zeta, Univariate::Zeta)
            | (Univariate::Log, Univariate::Log) => true,
            (Univariate::Gen(a), Univariate::Gen(b)) => a.name == b.name,
            _ => false,
        }
    }
}

/// Evaluator handle of a user generator.
pub type GenEval = Box<dyn Fn(C64, Option<&EllipticContext>) -> EvalResult + Send + Sync>;
/// Derivative rule of a user generator: receives the inner expression `g`
/// and returns `f'(g)`; the chain-rule factor is applied by the engine.
pub type GenDeriv = Box<dyn Fn(&MeroExpr) -> MeroExpr + Send + Sync>;

/// User-supplied univariate generator with an evaluator handle and an
/// optional derivative rule.
pub struct GenDef {
    pub name: String,
    pub eval: GenEval,
    pub deriv: Option<GenDeriv>,
}

impl fmt::Debug for GenDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GenDef({})", self.name)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum Node {
    Const(C64),
    Z1,
    Z2,
    /// Lattice invariants of the ambient elliptic context, as symbols.
    G2,
    G3,
    Uni(Univariate, MeroExpr),
    Sum(Vec<MeroExpr>),
    Prod(Vec<MeroExpr>),
    Quot(MeroExpr, MeroExpr),
    Pow(MeroExpr, i32),
}

impl fmt::Debug for Univariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Immutable meromorphic expression in `(z1, z2)`.
#[derive(Clone)]
pub struct MeroExpr(Arc<Node>);

impl PartialEq for MeroExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for MeroExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

impl MeroExpr {
    fn new(node: Node) -> Self {
        MeroExpr(Arc::new(node))
    }

    /// Wraps a node without simplification; the serializer uses this so a
    /// JSON round trip is bit-exact on the tree structure.
    pub fn raw(node: Node) -> Self {
        Self::new(node)
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(v: C64) -> Self {
        Self::new(Node::Const(v))
    }

    pub fn real(v: f64) -> Self {
        Self::constant(c(v, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub fn z1() -> Self {
        Self::new(Node::Z1)
    }

    pub fn z2() -> Self {
        Self::new(Node::Z2)
    }

    pub fn g2_sym() -> Self {
        Self::new(Node::G2)
    }

    pub fn g3_sym() -> Self {
        Self::new(Node::G3)
    }

    pub fn wp() -> Self {
        Self::uni(Univariate::Wp, Self::z1())
    }

    pub fn wp_prime() -> Self {
        Self::uni(Univariate::WpPrime, Self::z1())
    }

    pub fn zeta() -> Self {
        Self::uni(Univariate::Zeta, Self::z1())
    }

    pub fn log_of(inner: MeroExpr) -> Self {
        Self::uni(Univariate::Log, inner)
    }

    pub fn uni(f: Univariate, inner: MeroExpr) -> Self {
        Self::new(Node::Uni(f, inner))
    }

    pub fn generator(def: Arc<GenDef>, inner: MeroExpr) -> Self {
        Self::uni(Univariate::Gen(def), inner)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Const(v) if v.norm() == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(v) if *v == c(1.0, 0.0))
    }

    pub fn as_const(&self) -> Option<C64> {
        match self.node() {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// n-ary sum with flattening and constant folding.
    pub fn sum(terms: Vec<MeroExpr>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        let mut konst = c(0.0, 0.0);
        for t in terms {
            match t.node() {
                Node::Const(v) => konst += v,
                Node::Sum(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(v) => konst += v,
                            _ => flat.push(u.clone()),
                        }
                    }
                }
                _ => flat.push(t),
            }
        }
        if konst != c(0.0, 0.0) || flat.is_empty() {
            flat.push(Self::constant(konst));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Self::new(Node::Sum(flat))
        }
    }

    /// n-ary product with flattening, constant folding and zero absorption.
    pub fn prod(factors: Vec<MeroExpr>) -> Self {
        let mut flat = Vec::with_capacity(factors.len());
        let mut konst = c(1.0, 0.0);
        for t in factors {
            match t.node() {
                Node::Const(v) => konst *= v,
                Node::Prod(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(v) => konst *= v,
                            _ => flat.push(u.clone()),
                        }
                    }
                }
                _ => flat.push(t),
            }
        }
        if konst == c(0.0, 0.0) {
            return Self::zero();
        }
        if konst != c(1.0, 0.0) || flat.is_empty() {
            flat.insert(0, Self::constant(konst));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Self::new(Node::Prod(flat))
        }
    }

    /// Quotient, cancelling structurally identical factors.
    pub fn quot(num: MeroExpr, den: MeroExpr) -> Self {
        if den.is_one() {
            return num;
        }
        if num.is_zero() {
            return Self::zero();
        }
        if let (Some(a), Some(b)) = (num.as_const(), den.as_const()) {
            if b.norm() > 0.0 {
                return Self::constant(a / b);
            }
        }
        let mut nf = factors_of(&num);
        let mut df = factors_of(&den);
        let mut cancelled = false;
        let mut i = 0;
        while i < nf.len() {
            if let Some(j) = df
                .iter()
                .position(|d| *d == nf[i] && d.as_const().is_none())
            {
                nf.remove(i);
                df.remove(j);
                cancelled = true;
            } else {
                i += 1;
            }
        }
        let (num, den) = if cancelled {
            (Self::prod(nf), Self::prod(df))
        } else {
            (num, den)
        };
        if den.is_one() {
            return num;
        }
        Self::new(Node::Quot(num, den))
    }

    pub fn pow(base: MeroExpr, exp: i32) -> Self {
        match exp {
            0 => Self::one(),
            1 => base,
            _ => {
                if let Some(v) = base.as_const() {
                    return Self::constant(v.powi(exp));
                }
                Self::new(Node::Pow(base, exp))
            }
        }
    }

    pub fn neg(&self) -> Self {
        Self::prod(vec![Self::real(-1.0), self.clone()])
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::prod(vec![Self::constant(k), self.clone()])
    }

    /// Depth of nested univariate compositions.
    fn compose_depth(&self) -> usize {
        match self.node() {
            Node::Uni(_, inner) => 1 + inner.compose_depth(),
            Node::Sum(v) | Node::Prod(v) => v.iter().map(|e| e.compose_depth()).max().unwrap_or(0),
            Node::Quot(a, b) => a.compose_depth().max(b.compose_depth()),
            Node::Pow(b, _) => b.compose_depth(),
            _ => 0,
        }
    }

    /// Substitute `z1 -> s1`, `z2 -> s2`.  Subtrees are shared, not copied,
    /// so repeated pullbacks do not blow up memory; the composition depth is
    /// capped at [`MAX_COMPOSE_DEPTH`].
    pub fn substitute(&self, s1: &MeroExpr, s2: &MeroExpr) -> Result<MeroExpr, MeroError> {
        if matches!(s1.node(), Node::Z1) && matches!(s2.node(), Node::Z2) {
            return Ok(self.clone());
        }
        let out = self.substitute_inner(s1, s2)?;
        if out.compose_depth() > MAX_COMPOSE_DEPTH {
            return Err(MeroError::DepthExceeded);
        }
        Ok(out)
    }

    fn substitute_inner(&self, s1: &MeroExpr, s2: &MeroExpr) -> Result<MeroExpr, MeroError> {
        Ok(match self.node() {
            Node::Const(_) | Node::G2 | Node::G3 => self.clone(),
            Node::Z1 => s1.clone(),
            Node::Z2 => s2.clone(),
            Node::Uni(f, inner) => {
                let gi = inner.substitute_inner(s1, s2)?;
                if gi == *inner {
                    self.clone()
                } else {
                    MeroExpr::uni(f.clone(), gi)
                }
            }
            Node::Sum(v) => MeroExpr::sum(
                v.iter()
                    .map(|e| e.substitute_inner(s1, s2))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            Node::Prod(v) => MeroExpr::prod(
                v.iter()
                    .map(|e| e.substitute_inner(s1, s2))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            Node::Quot(a, b) => {
                MeroExpr::quot(a.substitute_inner(s1, s2)?, b.substitute_inner(s1, s2)?)
            }
            Node::Pow(b, k) => MeroExpr::pow(b.substitute_inner(s1, s2)?, *k),
        })
    }

    /// Exact symbolic derivative.  Closure rules: `zeta' = -wp`,
    /// `wp' = wpprime`, `wpprime' = 6 wp^2 - g2/2`, `log' = 1/arg`.
    pub fn differentiate(&self, var: Coord) -> Result<MeroExpr, MeroError> {
        Ok(match self.node() {
            Node::Const(_) | Node::G2 | Node::G3 => MeroExpr::zero(),
            Node::Z1 => {
                if var == Coord::Z1 {
                    MeroExpr::one()
                } else {
                    MeroExpr::zero()
                }
            }
            Node::Z2 => {
                if var == Coord::Z2 {
                    MeroExpr::one()
                } else {
                    MeroExpr::zero()
                }
            }
            Node::Uni(f, g) => {
                let dg = g.differentiate(var)?;
                if dg.is_zero() {
                    return Ok(MeroExpr::zero());
                }
                let df = match f {
                    Univariate::Wp => MeroExpr::uni(Univariate::WpPrime, g.clone()),
                    Univariate::WpPrime => {
                        // wp'' = 6 wp^2 - g2/2
                        let wp_g = MeroExpr::uni(Univariate::Wp, g.clone());
                        MeroExpr::sum(vec![
                            MeroExpr::pow(wp_g, 2).scale(c(6.0, 0.0)),
                            MeroExpr::g2_sym().scale(c(-0.5, 0.0)),
                        ])
                    }
                    Univariate::Zeta => MeroExpr::uni(Univariate::Wp, g.clone()).neg(),
                    Univariate::Log => MeroExpr::quot(MeroExpr::one(), g.clone()),
                    Univariate::Gen(def) => match &def.deriv {
                        Some(rule) => rule(g),
                        None => return Err(MeroError::DerivativeUnavailable(def.name.clone())),
                    },
                };
                MeroExpr::prod(vec![df, dg])
            }
            Node::Sum(v) => MeroExpr::sum(
                v.iter()
                    .map(|e| e.differentiate(var))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            Node::Prod(v) => {
                let mut terms = Vec::with_capacity(v.len());
                for i in 0..v.len() {
                    let di = v[i].differentiate(var)?;
                    if di.is_zero() {
                        continue;
                    }
                    let mut fs = Vec::with_capacity(v.len());
                    fs.push(di);
                    for (j, e) in v.iter().enumerate() {
                        if j != i {
                            fs.push(e.clone());
                        }
                    }
                    terms.push(MeroExpr::prod(fs));
                }
                MeroExpr::sum(terms)
            }
            Node::Quot(a, b) => {
                let da = a.differentiate(var)?;
                let db = b.differentiate(var)?;
                // (a'b - ab')/b^2
                MeroExpr::quot(
                    MeroExpr::sum(vec![
                        MeroExpr::prod(vec![da, b.clone()]),
                        MeroExpr::prod(vec![a.clone(), db]).neg(),
                    ]),
                    MeroExpr::pow(b.clone(), 2),
                )
            }
            Node::Pow(b, k) => {
                let db = b.differentiate(var)?;
                MeroExpr::prod(vec![
                    MeroExpr::real(*k as f64),
                    MeroExpr::pow(b.clone(), k - 1),
                    db,
                ])
            }
        })
    }

    /// Pole-aware numeric evaluation at `(z1, z2)`.
    ///
    /// An elliptic context must be supplied whenever the expression contains
    /// `wp`/`wpprime`/`zeta` or the `g2`/`g3` symbols; this precondition is
    /// asserted.
    pub fn eval(&self, z1: C64, z2: C64, ctx: Option<&EllipticContext>) -> EvalResult {
        match self.node() {
            Node::Const(v) => EvalResult::Value(*v),
            Node::Z1 => EvalResult::Value(z1),
            Node::Z2 => EvalResult::Value(z2),
            Node::G2 => EvalResult::Value(need_ctx(ctx).g2),
            Node::G3 => EvalResult::Value(need_ctx(ctx).g3),
            Node::Uni(f, g) => {
                let inner = g.eval(z1, z2, ctx);
                let w = match inner {
                    EvalResult::Value(w) => w,
                    other => return other,
                };
                match f {
                    Univariate::Wp => need_ctx(ctx).wp(w),
                    Univariate::WpPrime => need_ctx(ctx).wp_prime(w),
                    Univariate::Zeta => need_ctx(ctx).zeta(w),
                    Univariate::Log => {
                        if w.norm() < POLE_EPS {
                            EvalResult::Pole
                        } else {
                            EvalResult::Value(w.ln())
                        }
                    }
                    Univariate::Gen(def) => (def.eval)(w, ctx),
                }
            }
            Node::Sum(v) => {
                let mut acc = EvalResult::Value(c(0.0, 0.0));
                for e in v {
                    acc = EvalResult::join2(acc, e.eval(z1, z2, ctx), |a, b| a + b);
                }
                acc
            }
            Node::Prod(v) => {
                let mut acc = EvalResult::Value(c(1.0, 0.0));
                for e in v {
                    acc = EvalResult::join2(acc, e.eval(z1, z2, ctx), |a, b| a * b);
                }
                acc
            }
            Node::Quot(a, b) => {
                let na = a.eval(z1, z2, ctx);
                let nb = b.eval(z1, z2, ctx);
                match (na, nb) {
                    (EvalResult::Value(x), EvalResult::Value(y)) => guarded_div(x, y),
                    (x, y) => EvalResult::join2(x, y, |_, _| unreachable!()),
                }
            }
            Node::Pow(b, k) => {
                let nb = b.eval(z1, z2, ctx);
                match nb {
                    EvalResult::Value(x) => {
                        if *k < 0 {
                            guarded_div(c(1.0, 0.0), x.powi(-k))
                        } else {
                            EvalResult::Value(x.powi(*k))
                        }
                    }
                    other => other,
                }
            }
        }
    }

    /// Sampled numeric equality over a box, resampling away from poles.
    /// Deterministic for a fixed seed.  Returns `(equal, max deviation)`.
    pub fn numeric_equal(
        e1: &MeroExpr,
        e2: &MeroExpr,
        domain: &SampleBox,
        n: usize,
        tol: f64,
        seed: u64,
        ctx: Option<&EllipticContext>,
    ) -> Result<(bool, f64), UnableToSample> {
        assert!(n >= 1, "sample count must be >= 1");
        let mut sampler = Sampler::new(domain.clone(), seed);
        let exprs = [e1.clone(), e2.clone()];
        let pts = sampler.collect_valid(&exprs, n, ctx)?;
        let mut max_dev: f64 = 0.0;
        for (p1, p2) in pts {
            let a = e1.eval(p1, p2, ctx).value().expect("filtered");
            let b = e2.eval(p1, p2, ctx).value().expect("filtered");
            max_dev = max_dev.max((a - b).norm());
        }
        Ok((max_dev <= tol, max_dev))
    }
}

fn need_ctx(ctx: Option<&EllipticContext>) -> &EllipticContext {
    ctx.expect("elliptic generator evaluated without an EllipticContext")
}

fn factors_of(e: &MeroExpr) -> Vec<MeroExpr> {
    match e.node() {
        Node::Prod(v) => v.clone(),
        _ => vec![e.clone()],
    }
}

// Arithmetic on references builds simplified nodes.
impl std::ops::Add for &MeroExpr {
    type Output = MeroExpr;
    fn add(self, rhs: &MeroExpr) -> MeroExpr {
        MeroExpr::sum(vec![self.clone(), rhs.clone()])
    }
}
impl std::ops::Sub for &MeroExpr {
    type Output = MeroExpr;
    fn sub(self, rhs: &MeroExpr) -> MeroExpr {
        MeroExpr::sum(vec![self.clone(), rhs.neg()])
    }
}
impl std::ops::Mul for &MeroExpr {
    type Output = MeroExpr;
    fn mul(self, rhs: &MeroExpr) -> MeroExpr {
        MeroExpr::prod(vec![self.clone(), rhs.clone()])
    }
}
impl std::ops::Div for &MeroExpr {
    type Output = MeroExpr;
    fn div(self, rhs: &MeroExpr) -> MeroExpr {
        MeroExpr::quot(self.clone(), rhs.clone())
    }
}

impl fmt::Display for MeroExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(v) => {
                if v.im == 0.0 {
                    write!(f, "{}", v.re)
                } else {
                    write!(f, "({}{:+}i)", v.re, v.im)
                }
            }
            Node::Z1 => write!(f, "z1"),
            Node::Z2 => write!(f, "z2"),
            Node::G2 => write!(f, "g2"),
            Node::G3 => write!(f, "g3"),
            Node::Uni(u, g) => {
                if matches!(g.node(), Node::Z1) {
                    write!(f, "{}(z1)", u.name())
                } else {
                    write!(f, "{}({})", u.name(), g)
                }
            }
            Node::Sum(v) => {
                write!(f, "(")?;
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{}", e)?;
                }
                write!(f, ")")
            }
            Node::Prod(v) => {
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{}", e)?;
                }
                Ok(())
            }
            Node::Quot(a, b) => write!(f, "({})/({})", a, b),
            Node::Pow(b, k) => write!(f, "({})^{}", b, k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::EllipticContext;

    fn ctx_i() -> EllipticContext {
        EllipticContext::new(c(0.0, 1.0)).unwrap()
    }

    #[test]
    fn polynomial_derivative() {
        // d/dz1 (z1^2) = 2 z1
        let e = MeroExpr::pow(MeroExpr::z1(), 2);
        let d = e.differentiate(Coord::Z1).unwrap();
        let expect = MeroExpr::z1().scale(c(2.0, 0.0));
        let (eq, dev) =
            MeroExpr::numeric_equal(&d, &expect, &SampleBox::generic(), 20, 1e-12, 1, None)
                .unwrap();
        assert!(eq, "max dev {dev}");
    }

    #[test]
    fn zeta_derivative_is_minus_wp() {
        let d = MeroExpr::zeta().differentiate(Coord::Z1).unwrap();
        assert_eq!(d, MeroExpr::wp().neg());
    }

    #[test]
    fn wp_prime_derivative_matches_finite_difference() {
        // d/dz1 wp' at z = 0.3+0.4i on Z+iZ, against a central difference.
        let ctx = ctx_i();
        let e = MeroExpr::wp_prime();
        let d = e.differentiate(Coord::Z1).unwrap();
        let z = c(0.3, 0.4);
        let h = 1e-5;
        let f = |z: C64| e.eval(z, c(0.0, 0.0), Some(&ctx)).value().unwrap();
        let fd = (f(z + c(h, 0.0)) - f(z - c(h, 0.0))) / c(2.0 * h, 0.0);
        let dv = d.eval(z, c(0.0, 0.0), Some(&ctx)).value().unwrap();
        assert!(
            (dv - fd).norm() / dv.norm() <= 1e-6,
            "relative deviation {}",
            (dv - fd).norm() / dv.norm()
        );
    }

    #[test]
    fn every_generator_derivative_matches_finite_difference() {
        let ctx = ctx_i();
        let gens = [
            MeroExpr::wp(),
            MeroExpr::wp_prime(),
            MeroExpr::zeta(),
            MeroExpr::log_of(&MeroExpr::z1() + &MeroExpr::real(2.0)),
        ];
        let h = 1e-5;
        for g in &gens {
            let d = g.differentiate(Coord::Z1).unwrap();
            for z in [c(0.31, 0.17), c(-0.22, 0.41), c(0.57, -0.13)] {
                let f = |z: C64| g.eval(z, c(0.0, 0.0), Some(&ctx)).value().unwrap();
                let fd = (f(z + c(h, 0.0)) - f(z - c(h, 0.0))) / c(2.0 * h, 0.0);
                let dv = d.eval(z, c(0.0, 0.0), Some(&ctx)).value().unwrap();
                let rel = (dv - fd).norm() / dv.norm().max(1.0);
                assert!(rel <= 1e-6, "{}: rel {}", g, rel);
            }
        }
    }

    #[test]
    fn simple_quotient_evaluates() {
        // 1/z1 at (2, 5) is 0.5
        let e = MeroExpr::quot(MeroExpr::one(), MeroExpr::z1());
        assert_eq!(
            e.eval(c(2.0, 0.0), c(5.0, 0.0), None),
            EvalResult::Value(c(0.5, 0.0))
        );
    }

    #[test]
    fn wp_pole_at_lattice_point() {
        let ctx = ctx_i();
        assert_eq!(
            MeroExpr::wp().eval(c(0.0, 0.0), c(1.0, 1.0), Some(&ctx)),
            EvalResult::Pole
        );
    }

    #[test]
    fn numeric_equal_trivial() {
        let a = &MeroExpr::z1() + &MeroExpr::z1();
        let b = MeroExpr::z1().scale(c(2.0, 0.0));
        let (eq, dev) =
            MeroExpr::numeric_equal(&a, &b, &SampleBox::generic(), 10, 1e-14, 7, None).unwrap();
        assert!(eq);
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn wp_is_even() {
        let ctx = ctx_i();
        let e = MeroExpr::wp();
        let em = MeroExpr::uni(Univariate::Wp, MeroExpr::z1().neg());
        let (eq, dev) =
            MeroExpr::numeric_equal(&e, &em, &SampleBox::generic(), 100, 1e-10, 3, Some(&ctx))
                .unwrap();
        assert!(eq, "max dev {dev}");
    }

    #[test]
    fn wp_differential_equation() {
        // (wp')^2 = 4 wp^3 - g2 wp - g3 on Z+iZ, against symbols bound to ctx.
        let ctx = ctx_i();
        let lhs = MeroExpr::pow(MeroExpr::wp_prime(), 2);
        let rhs = MeroExpr::sum(vec![
            MeroExpr::pow(MeroExpr::wp(), 3).scale(c(4.0, 0.0)),
            MeroExpr::prod(vec![MeroExpr::g2_sym(), MeroExpr::wp()]).neg(),
            MeroExpr::g3_sym().neg(),
        ]);
        let (eq, dev) =
            MeroExpr::numeric_equal(&lhs, &rhs, &SampleBox::generic(), 100, 1e-9, 11, Some(&ctx))
                .unwrap();
        assert!(eq, "max dev {dev}");
    }

    #[test]
    fn derivative_unavailable_for_opaque_generator() {
        let def = Arc::new(GenDef {
            name: "opaque".into(),
            eval: Box::new(|z, _| EvalResult::Value(z)),
            deriv: None,
        });
        let e = MeroExpr::generator(def, MeroExpr::z1());
        assert!(matches!(
            e.differentiate(Coord::Z1),
            Err(MeroError::DerivativeUnavailable(_))
        ));
    }

    #[test]
    fn pole_guard_thresholds() {
        // scale-aware: |den| < 1e-12 (1+|num|) is a pole, then a soft band
        assert_eq!(guarded_div(c(1.0, 0.0), c(1e-13, 0.0)), EvalResult::Pole);
        assert!(matches!(
            guarded_div(c(1.0, 0.0), c(1e-8, 0.0)),
            EvalResult::NearPole(_)
        ));
        assert!(guarded_div(c(1.0, 0.0), c(1e-3, 0.0)).is_value());
        // a large numerator widens the guard proportionally
        assert_eq!(guarded_div(c(1e9, 0.0), c(1e-4, 0.0)), EvalResult::Pole);
    }

    #[test]
    fn expressions_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<MeroExpr>();
        assert_send_sync::<EvalResult>();
        assert_send_sync::<EllipticContext>();
    }

    #[test]
    fn compose_depth_capped() {
        let mut e = MeroExpr::log_of(MeroExpr::z1());
        for _ in 0..MAX_COMPOSE_DEPTH {
            e = MeroExpr::log_of(e);
        }
        let s = &MeroExpr::z1() + &MeroExpr::one();
        assert!(matches!(
            e.substitute(&s, &MeroExpr::z2()),
            Err(MeroError::DepthExceeded)
        ));
    }
}

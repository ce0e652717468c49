//! Deterministic sample generation with pole rejection.
//!
//! Samples are drawn sequentially from a seeded ChaCha stream, so the points
//! used for `n` samples are a prefix of the points used for any larger
//! count; residual maxima are monotone in the sample count.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::elliptic::EllipticContext;
use crate::mero::{MeroExpr, C64};

/// Evaluated quantities above this magnitude disqualify a sample point.
pub const MAGNITUDE_GUARD: f64 = 1e6;

#[derive(Debug, Error)]
#[error("unable to find enough pole-free samples ({found} of {wanted})")]
pub struct UnableToSample {
    pub wanted: usize,
    pub found: usize,
}

/// Rectangular sampling domain for `(z1, z2)`, with optional annulus
/// constraints on either coordinate.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub z1_re: (f64, f64),
    pub z1_im: (f64, f64),
    pub z2_re: (f64, f64),
    pub z2_im: (f64, f64),
    pub z1_annulus: Option<(f64, f64)>,
    pub z2_annulus: Option<(f64, f64)>,
    /// When set, `z1` is drawn as `x + y tau` with `(x, y)` from the re/im
    /// ranges, i.e. inside a fundamental cell of `Z + tau Z`.
    pub lattice_tau: Option<C64>,
}

impl SampleBox {
    /// Generic box away from the axes, for expression-level checks.
    pub fn generic() -> Self {
        SampleBox {
            z1_re: (0.1, 0.9),
            z1_im: (0.1, 0.9),
            z2_re: (-1.0, 1.0),
            z2_im: (-1.0, 1.0),
            z1_annulus: None,
            z2_annulus: None,
            lattice_tau: None,
        }
    }

    /// Annulus `|z1|, |z2| in [0.3, 3]`, the Hopf-cover domain.
    pub fn hopf() -> Self {
        SampleBox {
            z1_re: (-3.0, 3.0),
            z1_im: (-3.0, 3.0),
            z2_re: (-3.0, 3.0),
            z2_im: (-3.0, 3.0),
            z1_annulus: Some((0.3, 3.0)),
            z2_annulus: Some((0.3, 3.0)),
            lattice_tau: None,
        }
    }

    /// Fundamental-cell box for a base lattice `Z + tau Z`, and a box for
    /// the fiber coordinate.  The cell margins keep `z1` at distance ~0.14
    /// from the lattice so double-precision roundoff on `wp`-powers stays
    /// well below the certification tolerances.
    pub fn elliptic(tau: C64) -> Self {
        SampleBox {
            z1_re: (0.12, 0.88),
            z1_im: (0.12, 0.88),
            z2_re: (-1.0, 1.0),
            z2_im: (-1.0, 1.0),
            z1_annulus: None,
            z2_annulus: None,
            lattice_tau: Some(tau),
        }
    }

    /// Upper half plane box for hyperbolic base curves.
    pub fn hyperbolic() -> Self {
        SampleBox {
            z1_re: (-1.5, 1.5),
            z1_im: (0.3, 2.3),
            z2_re: (-1.0, 1.0),
            z2_im: (-1.0, 1.0),
            z1_annulus: None,
            z2_annulus: None,
            lattice_tau: None,
        }
    }
}

/// Deterministic sampler over a [`SampleBox`].
pub struct Sampler {
    rng: ChaCha8Rng,
    domain: SampleBox,
}

impl Sampler {
    pub fn new(domain: SampleBox, seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            domain,
        }
    }

    fn draw_in(&mut self, re: (f64, f64), im: (f64, f64), annulus: Option<(f64, f64)>) -> C64 {
        loop {
            let x = self.rng.gen_range(re.0..re.1);
            let y = self.rng.gen_range(im.0..im.1);
            let z = Complex64::new(x, y);
            match annulus {
                Some((lo, hi)) => {
                    let r = z.norm();
                    if r >= lo && r <= hi {
                        return z;
                    }
                }
                None => return z,
            }
        }
    }

    /// Draw one `(z1, z2)` point.
    pub fn draw(&mut self) -> (C64, C64) {
        let z1 = if let Some(tau) = self.domain.lattice_tau {
            let x = self.rng.gen_range(self.domain.z1_re.0..self.domain.z1_re.1);
            let y = self.rng.gen_range(self.domain.z1_im.0..self.domain.z1_im.1);
            Complex64::new(x, 0.0) + Complex64::new(y, 0.0) * tau
        } else {
            self.draw_in(self.domain.z1_re, self.domain.z1_im, self.domain.z1_annulus)
        };
        let z2 = self.draw_in(self.domain.z2_re, self.domain.z2_im, self.domain.z2_annulus);
        (z1, z2)
    }

    /// Collect up to `n` points at which every expression in `exprs`
    /// evaluates to a plain value of magnitude below [`MAGNITUDE_GUARD`].
    /// Fails if fewer than `n/2` such points are found.
    pub fn collect_valid(
        &mut self,
        exprs: &[MeroExpr],
        n: usize,
        ctx: Option<&EllipticContext>,
    ) -> Result<Vec<(C64, C64)>, UnableToSample> {
        let mut out = Vec::with_capacity(n);
        let max_tries = 60 * n.max(1);
        for _ in 0..max_tries {
            if out.len() == n {
                break;
            }
            let (z1, z2) = self.draw();
            let ok = exprs.iter().all(|e| match e.eval(z1, z2, ctx) {
                crate::mero::EvalResult::Value(v) => v.norm() <= MAGNITUDE_GUARD,
                _ => false,
            });
            if ok {
                out.push((z1, z2));
            }
        }
        if out.len() * 2 < n {
            return Err(UnableToSample {
                wanted: n,
                found: out.len(),
            });
        }
        Ok(out)
    }
}

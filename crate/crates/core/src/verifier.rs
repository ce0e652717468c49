//! Residual suites: per-generator invariance, flatness and torsion status,
//! family-membership verdicts and the divergence ledger, merged into a
//! deterministic structured report.

use serde::Serialize;
use thiserror::Error;

use crate::atlas::{AtlasError, SurfaceModel};
use crate::catalog::{
    self, hopf_monomial, hopf_scaling_exponent, oper_automorphy_matrices, oper_automorphy_printed,
    oper_cocycle_residual, OperMatrix,
};
use crate::connection::{
    curvature, invariance_residual, max_matrix_magnitude, torsion, ConnectionError,
    ConnectionMatrix,
};
use crate::mero::{MeroExpr, C64};
use crate::sampling::{SampleBox, Sampler, UnableToSample};

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Sampling(#[from] UnableToSample),
    #[error(transparent)]
    Mero(#[from] crate::mero::MeroError),
    #[error(transparent)]
    Catalog(#[from] catalog::CatalogError),
}

/// Sampling and tolerance configuration; identical inputs and seed produce
/// byte-identical reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 100,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorResidual {
    pub name: String,
    pub residual: f64,
    pub samples: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureStatus {
    pub max_abs: f64,
    pub flat: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TorsionStatus {
    pub max_abs: f64,
    pub torsion_free: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipVerdict {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
}

/// One divergence between a published formula and the form the invariance
/// system forces; both sides are measured where a residual makes sense.
#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub id: String,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub printed_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub verdict: String,
    pub generators: Vec<GeneratorResidual>,
    pub curvature: CurvatureStatus,
    pub torsion: TorsionStatus,
    pub membership: Vec<MembershipVerdict>,
    pub discrepancies: Vec<Discrepancy>,
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Runs the invariance residual against every deck generator of the model,
/// measures curvature and torsion, and assembles the report.  The verdict is
/// `pass` iff every generator residual stays within `cfg.tol`.
pub fn verify(
    conn: &ConnectionMatrix,
    model: &SurfaceModel,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifierError> {
    assert!(cfg.samples >= 10, "config needs at least 10 samples");
    let domain = model.sample_box();
    let mut generators = Vec::new();
    let mut all_pass = true;
    for (k, g) in model.deck_generators()?.into_iter().enumerate() {
        let (residual, used) = invariance_residual(
            conn,
            &g,
            &domain,
            cfg.samples,
            cfg.seed.wrapping_add(k as u64),
        )?;
        all_pass &= residual <= cfg.tol;
        generators.push(GeneratorResidual {
            name: g.name.clone(),
            residual,
            samples: used,
            rejected: cfg.samples - used,
        });
    }
    let curvature = flatness_check(conn, &domain, cfg)?;
    let torsion = torsion_check(conn, &domain, cfg)?;
    let membership = membership_verdicts(conn, model, cfg)?;
    let discrepancies = discrepancy_ledger(model, cfg)?;
    Ok(VerificationReport {
        verdict: if all_pass { "pass" } else { "fail" }.into(),
        generators,
        curvature,
        torsion,
        membership,
        discrepancies,
        seed: cfg.seed,
        tol: cfg.tol,
        samples: cfg.samples,
    })
}

/// Max sampled curvature magnitude; flat iff it stays within tolerance.
pub fn flatness_check(
    conn: &ConnectionMatrix,
    domain: &SampleBox,
    cfg: &VerifyConfig,
) -> Result<CurvatureStatus, VerifierError> {
    let r = curvature(conn)?;
    let max_abs = max_matrix_magnitude(
        &r,
        domain,
        cfg.samples,
        cfg.seed.wrapping_add(101),
        conn.ctx.as_ref(),
    )?;
    Ok(CurvatureStatus {
        max_abs,
        flat: max_abs <= cfg.tol,
    })
}

fn torsion_check(
    conn: &ConnectionMatrix,
    domain: &SampleBox,
    cfg: &VerifyConfig,
) -> Result<TorsionStatus, VerifierError> {
    let t = torsion(conn);
    let m = [
        [t[0].clone(), MeroExpr::zero()],
        [t[1].clone(), MeroExpr::zero()],
    ];
    let max_abs = max_matrix_magnitude(
        &m,
        domain,
        cfg.samples,
        cfg.seed.wrapping_add(103),
        conn.ctx.as_ref(),
    )?;
    Ok(TorsionStatus {
        max_abs,
        torsion_free: max_abs <= cfg.tol,
    })
}

/// Sampled residual of `lambda^s e(gamma_d z) - e(z)` for one Hopf scaling
/// line applied to an arbitrary expression; `s = s_num / d`.
fn hopf_line_residual(
    e: &MeroExpr,
    lambda: C64,
    d: u32,
    s_num: i64,
    cfg: &VerifyConfig,
    seed: u64,
) -> Result<f64, VerifierError> {
    let mu = (lambda.ln() / C64::new(d as f64, 0.0)).exp();
    let factor = (lambda.ln() * C64::new(s_num as f64 / d as f64, 0.0)).exp();
    let composed = e.substitute(&MeroExpr::z1().scale(lambda), &MeroExpr::z2().scale(mu))?;
    let diff = &composed.scale(factor) - e;
    let m = [
        [diff, MeroExpr::zero()],
        [MeroExpr::zero(), MeroExpr::zero()],
    ];
    Ok(max_matrix_magnitude(
        &m,
        &SampleBox::hopf(),
        40.min(cfg.samples),
        seed,
        None,
    )?)
}

fn membership_verdicts(
    conn: &ConnectionMatrix,
    model: &SurfaceModel,
    cfg: &VerifyConfig,
) -> Result<Vec<MembershipVerdict>, VerifierError> {
    let mut out = Vec::new();
    match model {
        SurfaceModel::Hopf { lambda, d } => {
            let slots = [
                ("f11", 0usize, 0usize, 0usize),
                ("f12", 0, 0, 1),
                ("f21", 0, 1, 0),
                ("f22", 0, 1, 1),
                ("g11", 1, 0, 0),
                ("g12", 1, 0, 1),
                ("g21", 1, 1, 0),
                ("g22", 1, 1, 1),
            ];
            for (k, (name, block, i, j)) in slots.into_iter().enumerate() {
                let e = if block == 0 {
                    &conn.f[i][j]
                } else {
                    &conn.g[i][j]
                };
                if e.is_zero() {
                    continue;
                }
                let (sn, _) = hopf_scaling_exponent(block, i, j, *d);
                let r = hopf_line_residual(
                    e,
                    *lambda,
                    *d,
                    sn,
                    cfg,
                    cfg.seed.wrapping_add(200 + k as u64),
                )?;
                out.push(MembershipVerdict {
                    name: format!("hopf_scaling_{name}"),
                    pass: r <= cfg.tol,
                    residual: r,
                });
            }
        }
        SurfaceModel::PrimaryKodaira { .. } => {
            let r = z2_independence_residual(conn, model, cfg)?;
            out.push(MembershipVerdict {
                name: "entries_z2_free".into(),
                pass: r <= cfg.tol,
                residual: r,
            });
            let r = max_matrix_magnitude(
                &[
                    [conn.g[0][1].clone(), MeroExpr::zero()],
                    [MeroExpr::zero(), MeroExpr::zero()],
                ],
                &model.sample_box(),
                cfg.samples,
                cfg.seed.wrapping_add(213),
                conn.ctx.as_ref(),
            )?;
            out.push(MembershipVerdict {
                name: "form_ii_g12_zero".into(),
                pass: r <= cfg.tol,
                residual: r,
            });
        }
        SurfaceModel::TwoTorus { ctx, .. } => {
            let r = z2_independence_residual(conn, model, cfg)?;
            out.push(MembershipVerdict {
                name: "entries_z2_free".into(),
                pass: r <= cfg.tol,
                residual: r,
            });
            let mut worst: f64 = 0.0;
            for e in conn.entries() {
                if e.is_zero() {
                    continue;
                }
                worst = worst.max(catalog::ellipticity_residual(
                    &e,
                    ctx,
                    cfg.seed.wrapping_add(211),
                ));
            }
            out.push(MembershipVerdict {
                name: "entries_elliptic".into(),
                pass: worst <= cfg.tol,
                residual: worst,
            });
        }
        SurfaceModel::SecondaryKodaira { .. } => {
            let r = z2_independence_residual(conn, model, cfg)?;
            out.push(MembershipVerdict {
                name: "entries_z2_free".into(),
                pass: r <= cfg.tol,
                residual: r,
            });
        }
        SurfaceModel::HyperbolicPrincipal { .. } => {
            // codimension-three subspace in the difference-tensor coordinates
            let nu = &conn.g[1][1] - &conn.g[0][0];
            let m = [
                [conn.g[0][1].clone(), conn.g[1][0].clone()],
                [&conn.f[0][1] - &nu, MeroExpr::zero()],
            ];
            let r = max_matrix_magnitude(
                &m,
                &model.sample_box(),
                cfg.samples,
                cfg.seed.wrapping_add(223),
                conn.ctx.as_ref(),
            )?;
            out.push(MembershipVerdict {
                name: "codim3_subspace".into(),
                pass: r <= cfg.tol,
                residual: r,
            });
        }
    }
    Ok(out)
}

fn z2_independence_residual(
    conn: &ConnectionMatrix,
    model: &SurfaceModel,
    cfg: &VerifyConfig,
) -> Result<f64, VerifierError> {
    let domain = model.sample_box();
    let exprs = conn.entries();
    let mut sampler = Sampler::new(domain, cfg.seed.wrapping_add(227));
    let pts = sampler.collect_valid(&exprs, 20.min(cfg.samples), conn.ctx.as_ref())?;
    let mut worst: f64 = 0.0;
    for (z1, z2) in pts {
        for e in &exprs {
            let a = e.eval(z1, z2, conn.ctx.as_ref());
            let b = e.eval(z1, z2 + C64::new(0.37, 0.41), conn.ctx.as_ref());
            if let (Some(a), Some(b)) = (a.value(), b.value()) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    Ok(worst)
}

/// Divergences between published formulas and the solved ones, measured
/// per model class.  The ledger is machine-readable and always attached.
fn discrepancy_ledger(
    model: &SurfaceModel,
    cfg: &VerifyConfig,
) -> Result<Vec<Discrepancy>, VerifierError> {
    let mut out = Vec::new();
    match model {
        SurfaceModel::Hopf { lambda, d } => {
            let (sn, _) = hopf_scaling_exponent(1, 0, 1, *d);
            let printed = hopf_monomial(1, 0, 1, *d, true);
            let derived = hopf_monomial(1, 0, 1, *d, false);
            let rp =
                hopf_line_residual(&printed, *lambda, *d, sn, cfg, cfg.seed.wrapping_add(229))?;
            let rd =
                hopf_line_residual(&derived, *lambda, *d, sn, cfg, cfg.seed.wrapping_add(233))?;
            out.push(Discrepancy {
                id: "hopf_g12_monomial".into(),
                description: format!(
                    "published dz2-block (1,2) monomial z2^{d}/z1 vs solved z2^{}/z1; \
                     the scaling line fixes the solved exponent (both agree at d = 2)",
                    2 * d - 2
                ),
                printed_residual: Some(rp),
                derived_residual: Some(rd),
            });
            out.push(Discrepancy {
                id: "hopf_curvature_sign".into(),
                description: "for P21 = 1 the curvature slot (2,1) evaluates to -1/z1^2 \
                              under R = dA + A^A; the published example carries +1/z1^2"
                    .into(),
                printed_residual: None,
                derived_residual: None,
            });
        }
        SurfaceModel::PrimaryKodaira { .. } => {
            out.push(Discrepancy {
                id: "kodaira_form_i_f21".into(),
                description: "the (2,1) dz1-entry is built as (Z^3 + p Z^2 + q Z + c21) g12 \
                              with p, q pinned by the deck system; the published cubic \
                              -(1/3 (Z+h)^3 + c (Z+k)^2 + c21) g12 does not satisfy it"
                    .into(),
                printed_residual: None,
                derived_residual: None,
            });
            out.push(Discrepancy {
                id: "kodaira_form_ii_signs".into(),
                description: "the signs of f12 inside the diagonal dz1-entries and of \
                              delta21 inside the (2,1) dz1-entry follow the pullback \
                              convention J^-1 (A o a) J + J^-1 dJ and differ from the \
                              published matrix"
                    .into(),
                printed_residual: None,
                derived_residual: None,
            });
        }
        SurfaceModel::SecondaryKodaira { .. } => {
            out.push(Discrepancy {
                id: "secondary_shift_naming".into(),
                description: "the linear fiber-shift coefficient appears as `a` in one \
                              published display and as `b` in the lift; the model stores \
                              it in the b slot and wires it into the variant-A corner"
                    .into(),
                printed_residual: None,
                derived_residual: None,
            });
        }
        SurfaceModel::HyperbolicPrincipal { gens, .. } => {
            if gens.len() >= 2 {
                let rp = oper_cocycle_residual(
                    &gens[0],
                    &gens[1],
                    30,
                    cfg.seed.wrapping_add(239),
                    oper_automorphy_printed,
                )?;
                let rd = oper_cocycle_residual(
                    &gens[0],
                    &gens[1],
                    30,
                    cfg.seed.wrapping_add(241),
                    oper_automorphy_matrices,
                )?;
                out.push(Discrepancy {
                    id: "oper_a2_first_row".into(),
                    description: "the jet factor's first row must satisfy m1*m3 = 2*m2 for \
                                  the cocycle identity; published (-3c, 2c^2) fails it, \
                                  solved (3c, -3/2 c^2) holds and matches the transfer"
                        .into(),
                    printed_residual: Some(rp),
                    derived_residual: Some(rd),
                });
            }
        }
        SurfaceModel::TwoTorus { .. } => {}
    }
    Ok(out)
}

/// Equivariance check for an operator against one generator.
pub fn oper_equivariance_check(
    delta: &OperMatrix,
    gamma: &[[f64; 2]; 2],
    cfg: &VerifyConfig,
) -> Result<f64, VerifierError> {
    Ok(catalog::oper_equivariance_residual(
        delta,
        gamma,
        cfg.samples.min(50),
        cfg.seed.wrapping_add(251),
    )?)
}

/// The six symmetry-breaking perturbations of the rejection suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Perturbation {
    /// Multiply one entry by `z2`.
    MulZ2,
    /// Add `z2` to one entry.
    AddZ2,
    /// Swap two entries.
    Swap,
    /// Scale one entry by 2.
    Scale2,
    /// Add `1/z2` to one entry.
    AddInvZ2,
    /// Add `z1` to an elliptic slot.
    AddZ1,
}

pub const ALL_PERTURBATIONS: [Perturbation; 6] = [
    Perturbation::MulZ2,
    Perturbation::AddZ2,
    Perturbation::Swap,
    Perturbation::Scale2,
    Perturbation::AddInvZ2,
    Perturbation::AddZ1,
];

/// Entry slot `(block, i, j)` with blocks 0 = `dz1`, 1 = `dz2`.
pub type Slot = (usize, usize, usize);

fn get_entry(conn: &ConnectionMatrix, s: Slot) -> MeroExpr {
    if s.0 == 0 {
        conn.f[s.1][s.2].clone()
    } else {
        conn.g[s.1][s.2].clone()
    }
}

fn set_entry(conn: &mut ConnectionMatrix, s: Slot, e: MeroExpr) {
    if s.0 == 0 {
        conn.f[s.1][s.2] = e;
    } else {
        conn.g[s.1][s.2] = e;
    }
}

/// Applies the perturbation to `slot` (and `slot2` for swaps).
pub fn perturb(
    conn: &ConnectionMatrix,
    p: Perturbation,
    slot: Slot,
    slot2: Slot,
) -> ConnectionMatrix {
    let mut out = conn.clone();
    let e = get_entry(conn, slot);
    match p {
        Perturbation::MulZ2 => set_entry(&mut out, slot, &e * &MeroExpr::z2()),
        Perturbation::AddZ2 => set_entry(&mut out, slot, &e + &MeroExpr::z2()),
        Perturbation::Swap => {
            let e2 = get_entry(conn, slot2);
            set_entry(&mut out, slot, e2);
            set_entry(&mut out, slot2, e);
        }
        Perturbation::Scale2 => set_entry(&mut out, slot, e.scale(C64::new(2.0, 0.0))),
        Perturbation::AddInvZ2 => set_entry(
            &mut out,
            slot,
            &e + &MeroExpr::quot(MeroExpr::one(), MeroExpr::z2()),
        ),
        Perturbation::AddZ1 => set_entry(&mut out, slot, &e + &MeroExpr::z1()),
    }
    out
}

/// Worst generator residual of a connection under a model's full deck suite.
pub fn worst_generator_residual(
    conn: &ConnectionMatrix,
    model: &SurfaceModel,
    cfg: &VerifyConfig,
) -> Result<f64, VerifierError> {
    let domain = model.sample_box();
    let mut worst: f64 = 0.0;
    for (k, g) in model.deck_generators()?.into_iter().enumerate() {
        let (r, _) = invariance_residual(
            conn,
            &g,
            &domain,
            cfg.samples,
            cfg.seed.wrapping_add(k as u64),
        )?;
        worst = worst.max(r);
    }
    Ok(worst)
}

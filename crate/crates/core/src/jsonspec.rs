//! JSON schemas: the expression term grammar, surface models, connection
//! matrices and family build specs.
//!
//! Expressions round-trip bit-exactly on structure: deserialization builds
//! nodes verbatim, without the simplifying constructors.  Complex numbers
//! are `[re, im]` pairs throughout.

use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

use crate::atlas::SurfaceModel;
use crate::catalog::{
    self, CatalogError, FormIIParams, FormIParams, HopfParams, OperMatrix, RationalFn,
    SecondaryParams, SecondaryVariant,
};
use crate::connection::ConnectionMatrix;
use crate::elliptic::{EllipticContext, EllipticError};
use crate::mero::{MeroExpr, Node, Univariate, C64};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed spec: {0}")]
    Malformed(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

fn bad(msg: impl Into<String>) -> JsonError {
    JsonError::Malformed(msg.into())
}

pub fn complex_to_json(v: C64) -> Value {
    json!([v.re, v.im])
}

pub fn complex_from_json(v: &Value) -> Result<C64, JsonError> {
    let arr = v
        .as_array()
        .ok_or_else(|| bad("complex must be [re, im]"))?;
    if arr.len() != 2 {
        return Err(bad("complex must be [re, im]"));
    }
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| bad("complex re not a number"))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| bad("complex im not a number"))?;
    Ok(Complex64::new(re, im))
}

// ---------------------------------------------------------------------------
// expression term grammar

pub fn expr_to_json(e: &MeroExpr) -> Value {
    match e.node() {
        Node::Const(v) => json!({"op": "const", "value": complex_to_json(*v)}),
        Node::Z1 => json!({"op": "z1"}),
        Node::Z2 => json!({"op": "z2"}),
        Node::G2 => json!({"op": "g2"}),
        Node::G3 => json!({"op": "g3"}),
        Node::Uni(f, inner) => {
            let mut obj = serde_json::Map::new();
            let op = match f {
                Univariate::Wp => "wp",
                Univariate::WpPrime => "wpprime",
                Univariate::Zeta => "zeta",
                Univariate::Log => "log",
                Univariate::Gen(g) => {
                    obj.insert("op".into(), json!("gen"));
                    obj.insert("name".into(), json!(g.name));
                    if !matches!(inner.node(), Node::Z1) {
                        obj.insert("arg".into(), expr_to_json(inner));
                    }
                    return Value::Object(obj);
                }
            };
            obj.insert("op".into(), json!(op));
            if !matches!(inner.node(), Node::Z1) {
                obj.insert("arg".into(), expr_to_json(inner));
            }
            Value::Object(obj)
        }
        Node::Sum(v) => {
            json!({"op": "sum", "terms": v.iter().map(expr_to_json).collect::<Vec<_>>()})
        }
        Node::Prod(v) => {
            json!({"op": "prod", "factors": v.iter().map(expr_to_json).collect::<Vec<_>>()})
        }
        Node::Quot(a, b) => json!({"op": "quot", "num": expr_to_json(a), "den": expr_to_json(b)}),
        Node::Pow(b, k) => json!({"op": "pow", "base": expr_to_json(b), "exp": k}),
    }
}

pub fn expr_from_json(v: &Value) -> Result<MeroExpr, JsonError> {
    let obj = v
        .as_object()
        .ok_or_else(|| bad("expression must be an object"))?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("expression needs an `op` string"))?;
    let arg = |name: &str| -> Result<MeroExpr, JsonError> {
        match obj.get(name) {
            Some(inner) => expr_from_json(inner),
            None => Ok(MeroExpr::raw(Node::Z1)),
        }
    };
    Ok(match op {
        "const" => MeroExpr::raw(Node::Const(complex_from_json(
            obj.get("value").ok_or_else(|| bad("const needs `value`"))?,
        )?)),
        "z1" => MeroExpr::raw(Node::Z1),
        "z2" => MeroExpr::raw(Node::Z2),
        "g2" => MeroExpr::raw(Node::G2),
        "g3" => MeroExpr::raw(Node::G3),
        "wp" => MeroExpr::raw(Node::Uni(Univariate::Wp, arg("arg")?)),
        "wpprime" => MeroExpr::raw(Node::Uni(Univariate::WpPrime, arg("arg")?)),
        "zeta" => MeroExpr::raw(Node::Uni(Univariate::Zeta, arg("arg")?)),
        "log" => MeroExpr::raw(Node::Uni(Univariate::Log, arg("arg")?)),
        "gen" => {
            let name = obj
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("gen needs `name`"))?;
            return Err(JsonError::UnknownGenerator(name.into()));
        }
        "sum" => {
            let terms = obj
                .get("terms")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("sum needs `terms`"))?;
            MeroExpr::raw(Node::Sum(
                terms.iter().map(expr_from_json).collect::<Result<_, _>>()?,
            ))
        }
        "prod" => {
            let factors = obj
                .get("factors")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("prod needs `factors`"))?;
            MeroExpr::raw(Node::Prod(
                factors
                    .iter()
                    .map(expr_from_json)
                    .collect::<Result<_, _>>()?,
            ))
        }
        "quot" => MeroExpr::raw(Node::Quot(
            expr_from_json(obj.get("num").ok_or_else(|| bad("quot needs `num`"))?)?,
            expr_from_json(obj.get("den").ok_or_else(|| bad("quot needs `den`"))?)?,
        )),
        "pow" => {
            let k = obj
                .get("exp")
                .and_then(Value::as_i64)
                .ok_or_else(|| bad("pow needs integer `exp`"))?;
            MeroExpr::raw(Node::Pow(
                expr_from_json(obj.get("base").ok_or_else(|| bad("pow needs `base`"))?)?,
                k as i32,
            ))
        }
        other => return Err(bad(format!("unknown op `{other}`"))),
    })
}

// ---------------------------------------------------------------------------
// connection and model

pub fn connection_to_json(conn: &ConnectionMatrix) -> Value {
    let mat = |m: &crate::connection::Mat2| {
        json!([
            [expr_to_json(&m[0][0]), expr_to_json(&m[0][1])],
            [expr_to_json(&m[1][0]), expr_to_json(&m[1][1])],
        ])
    };
    json!({
        "F": mat(&conn.f),
        "G": mat(&conn.g),
        "ctx": conn.ctx.as_ref().map(|c| json!({"tau": complex_to_json(c.tau)})),
    })
}

pub fn connection_from_json(v: &Value) -> Result<ConnectionMatrix, JsonError> {
    let obj = v
        .as_object()
        .ok_or_else(|| bad("connection must be an object"))?;
    let mat = |name: &str| -> Result<crate::connection::Mat2, JsonError> {
        let rows = obj
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("connection needs 2x2 `{name}`")))?;
        if rows.len() != 2 {
            return Err(bad(format!("`{name}` must have two rows")));
        }
        let mut out = crate::connection::mat2_zero();
        for (i, row) in rows.iter().enumerate() {
            let cols = row
                .as_array()
                .ok_or_else(|| bad(format!("`{name}` row must be an array")))?;
            if cols.len() != 2 {
                return Err(bad(format!("`{name}` row must have two entries")));
            }
            for (j, cell) in cols.iter().enumerate() {
                out[i][j] = expr_from_json(cell)?;
            }
        }
        Ok(out)
    };
    let ctx = match obj.get("ctx") {
        None | Some(Value::Null) => None,
        Some(c) => {
            let tau = complex_from_json(c.get("tau").ok_or_else(|| bad("ctx needs `tau`"))?)?;
            // invariants are recomputed on load, never trusted from disk
            Some(EllipticContext::new(tau)?)
        }
    };
    Ok(ConnectionMatrix::new(mat("F")?, mat("G")?, ctx))
}

pub fn model_to_json(m: &SurfaceModel) -> Value {
    match m {
        SurfaceModel::Hopf { lambda, d } => {
            json!({"class": "hopf", "lambda": complex_to_json(*lambda), "d": d})
        }
        SurfaceModel::PrimaryKodaira {
            ctx,
            fiber_tau,
            beta,
        } => json!({
            "class": "primary_kodaira",
            "tau": complex_to_json(ctx.tau),
            "fiber_tau": complex_to_json(*fiber_tau),
            "beta": [complex_to_json(beta[0]), complex_to_json(beta[1])],
        }),
        SurfaceModel::TwoTorus {
            ctx,
            fiber_tau,
            shifts,
        } => json!({
            "class": "two_torus",
            "tau": complex_to_json(ctx.tau),
            "fiber_tau": complex_to_json(*fiber_tau),
            "shifts": [complex_to_json(shifts[0]), complex_to_json(shifts[1])],
        }),
        SurfaceModel::SecondaryKodaira {
            base,
            nu,
            theta,
            mu,
            b,
            c,
        } => json!({
            "class": "secondary_kodaira",
            "base": model_to_json(base),
            "nu": complex_to_json(*nu),
            "theta": complex_to_json(*theta),
            "mu": complex_to_json(*mu),
            "b": complex_to_json(*b),
            "c": complex_to_json(*c),
        }),
        SurfaceModel::HyperbolicPrincipal { gens, fiber_tau } => json!({
            "class": "hyperbolic",
            "gens": gens,
            "fiber_tau": complex_to_json(*fiber_tau),
        }),
    }
}

pub fn model_from_json(v: &Value) -> Result<SurfaceModel, JsonError> {
    let obj = v
        .as_object()
        .ok_or_else(|| bad("model must be an object"))?;
    let class = obj
        .get("class")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("model needs a `class`"))?;
    let cplx = |name: &str| -> Result<C64, JsonError> {
        complex_from_json(
            obj.get(name)
                .ok_or_else(|| bad(format!("model needs `{name}`")))?,
        )
    };
    Ok(match class {
        "hopf" => SurfaceModel::Hopf {
            lambda: cplx("lambda")?,
            d: obj
                .get("d")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("hopf model needs integer `d`"))? as u32,
        },
        "primary_kodaira" => {
            let beta = match obj.get("beta") {
                Some(Value::Array(a)) if a.len() == 2 => {
                    [complex_from_json(&a[0])?, complex_from_json(&a[1])?]
                }
                None => [Complex64::new(0.0, 0.0); 2],
                _ => return Err(bad("`beta` must be a pair of complex numbers")),
            };
            SurfaceModel::PrimaryKodaira {
                ctx: EllipticContext::new(cplx("tau")?)?,
                fiber_tau: cplx("fiber_tau")?,
                beta,
            }
        }
        "two_torus" => {
            let shifts = match obj.get("shifts") {
                Some(Value::Array(a)) if a.len() == 2 => {
                    [complex_from_json(&a[0])?, complex_from_json(&a[1])?]
                }
                None => [Complex64::new(0.0, 0.0); 2],
                _ => return Err(bad("`shifts` must be a pair of complex numbers")),
            };
            SurfaceModel::TwoTorus {
                ctx: EllipticContext::new(cplx("tau")?)?,
                fiber_tau: cplx("fiber_tau")?,
                shifts,
            }
        }
        "secondary_kodaira" => SurfaceModel::SecondaryKodaira {
            base: Box::new(model_from_json(
                obj.get("base")
                    .ok_or_else(|| bad("secondary model needs `base`"))?,
            )?),
            nu: cplx("nu")?,
            theta: cplx("theta")?,
            mu: cplx("mu")?,
            b: cplx("b")?,
            c: cplx("c")?,
        },
        "hyperbolic" => {
            let gens = obj
                .get("gens")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("hyperbolic model needs `gens`"))?;
            let mut parsed = Vec::new();
            for g in gens {
                let m: [[f64; 2]; 2] = serde_json::from_value(g.clone())
                    .map_err(|e| bad(format!("bad generator matrix: {e}")))?;
                parsed.push(m);
            }
            SurfaceModel::HyperbolicPrincipal {
                gens: parsed,
                fiber_tau: cplx("fiber_tau")?,
            }
        }
        other => return Err(bad(format!("unknown surface class `{other}`"))),
    })
}

// ---------------------------------------------------------------------------
// family build specs

fn rational_from_json(v: &Value) -> Result<RationalFn, JsonError> {
    let obj = v
        .as_object()
        .ok_or_else(|| bad("rational fn must be an object"))?;
    let coeffs = |name: &str, default_one: bool| -> Result<Vec<C64>, JsonError> {
        match obj.get(name) {
            Some(Value::Array(a)) => a.iter().map(complex_from_json).collect(),
            None if default_one => Ok(vec![Complex64::new(1.0, 0.0)]),
            None => Ok(vec![]),
            _ => Err(bad(format!("`{name}` must be a coefficient list"))),
        }
    };
    Ok(RationalFn {
        num: coeffs("num", false)?,
        den: coeffs("den", true)?,
    })
}

fn rational_mat_from_json(v: Option<&Value>) -> Result<[[RationalFn; 2]; 2], JsonError> {
    let mut out = [
        [RationalFn::zero(), RationalFn::zero()],
        [RationalFn::zero(), RationalFn::zero()],
    ];
    let Some(v) = v else { return Ok(out) };
    let rows = v
        .as_array()
        .ok_or_else(|| bad("rational matrix must be 2x2"))?;
    if rows.len() != 2 {
        return Err(bad("rational matrix must have two rows"));
    }
    for (i, row) in rows.iter().enumerate() {
        let cols = row.as_array().ok_or_else(|| bad("rational matrix row"))?;
        if cols.len() != 2 {
            return Err(bad("rational matrix row must have two entries"));
        }
        for (j, cell) in cols.iter().enumerate() {
            out[i][j] = rational_from_json(cell)?;
        }
    }
    Ok(out)
}

fn expr_field(obj: &serde_json::Map<String, Value>, name: &str) -> Result<MeroExpr, JsonError> {
    match obj.get(name) {
        Some(v) => expr_from_json(v),
        None => Ok(MeroExpr::zero()),
    }
}

/// A parsed family spec: the model and the constructed member.
pub struct BuiltFamily {
    pub family: String,
    pub model: SurfaceModel,
    pub connection: ConnectionMatrix,
}

/// Parses `{"family": ..., "model": ..., "params": ...}` and constructs the
/// member.  Parameters omitted from `params` default to zero.
pub fn build_family(v: &Value) -> Result<BuiltFamily, JsonError> {
    let obj = v.as_object().ok_or_else(|| bad("spec must be an object"))?;
    let family = obj
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("spec needs a `family`"))?
        .to_string();
    let model = model_from_json(
        obj.get("model")
            .ok_or_else(|| bad("spec needs a `model`"))?,
    )?;
    let empty = serde_json::Map::new();
    let params = match obj.get("params") {
        Some(Value::Object(p)) => p,
        None => &empty,
        _ => return Err(bad("`params` must be an object")),
    };
    let connection = match family.as_str() {
        "hopf" => {
            let SurfaceModel::Hopf { d, .. } = &model else {
                return Err(bad("hopf family needs a hopf model"));
            };
            let hp = HopfParams {
                p: rational_mat_from_json(params.get("P"))?,
                q: rational_mat_from_json(params.get("Q"))?,
            };
            catalog::hopf_connection(*d, &hp)?
        }
        "kodaira_I" => {
            let Some(ctx) = model.elliptic_ctx() else {
                return Err(bad("kodaira_I needs a primary_kodaira model"));
            };
            let p = FormIParams {
                g12: expr_field(params, "g12")?,
                delta11: expr_field(params, "delta11")?,
                delta22: expr_field(params, "delta22")?,
                delta21: expr_field(params, "delta21")?,
                gamma12: expr_field(params, "gamma12")?,
                gamma11: expr_field(params, "gamma11")?,
                gamma22: expr_field(params, "gamma22")?,
                gamma21: expr_field(params, "gamma21")?,
            };
            catalog::kodaira_form_i(ctx, &p)?
        }
        "kodaira_II" => {
            let Some(ctx) = model.elliptic_ctx() else {
                return Err(bad("kodaira_II needs a primary_kodaira model"));
            };
            let p = FormIIParams {
                g11: expr_field(params, "g11")?,
                g22: expr_field(params, "g22")?,
                f12: expr_field(params, "f12")?,
                gamma11: expr_field(params, "gamma11")?,
                gamma22: expr_field(params, "gamma22")?,
                gamma21: expr_field(params, "gamma21")?,
                delta21: expr_field(params, "delta21")?,
            };
            catalog::kodaira_form_ii(ctx, &p)?
        }
        "torus" => {
            let Some(ctx) = model.elliptic_ctx() else {
                return Err(bad("torus family needs a two_torus model"));
            };
            let list = params
                .get("entries")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("torus family needs `entries` (8 expressions)"))?;
            if list.len() != 8 {
                return Err(bad("torus `entries` must have 8 expressions"));
            }
            let mut entries: [MeroExpr; 8] = core::array::from_fn(|_| MeroExpr::zero());
            for (i, e) in list.iter().enumerate() {
                entries[i] = expr_from_json(e)?;
            }
            catalog::torus_connection(ctx, entries)?
        }
        "secondary_a" | "secondary_b" => {
            let variant = if family == "secondary_a" {
                SecondaryVariant::A
            } else {
                SecondaryVariant::B
            };
            let p = SecondaryParams {
                gamma11: expr_field(params, "gamma11")?,
                gamma22: expr_field(params, "gamma22")?,
                delta21: expr_field(params, "delta21")?,
                gamma21: expr_field(params, "gamma21")?,
            };
            catalog::secondary_connection(variant, &model, &p)?
        }
        "oper" => {
            let delta = match params.get("delta") {
                Some(Value::Object(d)) => OperMatrix {
                    b: expr_field(d, "b")?,
                    c: expr_field(d, "c")?,
                    nu: expr_field(d, "nu")?,
                    a: expr_field(d, "a")?,
                    mu: expr_field(d, "mu")?,
                },
                _ => OperMatrix::zero(),
            };
            let g11 = expr_field(params, "g11")?;
            catalog::connection_from_oper(&g11, &delta, model.elliptic_ctx())?
        }
        other => return Err(bad(format!("unknown family `{other}`"))),
    };
    Ok(BuiltFamily {
        family,
        model,
        connection,
    })
}

/// Parses a verify spec: either a family build spec, or a raw pair
/// `{"model": ..., "connection": {"F": ..., "G": ..., "ctx": ...}}` so that
/// arbitrary (including symmetry-broken) matrices can be certified.
pub fn parse_verify_spec(v: &Value) -> Result<BuiltFamily, JsonError> {
    let obj = v.as_object().ok_or_else(|| bad("spec must be an object"))?;
    if let Some(conn) = obj.get("connection") {
        let model = model_from_json(
            obj.get("model")
                .ok_or_else(|| bad("spec needs a `model`"))?,
        )?;
        let mut connection = connection_from_json(conn)?;
        if connection.ctx.is_none() {
            connection.ctx = model.elliptic_ctx().cloned();
        }
        return Ok(BuiltFamily {
            family: "raw".into(),
            model,
            connection,
        });
    }
    build_family(v)
}

/// Static catalog of family constructors and their parameter schemas.
pub fn catalog_schema() -> Value {
    json!({
        "families": [
            {
                "family": "hopf",
                "model": {"class": "hopf", "lambda": "[re, im], 0 < |lambda| < 1", "d": "integer >= 1"},
                "params": {"P": "2x2 of {num: [[re,im],...], den: [[re,im],...]}", "Q": "same"},
            },
            {
                "family": "kodaira_I",
                "model": {"class": "primary_kodaira", "tau": "[re, im]", "fiber_tau": "[re, im]", "beta": "pair"},
                "params": {"g12": "elliptic expr (nonzero)", "delta11": "expr", "delta22": "expr",
                            "delta21": "expr", "gamma12": "expr", "gamma11": "expr",
                            "gamma22": "expr", "gamma21": "expr"},
            },
            {
                "family": "kodaira_II",
                "model": {"class": "primary_kodaira", "tau": "[re, im]", "fiber_tau": "[re, im]", "beta": "pair"},
                "params": {"g11": "expr", "g22": "expr", "f12": "expr", "gamma11": "expr",
                            "gamma22": "expr", "gamma21": "expr", "delta21": "expr"},
            },
            {
                "family": "torus",
                "model": {"class": "two_torus", "tau": "[re, im]", "fiber_tau": "[re, im]", "shifts": "pair"},
                "params": {"entries": "8 elliptic expressions (f11,f12,f21,f22,g11,g12,g21,g22)"},
            },
            {
                "family": "secondary_a",
                "model": {"class": "secondary_kodaira", "base": "primary_kodaira model",
                           "nu": "[re, im]", "theta": "[re, im]", "mu": "[re, im]", "b": "[re, im]", "c": "[re, im]"},
                "params": {"gamma11": "nu^-1-twisted elliptic expr", "gamma22": "same",
                            "delta21": "same", "gamma21": "untwisted elliptic expr"},
            },
            {
                "family": "secondary_b",
                "model": {"class": "secondary_kodaira", "base": "primary_kodaira model",
                           "nu": "[re, im]", "theta": "[re, im]", "mu": "[re, im]", "b": "[re, im]", "c": "[re, im]"},
                "params": {"gamma11": "nu^-1-twisted elliptic expr", "gamma21": "mu/nu^2-twisted elliptic expr"},
            },
            {
                "family": "oper",
                "model": {"class": "hyperbolic", "gens": "[[a,b],[c,d]] list, det 1", "fiber_tau": "[re, im]"},
                "params": {"g11": "expr", "delta": {"b": "expr", "c": "expr", "nu": "expr", "a": "expr", "mu": "expr (= nu)"}},
            },
        ],
        "expression_grammar": {
            "ops": ["sum", "prod", "quot", "pow", "const", "z1", "z2", "wp", "wpprime", "zeta", "log", "g2", "g3", "gen"],
            "complex": "[re, im]",
        },
    })
}

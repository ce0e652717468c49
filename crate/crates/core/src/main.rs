//! Command-line front end: build family members from JSON specs, verify
//! them, compute curvature, and emit deterministic reports.
//!
//! Exit codes: 0 = success/pass, 1 = verification failure, 2 = input error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ellconn::connection::max_matrix_magnitude;
use ellconn::jsonspec::{self, BuiltFamily};
use ellconn::selftest;
use ellconn::verifier::{self, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "ellconn",
    version,
    about = "meromorphic affine connections on elliptic surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct CommonOpts {
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample count per residual
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Residual tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// RNG seed (falls back to ELLCONN_SEED, then 0)
    #[arg(long, env = "ELLCONN_SEED", default_value_t = 0)]
    seed: u64,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a family member from a JSON spec and emit its matrix
    Build {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Build (or load) a connection and certify it against its deck group
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Curvature matrix of a family member plus its sampled maximum
    Curvature {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// List the family constructors and their parameter schemas
    Catalog {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the full acceptance suite
    Selftest {
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_spec(path: &PathBuf) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn build_from(path: &PathBuf) -> Result<BuiltFamily, String> {
    let spec = read_spec(path)?;
    jsonspec::build_family(&spec).map_err(|e| e.to_string())
}

fn emit(common: &CommonOpts, payload: &str) -> Result<(), String> {
    match &common.out {
        Some(p) => fs::write(p, payload).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}

fn cfg_of(common: &CommonOpts) -> VerifyConfig {
    VerifyConfig {
        samples: common.samples,
        tol: common.tol,
        seed: common.seed,
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Build { spec, common } => {
            let built = build_from(&spec)?;
            let payload = json!({
                "family": built.family,
                "model": jsonspec::model_to_json(&built.model),
                "connection": jsonspec::connection_to_json(&built.connection),
            });
            emit(&common, &serde_json::to_string_pretty(&payload).unwrap())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { spec, common } => {
            let parsed = read_spec(&spec)?;
            let built = jsonspec::parse_verify_spec(&parsed).map_err(|e| e.to_string())?;
            let cfg = cfg_of(&common);
            let report = verifier::verify(&built.connection, &built.model, &cfg)
                .map_err(|e| e.to_string())?;
            let payload = match common.format {
                Format::Json => report.to_json(),
                Format::Text => render_report_text(&report),
            };
            emit(&common, &payload)?;
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Curvature { spec, common } => {
            let built = build_from(&spec)?;
            let r = ellconn::connection::curvature(&built.connection).map_err(|e| e.to_string())?;
            let cfg = cfg_of(&common);
            let max_abs = max_matrix_magnitude(
                &r,
                &built.model.sample_box(),
                cfg.samples,
                cfg.seed,
                built.connection.ctx.as_ref(),
            )
            .map_err(|e| e.to_string())?;
            let payload = json!({
                "curvature": [
                    [jsonspec::expr_to_json(&r[0][0]), jsonspec::expr_to_json(&r[0][1])],
                    [jsonspec::expr_to_json(&r[1][0]), jsonspec::expr_to_json(&r[1][1])],
                ],
                "max_abs_sampled": max_abs,
                "flat_at_tol": max_abs <= cfg.tol,
            });
            emit(&common, &serde_json::to_string_pretty(&payload).unwrap())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Catalog { common } => {
            emit(
                &common,
                &serde_json::to_string_pretty(&jsonspec::catalog_schema()).unwrap(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { common } => {
            let cfg = cfg_of(&common);
            let report = selftest::run_selftest(&cfg);
            match common.format {
                Format::Json => emit(&common, &report.to_json())?,
                Format::Text => {
                    let mut lines = String::new();
                    for c in &report.criteria {
                        lines.push_str(&format!(
                            "criterion {} ({}): {} - {}\n",
                            c.id,
                            c.name,
                            if c.pass { "PASS" } else { "FAIL" },
                            c.details
                        ));
                    }
                    lines.push_str(&format!(
                        "overall: {}",
                        if report.all_pass { "PASS" } else { "FAIL" }
                    ));
                    emit(&common, &lines)?;
                }
            }
            Ok(if report.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn fmt15(x: f64) -> String {
    format!("{x:.15e}")
}

fn render_report_text(report: &verifier::VerificationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("verdict: {}\n", report.verdict));
    for g in &report.generators {
        out.push_str(&format!(
            "generator {:<12} residual {} ({} samples, {} rejected)\n",
            g.name,
            fmt15(g.residual),
            g.samples,
            g.rejected
        ));
    }
    out.push_str(&format!(
        "curvature: max|R| {}{}\n",
        fmt15(report.curvature.max_abs),
        if report.curvature.flat { " (flat)" } else { "" }
    ));
    out.push_str(&format!(
        "torsion: max|T| {}{}\n",
        fmt15(report.torsion.max_abs),
        if report.torsion.torsion_free {
            " (torsion-free)"
        } else {
            ""
        }
    ));
    for m in &report.membership {
        out.push_str(&format!(
            "membership {:<24} {} (residual {})\n",
            m.name,
            if m.pass { "yes" } else { "no" },
            fmt15(m.residual)
        ));
    }
    for d in &report.discrepancies {
        out.push_str(&format!("divergence {}: {}", d.id, d.description));
        if let (Some(p), Some(dv)) = (d.printed_residual, d.derived_residual) {
            out.push_str(&format!(
                " [printed residual {}, solved residual {}]",
                fmt15(p),
                fmt15(dv)
            ));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "seed {} tol {} samples {}",
        report.seed,
        fmt15(report.tol),
        report.samples
    ));
    out
}

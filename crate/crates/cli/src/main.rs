//! `padic`: exact p-adic computations from the command line. Output is JSON on
//! standard output; errors go to standard error as `ClassName: message`.

mod job;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use job::{Coeffs, JobSpec, Tower};
use padic_core::bench::{self, BenchConfig, BenchEngine};
use padic_core::epoch::DEFAULT_EPOCH_CAP;
use padic_core::exact::{digit_expansion, ExactElt, ExactPoly};
use padic_core::hensel::{roots, split_factorization, DEFAULT_DEPTH};
use padic_core::newton::rational_json;
use padic_core::ramify::ramification_polygon;
use padic_core::val::parse_rational;
use padic_core::{Error, ExtVal, Result};

#[derive(Parser)]
#[command(name = "padic", version, about = "Exact p-adic arithmetic")]
struct Cli {
    /// Echo the parsed job in canonical form on standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct FieldArgs {
    /// Residue characteristic.
    #[arg(short, long)]
    p: u64,
    /// Inertial polynomial over Q_p, constant term first.
    #[arg(long, allow_hyphen_values = true)]
    inert: Option<String>,
    /// Eisenstein polynomial over the field so far, constant term first.
    #[arg(long, allow_hyphen_values = true)]
    eisenstein: Option<String>,
    /// Highest epoch any computation may reach.
    #[arg(long, env = "PADIC_MAX_EPOCH")]
    max_epoch: Option<u32>,
}

#[derive(Args)]
struct PolyArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Coefficients `num/den`, constant term first.
    #[arg(short, long, allow_hyphen_values = true)]
    f: String,
    /// Epoch at which approximations are printed.
    #[arg(long, default_value_t = 5)]
    epoch: u32,
}

#[derive(Subcommand)]
enum Cmd {
    /// Roots of a polynomial in the field.
    Roots(PolyArgs),
    /// Factorization into pieces with one slope and one residual factor each.
    Factor {
        #[command(flatten)]
        poly: PolyArgs,
        /// Recursion budget for splitting by slope and residual factor
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
    },
    /// Newton polygon vertices.
    Newton(PolyArgs),
    /// Ramification polygon, lower breaks and transition function.
    Ramify(FieldArgs),
    /// Valuation of a rational number.
    Val {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(short, allow_hyphen_values = true)]
        x: String,
    },
    /// The dependency-tracking benchmark.
    BenchDeps {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        epochs: u32,
        #[arg(long, default_value = "epoch")]
        engine: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn job(field: &FieldArgs, poly: Option<&str>, verbose: bool) -> Result<JobSpec> {
    let opt = |s: &Option<String>| s.as_deref().map(Coeffs::parse).transpose();
    let spec = JobSpec {
        tower: Tower { p: field.p, inert: opt(&field.inert)?, eisenstein: opt(&field.eisenstein)? },
        poly: poly.map(Coeffs::parse).transpose()?,
        max_epoch: field.max_epoch.unwrap_or(DEFAULT_EPOCH_CAP),
    };
    if verbose {
        eprintln!("{}", spec.render());
    }
    Ok(spec)
}

fn poly_of(spec: &JobSpec) -> Result<ExactPoly> {
    let k = spec.tower.build(&spec.engine())?;
    ExactPoly::from_rationals(&k, &spec.poly.as_ref().expect("polynomial given").0)
}

fn ext_json(v: &ExtVal) -> Value {
    match v {
        ExtVal::Fin(q) => rational_json(q),
        _ => json!(v.to_string()),
    }
}

fn elt_json(x: &ExactElt, n: u32) -> Result<Value> {
    let a = x.approx(n)?;
    let mut out = json!({
        "valuation": ext_json(&a.weak_val()),
        "precision": ext_json(&a.abs_prec()),
        "approximation": a.render(),
    });
    if let Some((v, digits, _)) = digit_expansion(&a) {
        out["digits"] = json!(digits);
        out["digits_from"] = json!(v);
    }
    Ok(out)
}

fn poly_json(f: &ExactPoly, n: u32) -> Result<Value> {
    let a = f.approx(n)?;
    Ok(Value::Array(a.coeffs().iter().map(|c| json!(c.render())).collect()))
}

fn run(cmd: Cmd, verbose: bool) -> Result<Value> {
    match cmd {
        Cmd::Roots(a) => {
            let f = poly_of(&job(&a.field, Some(&a.f), verbose)?)?;
            let rs = roots(&f)?;
            rs.iter().map(|r| elt_json(r, a.epoch)).collect::<Result<Vec<_>>>().map(Value::Array)
        }
        Cmd::Factor { poly: a, depth } => {
            let f = poly_of(&job(&a.field, Some(&a.f), verbose)?)?;
            let mut out = Vec::new();
            for (g, tag) in split_factorization(&f, depth)? {
                out.push(json!({
                    "degree": g.degree(),
                    "slope": tag.slope.as_ref().map(rational_json),
                    "residual": tag.residual,
                    "multiplicity": tag.multiplicity,
                    "separated": tag.separated,
                    "depth": tag.depth,
                    "coefficients": poly_json(&g, a.epoch)?,
                }));
            }
            Ok(Value::Array(out))
        }
        Cmd::Newton(a) => Ok(poly_of(&job(&a.field, Some(&a.f), verbose)?)?.newton_polygon(None)?.to_json()),
        Cmd::Ramify(field) => {
            let spec = job(&field, None, verbose)?;
            if spec.tower.eisenstein.is_none() && spec.tower.inert.is_none() {
                return Err(Error::Parse("ramify needs --eisenstein and/or --inert".into()));
            }
            Ok(ramification_polygon(&spec.tower.build(&spec.engine())?)?.to_json())
        }
        Cmd::Val { field, x } => {
            let spec = job(&field, None, verbose)?;
            let x = parse_rational(&x)?;
            let k = spec.tower.build(&spec.engine())?;
            Ok(ext_json(&k.from_rational(&x)?.valuation()?))
        }
        Cmd::BenchDeps { n, epochs, engine, seed } => {
            let engine: BenchEngine = engine.parse()?;
            Ok(bench::run(BenchConfig { n, epochs, seed, engine })?.to_json())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd, cli.verbose) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: {e}", e.class());
            ExitCode::from(if matches!(e, Error::Parse(_)) { 2 } else { 1 })
        }
    }
}

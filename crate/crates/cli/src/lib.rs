//! Command-line driver for gml-core. Every command writes one JSON report
//! `{"command", "config", "reports", "pass"}` and maps the outcome to an
//! exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use gml_core::charfun::{default_grid, search_coincidence, theta_eval, verify_coincidence, DEFAULT_ORDER};
use gml_core::contraction::analyze_contraction;
use gml_core::counterexamples::run_counterexample;
use gml_core::fundamental::{check_catalog, check_identity, solve_fundamental, FundamentalSet};
use gml_core::models::{build_cnu_model, build_pure_model};
use gml_core::mu::{mu, sample_domain, ScalingSubspace, DEFAULT_PRECISION};
use gml_core::tuples::{verify_tuple, TupleJson};
use gml_core::{CMatrix, GammaTuple, GmlError, Kind, MatrixJson, Tolerances, C64};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_IDENTITY_FAILURE: i32 = 2;
pub const EXIT_STRUCTURAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const TOL_ENV: &str = "GML_TOL_EXACT";
pub const MIN_MODES: usize = 8;

#[derive(Parser, Debug)]
#[command(name = "gml", version, about = "Numerics for tetrablock and Gamma_E operator tuples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Number of Hardy-space modes used by the model commands (>= 8).
    #[arg(long, global = true, default_value_t = 64)]
    pub modes: usize,
    /// Override tol_exact (also read from GML_TOL_EXACT).
    #[arg(long, global = true)]
    pub tol_exact: Option<f64>,
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Necessary conditions: commutativity, contractivity of the distinguished
    /// entry, solvability of the fundamental equations, induced triples.
    Verify { tuple: PathBuf },
    /// Fundamental operators of the tuple and of its adjoint, in defect coordinates.
    Fundamental { tuple: PathBuf },
    /// Evaluate the identity catalog (all ids of the tuple's kind by default).
    Identities {
        tuple: PathBuf,
        /// Comma separated identity ids.
        #[arg(long, value_delimiter = ',')]
        catalog: Option<Vec<String>>,
    },
    /// Characteristic function Θ_T(z) = -T + z D_T* (I - zT*)^-1 D_T on the defect space.
    Theta {
        matrix: PathBuf,
        /// Point in the disk as re,im.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Search for unitaries between defect spaces under which the two
    /// characteristic functions coincide.
    Coincide {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
    /// Hardy-space model of a tuple with pure distinguished entry.
    ModelPure { tuple: PathBuf },
    /// Model of a tuple with c.n.u. distinguished entry that commutes with the
    /// adjoints of the other entries.
    ModelCnu { tuple: PathBuf },
    /// Weighted-shift tuple for which the c.n.u. model fails.
    Counterexample {
        #[arg(long)]
        kind: Kind,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha_im: f64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
    },
    /// Structured singular value for a block-diagonal scalar structure n:s:r1,r2,..
    Mu {
        matrix: PathBuf,
        #[arg(long)]
        #[serde(serialize_with = "display_str")]
        structure: ScalingSubspace,
        #[arg(long, default_value_t = DEFAULT_PRECISION)]
        precision: f64,
    },
    /// Random points of the domain of a kind.
    SampleDomain {
        #[arg(long)]
        kind: Kind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Scale so that μ of the generating matrix is at most this (0, 1].
        #[arg(long, default_value_t = 1.0)]
        radius_cap: f64,
        /// Also dump the points as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn display_str<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub modes: usize,
    pub tol: Tolerances,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Builds the config from parsed arguments; `env_tol` is the value of GML_TOL_EXACT.
    pub fn from_cli(cli: Cli, env_tol: Option<String>) -> Result<Self, String> {
        let mut tol = Tolerances::default();
        if let Some(v) = env_tol {
            tol.tol_exact = v.trim().parse().map_err(|_| format!("{TOL_ENV}={v} is not a number"))?;
        }
        if let Some(v) = cli.tol_exact {
            tol.tol_exact = v;
        }
        if let Some(v) = cli.tol_rank {
            tol.tol_rank = v;
        }
        tol.validate().map_err(|e| e.to_string())?;
        if cli.modes < MIN_MODES {
            return Err(format!("--modes must be at least {MIN_MODES}"));
        }
        Ok(RunConfig { command: cli.command, modes: cli.modes, tol, seed: cli.seed, output: cli.output })
    }

    fn to_json(&self) -> Value {
        json!({
            "command": to_value(&self.command),
            "modes": self.modes,
            "seed": self.seed,
            "tol": self.tol,
        })
    }
}

enum Failure {
    Io(String),
    Structural(String),
    Identity(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Io(_) => EXIT_IO,
            Failure::Structural(_) => EXIT_STRUCTURAL,
            Failure::Identity(_) => EXIT_IDENTITY_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Structural(m) | Failure::Identity(m) => m,
        }
    }
}

impl From<GmlError> for Failure {
    fn from(e: GmlError) -> Self {
        match e {
            GmlError::HypothesisViolated { .. } => Failure::Identity(e.to_string()),
            _ => Failure::Structural(e.to_string()),
        }
    }
}

struct Outcome {
    reports: Vec<Value>,
    pass: bool,
    /// Exit code when `pass` is false.
    fail_code: i32,
}

impl Outcome {
    fn new(reports: Vec<Value>, pass: bool, fail_code: i32) -> Self {
        Outcome { reports, pass, fail_code }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<CMatrix, Failure> {
    let text = read_text(path)?;
    let j: MatrixJson = serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    CMatrix::try_from(&j).map_err(Failure::from)
}

fn load_tuple(path: &Path, tol: &Tolerances) -> Result<GammaTuple, Failure> {
    let text = read_text(path)?;
    let j: TupleJson = serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    GammaTuple::from_json(&j, tol).map_err(Failure::from)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn family_json(fs: &FundamentalSet) -> Value {
    let names = fs.kind.op_names();
    let ops: Vec<Value> = fs
        .kind
        .op_indices()
        .iter()
        .zip(&fs.ops_on_defect)
        .zip(&fs.residuals)
        .map(|((&i, x), r)| json!({"name": names[i], "op": to_value(&MatrixJson::from(x)), "residual": r}))
        .collect();
    json!({"defect_dim": fs.defect_dim(), "ops": ops})
}

/// Runs `verify_tuple` and turns a failed structural verdict into a report with exit 3.
fn require_structure(t: &GammaTuple, tol: &Tolerances) -> Result<(Value, bool), Failure> {
    let v = verify_tuple(t, tol)?;
    Ok((json!({"verdict": to_value(&v)}), v.structural_ok()))
}

fn parse_z(text: &str) -> Result<C64, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || Failure::Structural(format!("--z `{text}` is not of the form re,im"));
    match parts.as_slice() {
        [re] => Ok(C64::new(re.trim().parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(C64::new(re.trim().parse().map_err(|_| bad())?, im.trim().parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let tol = &cfg.tol;
    match &cfg.command {
        Command::Verify { tuple } => {
            let t = load_tuple(tuple, tol)?;
            let (rep, ok) = require_structure(&t, tol)?;
            Ok(Outcome::new(vec![rep], ok, EXIT_STRUCTURAL))
        }
        Command::Fundamental { tuple } => {
            let t = load_tuple(tuple, tol)?;
            let (verdict, ok) = require_structure(&t, tol)?;
            if !ok {
                return Ok(Outcome::new(vec![verdict], false, EXIT_STRUCTURAL));
            }
            let fs = solve_fundamental(&t, tol)?;
            let fss = solve_fundamental(&t.adjoint(), tol)?;
            let rep = json!({"fundamental": family_json(&fs), "adjoint_fundamental": family_json(&fss)});
            Ok(Outcome::new(vec![verdict, rep], true, EXIT_STRUCTURAL))
        }
        Command::Identities { tuple, catalog: ids } => {
            let t = load_tuple(tuple, tol)?;
            let (verdict, ok) = require_structure(&t, tol)?;
            if !ok {
                return Ok(Outcome::new(vec![verdict], false, EXIT_STRUCTURAL));
            }
            let fs = solve_fundamental(&t, tol)?;
            let fss = solve_fundamental(&t.adjoint(), tol)?;
            let reports = match ids {
                None => check_catalog(&t, &fs, &fss, tol)?,
                Some(ids) => {
                    let mut ids: Vec<&str> = ids.iter().map(|s| s.trim()).collect();
                    ids.sort_unstable();
                    ids.dedup();
                    ids.iter().map(|id| check_identity(id, &t, &fs, &fss, tol)).collect::<gml_core::Result<Vec<_>>>()?
                }
            };
            let pass = reports.iter().all(|r| r.pass || !r.applicable);
            let mut out = vec![verdict];
            out.extend(reports.iter().map(to_value));
            Ok(Outcome::new(out, pass, EXIT_IDENTITY_FAILURE))
        }
        Command::Theta { matrix, z } => {
            let m = load_matrix(matrix)?;
            let z = parse_z(z)?;
            let cd = analyze_contraction(&m, tol)?;
            let th = theta_eval(&cd, z)?;
            let rep = json!({
                "z": [z.re, z.im],
                "defect_dim": cd.defect_space.dim(),
                "defect_star_dim": cd.defect_space_star.dim(),
                "theta": to_value(&MatrixJson::from(&th)),
            });
            Ok(Outcome::new(vec![rep], true, EXIT_STRUCTURAL))
        }
        Command::Coincide { first, second, order } => {
            let a = analyze_contraction(&load_matrix(first)?, tol)?;
            let b = analyze_contraction(&load_matrix(second)?, tol)?;
            match search_coincidence(&a, &b, *order, tol) {
                Some(pair) => {
                    let check =
                        verify_coincidence(&a, &b, &pair, &default_grid(), 1e-8_f64.max(100.0 * tol.tol_exact))?;
                    let rep = json!({
                        "found": true,
                        "u": to_value(&MatrixJson::from(&pair.u)),
                        "u_star": to_value(&MatrixJson::from(&pair.u_star)),
                        "verification": to_value(&check),
                    });
                    Ok(Outcome::new(vec![rep], check.pass, EXIT_IDENTITY_FAILURE))
                }
                None => Ok(Outcome::new(vec![json!({"found": false})], false, EXIT_IDENTITY_FAILURE)),
            }
        }
        Command::ModelPure { tuple } => {
            let t = load_tuple(tuple, tol)?;
            let (verdict, ok) = require_structure(&t, tol)?;
            if !ok {
                return Ok(Outcome::new(vec![verdict], false, EXIT_STRUCTURAL));
            }
            let fss = solve_fundamental(&t.adjoint(), tol)?;
            let rep = build_pure_model(&t, &fss, cfg.modes, tol)?;
            Ok(Outcome::new(vec![verdict, to_value(&rep)], rep.pass, EXIT_IDENTITY_FAILURE))
        }
        Command::ModelCnu { tuple } => {
            let t = load_tuple(tuple, tol)?;
            let (verdict, ok) = require_structure(&t, tol)?;
            if !ok {
                return Ok(Outcome::new(vec![verdict], false, EXIT_STRUCTURAL));
            }
            let fs = solve_fundamental(&t, tol)?;
            let fss = solve_fundamental(&t.adjoint(), tol)?;
            let rep = build_cnu_model(&t, &fs, &fss, cfg.modes, tol)?;
            Ok(Outcome::new(vec![verdict, to_value(&rep)], rep.pass, EXIT_IDENTITY_FAILURE))
        }
        Command::Counterexample { kind, alpha, alpha_im, dim } => {
            let rep = run_counterexample(*kind, C64::new(*alpha, *alpha_im), *dim, tol)?;
            let summary = format!(
                "{kind} alpha={alpha}{:+}i dim={dim}: mismatch {:.12} (expected {:.12}), hypothesis violated: {}",
                alpha_im, rep.mismatch, rep.expected_mismatch, rep.hypothesis_violated
            );
            let mut v = to_value(&rep);
            if let Some(obj) = v.as_object_mut() {
                obj.insert("summary".into(), Value::String(summary));
            }
            Ok(Outcome::new(vec![v], rep.pass, EXIT_IDENTITY_FAILURE))
        }
        Command::Mu { matrix, structure, precision } => {
            let a = load_matrix(matrix)?;
            let value = mu(&a, structure, *precision)?;
            Ok(Outcome::new(vec![json!({"mu": value, "precision": precision})], true, EXIT_STRUCTURAL))
        }
        Command::SampleDomain { kind, count, radius_cap, csv } => {
            let pts = sample_domain(*kind, *count, *radius_cap, cfg.seed)?;
            let rows: Vec<Value> =
                pts.iter().map(|p| Value::Array(p.coords.iter().map(|z| json!([z.re, z.im])).collect())).collect();
            if let Some(path) = csv {
                let mut text = String::new();
                let header: Vec<String> =
                    (0..kind.arity()).flat_map(|i| [format!("x{}_re", i + 1), format!("x{}_im", i + 1)]).collect();
                text.push_str(&header.join(","));
                text.push('\n');
                for p in &pts {
                    let cells: Vec<String> =
                        p.coords.iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
                    text.push_str(&cells.join(","));
                    text.push('\n');
                }
                fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
            Ok(Outcome::new(vec![json!({"kind": kind, "points": rows})], true, EXIT_STRUCTURAL))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify { .. } => "verify",
        Command::Fundamental { .. } => "fundamental",
        Command::Identities { .. } => "identities",
        Command::Theta { .. } => "theta",
        Command::Coincide { .. } => "coincide",
        Command::ModelPure { .. } => "model-pure",
        Command::ModelCnu { .. } => "model-cnu",
        Command::Counterexample { .. } => "counterexample",
        Command::Mu { .. } => "mu",
        Command::SampleDomain { .. } => "sample-domain",
    }
}

/// Runs one command and returns the report text together with the exit code.
pub fn run_report(cfg: &RunConfig) -> (String, i32) {
    let (mut report, code) = match execute(cfg) {
        Ok(out) => {
            let code = if out.pass { EXIT_PASS } else { out.fail_code };
            (json!({"reports": out.reports, "pass": out.pass}), code)
        }
        Err(f) => (json!({"reports": [], "pass": false, "error": f.message()}), f.code()),
    };
    if let Some(obj) = report.as_object_mut() {
        obj.insert("command".into(), Value::String(command_name(&cfg.command).into()));
        obj.insert("config".into(), cfg.to_json());
    }
    let text = serde_json::to_string_pretty(&report).unwrap_or_else(|_| "{}".into());
    (text, code)
}

pub fn run(cfg: RunConfig) -> i32 {
    let (text, code) = run_report(&cfg);
    match &cfg.output {
        Some(path) => match fs::write(path, format!("{text}\n")) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("gml: cannot write {}: {e}", path.display());
                EXIT_IO
            }
        },
        None => {
            let mut out = std::io::stdout().lock();
            if writeln!(out, "{text}").is_err() {
                return EXIT_IO;
            }
            code
        }
    }
}

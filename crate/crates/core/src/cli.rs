//! Command-line front end. `main.rs` only parses arguments and maps the
//! result of [`run`] onto an exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{input, Error, Result};
use crate::frame::Frame;
use crate::geometry::{default_ball_resolution, Polytope};
use crate::grassmann::{
    cos_abs, cosine_eigenvalue, cosine_eigenvalue_sign, crofton_evaluate, hw_vector, verify_sign_cosine,
    verify_sign_radon, verify_sign_tr, HighestWeight, SignOptions,
};
use crate::harmonics::{sph_dim, HarmonicExpansion};
use crate::inequalities::{
    af_check, eta_certificate, iso_chain, minkowski2_ball, random_body, BodyKind, BodyParams, CheckConfig,
    InequalityReport,
};
use crate::mixed::{default_fit_grid, intrinsic_volumes, mixed_volume};
use crate::montecarlo::{stream_rng, McConfig, DEFAULT_SAMPLES};
use crate::spherical::{hr_form, make_valuation, SphericalValuation};
use crate::verdict::Verdict;

const STREAM_AF: u64 = 101;
const STREAM_HR: u64 = 102;

#[derive(Debug, Parser)]
#[command(name = "vallab", version, about = "Mixed volumes, valuations and their sign checks")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Monte-Carlo sample count.
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Relative tolerance; each check has its own default.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Lemma {
    #[value(name = "signR")]
    SignR,
    #[value(name = "signT")]
    SignT,
    #[value(name = "signTR")]
    SignTr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Box,
    RandomHull,
    Zonotope,
    Ball,
}

impl From<Kind> for BodyKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Box => BodyKind::Box,
            Kind::RandomHull => BodyKind::RandomHull,
            Kind::Zonotope => BodyKind::Zonotope,
            Kind::Ball => BodyKind::Ball,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mixed volume of the n bodies listed in a JSON file.
    Mixedvol {
        bodies: PathBuf,
        #[arg(long)]
        fit_grid: Option<usize>,
    },
    /// Intrinsic volumes of one body.
    Intrinsic {
        body: PathBuf,
        #[arg(long)]
        fit_grid: Option<usize>,
        #[arg(long)]
        ball_resolution: Option<usize>,
    },
    /// Aleksandrov-Fenchel checks on a bodies file or on random tuples.
    Af {
        #[arg(required_unless_present = "random", conflicts_with = "random")]
        bodies: Option<PathBuf>,
        /// Dimension and number of random tuples.
        #[arg(long, num_args = 2, value_names = ["N", "COUNT"])]
        random: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = Kind::RandomHull)]
        kind: Kind,
        /// Points per random hull or segments per zonotope.
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long)]
        fit_grid: Option<usize>,
    },
    /// Isoperimetric chain, Minkowski's second inequality and its eta certificate.
    Iso {
        body: PathBuf,
        #[arg(long)]
        fit_grid: Option<usize>,
        #[arg(long)]
        ball_resolution: Option<usize>,
    },
    /// Sign of the degree-1 Hodge-Riemann form.
    HrSign {
        #[arg(required_unless_present = "random_harmonic", conflicts_with = "random_harmonic")]
        valuation: Option<PathBuf>,
        /// Random primitive valuation with a single harmonic degree.
        #[arg(long, num_args = 2, value_names = ["N", "Q"])]
        random_harmonic: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Exact cosine-transform eigenvalue for a highest weight.
    CosineEig {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Entries of lambda, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weight: Vec<i64>,
    },
    /// Monte-Carlo verification of a transform sign identity.
    GrassmannVerify {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: i64,
        #[arg(long, default_value_t = 5)]
        test_points: usize,
    },
    /// Crofton valuation of a body for a density on the Grassmannian.
    Crofton {
        body: PathBuf,
        #[arg(long)]
        k: usize,
        /// `one`, `hw:L1,L2,..` (real part of h_lambda) or `cos:A1,A2,..`
        /// (cosine to a coordinate plane).
        #[arg(long, default_value = "one")]
        density: String,
    },
}

/// Result of a check-style command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Failed,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Failed => 1,
            Status::Inconclusive => 3,
        }
    }

    fn from_verdicts(v: impl IntoIterator<Item = Verdict>) -> Self {
        let mut status = Status::Pass;
        for v in v {
            match v {
                Verdict::Fail => return Status::Failed,
                Verdict::Inconclusive => status = Status::Inconclusive,
                Verdict::Pass => {}
            }
        }
        status
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

pub struct Outcome {
    pub value: Value,
    /// Rows for CSV output; commands without reports flatten `value` instead.
    pub reports: Vec<InequalityReport>,
    pub status: Status,
}

impl Outcome {
    fn plain(value: Value) -> Self {
        Outcome {
            value,
            reports: Vec::new(),
            status: Status::Pass,
        }
    }
}

/// Runs the command and writes its output; returns the exit status.
pub fn run(cli: &Cli) -> Result<Status> {
    let outcome = execute(cli)?;
    let text = render(&outcome, cli.format, cli.seed)?;
    match &cli.output {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(outcome.status)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let check = |fit_grid: Option<usize>, ball_resolution: Option<usize>| CheckConfig {
        tol: cli.tol,
        fit_grid,
        ball_resolution,
        seed: Some(cli.seed),
    };
    match &cli.command {
        Command::Mixedvol { bodies, fit_grid } => {
            let bodies: Vec<Polytope> = read_json(bodies)?;
            let n = bodies.len();
            let grid = fit_grid.unwrap_or_else(|| default_fit_grid(n));
            let refs: Vec<&Polytope> = bodies.iter().collect();
            let v = mixed_volume(&refs, grid)?;
            Ok(Outcome::plain(json!({"n": n, "fit_grid": grid, "mixed_volume": v})))
        }
        Command::Intrinsic {
            body,
            fit_grid,
            ball_resolution,
        } => {
            let p: Polytope = read_json(body)?;
            let n = p.dim();
            let res = ball_resolution.unwrap_or_else(|| default_ball_resolution(n));
            let c = intrinsic_volumes(&p, res, fit_grid.unwrap_or_else(|| default_fit_grid(n)))?;
            Ok(Outcome::plain(serde_json::to_value(c)?))
        }
        Command::Af {
            bodies,
            random,
            kind,
            points,
            fit_grid,
        } => {
            let cfg = check(*fit_grid, None);
            let reports = match (bodies, random) {
                (Some(path), _) => {
                    let bodies: Vec<Polytope> = read_json(path)?;
                    let refs: Vec<&Polytope> = bodies.iter().collect();
                    vec![af_check(&refs, &cfg)?]
                }
                (None, Some(r)) => random_af(r[0], r[1], (*kind).into(), *points, cli.seed, &cfg)?,
                (None, None) => return input("give a bodies file or --random N COUNT"),
            };
            Ok(report_outcome(serde_json::to_value(&reports)?, reports))
        }
        Command::Iso {
            body,
            fit_grid,
            ball_resolution,
        } => {
            let p: Polytope = read_json(body)?;
            let cfg = check(*fit_grid, *ball_resolution);
            let chain = iso_chain(&p, &cfg)?;
            let mink = minkowski2_ball(&p, &cfg)?;
            let eta = eta_certificate(&p, &cfg)?;
            let pass = chain.monotone && chain.log_concave && mink.pass && eta.pass;
            let value = json!({"chain": chain, "minkowski_second": mink, "eta": eta});
            let mut reports = chain.steps.clone();
            reports.push(mink);
            let mut out = report_outcome(value, reports);
            out.status = if pass { Status::Pass } else { Status::Failed };
            Ok(out)
        }
        Command::HrSign {
            valuation,
            random_harmonic,
            count,
        } => {
            let vals: Vec<SphericalValuation> = match (valuation, random_harmonic) {
                (Some(path), _) => vec![read_json(path)?],
                (None, Some(r)) => random_valuations(r[0], r[1], *count, cli.seed)?,
                (None, None) => return input("give a valuation file or --random-harmonic N Q"),
            };
            let mut certs = Vec::new();
            for v in &vals {
                certs.extend(hr_form(v)?);
            }
            let status = Status::from_verdicts(certs.iter().map(|c| c.verdict));
            Ok(Outcome {
                value: json!({"seed": cli.seed, "certificates": certs}),
                reports: Vec::new(),
                status,
            })
        }
        Command::CosineEig { n, k, weight } => {
            let w = HighestWeight::from_lambda(*n, *k, weight)?;
            let value = cosine_eigenvalue(*n, *k, &w)?;
            let sign = cosine_eigenvalue_sign(*n, *k, &w)?;
            let mut out = json!({
                "n": n, "k": k, "lambda": w.lambda(), "m": w.m(),
                "eigenvalue": value, "sign": sign,
            });
            let mut status = Status::Pass;
            if w.in_pi() {
                let expected = if (w.m()[0] - 1) % 2 == 0 { 1 } else { -1 };
                let verdict = Verdict::from_bool(sign == expected);
                out["expected_sign"] = json!(expected);
                out["verdict"] = serde_json::to_value(verdict)?;
                status = Status::from_verdicts([verdict]);
            }
            Ok(Outcome {
                value: out,
                reports: Vec::new(),
                status,
            })
        }
        Command::GrassmannVerify {
            lemma,
            n,
            k,
            m,
            test_points,
        } => {
            let opts = SignOptions {
                samples: cli.samples,
                seed: cli.seed,
                test_points: *test_points,
                ..Default::default()
            };
            let report = match lemma {
                Lemma::SignR => verify_sign_radon(*n, *k, *m, &opts)?,
                Lemma::SignT => verify_sign_cosine(*n, *k, *m, &opts)?,
                Lemma::SignTr => verify_sign_tr(*n, *k, *m, &opts)?,
            };
            Ok(Outcome {
                status: Status::from_verdicts([report.verdict]),
                value: serde_json::to_value(&report)?,
                reports: Vec::new(),
            })
        }
        Command::Crofton { body, k, density } => {
            let p: Polytope = read_json(body)?;
            let f = Density::parse(density, p.dim(), *k)?;
            let cfg = McConfig::new(cli.samples, cli.seed);
            let est = crofton_evaluate(|e| f.eval(e), *k, &p, &cfg)?;
            Ok(Outcome::plain(json!({
                "k": k, "density": density, "value": est.mean.re,
                "std_err": est.std_err, "samples": est.samples, "seed": cli.seed,
            })))
        }
    }
}

fn report_outcome(value: Value, reports: Vec<InequalityReport>) -> Outcome {
    let status = if reports.iter().all(|r| r.pass) {
        Status::Pass
    } else {
        Status::Failed
    };
    Outcome { value, reports, status }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// `count` AF reports on random `n`-tuples; tuple `i` draws from its own
/// generator so the output does not depend on scheduling.
pub fn random_af(
    n: usize,
    count: usize,
    kind: BodyKind,
    points: usize,
    seed: u64,
    cfg: &CheckConfig,
) -> Result<Vec<InequalityReport>> {
    let params = BodyParams {
        count: points,
        ..Default::default()
    };
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, STREAM_AF, i as u64);
            let bodies: Vec<Polytope> = (0..n)
                .map(|_| random_body(n, kind, &mut rng, &params))
                .collect::<Result<_>>()?;
            let refs: Vec<&Polytope> = bodies.iter().collect();
            af_check(&refs, cfg)
        })
        .collect()
}

/// Degree-1 valuations whose density is a random element of degree `q`.
pub fn random_valuations(n: usize, q: usize, count: usize, seed: u64) -> Result<Vec<SphericalValuation>> {
    if q == 1 {
        return input("degree 1 harmonics give the zero valuation");
    }
    if n < 2 {
        return input("spherical valuations need n >= 2");
    }
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, STREAM_HR, i as u64);
            let mut e = HarmonicExpansion::zeros(n, q)?;
            let block: Vec<f64> = (0..sph_dim(n, q)).map(|_| rng.sample(StandardNormal)).collect();
            e.block_mut(q).copy_from_slice(&block);
            make_valuation(n, 1, e)
        })
        .collect()
}

/// Densities accepted by the `crofton` subcommand.
pub enum Density {
    One,
    HighestWeight(HighestWeight),
    Cosine(Frame),
}

impl Density {
    pub fn parse(spec: &str, n: usize, k: usize) -> Result<Self> {
        let ints = |s: &str| -> Result<Vec<i64>> {
            s.split(',')
                .map(|t| t.trim().parse::<i64>().map_err(|_| Error::Input(format!("bad integer {t:?} in density"))))
                .collect()
        };
        match spec.split_once(':') {
            None if spec == "one" => Ok(Density::One),
            Some(("hw", rest)) => Ok(Density::HighestWeight(HighestWeight::from_lambda(n, k, &ints(rest)?)?)),
            Some(("cos", rest)) => {
                let axes = ints(rest)?;
                if axes.len() != k || axes.iter().any(|&a| a < 0 || a as usize >= n) {
                    return input(format!("cos density needs {k} axes in 0..{n}"));
                }
                let axes: Vec<usize> = axes.iter().map(|&a| a as usize).collect();
                Ok(Density::Cosine(Frame::coordinate(n, &axes)?))
            }
            _ => input(format!("unknown density {spec:?}; expected one, hw:.. or cos:..")),
        }
    }

    pub fn eval(&self, e: &Frame) -> f64 {
        match self {
            Density::One => 1.0,
            Density::HighestWeight(w) => hw_vector(w, e).map_or(f64::NAN, |z: Complex64| z.re),
            Density::Cosine(f) => cos_abs(e, f).unwrap_or(f64::NAN),
        }
    }
}

pub fn render(outcome: &Outcome, format: Format, seed: u64) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&outcome.value)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if outcome.reports.is_empty() {
                w.write_record(["field", "value"])?;
                for (k, v) in flatten(&outcome.value) {
                    w.write_record([k, v])?;
                }
            } else {
                w.write_record(["name", "lhs", "rhs", "slack", "pass", "seed"])?;
                for r in &outcome.reports {
                    let seed = r.inputs.seed.unwrap_or(seed);
                    w.write_record(&[
                        r.name.clone(),
                        r.lhs.to_string(),
                        r.rhs.to_string(),
                        r.slack.to_string(),
                        r.pass.to_string(),
                        seed.to_string(),
                    ])?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Text => {
            let mut out = String::new();
            for r in &outcome.reports {
                out.push_str(&format!(
                    "{:<24} lhs={:.9e} rhs={:.9e} slack={:+.3e} {}\n",
                    r.name,
                    r.lhs,
                    r.rhs,
                    r.slack,
                    if r.pass { "PASS" } else { "FAIL" }
                ));
            }
            if outcome.reports.is_empty() {
                for (k, v) in flatten(&outcome.value) {
                    out.push_str(&format!("{k} = {v}\n"));
                }
            }
            Ok(out)
        }
    }
}

fn flatten(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, x)| walk(&key(k), x, out)),
            Value::Array(items) => items.iter().enumerate().for_each(|(i, x)| walk(&key(&i.to_string()), x, out)),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

/// Applies `VALLAB_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("VALLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Input(format!("VALLAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Input(format!("cannot configure threads: {e}")))
}

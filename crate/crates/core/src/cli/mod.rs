//! Command-line front end.
//!
//! Every command writes one JSON document holding the result, the effective
//! configuration, where each setting came from, the seed, the version and the
//! wall time. The `config` member can be fed back through `--config` to
//! reproduce the run.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical policy
//! violation, 4 I/O failure.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{Resolver, Source, SEED_ENV};

use crate::error::{Error, Result};
use crate::estimation::{sigma_confidence, ScalingMode};
use crate::fbm::{running_sup_drifted, sample_fbm, surplus, write_path_csv, ModelParams};
use crate::grid::{fmt_num, GridFunction, TimeGrid};
use crate::ruin::{bm_closed_form, finite_diff_sens, kde_density_sens, mc_ruin, Bandwidth, FdScheme};
use crate::sensitivity::{
    delta_method_ci, malliavin_sens_detailed, CiConfig, CiSensitivity, IndicatorForm, MalliavinConfig,
};
use crate::fraccalc::{QuadScheme, QuadratureConfig};
use crate::special::normal_quantile;
use crate::validate::{run_validation, Scale};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fracruin", version, about = "Ruin probabilities under fractional Brownian motion")]
pub struct Cli {
    /// JSON config file: a flat object, or an earlier result document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the JSON result (stdout if absent).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Maximum worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one surplus path.
    Simulate(SimulateArgs),
    /// Estimate σ from observed surplus data.
    Estimate(EstimateArgs),
    /// Monte Carlo ruin probability.
    Ruin(RuinArgs),
    /// Sensitivity of the ruin probability to σ.
    Sens(SensArgs),
    /// Confidence interval for the ruin probability from observed data.
    Ci(CiArgs),
    /// Run the invariant checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "H")]
    pub h: Option<f64>,
    /// Ruin horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct McArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Defaults to $FRACRUIN_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct MalliavinArgs {
    #[arg(long)]
    pub r: Option<u32>,
    #[arg(long)]
    pub m_exp: Option<u32>,
    #[arg(long)]
    pub sharpness: Option<f64>,
    /// ruin | survival-negated
    #[arg(long)]
    pub indicator: Option<String>,
    /// singularity-substituted | product-rule
    #[arg(long)]
    pub quad_scheme: Option<String>,
    #[arg(long)]
    pub refinement: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the path as CSV (t, w, x).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Surplus CSV (t, x) with a header row.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "H")]
    pub h: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// variance-decay | span-scaled
    #[arg(long)]
    pub scaling_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct RuinArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Args)]
pub struct SensArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// malliavin | fd | kde
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// central | forward
    #[arg(long)]
    pub fd_scheme: Option<String>,
    /// Common random numbers for fd.
    #[arg(long)]
    pub crn: Option<bool>,
    /// silverman, or a fixed bandwidth.
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[command(flatten)]
    pub malliavin: MalliavinArgs,
    /// Per-path CSV (M, tau, denom, weight, indicator) for malliavin.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "H")]
    pub h: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub scaling_mode: Option<String>,
    #[command(flatten)]
    pub mc: McArgs,
    /// fd | kde | malliavin
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub malliavin: MalliavinArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// reduced | full
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Outcome of a command before it is written out.
struct Outcome {
    result: Value,
    warnings: Vec<String>,
    /// Set when a numerical policy was violated; the document is still written.
    violation: Option<String>,
}

impl Outcome {
    fn ok(result: impl Serialize, warnings: Vec<String>) -> Result<Self> {
        Ok(Self { result: serde_json::to_value(result)?, warnings, violation: None })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Usage(_) | Error::Config(_) => EXIT_CONFIG,
        Error::Sampler(_) | Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fracruin: {e}");
            exit_code(&e)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Estimate(_) => "estimate",
        Command::Ruin(_) => "ruin",
        Command::Sens(_) => "sens",
        Command::Ci(_) => "ci",
        Command::Validate(_) => "validate",
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let name = command_name(&cli.command);
    let mut r = Resolver::load(cli.config.as_deref(), name)?;
    let workers = cli.workers;
    if workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(&mut r, a)?,
        Command::Estimate(a) => estimate(&mut r, a)?,
        Command::Ruin(a) => ruin(&mut r, a, workers)?,
        Command::Sens(a) => sens(&mut r, a, workers)?,
        Command::Ci(a) => ci(&mut r, a, workers)?,
        Command::Validate(a) => validate(&mut r, a, workers)?,
    };
    let seed = r_seed(&r);
    let (echo, provenance) = r.finish(name)?;
    let mut config = serde_json::Map::new();
    config.insert("command".into(), json!(name));
    config.extend(echo);
    // The echoed config keeps full precision so that it reproduces the run.
    let mut doc = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "provenance": provenance,
        "result": outcome.result,
        "warnings": outcome.warnings,
        "status": if outcome.violation.is_some() { "numerical-policy-violation" } else { "ok" },
        "wall_time": start.elapsed().as_secs_f64(),
    });
    round_floats(&mut doc);
    doc["config"] = Value::Object(config);
    write_document(&doc, cli.output.as_deref())?;
    match outcome.violation {
        Some(msg) => {
            eprintln!("fracruin: {msg}");
            Ok(EXIT_NUMERICAL)
        }
        None => Ok(EXIT_OK),
    }
}

fn r_seed(r: &Resolver) -> Option<u64> {
    r.peek("seed").and_then(Value::as_u64)
}

fn write_document(doc: &Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

/// Rounds every non-integer number to 12 significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if let Ok(y) = fmt_num(x).parse::<f64>() {
                if let Some(m) = serde_json::Number::from_f64(y) {
                    *n = m;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn model(r: &mut Resolver, a: &ModelArgs) -> Result<(ModelParams, f64)> {
    let u = r.get("u", a.u, 1.0)?;
    let theta = r.get("theta", a.theta, 1.0)?;
    let sigma = r.get("sigma", a.sigma, 0.5)?;
    let h = r.get("H", a.h, 0.6)?;
    let horizon = r.get("T", a.horizon, 1.0)?;
    Ok((ModelParams::new(u, theta, sigma, h)?, horizon))
}

fn mc(r: &mut Resolver, a: &McArgs, paths: usize, steps: usize) -> Result<(usize, usize, u64)> {
    Ok((r.get("paths", a.paths, paths)?, r.get("steps", a.steps, steps)?, r.seed(a.seed)?))
}

fn malliavin_config(r: &mut Resolver, a: &MalliavinArgs, h: f64) -> Result<MalliavinConfig> {
    let d = MalliavinConfig::for_hurst(h);
    let dq = QuadratureConfig::default();
    let indicator: String = r.get("indicator", a.indicator.clone(), "ruin".into())?;
    let scheme: String = r.get("quad_scheme", a.quad_scheme.clone(), "singularity-substituted".into())?;
    let cfg = MalliavinConfig {
        r: r.get("r", a.r, d.r)?,
        m_exp: r.get("m_exp", a.m_exp, d.m_exp)?,
        sharpness: r.get("sharpness", a.sharpness, d.sharpness)?,
        indicator: indicator.parse::<IndicatorForm>()?,
        quad: QuadratureConfig {
            scheme: scheme.parse::<QuadScheme>()?,
            refinement: r.get("refinement", a.refinement, dq.refinement)?,
        },
    };
    cfg.validate(h)?;
    Ok(cfg)
}

fn reject_flags(method: &str, flags: &[(&str, bool)]) -> Result<()> {
    for (name, set) in flags {
        if *set {
            return Err(Error::Config(format!("--{name} does not apply to method '{method}'")));
        }
    }
    Ok(())
}

fn malliavin_flags(a: &MalliavinArgs) -> [(&'static str, bool); 6] {
    [
        ("r", a.r.is_some()),
        ("m-exp", a.m_exp.is_some()),
        ("sharpness", a.sharpness.is_some()),
        ("indicator", a.indicator.is_some()),
        ("quad-scheme", a.quad_scheme.is_some()),
        ("refinement", a.refinement.is_some()),
    ]
}

fn read_data(path: &str) -> Result<GridFunction> {
    GridFunction::read_csv(File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("cannot open data file {path}: {e}")))
    })?)
}

fn simulate(r: &mut Resolver, a: &SimulateArgs) -> Result<Outcome> {
    let (params, horizon) = model(r, &a.model)?;
    let steps = r.get("steps", a.steps, 1024)?;
    let seed = r.seed(a.seed)?;
    r.check_unused("simulate")?;
    let grid = TimeGrid::new(horizon, steps)?;
    let path = sample_fbm(grid, params.h, seed)?;
    let x = surplus(&path, &params)?;
    let (m, tau) = running_sup_drifted(&path, params.theta);
    let xs = x.values();
    let min_x = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(p) = &a.csv {
        write_path_csv(&path, &params, BufWriter::new(File::create(p)?))?;
    }
    Outcome::ok(
        json!({
            "sup_drifted": m,
            "tau": grid.t(tau),
            "ruined": params.sigma * m > params.u,
            "min_surplus": min_x,
            "final_surplus": xs[xs.len() - 1],
        }),
        Vec::new(),
    )
}

fn scaling_mode(r: &mut Resolver, flag: &Option<String>) -> Result<ScalingMode> {
    let s: String = r.get("scaling_mode", flag.clone(), "variance-decay".into())?;
    s.parse()
}

fn estimate(r: &mut Resolver, a: &EstimateArgs) -> Result<Outcome> {
    let data: String = r.require("data", a.data.clone())?;
    let p = r.get("p", a.p, 2.0)?;
    let h = r.get("H", a.h, 0.6)?;
    let alpha = r.get("alpha", a.alpha, 0.05)?;
    let mode = scaling_mode(r, &a.scaling_mode)?;
    r.check_unused("estimate")?;
    let est = sigma_confidence(&read_data(&data)?, p, h, alpha, mode)?;
    let w = est.warnings.clone();
    Outcome::ok(est, w)
}

fn ruin(r: &mut Resolver, a: &RuinArgs, workers: Option<usize>) -> Result<Outcome> {
    let (params, horizon) = model(r, &a.model)?;
    let (paths, steps, seed) = mc(r, &a.mc, 100_000, 4096)?;
    r.check_unused("ruin")?;
    let est = mc_ruin(&params, horizon, paths, steps, seed, workers)?;
    let z = normal_quantile(0.975)?;
    let mut result = serde_json::to_value(est)?;
    result["interval_95"] = json!([est.psi_hat - z * est.se, est.psi_hat + z * est.se]);
    if params.h == 0.5 {
        result["closed_form"] = json!(bm_closed_form(&params, horizon)?);
    }
    Outcome::ok(result, Vec::new())
}

fn sens(r: &mut Resolver, a: &SensArgs, workers: Option<usize>) -> Result<Outcome> {
    let (params, horizon) = model(r, &a.model)?;
    let (paths, steps, seed) = mc(r, &a.mc, 10_000, 512)?;
    let method: String = r.get("method", a.method.clone(), "malliavin".into())?;
    let fd_flags = [
        ("eps", a.eps.is_some()),
        ("fd-scheme", a.fd_scheme.is_some()),
        ("crn", a.crn.is_some()),
    ];
    let kde_flags = [("bandwidth", a.bandwidth.is_some()), ("bootstrap", a.bootstrap.is_some())];
    let mut diagnostics = None;
    let est = match method.as_str() {
        "fd" => {
            reject_flags("fd", &kde_flags)?;
            reject_flags("fd", &malliavin_flags(&a.malliavin))?;
            reject_flags("fd", &[("diagnostics", a.diagnostics.is_some())])?;
            let eps = r.get("eps", a.eps, 0.01)?;
            let scheme: String = r.get("fd_scheme", a.fd_scheme.clone(), "central".into())?;
            let scheme = match scheme.as_str() {
                "central" => FdScheme::Central,
                "forward" => FdScheme::Forward,
                s => return Err(Error::Config(format!("unknown fd scheme '{s}' (central | forward)"))),
            };
            let crn = r.get("crn", a.crn, true)?;
            r.check_unused("sens")?;
            finite_diff_sens(&params, horizon, eps, scheme, crn, paths, steps, seed, workers)?
        }
        "kde" => {
            reject_flags("kde", &fd_flags)?;
            reject_flags("kde", &malliavin_flags(&a.malliavin))?;
            reject_flags("kde", &[("diagnostics", a.diagnostics.is_some())])?;
            let bw: String = r.get("bandwidth", a.bandwidth.clone(), "silverman".into())?;
            let bandwidth = if bw == "silverman" {
                Bandwidth::Silverman
            } else {
                Bandwidth::Fixed(
                    bw.parse()
                        .map_err(|_| Error::Config(format!("bandwidth must be 'silverman' or a number, got '{bw}'")))?,
                )
            };
            let bootstrap = r.get("bootstrap", a.bootstrap, 200)?;
            r.check_unused("sens")?;
            kde_density_sens(&params, horizon, bandwidth, bootstrap, paths, steps, seed, workers)?
        }
        "malliavin" => {
            reject_flags("malliavin", &fd_flags)?;
            reject_flags("malliavin", &kde_flags)?;
            let cfg = malliavin_config(r, &a.malliavin, params.h)?;
            r.check_unused("sens")?;
            let run = malliavin_sens_detailed(&params, horizon, paths, steps, &cfg, seed, workers)?;
            diagnostics = Some(run.paths);
            run.estimate
        }
        m => return Err(Error::Config(format!("unknown method '{m}' (malliavin | fd | kde)"))),
    };
    if let (Some(p), Some(rows)) = (&a.diagnostics, &diagnostics) {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(p)?));
        w.write_record(["M", "tau", "denom", "weight", "indicator"])?;
        let grid = TimeGrid::new(horizon, steps)?;
        for row in rows {
            w.write_record([
                fmt_num(row.m),
                fmt_num(grid.t(row.tau)),
                fmt_num(row.denom),
                row.weight.map_or_else(String::new, fmt_num),
                u8::from(row.indicator).to_string(),
            ])?;
        }
        w.flush()?;
    }
    let excluded = est.method_params.get("excluded_paths").and_then(Value::as_u64).unwrap_or(0);
    let violation = (excluded * 100 > est.m as u64)
        .then(|| format!("{excluded} of {} paths excluded (more than 1%)", est.m));
    let z = normal_quantile(0.975)?;
    let mut result = serde_json::to_value(&est)?;
    result["interval_95"] = json!([est.value - z * est.se, est.value + z * est.se]);
    Ok(Outcome { result, warnings: est.warnings, violation })
}

fn ci(r: &mut Resolver, a: &CiArgs, workers: Option<usize>) -> Result<Outcome> {
    let data: String = r.require("data", a.data.clone())?;
    let h = r.get("H", a.h, 0.6)?;
    if !(h > 0.5 && h < 0.75) {
        return Err(Error::Config(format!(
            "ci needs H in (1/2, 3/4): the sigma CLT fails for H >= 3/4 and the sensitivity needs H > 1/2; got H = {h}"
        )));
    }
    let u = r.get("u", a.u, 1.0)?;
    let theta = r.get("theta", a.theta, 1.0)?;
    let horizon = r.get("T", a.horizon, 1.0)?;
    let p = r.get("p", a.p, 2.0)?;
    let alpha = r.get("alpha", a.alpha, 0.05)?;
    let mode = scaling_mode(r, &a.scaling_mode)?;
    let (paths, steps, seed) = mc(r, &a.mc, 10_000, 512)?;
    let method: String = r.get("method", a.method.clone(), "fd".into())?;
    let sensitivity = match method.as_str() {
        "fd" => {
            reject_flags("fd", &malliavin_flags(&a.malliavin))?;
            CiSensitivity::FiniteDiff { eps: r.get("eps", a.eps, 0.01)? }
        }
        "kde" => {
            reject_flags("kde", &malliavin_flags(&a.malliavin))?;
            reject_flags("kde", &[("eps", a.eps.is_some())])?;
            CiSensitivity::Kde
        }
        "malliavin" => {
            reject_flags("malliavin", &[("eps", a.eps.is_some())])?;
            CiSensitivity::Malliavin(malliavin_config(r, &a.malliavin, h)?)
        }
        m => return Err(Error::Config(format!("unknown method '{m}' (fd | kde | malliavin)"))),
    };
    r.check_unused("ci")?;
    let cfg = CiConfig { u, theta, horizon, p, h, alpha, scaling_mode: mode, paths, steps, seed, sensitivity };
    let report = delta_method_ci(&read_data(&data)?, &cfg, workers)?;
    let excluded = report.sensitivity.method_params.get("excluded_paths").and_then(Value::as_u64).unwrap_or(0);
    let violation = (excluded * 100 > paths as u64)
        .then(|| format!("{excluded} of {paths} paths excluded (more than 1%)"));
    let w = report.warnings.clone();
    Ok(Outcome { result: serde_json::to_value(report)?, warnings: w, violation })
}

fn validate(r: &mut Resolver, a: &ValidateArgs, workers: Option<usize>) -> Result<Outcome> {
    let scale: String = r.get("scale", a.scale.clone(), "reduced".into())?;
    let scale = match scale.as_str() {
        "reduced" => Scale::Reduced,
        "full" => Scale::Full,
        s => return Err(Error::Config(format!("unknown scale '{s}' (reduced | full)"))),
    };
    let seed = r.seed(a.seed)?;
    r.check_unused("validate")?;
    let report = run_validation(scale, seed, workers)?;
    eprint!("{}", report.table());
    let violation = (!report.passed()).then(|| "validation failed".to_string());
    Ok(Outcome { result: serde_json::to_value(report)?, warnings: Vec::new(), violation })
}

//! Command-line front end
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parameter
//! error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::ekops::{ek_derivative, ek_integral, EKParams, SampledFunction};
use crate::error::{invalid, Error, Result};
use crate::greenfn::{ggbm_green, green_variance, profile_extent, DiffusionParams};
use crate::mwright::{mwright_eval, WrightOrder};
use crate::output::{fmt_f64, CsvTable, LinePlot, RunManifest, Series};
use crate::sampler::{ensemble_stats, ggbm_paths, EnsembleConfig};
use crate::solver::{solve, start_time, Grid1D, IcMode, SolverConfig, TimeRule};
use crate::verify::{self, Fault, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Domain(_) | Error::DiracOrder | Error::ParamMismatch(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ekdiff", version, about = "Erdélyi–Kober fractional diffusion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the M-Wright function
    Mwright(MwrightArgs),
    /// Tabulate the Green function of the ggBm equation
    Green(GreenArgs),
    /// Solve the governing equation from the Green function at t0
    Solve(SolveArgs),
    /// Simulate ggBm paths
    Simulate(SimulateArgs),
    /// Run the verification suite
    Verify(VerifyArgs),
    /// Apply an Erdélyi–Kober operator to a named function
    Ek(EkArgs),
}

/// `a:b`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span(pub f64, pub f64);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
        let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        Ok(Span(a, b))
    }
}

#[derive(Debug, Clone, Args)]
pub struct MwrightArgs {
    #[arg(long)]
    pub nu: f64,
    #[arg(long, default_value = "0:5")]
    pub range: Span,
    #[arg(long, default_value_t = 101)]
    pub n: usize,
    /// Output file; standard output if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GreenArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Half-width of the grid; by default where the profile drops below 1e-12 of its peak
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long, default_value_t = 401)]
    pub nx: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    EndpointAverage,
    RightEndpoint,
}

impl From<RuleArg> for TimeRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::EndpointAverage => TimeRule::EndpointAverage,
            RuleArg::RightEndpoint => TimeRule::RightEndpoint,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    /// Start time; by default the smallest start at which the profile is resolved
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Time levels, the initial one included
    #[arg(long, default_value_t = 200)]
    pub nt: usize,
    #[arg(long, default_value_t = 401)]
    pub nx: usize,
    /// Half-width of the grid; by default six standard deviations at t_end
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = RuleArg::EndpointAverage)]
    pub rule: RuleArg,
    /// Write every k-th level; the last level is always written
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    /// Positive time nodes, uniform on (0, t_max]; t = 0 is always included
    #[arg(long, default_value_t = 10)]
    pub nodes: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    GammaArgument,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
    pub level: LevelArg,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EkOp {
    Integral,
    Derivative,
}

#[derive(Debug, Clone, Args)]
pub struct EkArgs {
    #[arg(long, value_enum, default_value_t = EkOp::Integral)]
    pub op: EkOp,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub t: f64,
    /// `power:c`, `const:v`, `exp` (e^{-t}) or `cos`
    #[arg(long, default_value = "power:1")]
    pub phi: String,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Mwright(a) => emit(&cmd_mwright(&a)?, a.out.as_deref()).map(|_| EXIT_OK),
        Command::Green(a) => {
            let table = cmd_green(&a)?;
            if let Some(svg) = &a.svg {
                let pts = table.rows.iter().map(|r| (r[0], r[1])).collect();
                LinePlot::new(format!("Green function, alpha = {}, beta = {}, t = {}", a.alpha, a.beta, a.t), "x", "G")
                    .with_series(Series::new("G", pts))
                    .write(svg)?;
            }
            emit(&table, a.out.as_deref()).map(|_| EXIT_OK)
        }
        Command::Solve(a) => cmd_solve(&a).map(|_| EXIT_OK),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| EXIT_OK),
        Command::Verify(a) => {
            let level = match a.level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let fault = a.inject_fault.map(|FaultArg::GammaArgument| Fault::GammaArgument);
            let report = verify::run(level, fault, |o| println!("{}", o.line()));
            println!("{}", report.summary());
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Ek(a) => {
            let mut t = CsvTable::new(["t", "value"]);
            t.push(vec![a.t, cmd_ek(&a)?])?;
            emit(&t, None).map(|_| EXIT_OK)
        }
    }
}

fn emit(table: &CsvTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => table.write(path),
        None => {
            std::io::stdout().lock().write_all(table.render().as_bytes())?;
            Ok(())
        }
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("need n >= 1 and a finite range lo <= hi, got {lo}:{hi}, n = {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

pub fn cmd_mwright(a: &MwrightArgs) -> Result<CsvTable> {
    let order = WrightOrder::new(a.nu)?;
    let Span(lo, hi) = a.range;
    if lo < 0.0 {
        return Err(invalid(format!("M-Wright argument must be >= 0, got range start {lo}")));
    }
    let mut t = CsvTable::new(["z", "M_nu"]);
    for z in uniform(lo, hi, a.n)? {
        t.push(vec![z, mwright_eval(order, z)?])?;
    }
    Ok(t)
}

pub fn cmd_green(a: &GreenArgs) -> Result<CsvTable> {
    let p = DiffusionParams::new(a.alpha, a.beta)?;
    let x_max = match a.x_max {
        Some(x) => x,
        None => profile_extent(p, a.t, 1e-12)?,
    };
    if !(x_max > 0.0) {
        return Err(invalid(format!("x_max must be positive, got {x_max}")));
    }
    let mut t = CsvTable::new(["x", "G"]);
    for x in uniform(-x_max, x_max, a.nx)? {
        t.push(vec![x, ggbm_green(p, x, a.t)?])?;
    }
    t.comment(format!("variance = {}", fmt_f64(green_variance(p, a.t))));
    Ok(t)
}

pub fn level_file(k: usize) -> String {
    format!("level_{k:05}.csv")
}

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const STATS_FILE: &str = "stats.csv";

/// Writes the recorded levels, the diagnostics and the manifest into
/// `out_dir`; returns the output file names.
pub fn cmd_solve(a: &SolveArgs) -> Result<Vec<String>> {
    let started = Instant::now();
    let p = DiffusionParams::new(a.alpha, a.beta)?;
    if a.every == 0 {
        return Err(invalid("--every must be at least 1"));
    }
    let grid = match a.x_max {
        Some(x) => Grid1D::symmetric(x, a.nx)?,
        None => Grid1D::for_params(p, a.t_end, a.nx)?,
    };
    let t0 = match a.t0 {
        Some(t) => t,
        None => start_time(p, grid.dx())?.max(0.01),
    };
    let config = SolverConfig { params: p, grid, t0, t_end: a.t_end, nt: a.nt, ic_mode: IcMode::AnalyticGreen, rule: a.rule.into() };
    let field = solve(&config)?;
    fs::create_dir_all(&a.out_dir)?;

    let x = field.x_nodes();
    let last = field.levels() - 1;
    let mut outputs = Vec::new();
    for k in (0..=last).filter(|k| k % a.every == 0 || *k == last) {
        let mut t = CsvTable::new(["x", "P"]);
        for (xi, v) in x.iter().zip(&field.values[k]) {
            t.push(vec![*xi, *v])?;
        }
        t.comment(format!("t = {}", fmt_f64(field.times[k])));
        let name = level_file(k);
        t.write(&a.out_dir.join(&name))?;
        outputs.push(name);
    }
    let mut d = CsvTable::new(["t", "mass", "variance", "variance_law"]);
    for diag in &field.diagnostics {
        d.push(vec![diag.t, diag.mass, diag.variance, green_variance(p, diag.t)])?;
    }
    d.comment(format!("mass_drift = {}", fmt_f64(field.mass_drift)));
    d.write(&a.out_dir.join(DIAGNOSTICS_FILE))?;
    outputs.push(DIAGNOSTICS_FILE.into());

    let mut manifest = RunManifest::new(
        "solve",
        json!({
            "alpha": a.alpha, "beta": a.beta, "t0": t0, "t_end": a.t_end, "nt": a.nt, "nx": a.nx,
            "x_min": grid.x_min, "x_max": grid.x_max, "rule": config.rule.name(),
            "ic_mode": config.ic_mode.name(), "every": a.every,
        }),
        None,
    );
    manifest.outputs = outputs.clone();
    manifest.finish(&a.out_dir, started.elapsed())?;
    Ok(outputs)
}

/// Writes paths, statistics, an optional variance plot and the manifest
/// into `out_dir`; returns the output file names.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<Vec<String>> {
    let started = Instant::now();
    let p = DiffusionParams::new(a.alpha, a.beta)?;
    if a.nodes == 0 || !(a.t_max > 0.0) {
        return Err(invalid("need at least one node and t_max > 0"));
    }
    let times: Vec<f64> = (0..=a.nodes).map(|k| a.t_max * k as f64 / a.nodes as f64).collect();
    let config = EnsembleConfig::new(p, times.clone(), a.paths, a.seed)?;
    let ens = ggbm_paths(&config)?;
    fs::create_dir_all(&a.out_dir)?;

    let mut header = vec!["path".to_string(), "tau".to_string()];
    header.extend(times.iter().map(|t| format!("x({})", fmt_f64(*t))));
    let mut paths = CsvTable::new(header);
    for (i, (path, tau)) in ens.paths.iter().zip(&ens.tau).enumerate() {
        let mut row = vec![i as f64, *tau];
        row.extend(path);
        paths.push(row)?;
    }
    paths.write(&a.out_dir.join(PATHS_FILE))?;
    let mut outputs = vec![PATHS_FILE.to_string()];

    if let Ok(stats) = ensemble_stats(&ens) {
        let mut s = CsvTable::new(["t", "variance", "variance_law", "local_slope"]);
        let logs: Vec<(f64, f64)> = stats.times.iter().zip(&stats.variance_curve).map(|(t, v)| (t.ln(), v.ln())).collect();
        for (k, (t, v)) in stats.times.iter().zip(&stats.variance_curve).enumerate() {
            s.push(vec![*t, *v, green_variance(p, *t), local_slope(&logs, k)])?;
        }
        s.comment(format!("loglog_slope = {}", fmt_f64(stats.loglog_slope)));
        s.comment(format!("amplitude = {}", fmt_f64(stats.amplitude)));
        s.write(&a.out_dir.join(STATS_FILE))?;
        outputs.push(STATS_FILE.into());
        if a.svg {
            let keep = |pts: Vec<(f64, f64)>| pts.into_iter().filter(|(t, _)| *t > 0.0).collect::<Vec<_>>();
            let sample = keep(stats.times.iter().copied().zip(stats.variance_curve.iter().copied()).collect());
            let law = keep(stats.times.iter().map(|&t| (t, green_variance(p, t))).collect());
            LinePlot::new(format!("ggBm variance, alpha = {}, beta = {}", a.alpha, a.beta), "t", "variance")
                .with_series(Series::new("ensemble", sample))
                .with_series(Series::new("2 t^alpha / Gamma(beta+1)", law))
                .log_log()
                .write(&a.out_dir.join("variance.svg"))?;
            outputs.push("variance.svg".into());
        }
    } else {
        log::warn!("{} paths are too few for ensemble statistics; {STATS_FILE} not written", a.paths);
    }

    let mut manifest = RunManifest::new(
        "simulate",
        json!({
            "alpha": a.alpha, "beta": a.beta, "paths": a.paths, "t_max": a.t_max, "nodes": a.nodes,
            "fbm_method": "cholesky", "provenance": ens.provenance,
        }),
        Some(a.seed),
    );
    manifest.outputs = outputs.clone();
    manifest.finish(&a.out_dir, started.elapsed())?;
    Ok(outputs)
}

/// Slope of `log Var` against `log t` at node `k` from its neighbours with
/// `t > 0`; NaN where undefined.
fn local_slope(logs: &[(f64, f64)], k: usize) -> f64 {
    let ok = |i: usize| logs[i].0.is_finite() && logs[i].1.is_finite();
    if !ok(k) {
        return f64::NAN;
    }
    let lo = if k > 0 && ok(k - 1) { k - 1 } else { k };
    let hi = if k + 1 < logs.len() && ok(k + 1) { k + 1 } else { k };
    if lo == hi {
        return f64::NAN;
    }
    (logs[hi].1 - logs[lo].1) / (logs[hi].0 - logs[lo].0)
}

pub fn named_function(spec: &str) -> Result<SampledFunction> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|e| invalid(format!("{spec:?}: {e}")))?)),
        None => (spec, None),
    };
    match (name, arg) {
        ("power", Some(c)) => Ok(SampledFunction::power(c)),
        ("const", Some(v)) => Ok(SampledFunction::constant(v)),
        ("exp", None) => Ok(SampledFunction::new(|t| (-t).exp())),
        ("cos", None) => Ok(SampledFunction::new(f64::cos)),
        _ => Err(invalid(format!("unknown function {spec:?}; use power:c, const:v, exp or cos"))),
    }
}

pub fn cmd_ek(a: &EkArgs) -> Result<f64> {
    let p = EKParams::new(a.gamma, a.mu, a.eta)?;
    let phi = named_function(&a.phi)?;
    match a.op {
        EkOp::Integral => ek_integral(p, &phi, a.t),
        EkOp::Derivative => ek_derivative(p, &phi, a.t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_and_codes() {
        assert_eq!("0:4".parse::<Span>().unwrap(), Span(0.0, 4.0));
        assert!("04".parse::<Span>().is_err());
        assert_eq!(exit_code(&Error::DiracOrder), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Resolution("x".into())), EXIT_NUMERICAL);
        assert_eq!(run(["ekdiff", "mwright"]), EXIT_USAGE);
        assert_eq!(run(["ekdiff", "mwright", "--nu", "1", "--range", "0:1", "--n", "2"]), EXIT_USAGE);
    }

    #[test]
    fn local_slopes() {
        let logs: Vec<(f64, f64)> = [0.0f64, 0.5, 1.0].iter().map(|t| (t.ln(), (2.0 * t.powf(1.5)).ln())).collect();
        assert!(local_slope(&logs, 0).is_nan());
        assert!((local_slope(&logs, 1) - 1.5).abs() < 1e-12);
        assert!((local_slope(&logs, 2) - 1.5).abs() < 1e-12);
    }
}

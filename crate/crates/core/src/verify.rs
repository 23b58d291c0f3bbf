//! Acceptance checks shared by `ekdiff verify` and the test suite
//!
//! Each check reports its worst metric against a tolerance and its wall
//! time against a bound; it passes only if both hold.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cli::{self, MwrightArgs, RuleArg, SimulateArgs, SolveArgs, Span};
use crate::ekops::{ek_derivative, ek_integral, ek_power_oracle, rl_integral, EKParams, SampledFunction};
use crate::error::Result;
use crate::greenfn::{ggbm_green, green_mixture, green_variance, reduced_green, DiffusionParams, Reduction};
use crate::mwright::{mwright_compose, mwright_eval, mwright_moment, tail_cut, WrightOrder};
use crate::quadrature::{adaptive, Tolerance};
use crate::sampler::{ensemble_stats, fbm_paths, ggbm_paths, ks_critical_1pct, marginal_ks, EnsembleConfig};
use crate::solver::{solve, start_time, time_refinement, Grid1D, IcMode, SolverConfig, TimeRule};
use crate::special::{gamma, recip_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate defects for exercising the harness itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The moment oracle uses `Γ(νδ+2)` in place of `Γ(νδ+1)`.
    GammaArgument,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    /// Worst observed value of the checked quantity, or NaN on error.
    pub metric: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub limit_seconds: f64,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {:.3e} (limit {:.1e}), {:.2} s (limit {} s){}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.metric,
            self.tolerance,
            self.seconds,
            self.limit_seconds,
            if self.detail.is_empty() { "" } else { "; " },
            self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub outcomes: Vec<Outcome>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self.outcomes.iter().filter(|o| !o.passed).map(|o| format!("[{}] {}", o.id, o.name)).collect();
        if failed.is_empty() {
            format!("all {} checks passed", self.outcomes.len())
        } else {
            format!("{} of {} checks failed: {}", failed.len(), self.outcomes.len(), failed.join(", "))
        }
    }
}

/// What a check body measured: the worst metric, whether it is within
/// tolerance, and free-form notes.
struct Measured {
    metric: f64,
    ok: bool,
    detail: String,
}

impl Measured {
    fn below(metric: f64, tolerance: f64, detail: String) -> Self {
        Measured { metric, ok: metric < tolerance, detail }
    }
}

struct Check {
    name: &'static str,
    tolerance: f64,
    limit_seconds: f64,
}

const CHECKS: [Check; 9] = [
    Check { name: "M-Wright Gaussian case", tolerance: 1e-12, limit_seconds: 1.0 },
    Check { name: "composition formula", tolerance: 1e-6, limit_seconds: 30.0 },
    Check { name: "M-Wright moments", tolerance: 1e-6, limit_seconds: 5.0 },
    Check { name: "EK operator identities", tolerance: 1e-7, limit_seconds: 10.0 },
    Check { name: "solver vs analytic Green", tolerance: 1.0, limit_seconds: 120.0 },
    Check { name: "sampler distribution", tolerance: 1.0, limit_seconds: 180.0 },
    Check { name: "reductions triad", tolerance: 1e-10, limit_seconds: 1.0 },
    Check { name: "dual representation", tolerance: 1e-6, limit_seconds: 30.0 },
    Check { name: "CLI reproducibility", tolerance: 0.5, limit_seconds: 60.0 },
];

/// Runs criterion `id` (1 to 9).
pub fn criterion(id: u8, level: Level, fault: Option<Fault>) -> Outcome {
    let check = &CHECKS[(id - 1) as usize];
    let started = Instant::now();
    let measured = match id {
        1 => gaussian_case(),
        2 => composition(),
        3 => moments(fault),
        4 => ek_identities(),
        5 => solver_accuracy(level),
        6 => sampler_distribution(level),
        7 => reductions(),
        8 => dual_representation(),
        9 => reproducibility(),
        _ => unreachable!("criteria are numbered 1 to 9"),
    };
    let seconds = started.elapsed().as_secs_f64();
    let (metric, ok, detail) = match measured {
        Ok(m) => (m.metric, m.ok, m.detail),
        Err(e) => (f64::NAN, false, format!("error: {e}")),
    };
    Outcome {
        id,
        name: check.name,
        metric,
        tolerance: check.tolerance,
        seconds,
        limit_seconds: check.limit_seconds,
        passed: ok && seconds <= check.limit_seconds,
        detail,
    }
}

/// Runs every criterion in order, handing each outcome to `each` as it
/// completes.
pub fn run(level: Level, fault: Option<Fault>, mut each: impl FnMut(&Outcome)) -> Report {
    let mut report = Report::default();
    for id in 1..=9 {
        let o = criterion(id, level, fault);
        each(&o);
        report.outcomes.push(o);
    }
    report
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gaussian_case() -> Result<Measured> {
    let order = WrightOrder::new(0.5)?;
    let mut worst: f64 = 0.0;
    for k in 0..=500 {
        let z = 0.01 * k as f64;
        let exact = (-z * z / 4.0).exp() / std::f64::consts::PI.sqrt();
        worst = worst.max(rel(mwright_eval(order, z)?, exact));
    }
    Ok(Measured::below(worst, 1e-12, "z in [0, 5] step 0.01".into()))
}

fn composition() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for &l in &[0.4, 0.5, 0.6] {
        for &m in &[0.4, 0.5, 0.6] {
            let nu = WrightOrder::new(l * m)?;
            for &xi in &[0.5, 1.0, 2.0] {
                for &t in &[0.5, 1.0, 2.0] {
                    let lhs = mwright_compose(WrightOrder::new(l)?, WrightOrder::new(m)?, xi, t)?;
                    let direct = t.powf(-l * m) * mwright_eval(nu, xi * t.powf(-l * m))?;
                    worst = worst.max((lhs - direct).abs());
                }
            }
        }
    }
    Ok(Measured::below(worst, 1e-6, "81 points, absolute".into()))
}

fn moments(fault: Option<Fault>) -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let mut coeff_gap: f64 = 0.0;
    for &beta in &[0.25, 0.5, 0.75] {
        let order = WrightOrder::new(beta)?;
        let cut = tail_cut(order, 1e-18);
        for &delta in &[0.0, 1.0, 2.0] {
            let est = adaptive(|t| t.powf(delta) * mwright_eval(order, t).unwrap_or(f64::NAN), 0.0, cut, Tolerance::new(0.0, 1e-12))?;
            let shift = if fault == Some(Fault::GammaArgument) { 2.0 } else { 1.0 };
            let oracle = gamma(delta + 1.0) * recip_gamma(beta * delta + shift);
            worst = worst.max(rel(est.value, oracle));
            if delta == 1.0 {
                coeff_gap = coeff_gap.max(rel(mwright_moment(order, 1.0)?, recip_gamma(beta + 1.0)));
            }
        }
    }
    let mut m = Measured::below(worst, 1e-6, format!("first moment vs 1/Γ(β+1): {coeff_gap:.1e}"));
    m.ok &= coeff_gap < 1e-14;
    Ok(m)
}

fn ek_identities() -> Result<Measured> {
    // (a) eigenrelation
    let mut eigen: f64 = 0.0;
    let t = 1.7;
    for &g in &[-0.5, 0.0, 1.5] {
        for &mu in &[0.3, 1.0, 2.5] {
            for &eta in &[0.5, 1.0, 3.0] {
                for &c in &[0.0, 0.5, 2.0] {
                    let p = EKParams::new(g, mu, eta)?;
                    let v = ek_integral(p, &SampledFunction::power(c), t)? / t.powf(c);
                    eigen = eigen.max(rel(v, ek_power_oracle(p, c)?));
                }
            }
        }
    }
    // (b) Riemann–Liouville reduction
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let funcs = [
        SampledFunction::constant(1.0),
        SampledFunction::power(1.0),
        SampledFunction::power(2.0),
        SampledFunction::new(|x| (-x).exp()),
    ];
    let mut rl: f64 = 0.0;
    for _ in 0..20 {
        let mu = rng.gen_range(0.05..3.0);
        let t = rng.gen_range(0.05..6.0);
        let p = EKParams::new(0.0, mu, 1.0)?;
        for phi in &funcs {
            rl = rl.max((ek_integral(p, phi, t)? - t.powf(-mu) * rl_integral(mu, phi, t)?).abs());
        }
    }
    // (c) identity at μ = 0
    let mut identity = true;
    for &g in &[-0.5, 0.0, 1.2] {
        for &eta in &[0.5, 2.0] {
            for phi in &funcs {
                for &t in &[0.3, 1.0, 4.0] {
                    identity &= ek_derivative(EKParams::new(g, 0.0, eta)?, phi, t)? == phi.eval(t);
                }
            }
        }
    }
    Ok(Measured {
        metric: eigen,
        ok: eigen < 1e-7 && rl < 1e-9 && identity,
        detail: format!("RL reduction {rl:.1e} (limit 1e-9), μ = 0 identity {}", if identity { "exact" } else { "BROKEN" }),
    })
}

fn solver_config(alpha: f64, beta: f64, nt: usize) -> Result<SolverConfig> {
    let params = DiffusionParams::new(alpha, beta)?;
    let grid = Grid1D::symmetric(10.0, 401)?;
    let t0 = start_time(params, grid.dx())?.max(0.01);
    Ok(SolverConfig { params, grid, t0, t_end: 1.0, nt, ic_mode: IcMode::AnalyticGreen, rule: TimeRule::EndpointAverage })
}

fn solver_accuracy(level: Level) -> Result<Measured> {
    let cases: &[(f64, f64, f64)] = match level {
        Level::Quick => &[(1.0, 1.0, 1e-3), (0.6, 0.6, 5e-3)],
        Level::Full => &[(1.0, 1.0, 1e-3), (0.6, 0.6, 5e-3), (1.4, 1.0, 5e-3), (0.8, 0.5, 5e-3)],
    };
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut detail = String::new();
    for &(alpha, beta, limit) in cases {
        let cfg = solver_config(alpha, beta, 200)?;
        let p = cfg.params;
        let field = solve(&cfg)?;
        let l1 = field.l1_error(field.levels() - 1, |x| ggbm_green(p, x, 1.0))?;
        let var = field.diagnostics.iter().map(|d| rel(d.variance, green_variance(p, d.t))).fold(0.0, f64::max);
        ok &= l1 < limit && var < 0.01;
        worst_ratio = worst_ratio.max(l1 / limit).max(var / 0.01);
        let _ = write!(detail, "({alpha}, {beta}) t0 {:.3} L1 {l1:.2e} var {var:.1e}", cfg.t0);
        if level == Level::Full {
            let study = time_refinement(&solver_config(alpha, beta, 51)?, 3)?;
            let order = study.min_order();
            ok &= order >= 0.9;
            worst_ratio = worst_ratio.max(0.9 / order);
            let _ = write!(detail, " order {order:.2}");
        }
        detail.push_str("; ");
    }
    detail.truncate(detail.trim_end_matches("; ").len());
    Ok(Measured { metric: worst_ratio, ok, detail })
}

fn sampler_distribution(level: Level) -> Result<Measured> {
    let n = match level {
        Level::Quick => 4_000,
        Level::Full => 20_000,
    };
    let nodes: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut detail = String::new();
    for &(alpha, beta) in &[(1.0, 1.0), (0.6, 0.4), (1.5, 0.8)] {
        let p = DiffusionParams::new(alpha, beta)?;
        let ens = ggbm_paths(&EnsembleConfig::new(p, nodes.clone(), n, 20_240_601)?)?;
        let ks = marginal_ks(&ens, nodes.len() - 1)?;
        let crit = ks_critical_1pct(n);
        let stats = ensemble_stats(&ens)?;
        let slope = (stats.loglog_slope - alpha).abs();
        let amp = rel(stats.amplitude, 2.0 / gamma(beta + 1.0));
        ok &= ks < crit && slope <= 0.05 && amp <= 0.05;
        worst_ratio = worst_ratio.max(ks / crit).max(slope / 0.05).max(amp / 0.05);
        let _ = write!(detail, "({alpha}, {beta}) KS {ks:.4}/{crit:.4} slope {:.3} amp {amp:.1e}; ", stats.loglog_slope);
        if beta == 1.0 {
            let fbm = fbm_paths(p.hurst(), &nodes, n, ens.provenance.path_seed)?;
            let exact = ens.tau.iter().all(|&t| t == 1.0) && ens.paths == fbm;
            ok &= exact;
            let _ = write!(detail, "fBm identity {}; ", if exact { "exact" } else { "BROKEN" });
        }
    }
    detail.truncate(detail.trim_end_matches("; ").len());
    Ok(Measured { metric: worst_ratio, ok, detail })
}

fn triad() -> Result<Vec<(Reduction, DiffusionParams)>> {
    Ok(vec![
        (Reduction::TimeFractional, DiffusionParams::new(0.6, 0.6)?),
        (Reduction::StretchedGaussian, DiffusionParams::new(1.4, 1.0)?),
        (Reduction::Brownian, DiffusionParams::new(1.0, 1.0)?),
    ])
}

fn triad_grid() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for &t in &[0.5, 1.0, 2.0] {
        for k in -16..=16 {
            pts.push((0.25 * k as f64, t));
        }
    }
    pts
}

fn reductions() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (kind, p) in triad()? {
        for (x, t) in triad_grid() {
            worst = worst.max((reduced_green(kind, p, x, t)? - ggbm_green(p, x, t)?).abs());
        }
    }
    Ok(Measured::below(worst, 1e-10, "x in [-4, 4] step 0.25, t in {0.5, 1, 2}".into()))
}

fn dual_representation() -> Result<Measured> {
    let mut params: Vec<DiffusionParams> = triad()?.into_iter().map(|(_, p)| p).collect();
    params.push(DiffusionParams::new(0.8, 0.5)?);
    params.push(DiffusionParams::new(1.5, 0.8)?);
    let mut worst: f64 = 0.0;
    for p in params {
        for (x, t) in triad_grid() {
            worst = worst.max((green_mixture(p, x, t)? - ggbm_green(p, x, t)?).abs());
        }
    }
    Ok(Measured::below(worst, 1e-6, "criterion 7 grid plus (0.8, 0.5), (1.5, 0.8)".into()))
}

struct ScratchDir(PathBuf);

impl ScratchDir {
    fn new(tag: &str) -> Result<Self> {
        let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos());
        let dir = std::env::temp_dir().join(format!("ekdiff-verify-{tag}-{}-{nanos}", std::process::id()));
        fs::create_dir_all(&dir)?;
        Ok(ScratchDir(dir))
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn csv_bytes(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?)))
        .collect::<Result<_>>()?;
    files.sort();
    Ok(files)
}

fn reproducibility() -> Result<Measured> {
    let runs = [ScratchDir::new("a")?, ScratchDir::new("b")?];
    for dir in &runs {
        let sim = dir.0.join("simulate");
        cli::cmd_simulate(&SimulateArgs {
            alpha: 0.8,
            beta: 0.6,
            paths: 500,
            seed: 7,
            t_max: 1.0,
            nodes: 10,
            out_dir: sim,
            svg: false,
        })?;
        cli::cmd_solve(&SolveArgs {
            alpha: 0.6,
            beta: 0.6,
            t0: None,
            t_end: 1.0,
            nt: 20,
            nx: 101,
            x_max: Some(10.0),
            rule: RuleArg::EndpointAverage,
            every: 5,
            out_dir: dir.0.join("solve"),
        })?;
        let table = cli::cmd_mwright(&MwrightArgs { nu: 0.3, range: Span(0.0, 8.0), n: 81, out: None })?;
        table.write(&dir.0.join("mwright.csv"))?;
    }
    let mut differing = Vec::new();
    let mut files = 0;
    for sub in ["simulate", "solve", ""] {
        let (a, b) = (csv_bytes(&runs[0].0.join(sub))?, csv_bytes(&runs[1].0.join(sub))?);
        files += a.len();
        if a != b {
            differing.push(if sub.is_empty() { "mwright" } else { sub });
        }
    }
    Ok(Measured {
        metric: differing.len() as f64,
        ok: differing.is_empty() && files > 0,
        detail: if differing.is_empty() {
            format!("{files} CSV files byte-identical across two runs")
        } else {
            format!("outputs differ: {}", differing.join(", "))
        },
    })
}

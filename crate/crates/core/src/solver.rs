//! Product-integration solver for the ggBm governing equation
//!
//! ```text
//! P(x,t) = P0(x) + (1/Γ(β)) (α/β) ∫₀^t τ^{α/β-1} (t^{α/β} - τ^{α/β})^{β-1} ∂²P/∂x²(x,τ) dτ.
//! ```
//!
//! In stretched time `T = t^{α/β}` this is `P = P0 + J^β_T ∂²P/∂x²` with
//! the Abel kernel `(T - u)^{β-1}/Γ(β)`. Levels are uniform in `T`, the
//! Laplacian is held constant on each step (see [`TimeRule`]), and the
//! kernel is integrated exactly against it. The newest level enters
//! implicitly, so every step is one tridiagonal solve. Boundaries are
//! homogeneous Dirichlet.
//!
//! Starting from the Green function at `t0 > 0` requires the memory of the
//! interval `[0, T0]`. Writing `P(T) = P(T0) + H(T) + (1/Γ(β)) ∫_{T0}^T …`,
//! the correction
//!
//! ```text
//! H(T) = (1/Γ(β)) ∫₀^{T0} [(T-u)^{β-1} - (T0-u)^{β-1}] ∂²𝒢/∂x²(u) du
//! ```
//!
//! is evaluated the same way on a mesh graded towards both ends of `[0, T0]`,
//! using cell averages of the exact Green function.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ekops::{ek_derivative_estimate, EKParams, SampledFunction};
use crate::error::{invalid, Error, Result};
use crate::greenfn::{green_variance, profile_extent, DiffusionParams, ProfileIntegrator, Reduction};
use crate::special::recip_gamma;

/// Uniform grid `x_min = x_0 < … < x_{nx-1} = x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(invalid(format!("grid needs x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if nx < 3 {
            return Err(invalid(format!("grid needs at least 3 nodes, got {nx}")));
        }
        Ok(Grid1D { x_min, x_max, nx })
    }

    /// `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, nx: usize) -> Result<Self> {
        Self::new(-half_width, half_width, nx)
    }

    /// Symmetric grid reaching six standard deviations of the Green function
    /// at `t_end`.
    pub fn for_params(p: DiffusionParams, t_end: f64, nx: usize) -> Result<Self> {
        Self::symmetric(6.0 * green_variance(p, t_end).sqrt(), nx)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|i| self.x_min + i as f64 * dx).collect()
    }
}

/// How the level at `t0` is obtained.
#[derive(Debug, Clone)]
pub enum IcMode {
    /// Cell averages of the Green function at `t0 > 0`, with the memory of
    /// `[0, t0]` carried analytically.
    AnalyticGreen,
    /// A given profile at `t0 = 0`, sampled at the nodes.
    Custom(SampledFunction),
}

impl IcMode {
    pub fn name(&self) -> &'static str {
        match self {
            IcMode::AnalyticGreen => "analytic_green_at_t0",
            IcMode::Custom(_) => "custom_p0",
        }
    }
}

/// Value of the Laplacian on a step `[T_{k-1}, T_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    /// `L_k`. First order; backward Euler when `β = 1`.
    RightEndpoint,
    /// `(L_{k-1} + L_k)/2`. Crank–Nicolson when `β = 1`.
    #[default]
    EndpointAverage,
}

impl TimeRule {
    pub fn name(&self) -> &'static str {
        match self {
            TimeRule::RightEndpoint => "right_endpoint",
            TimeRule::EndpointAverage => "endpoint_average",
        }
    }

    fn implicit_share(&self) -> f64 {
        match self {
            TimeRule::RightEndpoint => 1.0,
            TimeRule::EndpointAverage => 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub params: DiffusionParams,
    pub grid: Grid1D,
    pub t0: f64,
    pub t_end: f64,
    /// Number of time levels, the initial one included.
    pub nt: usize,
    pub ic_mode: IcMode,
    pub rule: TimeRule,
}

/// Minimum number of nodes where the initial Green profile exceeds a tenth
/// of its peak.
pub const MIN_PEAK_NODES: usize = 8;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        Grid1D::new(self.grid.x_min, self.grid.x_max, self.grid.nx)?;
        DiffusionParams::new(self.params.alpha, self.params.beta)?;
        if self.nt < 2 {
            return Err(invalid(format!("need at least 2 time levels, got {}", self.nt)));
        }
        if !(self.t_end.is_finite() && self.t0 < self.t_end) {
            return Err(invalid(format!("need t0 < t_end, got t0 = {}, t_end = {}", self.t0, self.t_end)));
        }
        match self.ic_mode {
            IcMode::AnalyticGreen if !(self.t0 > 0.0) => {
                Err(invalid(format!("the Green initial condition needs t0 > 0, got {}", self.t0)))
            }
            IcMode::Custom(_) if self.t0 != 0.0 => {
                Err(invalid(format!("a custom initial profile is given at t0 = 0, got t0 = {}", self.t0)))
            }
            _ => Ok(()),
        }
    }
}

/// Smallest start time at which the Green profile spans
/// [`MIN_PEAK_NODES`] nodes above a tenth of its peak, with a 25% margin.
pub fn auto_t0(p: DiffusionParams, dx: f64) -> Result<f64> {
    // full width at a tenth of the peak is 2 z₁₀ t^{α/2}
    let z10 = profile_extent(p, 1.0, 0.1)?;
    let half_width = 1.25 * 0.5 * MIN_PEAK_NODES as f64 * dx;
    Ok((half_width / z10).powf(2.0 / p.alpha))
}

/// Start time at which the cell-averaged Green profile adds at most
/// `rel` to the variance through its `dx²/12` spread.
pub fn moment_t0(p: DiffusionParams, dx: f64, rel: f64) -> Result<f64> {
    if !(rel > 0.0) {
        return Err(invalid(format!("relative variance bias must be positive, got {rel}")));
    }
    // 2 t^α / Γ(β+1) = dx² / (12 rel)
    Ok((dx * dx / (12.0 * rel) / green_variance(p, 1.0)).powf(1.0 / p.alpha))
}

/// The later of [`auto_t0`] and [`moment_t0`] at a 0.5% bias.
pub fn start_time(p: DiffusionParams, dx: f64) -> Result<f64> {
    Ok(auto_t0(p, dx)?.max(moment_t0(p, dx, 5e-3)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub variance: f64,
    pub min_value: f64,
}

/// Laplacians of the exact solution before `t0`, piecewise constant on the
/// cells of `edges` (stretched time) and sampled at `nodes`.
#[derive(Debug, Clone)]
pub struct History {
    pub edges: Vec<f64>,
    pub nodes: Vec<f64>,
    pub laplacians: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolutionField {
    pub config: SolverConfig,
    /// Physical times of the levels.
    pub times: Vec<f64>,
    /// Stretched times `t^{α/β}` of the levels.
    pub stretched: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub diagnostics: Vec<LevelDiagnostics>,
    pub history: Option<History>,
    /// `max_n |mass_n - mass_0|`.
    pub mass_drift: f64,
}

impl SolutionField {
    pub fn x_nodes(&self) -> Vec<f64> {
        self.config.grid.nodes()
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn final_values(&self) -> &[f64] {
        self.values.last().expect("at least two levels")
    }

    pub fn laplacian(&self, level: usize) -> Vec<f64> {
        laplacian(&self.values[level], self.config.grid.dx())
    }

    /// `Σ |P_i - f(x_i)| dx` at `level`.
    pub fn l1_error(&self, level: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let dx = self.config.grid.dx();
        let mut sum = 0.0;
        for (x, v) in self.x_nodes().into_iter().zip(&self.values[level]) {
            sum += (v - f(x)?).abs();
        }
        Ok(sum * dx)
    }
}

/// Second central difference, zero at the boundary nodes.
pub fn laplacian(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let inv = 1.0 / (dx * dx);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (values[i - 1] - 2.0 * values[i] + values[i + 1]) * inv;
    }
    out
}

fn diagnostics(t: f64, values: &[f64], x: &[f64], dx: f64) -> LevelDiagnostics {
    let mass: f64 = values.iter().sum::<f64>() * dx;
    let second: f64 = values.iter().zip(x).map(|(v, x)| v * x * x).sum::<f64>() * dx;
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    LevelDiagnostics { t, mass, variance: second, min_value }
}

/// `a^β - (a - w)^β` for `0 ≤ w ≤ a`, without cancellation for small `w`.
fn pow_decrement(a: f64, w: f64, beta: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if w >= a {
        return a.powf(beta);
    }
    -a.powf(beta) * (beta * (-w / a).ln_1p()).exp_m1()
}

/// Mesh on `[0, T0]` refined geometrically towards `0`, where the Green
/// function concentrates, and towards `T0`, where the kernel difference is
/// singular. Returns edges and a representative node per cell.
fn history_mesh(t0_stretched: f64, u_min: f64) -> (Vec<f64>, Vec<f64>) {
    const PER_DECADE: f64 = 32.0;
    const NEAR_END: f64 = 1e-6;
    let half = 0.5 * t0_stretched;
    let ratio = 10f64.powf(1.0 / PER_DECADE);
    let mut edges = vec![0.0];
    let mut u = u_min.min(1e-3 * half);
    while u < half {
        edges.push(u);
        u *= ratio;
    }
    let mut d = half;
    while d > NEAR_END * t0_stretched {
        edges.push(t0_stretched - d);
        d /= ratio;
    }
    edges.push(t0_stretched);
    let nodes = edges
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 {
                0.5 * w[1]
            } else if w[1] <= half {
                (w[0] * w[1]).sqrt()
            } else {
                t0_stretched - ((t0_stretched - w[0]) * (t0_stretched - w[1])).sqrt()
            }
        })
        .collect();
    (edges, nodes)
}

fn green_levels(integ: &ProfileIntegrator, p: DiffusionParams, grid: &Grid1D, t: f64) -> Result<Vec<f64>> {
    let mut v = integ.cell_averages(p, &grid.nodes(), grid.dx(), t)?;
    v[0] = 0.0;
    *v.last_mut().unwrap() = 0.0;
    Ok(v)
}

fn build_history(integ: &ProfileIntegrator, p: DiffusionParams, grid: &Grid1D, t0_stretched: f64) -> Result<History> {
    let beta = p.beta;
    // below u_min the profile is far inside the central cell
    let u_min = (grid.dx() / 50.0).powf(2.0 / beta);
    let (edges, nodes) = history_mesh(t0_stretched, u_min);
    let dx = grid.dx();
    let laplacians = nodes
        .iter()
        .map(|&u| green_levels(integ, p, grid, u.powf(beta / p.alpha)).map(|g| laplacian(&g, dx)))
        .collect::<Result<Vec<_>>>()?;
    Ok(History { edges, nodes, laplacians })
}

/// `H(T)` at the nodes.
fn history_correction(h: &History, beta: f64, t0_stretched: f64, t: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let g = recip_gamma(beta + 1.0);
    for (w, lap) in h.edges.windows(2).zip(&h.laplacians) {
        let width = w[1] - w[0];
        let weight = g * (pow_decrement(t - w[0], width, beta) - pow_decrement(t0_stretched - w[0], width, beta));
        if weight == 0.0 {
            continue;
        }
        for (o, l) in out.iter_mut().zip(lap) {
            *o += weight * l;
        }
    }
}

/// Solves `(1 - c L) P = rhs` on the interior with zero boundary values,
/// `L` the second difference divided by `dx²`.
fn implicit_step(c: f64, dx: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let m = n - 2;
    let off = -c / (dx * dx);
    let diag = 1.0 - 2.0 * off;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    let mut denom = diag;
    cp[0] = off / denom;
    dp[0] = rhs[1] / denom;
    for i in 1..m {
        denom = diag - off * cp[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::LinAlg(format!("zero pivot at row {i}; the time step may be too large")));
        }
        cp[i] = off / denom;
        dp[i] = (rhs[i + 1] - off * dp[i - 1]) / denom;
    }
    let mut out = vec![0.0; n];
    out[m] = dp[m - 1];
    for i in (0..m - 1).rev() {
        out[i + 1] = dp[i] - cp[i] * out[i + 2];
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinAlg("nonfinite solution of the tridiagonal system".into()));
    }
    Ok(out)
}

/// `a_j = ΔT^β (j^β - (j-1)^β) / Γ(β+1)` for `j = 0..=steps`, `a_0 = 0`:
/// the exact kernel mass of the step `j - 1` to `j` levels back.
fn abel_weights(beta: f64, dt: f64, steps: usize) -> Vec<f64> {
    let scale = dt.powf(beta) * recip_gamma(beta + 1.0);
    (0..=steps).map(|j| if j == 0 { 0.0 } else { scale * pow_decrement(j as f64, 1.0, beta) }).collect()
}

/// Weight of level `m ≤ n` in the memory sum at level `n`.
fn level_weight(rule: TimeRule, weights: &[f64], n: usize, m: usize) -> f64 {
    // step k = [T_{k-1}, T_k] carries a_{n-k+1}; level m ends step m and starts step m+1
    let share = rule.implicit_share();
    let ending = if m == 0 { 0.0 } else { share * weights[n - m + 1] };
    let starting = if m == n { 0.0 } else { (1.0 - share) * weights[n - m] };
    ending + starting
}

/// `(1/Γ(β)) ∫_{T_0}^{T_n} (T_n - u)^{β-1} f(u) du` as the solver forms it, from
/// `samples[m] = f(T_0 + m ΔT)`, `m = 0..=n`.
pub fn memory_sum(beta: f64, dt: f64, samples: &[f64], rule: TimeRule) -> Result<f64> {
    if samples.len() < 2 {
        return Err(invalid("memory sum needs at least two samples"));
    }
    if !(beta > 0.0 && beta <= 1.0 && dt > 0.0) {
        return Err(invalid(format!("memory sum needs 0 < beta <= 1 and dt > 0, got {beta}, {dt}")));
    }
    let n = samples.len() - 1;
    let weights = abel_weights(beta, dt, n);
    Ok(samples.iter().enumerate().map(|(m, f)| level_weight(rule, &weights, n, m) * f).sum())
}

/// Runs the scheme for `config`.
pub fn solve(config: &SolverConfig) -> Result<SolutionField> {
    config.validate()?;
    let p = config.params;
    let grid = config.grid;
    let (alpha, beta) = (p.alpha, p.beta);
    let stretch = alpha / beta;
    let dx = grid.dx();
    let x = grid.nodes();
    let t_start = config.t0.powf(stretch);
    let t_stop = config.t_end.powf(stretch);
    let steps = config.nt - 1;
    let dt = (t_stop - t_start) / steps as f64;

    let (initial, history) = match &config.ic_mode {
        IcMode::AnalyticGreen => {
            let integ = ProfileIntegrator::new(p.profile_order())?;
            let g0 = green_levels(&integ, p, &grid, config.t0)?;
            let peak = g0.iter().copied().fold(0.0, f64::max);
            let resolved = g0.iter().filter(|&&v| v >= 0.1 * peak).count();
            if resolved < MIN_PEAK_NODES {
                return Err(Error::Resolution(format!(
                    "only {resolved} nodes carry at least a tenth of the peak at t0 = {} (need {MIN_PEAK_NODES}); \
                     increase t0 or refine the grid",
                    config.t0
                )));
            }
            let history = if beta < 1.0 { Some(build_history(&integ, p, &grid, t_start)?) } else { None };
            (g0, history)
        }
        IcMode::Custom(p0) => {
            let mut v: Vec<f64> = x.iter().map(|&xi| p0.eval(xi)).collect();
            v[0] = 0.0;
            *v.last_mut().unwrap() = 0.0;
            if v.iter().any(|v| !v.is_finite()) {
                return Err(invalid("initial profile is not finite on the grid"));
            }
            (v, None)
        }
    };
    let half_width = 0.5 * (grid.x_max - grid.x_min);
    if half_width < 6.0 * green_variance(p, config.t_end).sqrt() {
        log::warn!("domain half-width {half_width} is below six standard deviations at t_end");
    }

    let weights = abel_weights(beta, dt, steps);
    if let Some(j) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::Singularity(format!("weight a_{j} = {}", weights[j])));
    }
    let g = recip_gamma(beta + 1.0);

    let mut values = vec![initial.clone()];
    let mut laps = vec![laplacian(&initial, dx)];
    let mut stretched = vec![t_start];
    let mut diags = vec![diagnostics(config.t0, &initial, &x, dx)];
    let mut rhs = vec![0.0; grid.nx];
    let mut h = vec![0.0; grid.nx];
    let mut partial_sum = 0.0;
    for n in 1..=steps {
        let t_n = t_start + n as f64 * dt;
        partial_sum += weights[n];
        let expect = (t_n - t_start).powf(beta) * g;
        if (partial_sum - expect).abs() > 1e-10 * expect {
            return Err(Error::Singularity(format!("kernel weights sum to {partial_sum}, expected {expect}")));
        }
        rhs.copy_from_slice(&initial);
        if let Some(hist) = &history {
            history_correction(hist, beta, t_start, t_n, &mut h);
            rhs.iter_mut().zip(&h).for_each(|(r, h)| *r += h);
        }
        for (m, lap) in laps.iter().enumerate() {
            let w = level_weight(config.rule, &weights, n, m);
            if w != 0.0 {
                rhs.iter_mut().zip(lap).for_each(|(r, l)| *r += w * l);
            }
        }
        let next = implicit_step(level_weight(config.rule, &weights, n, n), dx, &rhs)?;
        let t_phys = if n == steps { config.t_end } else { t_n.powf(1.0 / stretch) };
        diags.push(diagnostics(t_phys, &next, &x, dx));
        laps.push(laplacian(&next, dx));
        values.push(next);
        stretched.push(t_n);
    }
    let times: Vec<f64> = diags.iter().map(|d| d.t).collect();
    let mass0 = diags[0].mass;
    let mass_drift = diags.iter().map(|d| (d.mass - mass0).abs()).fold(0.0, f64::max);
    Ok(SolutionField { config: config.clone(), times, stretched, values, diagnostics: diags, history, mass_drift })
}

/// Successive-difference refinement study at `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    /// `nt` or `nx` of each run, coarsest first.
    pub sizes: Vec<usize>,
    /// `‖u_k − u_{k+1}‖₁` on the coarse nodes.
    pub differences: Vec<f64>,
    /// `log₂(d_k / d_{k+1})`.
    pub orders: Vec<f64>,
}

impl RefinementStudy {
    fn from_differences(sizes: Vec<usize>, differences: Vec<f64>) -> Self {
        let orders = differences.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
        RefinementStudy { sizes, differences, orders }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn l1_gap(a: &[f64], b: impl Iterator<Item = f64>, dx: f64) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx
}

/// Halves the stretched-time step `halvings` times starting from
/// `config.nt`, on a fixed grid.
pub fn time_refinement(config: &SolverConfig, halvings: usize) -> Result<RefinementStudy> {
    let sizes: Vec<usize> = (0..=halvings).map(|k| ((config.nt - 1) << k) + 1).collect();
    let finals = sizes
        .iter()
        .map(|&nt| solve(&SolverConfig { nt, ..config.clone() }).map(|f| f.final_values().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let dx = config.grid.dx();
    let differences = finals.windows(2).map(|w| l1_gap(&w[0], w[1].iter().copied(), dx)).collect();
    Ok(RefinementStudy::from_differences(sizes, differences))
}

/// Halves `dx` `halvings` times starting from `config.grid`, at fixed
/// `nt`. Each pair is compared on the nodes of its coarser grid.
pub fn space_refinement(config: &SolverConfig, halvings: usize) -> Result<RefinementStudy> {
    let g = config.grid;
    let sizes: Vec<usize> = (0..=halvings).map(|k| ((g.nx - 1) << k) + 1).collect();
    let runs = sizes
        .iter()
        .map(|&nx| {
            let grid = Grid1D::new(g.x_min, g.x_max, nx)?;
            solve(&SolverConfig { grid, ..config.clone() }).map(|f| (grid.dx(), f.final_values().to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let differences =
        runs.windows(2).map(|w| l1_gap(&w[0].1, w[1].1.iter().step_by(2).copied(), w[0].0)).collect();
    Ok(RefinementStudy::from_differences(sizes, differences))
}

/// [`solve`] restricted to one of the classical limits.
pub fn solve_reduced(kind: Reduction, config: &SolverConfig) -> Result<SolutionField> {
    kind.check(config.params)?;
    solve(config)
}

/// Max-norm residual of the EK form
/// `∂P/∂t = (α/β) t^{α-1} D^{β-1,1-β}_{α/β} ∂²P/∂x²` at `level`, over the
/// interior nodes.
///
/// The right side applies the EK derivative to the piecewise-linear history
/// of the stored Laplacians (including the pre-`t0` history of an analytic
/// start), the left side is a three-point difference in `t`.
pub fn ek_residual(field: &SolutionField, level: usize) -> Result<f64> {
    let levels = field.levels();
    if level < 2 || level + 2 > levels {
        return Err(Error::InsufficientHistory { level, needed: (level + 2).max(3) });
    }
    let p = field.config.params;
    let (alpha, beta) = (p.alpha, p.beta);
    let nx = field.config.grid.nx;
    let ek = EKParams::new(beta - 1.0, 1.0 - beta, alpha / beta)?;

    // abscissae in physical time with the Laplacians they carry
    let mut times: Vec<f64> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if let Some(h) = &field.history {
        for (u, lap) in h.nodes.iter().zip(&h.laplacians) {
            times.push(u.powf(beta / alpha));
            columns.push(lap.clone());
        }
    }
    for (k, t) in field.times.iter().enumerate() {
        times.push(*t);
        columns.push(field.laplacian(k));
    }
    let times = Arc::new(times);
    let t_last = *times.last().unwrap();

    let t = field.times[level];
    let (h1, h2) = (t - field.times[level - 1], field.times[level + 1] - t);
    let (pm, p0, pp) = (&field.values[level - 1], &field.values[level], &field.values[level + 1]);
    let coeff = alpha / beta * t.powf(alpha - 1.0);

    let mut worst: f64 = 0.0;
    for i in 1..nx - 1 {
        let dpdt = (h1 * h1 * pp[i] - h2 * h2 * pm[i] + (h2 * h2 - h1 * h1) * p0[i]) / (h1 * h2 * (h1 + h2));
        let column: Vec<f64> = columns.iter().map(|c| c[i]).collect();
        if column.iter().all(|&v| v == 0.0) && dpdt == 0.0 {
            continue;
        }
        let abscissae = times.clone();
        let phi = SampledFunction::new(move |s| piecewise_linear(&abscissae, &column, s))
            .with_domain(0.0, t_last)
            .with_breakpoints(times.to_vec());
        let rhs = ek_derivative_estimate(ek, &phi, t)?.value;
        worst = worst.max((dpdt - coeff * rhs).abs());
    }
    Ok(worst)
}

fn piecewise_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[k - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - w) + ys[k] * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greenfn::gaussian_green;

    #[test]
    fn pow_decrement_matches_direct() {
        for &(a, w, b) in &[(3.0, 1.0, 0.5), (2.0, 2.0, 0.7), (5.0, 0.5, 1.0)] {
            let direct = f64::powf(a, b) - f64::powf(a - w, b);
            assert!((pow_decrement(a, w, b) - direct).abs() < 1e-14 * direct);
        }
        // small decrements: two terms of the binomial series
        let (a, w, b) = (1.0, 1e-9, 0.3);
        let series = b * w - b * (b - 1.0) / 2.0 * w * w;
        assert!((pow_decrement(a, w, b) - series).abs() < 1e-14 * series);
    }

    #[test]
    fn tridiagonal_solve_inverts_operator() {
        let rhs: Vec<f64> = (0..9).map(|i| if i == 0 || i == 8 { 0.0 } else { (i as f64).sin() }).collect();
        let sol = implicit_step(0.3, 0.1, &rhs).unwrap();
        let lap = laplacian(&sol, 0.1);
        for i in 1..8 {
            assert!((sol[i] - 0.3 * lap[i] - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let cfg = SolverConfig {
            params: DiffusionParams::new(0.8, 0.5).unwrap(),
            grid: Grid1D::symmetric(5.0, 51).unwrap(),
            t0: 0.0,
            t_end: 1.0,
            nt: 20,
            ic_mode: IcMode::Custom(SampledFunction::constant(0.0)),
            rule: TimeRule::default(),
        };
        let sol = solve(&cfg).unwrap();
        assert!(sol.values.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert_eq!(ek_residual(&sol, 5).unwrap(), 0.0);
    }

    #[test]
    fn validation_errors() {
        let base = SolverConfig {
            params: DiffusionParams::new(1.0, 1.0).unwrap(),
            grid: Grid1D::symmetric(10.0, 401).unwrap(),
            t0: 0.01,
            t_end: 1.0,
            nt: 10,
            ic_mode: IcMode::AnalyticGreen,
            rule: TimeRule::default(),
        };
        assert!(solve(&SolverConfig { nt: 1, ..base.clone() }).is_err());
        assert!(solve(&SolverConfig { t0: 2.0, ..base.clone() }).is_err());
        assert!(matches!(solve(&SolverConfig { t0: 1e-6, ..base.clone() }), Err(Error::Resolution(_))));
        assert!(matches!(solve_reduced(Reduction::TimeFractional, &base), Err(Error::ParamMismatch(_))));
        let sol = solve(&SolverConfig { nt: 4, ..base.clone() }).unwrap();
        assert!(matches!(ek_residual(&sol, 1), Err(Error::InsufficientHistory { .. })));
        assert!(matches!(ek_residual(&sol, 3), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn brownian_minimal_run() {
        let cfg = SolverConfig {
            params: DiffusionParams::new(1.0, 1.0).unwrap(),
            grid: Grid1D::symmetric(10.0, 401).unwrap(),
            t0: 0.01,
            t_end: 1.0,
            nt: 200,
            ic_mode: IcMode::AnalyticGreen,
            rule: TimeRule::default(),
        };
        let sol = solve(&cfg).unwrap();
        assert_eq!(sol.levels(), 200);
        assert_eq!(*sol.times.last().unwrap(), 1.0);
        let err = sol.l1_error(199, |x| gaussian_green(x, 1.0)).unwrap();
        assert!(err < 1e-3, "{err}");
        assert!(sol.mass_drift < 1e-10);
    }
}

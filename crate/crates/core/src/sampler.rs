//! Monte Carlo ggBm paths from the mixture representation
//!
//! ```text
//! X(t) = √τ · Z(t),   τ ~ M_β,   Z fBm with Var Z(t) = 2 t^α,
//! ```
//!
//! so that `X(t)` has the density `𝒢(·,t)`.
//!
//! Every path owns one ChaCha8 stream, numbered by its index, in each of two
//! seed domains: one for the amplitude `τ`, one for the Gaussian path. Output
//! is therefore independent of the thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greenfn::{DiffusionParams, ProfileIntegrator};
use crate::mwright::{mwright_build_table, MWrightTable, WrightOrder};

/// Largest `n_paths · len(time_nodes)` an ensemble may hold.
pub const MAX_ENSEMBLE_VALUES: usize = 1 << 28;

/// Fewest paths [`ensemble_stats`] accepts.
pub const MIN_STATS_PATHS: usize = 100;

/// Seed-domain tags, xor-ed into the user seed.
pub const TAU_DOMAIN: u64 = 0x7461_755f_6472_6177;
pub const PATH_DOMAIN: u64 = 0x6662_6d5f_7061_7468;

/// Environment variable fixing the worker count of the sampler.
pub const THREADS_ENV: &str = "EKDIFF_THREADS";

const TABLE_TAIL_EPS: f64 = 1e-12;
const TABLE_NODES: usize = 8192;
const MAX_JITTER_TRIES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    #[default]
    Cholesky,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub params: DiffusionParams,
    pub time_nodes: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub fbm_method: FbmMethod,
}

impl EnsembleConfig {
    pub fn new(params: DiffusionParams, time_nodes: Vec<f64>, n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = EnsembleConfig { params, time_nodes, n_paths, seed, fbm_method: FbmMethod::Cholesky };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        DiffusionParams::new(self.params.alpha, self.params.beta)?;
        check_nodes(&self.time_nodes)?;
        if self.n_paths == 0 {
            return Err(invalid("an ensemble needs at least one path"));
        }
        let values = self.n_paths.saturating_mul(self.time_nodes.len());
        if values > MAX_ENSEMBLE_VALUES {
            return Err(invalid(format!("{values} path values exceed the cap of {MAX_ENSEMBLE_VALUES}")));
        }
        Ok(())
    }
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if !(nodes[0] >= 0.0) || nodes.iter().any(|t| !t.is_finite()) {
        return Err(invalid("time nodes must be finite and start at t >= 0"));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("time nodes must be strictly increasing"));
    }
    Ok(())
}

/// Where the random numbers of an ensemble came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub generator: String,
    pub seed: u64,
    pub tau_seed: u64,
    pub path_seed: u64,
    /// Stream `i` of each seed drives path `i`.
    pub streams: String,
}

impl RngProvenance {
    fn new(seed: u64) -> Self {
        RngProvenance {
            generator: "ChaCha8".into(),
            seed,
            tau_seed: seed ^ TAU_DOMAIN,
            path_seed: seed ^ PATH_DOMAIN,
            streams: "path index".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub config: EnsembleConfig,
    pub tau: Vec<f64>,
    /// `paths[i][k]` is path `i` at `time_nodes[k]`.
    pub paths: Vec<Vec<f64>>,
    pub provenance: RngProvenance,
}

impl PathEnsemble {
    /// Values of every path at node `k`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[k]).collect()
    }
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `f` on a pool of `EKDIFF_THREADS` workers when that is set.
fn in_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// The inverse-CDF table of `M_β`, built once per order.
pub fn tau_table(beta: f64) -> Result<Arc<MWrightTable>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<MWrightTable>>>> = OnceLock::new();
    let order = WrightOrder::new(beta)?;
    if order.is_dirac() {
        return Err(Error::DiracOrder);
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap().get(&beta.to_bits()) {
        return Ok(t.clone());
    }
    let table = Arc::new(mwright_build_table(order, TABLE_TAIL_EPS, TABLE_NODES)?);
    cache.lock().unwrap().insert(beta.to_bits(), table.clone());
    Ok(table)
}

/// `n` draws from `M_β`, draw `i` from stream `i` of `seed`. All ones for
/// `β = 1`.
pub fn sample_tau(beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let order = WrightOrder::new(beta)?;
    if order.is_dirac() {
        return Ok(vec![1.0; n]);
    }
    let table = tau_table(beta)?;
    Ok(in_pool(|| (0..n).into_par_iter().map(|i| table.quantile(stream(seed, i).gen::<f64>())).collect()))
}

/// Lower Cholesky factor of `C(s,t) = s^{2H} + t^{2H} - |t-s|^{2H}` on the
/// positive nodes. A diagonal jitter, growing tenfold from `1e-14` of the
/// largest variance, is added if the plain factorization fails.
pub fn fbm_cholesky(hurst: f64, nodes: &[f64]) -> Result<DMatrix<f64>> {
    let m = nodes.len();
    let h2 = 2.0 * hurst;
    let cov = DMatrix::from_fn(m, m, |i, j| {
        let (s, t) = (nodes[i], nodes[j]);
        s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2)
    });
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let scale = (0..m).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let mut jitter = 1e-14 * scale;
    for _ in 0..MAX_JITTER_TRIES {
        let shifted = &cov + DMatrix::identity(m, m) * jitter;
        if let Some(c) = shifted.cholesky() {
            log::debug!("fBm covariance factorized with jitter {jitter:e}");
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter })
}

/// `n` zero-mean Gaussian paths with `Var X(t) = 2 t^{2H}` and the H-sssi
/// covariance, path `i` from stream `i` of `seed`. Nodes at `t = 0` hold 0.
pub fn fbm_paths(hurst: f64, time_nodes: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(hurst > 0.0 && hurst <= 1.0) {
        return Err(invalid(format!("Hurst exponent must lie in (0, 1], got {hurst}")));
    }
    check_nodes(time_nodes)?;
    let skip = usize::from(time_nodes[0] == 0.0);
    let positive = &time_nodes[skip..];
    let chol = if positive.is_empty() { DMatrix::zeros(0, 0) } else { fbm_cholesky(hurst, positive)? };
    let m = positive.len();
    Ok(in_pool(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i);
                let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = &chol * z;
                let mut path = vec![0.0; skip];
                path.extend(x.iter());
                path
            })
            .collect()
    }))
}

/// `√τ_i · Z_i(t)` with `τ_i` from [`sample_tau`] and `Z_i` from
/// [`fbm_paths`] at Hurst exponent `α/2`.
pub fn ggbm_paths(config: &EnsembleConfig) -> Result<PathEnsemble> {
    config.validate()?;
    let provenance = RngProvenance::new(config.seed);
    let p = config.params;
    let tau = sample_tau(p.beta, config.n_paths, provenance.tau_seed)?;
    let mut paths = fbm_paths(p.hurst(), &config.time_nodes, config.n_paths, provenance.path_seed)?;
    for (path, t) in paths.iter_mut().zip(&tau) {
        let s = t.sqrt();
        path.iter_mut().for_each(|v| *v *= s);
    }
    Ok(PathEnsemble { config: config.clone(), tau, paths, provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Normalized so that `Σ density · width = 1` over the samples inside.
    pub density: Vec<f64>,
    /// Samples outside `[edges[0], edges[last]]`.
    pub outside: usize,
}

pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if !(lo < hi) || bins == 0 {
        return Err(invalid(format!("histogram needs lo < hi and bins > 0, got [{lo}, {hi}], {bins}")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0;
    for &x in samples {
        if x < lo || x > hi || !x.is_finite() {
            outside += 1;
            continue;
        }
        counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let inside = (samples.len() - outside).max(1) as f64;
    Ok(Histogram {
        edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (inside * width)).collect(),
        outside,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Unbiased sample variance at each node.
    pub variance_curve: Vec<f64>,
    /// Least-squares slope of `log Var` against `log t` over `t > 0`.
    pub loglog_slope: f64,
    /// `exp` of the fitted intercept: the variance the fit assigns to `t = 1`.
    pub amplitude: f64,
}

pub fn ensemble_stats(ens: &PathEnsemble) -> Result<EnsembleStats> {
    let n = ens.paths.len();
    if n < MIN_STATS_PATHS {
        return Err(Error::InsufficientPaths { got: n, needed: MIN_STATS_PATHS });
    }
    let times = ens.config.time_nodes.clone();
    let variance_curve: Vec<f64> = (0..times.len())
        .map(|k| {
            let mean = ens.paths.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            ens.paths.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        })
        .collect();
    let pts: Vec<(f64, f64)> =
        times.iter().zip(&variance_curve).filter(|(t, v)| **t > 0.0 && **v > 0.0).map(|(t, v)| (t.ln(), v.ln())).collect();
    let (loglog_slope, intercept) = least_squares(&pts);
    Ok(EnsembleStats { times, variance_curve, loglog_slope, amplitude: intercept.exp() })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, pts.first().map_or(f64::NAN, |p| p.1));
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (f64::NAN, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `sup |F_n - F|` of the samples against a continuous CDF.
pub fn ks_statistic(samples: &[f64], mut cdf: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample statistic.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    1.6276 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// KS distance of the node-`k` marginal to `𝒢(·, t_k)`.
pub fn marginal_ks(ens: &PathEnsemble, k: usize) -> Result<f64> {
    let t = ens.config.time_nodes[k];
    if !(t > 0.0) {
        return Err(invalid("the marginal at t = 0 is a point mass"));
    }
    let p = ens.config.params;
    let integ = ProfileIntegrator::new(p.profile_order())?;
    ks_statistic(&ens.marginal(k), |x| integ.green_cdf(p, x, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mwright::mwright_moment;

    #[test]
    fn dirac_amplitude_and_reproducibility() {
        assert!(sample_tau(1.0, 5, 3).unwrap().iter().all(|&t| t == 1.0));
        let a = sample_tau(0.5, 100, 9).unwrap();
        assert_eq!(a, sample_tau(0.5, 100, 9).unwrap());
        assert_ne!(a, sample_tau(0.5, 100, 10).unwrap());
        assert!(a.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn tau_mean_and_ks() {
        let n = 100_000;
        let tau = sample_tau(0.5, n, 2024).unwrap();
        let mean = tau.iter().sum::<f64>() / n as f64;
        let var = tau.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expect = mwright_moment(WrightOrder::new(0.5).unwrap(), 1.0).unwrap();
        assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expect}");
        let table = tau_table(0.5).unwrap();
        let d = ks_statistic(&tau, |x| Ok(table.cdf(x))).unwrap();
        assert!(d < ks_critical_1pct(n), "{d}");
    }

    #[test]
    fn cholesky_handles_degenerate_grids() {
        let l = fbm_cholesky(1.0, &[0.5, 1.0, 2.0]).unwrap();
        assert!(l.iter().all(|v| v.is_finite()));
        let l = fbm_cholesky(0.5, &[1.0, 1.0 + 1e-15]).unwrap();
        assert!(l.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn stats_errors_and_histogram() {
        let cfg = EnsembleConfig::new(DiffusionParams::new(1.0, 1.0).unwrap(), vec![0.0, 1.0], 10, 1).unwrap();
        let ens = ggbm_paths(&cfg).unwrap();
        assert!(ens.paths.iter().all(|p| p[0] == 0.0));
        assert!(matches!(ensemble_stats(&ens), Err(Error::InsufficientPaths { got: 10, needed: 100 })));
        let h = histogram(&[0.1, 0.2, 0.6, 5.0], 0.0, 1.0, 4).unwrap();
        assert_eq!(h.outside, 1);
        let mass: f64 = h.density.iter().map(|d| d * 0.25).sum();
        assert!((mass - 1.0).abs() < 1e-15);
        assert!(EnsembleConfig::new(cfg.params, vec![1.0, 0.5], 10, 1).is_err());
        assert!(EnsembleConfig::new(cfg.params, vec![1.0], MAX_ENSEMBLE_VALUES + 1, 1).is_err());
    }

    #[test]
    fn ks_helpers() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&xs, Ok).unwrap() <= 5e-4 + 1e-15);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.1).collect();
        assert!((ks_two_sample(&xs, &shifted) - 0.1).abs() < 2e-3);
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
    }
}

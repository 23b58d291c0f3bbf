//! Green functions of the ggBm family and their representations.
//!
//! For `0 < α ≤ 2`, `0 < β ≤ 1` the one-point density is
//! `𝒢(x,t) = ½ t^{-α/2} M_{β/2}(|x| t^{-α/2})`, with variance
//! `2 t^α / Γ(β+1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ekops::SampledFunction;
use crate::error::{invalid, Error, Result};
use crate::mwright::{mwright_cdf, mwright_eval, tail_cut, WrightOrder};
use crate::quadrature::{self, gauss_legendre, Tolerance};
use crate::special::recip_gamma;

/// The pair `(α, β)` selecting one member of the ggBm family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DiffusionParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("beta must lie in (0, 1], got {beta}")));
        }
        Ok(DiffusionParams { alpha, beta })
    }

    pub fn hurst(&self) -> f64 {
        self.alpha / 2.0
    }

    pub fn is_slow(&self) -> bool {
        self.alpha < 1.0
    }

    pub fn is_fast(&self) -> bool {
        self.alpha > 1.0
    }

    /// Order `β/2` of the spatial M-Wright profile.
    pub fn profile_order(&self) -> WrightOrder {
        WrightOrder::new(self.beta / 2.0).expect("beta/2 lies in (0, 1/2]")
    }

    pub fn beta_order(&self) -> WrightOrder {
        WrightOrder::new(self.beta).expect("beta lies in (0, 1]")
    }
}

/// The three classical limits of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// `α = β < 1`: time-fractional diffusion.
    TimeFractional,
    /// `β = 1`: stretched Gaussian (fBm marginal).
    StretchedGaussian,
    /// `α = β = 1`: the heat equation.
    Brownian,
}

impl Reduction {
    /// Checks that `p` lies on this reduction.
    pub fn check(self, p: DiffusionParams) -> Result<()> {
        let ok = match self {
            Reduction::TimeFractional => p.alpha == p.beta && p.beta < 1.0,
            Reduction::StretchedGaussian => p.beta == 1.0,
            Reduction::Brownian => p.alpha == 1.0 && p.beta == 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParamMismatch(format!("{self:?} does not admit alpha = {}, beta = {}", p.alpha, p.beta)))
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

/// Heat kernel `exp(-x²/(4t)) / √(4πt)`.
pub fn gaussian_green(x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok((-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt())
}

/// `𝒢(x,t) = ½ t^{-α/2} M_{β/2}(|x| t^{-α/2})`.
pub fn ggbm_green(p: DiffusionParams, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let s = t.powf(-p.alpha / 2.0);
    Ok(0.5 * s * mwright_eval(p.profile_order(), x.abs() * s)?)
}

/// Time-fractional Green function `½ t^{-β/2} M_{β/2}(|x| t^{-β/2})`.
pub fn time_fractional_green(beta: f64, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let order = WrightOrder::new(beta / 2.0)?;
    let s = t.powf(-beta / 2.0);
    Ok(0.5 * s * mwright_eval(order, x.abs() * s)?)
}

/// Stretched Gaussian `t^{-α/2} exp(-x²/(4t^α)) / √(4π)`.
pub fn stretched_gaussian_green(alpha: f64, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let ta = t.powf(alpha);
    Ok((-x * x / (4.0 * ta)).exp() / (4.0 * PI * ta).sqrt())
}

/// Closed form of a reduction, after checking that `p` lies on it.
pub fn reduced_green(kind: Reduction, p: DiffusionParams, x: f64, t: f64) -> Result<f64> {
    kind.check(p)?;
    match kind {
        Reduction::TimeFractional => time_fractional_green(p.beta, x, t),
        Reduction::StretchedGaussian => stretched_gaussian_green(p.alpha, x, t),
        Reduction::Brownian => gaussian_green(x, t),
    }
}

/// `⟨x²⟩ = 2 t^α / Γ(β+1)`.
pub fn green_variance(p: DiffusionParams, t: f64) -> f64 {
    2.0 * t.powf(p.alpha) * recip_gamma(p.beta + 1.0)
}

/// Gaussian mixture
/// `𝒢(x,t) = ∫₀^∞ (4πτt^α)^{-1/2} exp(-x²/(4τt^α)) M_β(τ) dτ`,
/// integrated in `u = √τ`, where the integrand is smooth. For `β = 1` the
/// mixing density is a point mass at `τ = 1`.
pub fn green_mixture(p: DiffusionParams, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if p.beta == 1.0 {
        return stretched_gaussian_green(p.alpha, x, t);
    }
    let order = p.beta_order();
    let ta = t.powf(p.alpha);
    let norm = 2.0 / (4.0 * PI * ta).sqrt();
    let q = x * x / (4.0 * ta);
    let u_max = tail_cut(order, 1e-16).sqrt();
    let mut failure = None;
    let integrand = |u: f64| -> f64 {
        let gauss = if u > 0.0 { (-q / (u * u)).exp() } else if q == 0.0 { 1.0 } else { 0.0 };
        if gauss == 0.0 {
            return 0.0;
        }
        match mwright_eval(order, u * u) {
            Ok(m) => norm * gauss * m,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let breaks: Vec<f64> = (0..=16).map(|k| u_max * k as f64 / 16.0).collect();
    let est = quadrature::adaptive_breaks(integrand, &breaks, Tolerance::new(1e-13, 1e-11));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est?.value)
}

/// Density `t^{-α} M_β(t_* t^{-α})` of the operational time `t_*` at `t`.
/// For `β = 1` it is a point mass at `t_* = t^α`.
pub fn directing_pdf(p: DiffusionParams, t_star: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if p.beta == 1.0 {
        return Err(Error::DiracOrder);
    }
    if !(t_star >= 0.0) {
        return Err(Error::Domain(format!("operational time must be >= 0, got {t_star}")));
    }
    let s = t.powf(-p.alpha);
    Ok(s * mwright_eval(p.beta_order(), t_star * s)?)
}

/// `∫_{-∞}^x 𝒢(ξ,t) dξ`.
pub fn green_cdf(p: DiffusionParams, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let half = 0.5 * mwright_cdf(p.profile_order(), x.abs() * t.powf(-p.alpha / 2.0))?;
    Ok(if x >= 0.0 { 0.5 + half } else { 0.5 - half })
}

/// Half-width beyond which `𝒢(·,t)` stays below `rel · 𝒢(0,t)`.
pub fn profile_extent(p: DiffusionParams, t: f64, rel: f64) -> Result<f64> {
    check_time(t)?;
    let order = p.profile_order();
    let peak = mwright_eval(order, 0.0)?;
    let below = |z: f64| mwright_eval(order, z).map(|m| m < rel * peak);
    let mut hi = 1.0;
    while !below(hi)? {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi * t.powf(p.alpha / 2.0))
}

/// Convolution `∫ 𝒢(ξ,t) P0(x-ξ) dξ`. `P0` must carry a finite domain hint,
/// outside which it is taken to vanish.
pub fn general_solution(p: DiffusionParams, p0: &SampledFunction, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let (lo, hi) = p0.domain.ok_or_else(|| invalid("initial condition needs a finite support hint"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("support hint [{lo}, {hi}] is not a finite interval")));
    }
    let reach = profile_extent(p, t, 1e-16)?;
    // ξ ranges where both factors can be nonzero
    let a = (x - hi).max(-reach);
    let b = (x - lo).min(reach);
    if a >= b {
        return Ok(0.0);
    }
    let mut breaks = vec![a, b];
    if a < 0.0 && 0.0 < b {
        breaks.push(0.0);
    }
    breaks.extend(p0.breakpoints().iter().map(|&c| x - c).filter(|&c| a < c && c < b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut failure = None;
    let est = quadrature::adaptive_breaks(
        |xi| match ggbm_green(p, xi, t) {
            Ok(g) => g * p0.eval(x - xi),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        Tolerance { abs: 1e-12, rel: 1e-10, max_segments: 5000 },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est?.value)
}

/// Sampled Green function on a symmetric grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenProfile {
    pub params: DiffusionParams,
    pub t: f64,
    pub x_nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl GreenProfile {
    /// `n` uniform nodes on `[-x_max, x_max]`.
    pub fn new(p: DiffusionParams, t: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 || !(x_max > 0.0) {
            return Err(invalid("profile needs at least 3 nodes and a positive extent"));
        }
        let dx = 2.0 * x_max / (n - 1) as f64;
        let x_nodes: Vec<f64> = (0..n).map(|i| -x_max + i as f64 * dx).collect();
        let values = x_nodes.iter().map(|&x| ggbm_green(p, x, t)).collect::<Result<Vec<_>>>()?;
        Ok(GreenProfile { params: p, t, x_nodes, values })
    }

    /// Profile extending until the density drops below `1e-12` of its peak.
    pub fn auto(p: DiffusionParams, t: f64, n: usize) -> Result<Self> {
        Self::new(p, t, profile_extent(p, t, 1e-12)?, n)
    }

    pub fn trapezoid_mass(&self) -> f64 {
        trapezoid(&self.x_nodes, &self.values, |_| 1.0)
    }

    pub fn second_moment(&self) -> f64 {
        trapezoid(&self.x_nodes, &self.values, |x| x * x)
    }
}

fn trapezoid(x: &[f64], y: &[f64], w: impl Fn(f64) -> f64) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] * w(xs[0]) + ys[1] * w(xs[1])))
        .sum()
}

/// Piecewise-polynomial antiderivative of `M_ν` for `ν ≤ 1/2`.
///
/// `[0, z_end]` is cut into panels of width 1/8. On each, `M_ν` is replaced
/// by its degree-7 interpolant at the Gauss–Legendre nodes, held as
/// Legendre coefficients so any sub-interval integrates in closed form.
/// Cumulative masses from both ends keep tail integrals accurate.
#[derive(Debug, Clone)]
pub struct ProfileIntegrator {
    order: WrightOrder,
    coeffs: Vec<[f64; PANEL_NODES]>,
    from_left: Vec<f64>,
    from_right: Vec<f64>,
}

const PANEL_NODES: usize = 8;
const PANEL_WIDTH: f64 = 0.125;

impl ProfileIntegrator {
    /// Tabulates until `M_ν` falls below `1e-40 M_ν(0)`.
    pub fn new(order: WrightOrder) -> Result<Self> {
        if order.nu() > 0.5 {
            return Err(invalid("profile integrator needs a decreasing density, nu <= 1/2"));
        }
        let rule = gauss_legendre(PANEL_NODES);
        let floor = 1e-40 * mwright_eval(order, 0.0)?;
        let mut coeffs = Vec::new();
        let mut masses = Vec::new();
        loop {
            let lo = coeffs.len() as f64 * PANEL_WIDTH;
            let mut vals = [0.0; PANEL_NODES];
            for (v, &x) in vals.iter_mut().zip(&rule.nodes) {
                *v = mwright_eval(order, lo + 0.5 * PANEL_WIDTH * (x + 1.0))?;
            }
            // c_j = (2j+1)/2 Σ w_i f_i P_j(x_i), exact for the interpolant
            let mut c = [0.0; PANEL_NODES];
            for ((&x, &w), &f) in rule.nodes.iter().zip(&rule.weights).zip(&vals) {
                let pj = legendre_values(x);
                for j in 0..PANEL_NODES {
                    c[j] += (2 * j + 1) as f64 / 2.0 * w * f * pj[j];
                }
            }
            masses.push(PANEL_WIDTH * c[0]);
            coeffs.push(c);
            if mwright_eval(order, lo + PANEL_WIDTH)? < floor || coeffs.len() > 1_000_000 {
                break;
            }
        }
        let mut from_left = vec![0.0; masses.len() + 1];
        for (k, m) in masses.iter().enumerate() {
            from_left[k + 1] = from_left[k] + m;
        }
        let mut from_right = vec![0.0; masses.len() + 1];
        for k in (0..masses.len()).rev() {
            from_right[k] = from_right[k + 1] + masses[k];
        }
        Ok(ProfileIntegrator { order, coeffs, from_left, from_right })
    }

    pub fn order(&self) -> WrightOrder {
        self.order
    }

    fn z_end(&self) -> f64 {
        self.coeffs.len() as f64 * PANEL_WIDTH
    }

    /// `∫` over panel `k` from its left end to local coordinate `x ∈ [-1, 1]`.
    fn partial(&self, k: usize, x: f64) -> f64 {
        let c = &self.coeffs[k];
        let p = legendre_values(x);
        // ∫_{-1}^x P_0 = x + 1, ∫_{-1}^x P_j = (P_{j+1} - P_{j-1}) / (2j+1)
        let mut sum = c[0] * (x + 1.0);
        for j in 1..PANEL_NODES {
            let next = if j + 1 < PANEL_NODES { p[j + 1] } else { legendre_next(x, &p) };
            sum += c[j] * (next - p[j - 1]) / (2 * j + 1) as f64;
        }
        0.5 * PANEL_WIDTH * sum
    }

    fn locate(&self, z: f64) -> Option<(usize, f64)> {
        if z >= self.z_end() {
            return None;
        }
        let k = ((z / PANEL_WIDTH) as usize).min(self.coeffs.len() - 1);
        let x = 2.0 * (z - k as f64 * PANEL_WIDTH) / PANEL_WIDTH - 1.0;
        Some((k, x.clamp(-1.0, 1.0)))
    }

    /// `∫_0^z M_ν`.
    pub fn cdf(&self, z: f64) -> f64 {
        match self.locate(z) {
            Some((k, x)) => self.from_left[k] + self.partial(k, x),
            None => self.from_left[self.coeffs.len()],
        }
    }

    /// `∫_z^{z_end} M_ν`.
    pub fn survival(&self, z: f64) -> f64 {
        match self.locate(z) {
            Some((k, x)) => self.from_right[k + 1] + (self.from_right[k] - self.from_right[k + 1] - self.partial(k, x)),
            None => 0.0,
        }
    }

    /// `∫_{z0}^{z1} M_ν` for `0 ≤ z0 ≤ z1`.
    pub fn mass(&self, z0: f64, z1: f64) -> f64 {
        if z1 <= z0 {
            return 0.0;
        }
        if z0 < 1.0 {
            self.cdf(z1) - self.cdf(z0)
        } else {
            self.survival(z0) - self.survival(z1)
        }
    }

    /// `∫_{-∞}^x 𝒢(ξ,t) dξ` for parameters whose profile order is this
    /// integrator's.
    pub fn green_cdf(&self, p: DiffusionParams, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        if p.profile_order() != self.order {
            return Err(invalid("integrator order does not match beta/2"));
        }
        let z = x.abs() * t.powf(-p.alpha / 2.0);
        let total = self.from_left[self.coeffs.len()];
        let tail = 0.5 * if z < 1.0 { total - self.cdf(z) } else { self.survival(z) };
        Ok(if x >= 0.0 { 1.0 - tail } else { tail })
    }

    /// Averages of `𝒢(·,t)` over `[c - dx/2, c + dx/2]` for parameters whose
    /// profile order is this integrator's.
    pub fn cell_averages(&self, p: DiffusionParams, centers: &[f64], dx: f64, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        if p.profile_order() != self.order {
            return Err(invalid("integrator order does not match beta/2"));
        }
        let s = t.powf(-p.alpha / 2.0);
        // 𝒢 dξ = ½ M(z) dz
        Ok(centers
            .iter()
            .map(|&c| {
                let (a, b) = ((c - 0.5 * dx) * s, (c + 0.5 * dx) * s);
                let mass = if a >= 0.0 {
                    self.mass(a, b)
                } else if b <= 0.0 {
                    self.mass(-b, -a)
                } else {
                    self.mass(0.0, -a) + self.mass(0.0, b)
                };
                0.5 * mass / dx
            })
            .collect())
    }
}

fn legendre_values(x: f64) -> [f64; PANEL_NODES] {
    let mut p = [0.0; PANEL_NODES];
    p[0] = 1.0;
    p[1] = x;
    for j in 1..PANEL_NODES - 1 {
        p[j + 1] = ((2 * j + 1) as f64 * x * p[j] - j as f64 * p[j - 1]) / (j + 1) as f64;
    }
    p
}

fn legendre_next(x: f64, p: &[f64; PANEL_NODES]) -> f64 {
    let j = PANEL_NODES - 1;
    ((2 * j + 1) as f64 * x * p[j] - j as f64 * p[j - 1]) / (j + 1) as f64
}

/// Averages of `𝒢(·,t)` over the cells `[c - dx/2, c + dx/2]`.
pub fn cell_averages(p: DiffusionParams, centers: &[f64], dx: f64, t: f64) -> Result<Vec<f64>> {
    ProfileIntegrator::new(p.profile_order())?.cell_averages(p, centers, dx, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mwright::mwright_moment;
    use crate::special::gamma;

    fn params(a: f64, b: f64) -> DiffusionParams {
        DiffusionParams::new(a, b).unwrap()
    }

    #[test]
    fn params_validation_and_tags() {
        assert!(DiffusionParams::new(2.1, 0.5).is_err());
        assert!(DiffusionParams::new(1.0, 1.5).is_err());
        assert!(DiffusionParams::new(0.0, 0.5).is_err());
        let p = params(0.6, 0.4);
        assert!(p.is_slow() && !p.is_fast());
        assert_eq!(p.hurst(), 0.3);
        assert!(params(1.5, 1.0).is_fast());
        let b = params(1.0, 1.0);
        assert!(!b.is_slow() && !b.is_fast());
    }

    #[test]
    fn gaussian_examples() {
        assert!((gaussian_green(0.0, 1.0).unwrap() - 0.282_094_791_773_878_14).abs() < 1e-16);
        let v = gaussian_green(2.0, 0.5).unwrap();
        assert!((v - (-2.0f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!((ggbm_green(params(1.0, 1.0), 2.0, 0.5).unwrap() - v).abs() < 1e-12 * v);
        assert!(gaussian_green(0.0, 0.0).is_err());
    }

    #[test]
    fn reductions_agree_with_general_formula() {
        for &x in &[-4.0, -1.3, 0.0, 0.2, 2.5, 6.0] {
            for &t in &[0.3, 1.0, 2.7] {
                let g = ggbm_green(params(0.6, 0.6), x, t).unwrap();
                let r = reduced_green(Reduction::TimeFractional, params(0.6, 0.6), x, t).unwrap();
                assert!((g - r).abs() <= 1e-10 * g.max(1e-300));
                let g = ggbm_green(params(1.4, 1.0), x, t).unwrap();
                let r = reduced_green(Reduction::StretchedGaussian, params(1.4, 1.0), x, t).unwrap();
                assert!((g - r).abs() <= 1e-10 * g.max(1e-300), "{x} {t}: {g} vs {r}");
            }
        }
        assert!(matches!(reduced_green(Reduction::Brownian, params(1.0, 0.5), 0.0, 1.0), Err(Error::ParamMismatch(_))));
    }

    #[test]
    fn self_similarity_is_exact() {
        let p = params(0.8, 0.5);
        for &x in &[0.0, 0.4, 1.7, 3.0] {
            for &t in &[0.25, 2.0, 9.0] {
                let lhs = ggbm_green(p, x, t).unwrap();
                let rhs = t.powf(-0.4) * ggbm_green(p, x * t.powf(-0.4), 1.0).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(green_variance(params(1.0, 1.0), 3.0), 6.0);
        let v = green_variance(params(1.4, 0.5), 1.0);
        assert!((v - 4.0 / PI.sqrt()).abs() < 1e-15);
        let prof = GreenProfile::auto(params(1.4, 0.5), 1.0, 4001).unwrap();
        assert!((prof.second_moment() - v).abs() < 1e-3 * v);
        // the kink at the origin limits the trapezoid rule to O(dx²)
        assert!((prof.trapezoid_mass() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn mixture_examples() {
        // (4π)^{-1/2} Γ(1/2)/Γ(3/4)
        let expect = (4.0 * PI).powf(-0.5) * mwright_moment(WrightOrder::new(0.5).unwrap(), -0.5).unwrap();
        assert!((expect - (4.0 * PI).powf(-0.5) * gamma(0.5) / gamma(0.75)).abs() < 1e-15);
        let m = green_mixture(params(1.0, 0.5), 0.0, 1.0).unwrap();
        assert!((m - expect).abs() < 1e-10);
        let g = ggbm_green(params(0.8, 0.5), 1.0, 2.0).unwrap();
        let m = green_mixture(params(0.8, 0.5), 1.0, 2.0).unwrap();
        assert!((g - m).abs() < 1e-9);
        let m = green_mixture(params(1.3, 1.0), 0.7, 1.5).unwrap();
        assert_eq!(m, stretched_gaussian_green(1.3, 0.7, 1.5).unwrap());
    }

    #[test]
    fn directing_pdf_normalisation_and_mean() {
        let p = params(0.7, 0.6);
        let t: f64 = 1.8;
        let cut = tail_cut(WrightOrder::new(0.6).unwrap(), 1e-14) * t.powf(0.7);
        let mass = quadrature::adaptive(|s| directing_pdf(p, s, t).unwrap(), 0.0, cut, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-9);
        let mean = quadrature::adaptive(|s| s * directing_pdf(p, s, t).unwrap(), 0.0, cut, Tolerance::new(1e-12, 1e-12)).unwrap();
        let expect = t.powf(0.7) * recip_gamma(1.6);
        assert!((mean.value - expect).abs() < 1e-8 * expect);
        assert!(matches!(directing_pdf(params(0.7, 1.0), 1.0, 1.0), Err(Error::DiracOrder)));
    }

    #[test]
    fn cdf_and_cell_averages() {
        let p = params(0.8, 0.5);
        assert!((green_cdf(p, 0.0, 1.3).unwrap() - 0.5).abs() < 1e-15);
        let dx = 0.1;
        let centers: Vec<f64> = (-3..=3).map(|i| 0.37 + i as f64 * dx).collect();
        let avg = cell_averages(p, &centers, dx, 1.3).unwrap();
        for (c, a) in centers.iter().zip(&avg) {
            let exact = (green_cdf(p, c + 0.5 * dx, 1.3).unwrap() - green_cdf(p, c - 0.5 * dx, 1.3).unwrap()) / dx;
            assert!((a - exact).abs() < 1e-11, "{c}: {a} vs {exact}");
        }
        // a profile far narrower than the cell puts all its mass in the central cell
        let tiny = cell_averages(p, &[-dx, 0.0, dx], dx, 1e-9).unwrap();
        assert!((tiny[1] * dx - 1.0).abs() < 1e-12 && tiny[0] < 1e-200 && tiny[2] == tiny[0], "{tiny:?}");
        let integ = ProfileIntegrator::new(WrightOrder::new(0.3).unwrap()).unwrap();
        assert!((integ.cdf(1e9) - 1.0).abs() < 1e-13);
        for &(a, b) in &[(0.0, 0.3), (0.77, 2.5), (4.0, 4.01), (9.0, 20.0)] {
            let direct = mwright_cdf(WrightOrder::new(0.3).unwrap(), b).unwrap()
                - mwright_cdf(WrightOrder::new(0.3).unwrap(), a).unwrap();
            assert!((integ.mass(a, b) - direct).abs() < 1e-13, "{a} {b}");
        }
        let far = integ.mass(20.0, 21.0);
        let direct = quadrature::adaptive(|z| mwright_eval(WrightOrder::new(0.3).unwrap(), z).unwrap(), 20.0, 21.0, Tolerance::new(0.0, 1e-12)).unwrap();
        assert!((far - direct.value).abs() < 1e-9 * direct.value, "{far} {}", direct.value);
    }

    #[test]
    fn convolution_examples() {
        let p = params(1.0, 1.0);
        let box0 = SampledFunction::new(|x: f64| if x.abs() <= 1.0 { 0.5 } else { 0.0 })
            .with_domain(-1.0, 1.0)
            .with_breakpoints(vec![-1.0, 1.0]);
        for &x in &[0.0, 0.5, 1.0, 2.5] {
            let v = general_solution(p, &box0, x, 1.0).unwrap();
            let expect = 0.25 * (libm::erf((x + 1.0) / 2.0) - libm::erf((x - 1.0) / 2.0));
            assert!((v - expect).abs() < 1e-10, "{x}: {v} vs {expect}");
        }
        let q = params(0.8, 0.5);
        let eps: f64 = 1e-3;
        let narrow = SampledFunction::new(move |x: f64| (-x * x / (2.0 * eps * eps)).exp() / (2.0 * PI).sqrt() / eps)
            .with_domain(-12.0 * eps, 12.0 * eps);
        for &x in &[0.3, 1.0, 2.0] {
            let v = general_solution(q, &narrow, x, 1.0).unwrap();
            let g = ggbm_green(q, x, 1.0).unwrap();
            assert!((v - g).abs() < 1e-4, "{x}: {v} vs {g}");
        }
    }
}

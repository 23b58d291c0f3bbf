//! The M-Wright (Mainardi) function
//!
//! ```text
//! M_ν(z) = Σ_{n≥0} (-z)^n / (n! Γ(1 - ν - νn)),   0 < ν < 1,
//! ```
//!
//! a probability density on `z ≥ 0` with `M_{1/2}(z) = exp(-z²/4)/√π` and
//! `M_1(z) = δ(z - 1)`.
//!
//! Evaluation uses the power series near the origin. The series alternates
//! and its cancellation grows like `exp(2 (1-ν) ν^{ν/(1-ν)} z^{1/(1-ν)})`, so
//! past a switch radius the function is computed from the positive integral
//! representation inherited from the one-sided stable law,
//!
//! ```text
//! M_ν(z) = z^{ν/(1-ν)} / (π (1-ν)) ∫_0^π A(φ) exp(-z^{1/(1-ν)} A(φ)) dφ,
//! A(φ) = (sin νφ / sin φ)^{1/(1-ν)} · sin((1-ν)φ) / sin νφ,
//! ```
//!
//! whose integrand has no cancellation at all.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{self, gauss_legendre, Estimate, Tolerance};
use crate::special::{gamma_ratio, ln_gamma, recip_gamma};

/// Order `ν ∈ (0, 1]` of the M-Wright function. `ν = 1` is the Dirac mass
/// at 1 and is never evaluated pointwise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WrightOrder(f64);

impl WrightOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(invalid(format!("M-Wright order must lie in (0, 1], got {nu}")));
        }
        Ok(WrightOrder(nu))
    }

    pub fn nu(self) -> f64 {
        self.0
    }

    pub fn is_dirac(self) -> bool {
        self.0 == 1.0
    }

    /// `(1-ν) ν^{ν/(1-ν)}`: the rate in `ln M_ν(z) ~ -rate · z^{1/(1-ν)}`.
    fn decay_rate(self) -> f64 {
        let nu = self.0;
        (1.0 - nu) * nu.powf(nu / (1.0 - nu))
    }
}

const SERIES_MAX_TERMS: usize = 400;
/// Series is used while `rate · z^{1/(1-ν)}` stays below this, i.e. while
/// the cancellation factor is under `e^5 ≈ 150`.
const SERIES_SWITCH: f64 = 2.5;
const TARGET_REL: f64 = 1e-10;

/// Evaluates `M_ν(z)` for `0 < ν < 1`, `z ≥ 0`.
pub fn mwright_eval(nu: WrightOrder, z: f64) -> Result<f64> {
    if nu.is_dirac() {
        return Err(Error::DiracOrder);
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("M-Wright argument must be finite and >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(recip_gamma(1.0 - nu.nu()));
    }
    let near = nu.decay_rate() * z.powf(1.0 / (1.0 - nu.nu())) <= SERIES_SWITCH;
    type Method = fn(WrightOrder, f64) -> Result<Estimate>;
    let (first, second): (Method, Method) =
        if near { (mwright_series, mwright_integral) } else { (mwright_integral, mwright_series) };
    let accept = |e: &Estimate| e.error <= TARGET_REL * e.value.abs() || e.value == 0.0 && e.error == 0.0;
    match first(nu, z) {
        Ok(e) if accept(&e) => return Ok(e.value.max(0.0)),
        _ => {}
    }
    match second(nu, z) {
        Ok(e) if accept(&e) => Ok(e.value.max(0.0)),
        Ok(e) => Err(Error::NonConvergence { what: "M-Wright evaluation", estimate: e.error }),
        Err(err) => Err(err),
    }
}

/// Direct summation of the defining series. The returned error combines
/// rounding (proportional to the sum of term magnitudes) with a bound on the
/// first omitted term.
pub fn mwright_series(nu: WrightOrder, z: f64) -> Result<Estimate> {
    if nu.is_dirac() {
        return Err(Error::DiracOrder);
    }
    let v = nu.nu();
    let ln_z = z.ln();
    let mut scale = 1.0; // z^n / n!
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut max_partial: f64 = 0.0;
    for n in 0..SERIES_MAX_TERMS {
        let nf = n as f64;
        if n > 0 {
            scale *= z / nf;
        }
        let arg = 1.0 - v * (nf + 1.0);
        let term = if arg > -170.0 {
            scale * recip_gamma(arg)
        } else {
            let rg = recip_gamma(arg);
            if rg == 0.0 || scale == 0.0 {
                0.0
            } else {
                rg.signum() * (nf * ln_z - ln_gamma(nf + 1.0) + rg.abs().ln()).exp()
            }
        };
        let term = if n % 2 == 1 { -term } else { term };
        sum += term;
        abs_sum += term.abs();
        max_partial = max_partial.max(sum.abs());

        // |1/Γ(1 - x)| ≤ Γ(x)/π for x = ν(n+2) > 0 bounds the next term
        let x_next = v * (nf + 2.0);
        let ln_bound = (nf + 1.0) * ln_z - ln_gamma(nf + 2.0) + ln_gamma(x_next) - PI.ln();
        // past the peak of the term magnitudes once z ν^ν (n+1)^{ν-1} < 1
        let past_peak = z * v.powf(v) * (nf + 1.0).powf(v - 1.0) < 0.5;
        if n >= 2 && past_peak && ln_bound.exp() <= 1e-16 * max_partial {
            let rounding = 4.0 * f64::EPSILON * abs_sum * (1.0 + (nf + 1.0).sqrt());
            return Ok(Estimate { value: sum, error: rounding + ln_bound.exp() });
        }
    }
    Err(Error::NonConvergence { what: "M-Wright series", estimate: abs_sum })
}

fn kanter_a(v: f64, phi: f64) -> f64 {
    let snu = (v * phi).sin();
    let s = phi.sin();
    (snu / s).powf(1.0 / (1.0 - v)) * ((1.0 - v) * phi).sin() / snu
}

/// Adaptive quadrature of the positive integral representation.
pub fn mwright_integral(nu: WrightOrder, z: f64) -> Result<Estimate> {
    if nu.is_dirac() {
        return Err(Error::DiracOrder);
    }
    let v = nu.nu();
    if z == 0.0 {
        return Ok(Estimate { value: recip_gamma(1.0 - v), error: 0.0 });
    }
    let c = z.powf(1.0 / (1.0 - v));
    let a0 = nu.decay_rate(); // A(0+)
    let ln_pref = (v / (1.0 - v)) * z.ln() - (PI * (1.0 - v)).ln();
    // ∫ A e^{-c(A - a0)} dφ ≤ π max(A e^{-c(A-a0)}) ≤ π max(a0, e^{c a0 - 1}/c)
    if c * a0 > 800.0 + ln_pref.max(0.0) {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let integrand = |phi: f64| -> f64 {
        if phi <= 0.0 {
            return a0;
        }
        let a = kanter_a(v, phi);
        if !a.is_finite() {
            return 0.0;
        }
        let g = a * (-c * (a - a0)).exp();
        if g.is_finite() {
            g
        } else {
            0.0
        }
    };
    // break points where c·A crosses a few decades; the integrand peaks at c·A = 1
    let mut breaks = vec![0.0];
    for level in [1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3] {
        let target = level / c;
        if target <= a0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if kanter_a(v, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let phi = 0.5 * (lo + hi);
        if phi > *breaks.last().unwrap() && phi < PI {
            breaks.push(phi);
        }
    }
    breaks.push(PI);
    let est = quadrature::adaptive_breaks(integrand, &breaks, Tolerance::new(0.0, 1e-13))?;
    let factor = (ln_pref - c * a0).exp();
    Ok(Estimate { value: factor * est.value, error: factor * est.error })
}

/// `∫_0^∞ τ^δ M_ν(τ) dτ = Γ(δ+1)/Γ(νδ+1)` for `δ > -1`; 1 for the Dirac
/// order.
pub fn mwright_moment(nu: WrightOrder, delta: f64) -> Result<f64> {
    if !(delta > -1.0) || !delta.is_finite() {
        return Err(invalid(format!("moment order must be finite and > -1, got {delta}")));
    }
    if nu.is_dirac() {
        return Ok(1.0);
    }
    Ok(gamma_ratio(delta + 1.0, nu.nu() * delta + 1.0))
}

/// Point beyond which the mass of `M_ν` is provably below `eps`, from the
/// Markov bound `P(τ > T) ≤ E[τ^k]/T^k` minimised over integer `k`.
pub fn tail_cut(nu: WrightOrder, eps: f64) -> f64 {
    if nu.is_dirac() {
        return 1.0;
    }
    (1..=80)
        .map(|k| {
            let k = k as f64;
            let m = mwright_moment(nu, k).expect("positive order");
            ((m.ln() - eps.ln()) / k).exp()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `∫_0^z M_ν(τ) dτ`.
pub fn mwright_cdf(nu: WrightOrder, z: f64) -> Result<f64> {
    if nu.is_dirac() {
        return Ok(if z >= 1.0 { 1.0 } else { 0.0 });
    }
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("CDF argument must be >= 0, got {z}")));
    }
    let upper = z.min(tail_cut(nu, 1e-17));
    let mut breaks = vec![0.0];
    let mut x = 0.0;
    while x + 1.0 < upper {
        x += 1.0;
        breaks.push(x);
    }
    breaks.push(upper);
    let mut failure = None;
    let est = quadrature::adaptive_breaks(
        |t| match mwright_eval(nu, t) {
            Ok(m) => m,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &breaks,
        Tolerance::new(1e-15, 1e-13),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est?.value.min(1.0))
}

/// Tabulated `M_ν` and its CDF on a graded grid over `[0, tail_cut]`.
#[derive(Debug, Clone)]
pub struct MWrightTable {
    pub nu: WrightOrder,
    pub nodes: Vec<f64>,
    pub pdf_values: Vec<f64>,
    pub cdf_values: Vec<f64>,
    pub tail_cut: f64,
    pub tail_eps: f64,
}

/// Grading exponent: node spacing grows by `e^GRADING` from 0 to the cut.
const GRADING: f64 = 3.0;

pub fn mwright_build_table(nu: WrightOrder, tail_eps: f64, n_nodes: usize) -> Result<MWrightTable> {
    if nu.is_dirac() {
        return Err(Error::DiracOrder);
    }
    if !(tail_eps > 0.0 && tail_eps <= 1e-3) {
        return Err(invalid(format!("tail_eps must lie in (0, 1e-3], got {tail_eps}")));
    }
    if n_nodes < 64 {
        return Err(invalid(format!("a table needs at least 64 nodes, got {n_nodes}")));
    }
    let cut = tail_cut(nu, tail_eps);
    let denom = GRADING.exp_m1();
    let nodes: Vec<f64> = (0..n_nodes)
        .map(|i| {
            let s = i as f64 / (n_nodes - 1) as f64;
            cut * (GRADING * s).exp_m1() / denom
        })
        .collect();
    let pdf_values = nodes
        .iter()
        .map(|&t| mwright_eval(nu, t))
        .collect::<Result<Vec<_>>>()?;
    let gl = gauss_legendre(6);
    let mut cdf_values = Vec::with_capacity(n_nodes);
    cdf_values.push(0.0);
    let mut acc = 0.0;
    for w in nodes.windows(2) {
        let mut failure = None;
        let piece = quadrature::apply_rule(&gl, w[0], w[1], |t| {
            mwright_eval(nu, t).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        acc += piece.max(0.0);
        cdf_values.push(acc);
    }
    let table = MWrightTable { nu, nodes, pdf_values, cdf_values, tail_cut: cut, tail_eps };
    if (table.total_mass() - 1.0).abs() > 2.0 * tail_eps.max(1e-12) {
        return Err(Error::Table(format!(
            "tabulated mass {} misses 1 by more than 2·tail_eps",
            table.total_mass()
        )));
    }
    Ok(table)
}

impl MWrightTable {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        *self.cdf_values.last().unwrap()
    }

    /// Linear interpolation of the tabulated CDF; 0 below the grid and the
    /// tabulated total mass above it.
    pub fn cdf(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        if tau >= self.tail_cut {
            return self.total_mass();
        }
        let k = self.nodes.partition_point(|&x| x <= tau).clamp(1, self.len() - 1);
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let (c0, c1) = (self.cdf_values[k - 1], self.cdf_values[k]);
        c0 + (c1 - c0) * (tau - x0) / (x1 - x0)
    }

    /// Inverse of [`cdf`](Self::cdf) for `u ∈ [0, 1]`, the probability being
    /// taken relative to the tabulated mass.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total_mass();
        let k = self.cdf_values.partition_point(|&c| c < target).clamp(1, self.len() - 1);
        let (c0, c1) = (self.cdf_values[k - 1], self.cdf_values[k]);
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        if c1 <= c0 {
            return x0;
        }
        x0 + (x1 - x0) * (target - c0) / (c1 - c0)
    }

    /// Trapezoidal `∫ τ^δ M_ν(τ) dτ` over the table.
    pub fn trapezoid_moment(&self, delta: f64) -> f64 {
        self.nodes
            .windows(2)
            .zip(self.pdf_values.windows(2))
            .map(|(x, p)| 0.5 * (x[1] - x[0]) * (x[0].powf(delta) * p[0] + x[1].powf(delta) * p[1]))
            .sum()
    }
}

/// Right-hand side of the composition identity
///
/// ```text
/// t^{-ν} M_ν(ξ/t^ν) = t^{-ℓ} ∫_0^∞ M_λ(ξ/τ^λ) M_ℓ(τ/t^ℓ) dτ/τ^λ,   ν = λℓ,
/// ```
///
/// evaluated by quadrature after the substitution `v = τ^{1-λ}`, which
/// absorbs the `τ^{-λ}` factor. Either order may be the Dirac order 1.
pub fn mwright_compose(lambda: WrightOrder, ell: WrightOrder, xi: f64, t: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("xi must be >= 0, got {xi}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be > 0, got {t}")));
    }
    let (l, e) = (lambda.nu(), ell.nu());
    match (lambda.is_dirac(), ell.is_dirac()) {
        (true, true) => return Err(Error::DiracOrder),
        // M_ℓ(τ/t) = t δ(τ - t)
        (false, true) => return Ok(t.powf(-l) * mwright_eval(lambda, xi * t.powf(-l))?),
        // M_1(ξ/τ) dτ/τ = δ(τ - ξ) dτ
        (true, false) => return Ok(t.powf(-e) * mwright_eval(ell, xi * t.powf(-e))?),
        (false, false) => {}
    }
    let scale = t.powf(e);
    let tau_max = scale * tail_cut(ell, 1e-16);
    let v_max = tau_max.powf(1.0 - l);
    let mut failure = None;
    let mut eval = |nu: WrightOrder, z: f64| -> f64 {
        if !z.is_finite() {
            return 0.0;
        }
        mwright_eval(nu, z).unwrap_or_else(|err| {
            failure.get_or_insert(err);
            0.0
        })
    };
    let integrand = |v: f64| -> f64 {
        if v <= 0.0 {
            return if xi == 0.0 { recip_gamma(1.0 - l) * recip_gamma(1.0 - e) / (1.0 - l) } else { 0.0 };
        }
        let tau = v.powf(1.0 / (1.0 - l));
        let outer = eval(ell, tau / scale);
        if outer == 0.0 {
            return 0.0;
        }
        eval(lambda, xi * tau.powf(-l)) * outer / (1.0 - l)
    };
    let breaks: Vec<f64> = (0..=8).map(|k| v_max * k as f64 / 8.0).collect();
    let est = quadrature::adaptive_breaks(integrand, &breaks, Tolerance::new(1e-10, 1e-10));
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(est?.value / scale)
}

//! Quadrature rules: Gauss–Legendre and Gauss–Jacobi node sets, adaptive
//! Gauss–Kronrod, tanh–sinh for endpoint singularities, and a half-line
//! driver built from the adaptive rule.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Integral value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre rule with `n` points.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`, with
/// `a, b > -1`. Rules are cached per `(n, a, b)`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Arc<Rule> {
    assert!(n >= 1, "rule needs at least one node");
    assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
    let key = (n, a.to_bits(), b.to_bits());
    if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(build_gauss_jacobi(n, a, b));
    rule_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Initial nodes from the eigenvalues of the Jacobi matrix (Golub–Welsch),
/// then Newton polishing on the three-term recurrence and the closed-form
/// Christoffel weights.
fn build_gauss_jacobi(n: usize, a: f64, b: f64) -> Rule {
    let ab = a + b;
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        jm[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + ab;
            let off2 = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + ab) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0))
            };
            let off = off2.sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let mut guesses: Vec<f64> = jm.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let nf = n as f64;
    let log_norm = ln_gamma(a + nf) + ln_gamma(b + nf) - ln_gamma(nf + 1.0) - ln_gamma(nf + ab + 1.0);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &g in &guesses {
        let mut z = g.clamp(-1.0 + 1e-300, 1.0 - 1e-300);
        let mut pp = 0.0;
        let mut p2 = 0.0;
        let mut temp = 0.0;
        for _ in 0..20 {
            let (p1, q2, t, d) = jacobi_eval(n, a, b, z);
            p2 = q2;
            temp = t;
            pp = d;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1e-3) {
                break;
            }
        }
        // refresh derivative at the polished node
        let (_, q2, t, d) = jacobi_eval(n, a, b, z);
        p2 = if q2.is_finite() { q2 } else { p2 };
        pp = if d.is_finite() { d } else { pp };
        temp = if t.is_finite() { t } else { temp };
        nodes.push(z);
        weights.push(log_norm.exp() * temp * 2f64.powf(ab) / (pp * p2));
    }
    Rule { nodes, weights }
}

/// Returns `(P_n, P_{n-1}, 2n+a+b, P_n')` in the normalisation used by the
/// weight formula above.
fn jacobi_eval(n: usize, a: f64, b: f64, z: f64) -> (f64, f64, f64, f64) {
    let ab = a + b;
    let mut temp = 2.0 + ab;
    let mut p1 = (a - b + temp * z) / 2.0;
    let mut p2 = 1.0;
    for j in 2..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        temp = 2.0 * jf + ab;
        let aa = 2.0 * jf * (jf + ab) * (temp - 2.0);
        let bb = (temp - 1.0) * (a * a - b * b + temp * (temp - 2.0) * z);
        let cc = 2.0 * (jf - 1.0 + a) * (jf - 1.0 + b) * temp;
        p1 = (bb * p2 - cc * p3) / aa;
    }
    let nf = n as f64;
    if n == 1 {
        temp = 2.0 + ab;
    }
    let pp = (nf * (a - b - temp * z) * p1 + 2.0 * (nf + a) * (nf + b) * p2) / (temp * (1.0 - z * z));
    (p1, p2, temp, pp)
}

/// Applies a `[-1,1]` rule to `f` on `[lo, hi]` with an affine map. The
/// Jacobi weight is not rescaled; callers account for the `((hi-lo)/2)^{a+b}`
/// factor themselves.
pub fn apply_rule(rule: &Rule, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod15(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (1.0f64).min((200.0 * error / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { lo, hi, value, error }
}

/// Tolerances for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, max_segments: 2000 }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration of `f` on the
/// union of the intervals between consecutive `breaks`.
pub fn adaptive_breaks(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    assert!(breaks.len() >= 2);
    let mut segs: Vec<Segment> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod15(&mut f, w[0], w[1]))
        .collect();
    if segs.is_empty() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::NonConvergence { what: "adaptive quadrature", estimate: f64::INFINITY });
        }
        if error <= tol.target(value) {
            return Ok(Estimate { value, error });
        }
        if segs.len() >= tol.max_segments {
            return Err(Error::NonConvergence { what: "adaptive quadrature", estimate: error });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.partial_cmp(&b.1.error).unwrap())
            .unwrap();
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        if mid <= s.lo || mid >= s.hi {
            // interval can no longer be split in floating point
            return if error <= 10.0 * tol.target(value) {
                Ok(Estimate { value, error })
            } else {
                Err(Error::NonConvergence { what: "adaptive quadrature", estimate: error })
            };
        }
        segs.push(kronrod15(&mut f, s.lo, mid));
        segs.push(kronrod15(&mut f, mid, s.hi));
    }
}

pub fn adaptive(f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: Tolerance) -> Result<Estimate> {
    adaptive_breaks(f, &[lo, hi], tol)
}

/// Integrates a decaying `f` over `[lo, ∞)` on successive blocks of growing
/// width, stopping once two consecutive blocks contribute below tolerance.
pub fn half_line(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    first_width: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let mut total = 0.0;
    let mut err = 0.0;
    let mut a = lo;
    let mut width = first_width;
    let mut quiet = 0;
    for _ in 0..200 {
        let block = adaptive(&mut f, a, a + width, Tolerance { rel: tol.rel, abs: tol.abs * 0.1, ..tol })?;
        total += block.value;
        err += block.error;
        if block.value.abs() <= tol.target(total) * 1e-2 {
            quiet += 1;
            if quiet >= 2 {
                return Ok(Estimate { value: total, error: err + block.value.abs() });
            }
        } else {
            quiet = 0;
        }
        a += width;
        width *= 2.0;
        if !a.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence { what: "half-line quadrature", estimate: f64::INFINITY })
}

/// Tanh–sinh (double exponential) quadrature on `[lo, hi]`. The integrand
/// receives `(x, x - lo, hi - x)` with both distances computed without
/// cancellation, so algebraic endpoint singularities are handled.
pub fn tanh_sinh(f: impl FnMut(f64, f64, f64) -> f64, lo: f64, hi: f64, tol: Tolerance) -> Result<Estimate> {
    let (est, converged) = tanh_sinh_best(f, lo, hi, tol);
    if converged {
        Ok(est)
    } else {
        Err(Error::NonConvergence { what: "tanh-sinh quadrature", estimate: est.error })
    }
}

/// As [`tanh_sinh`], but returns the last estimate and whether it met the
/// tolerance instead of failing.
pub fn tanh_sinh_best(
    mut f: impl FnMut(f64, f64, f64) -> f64,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> (Estimate, bool) {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (hi - lo);
    const T_MAX: f64 = 6.0;
    let mut eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let da = half * 2.0 / (1.0 + (-2.0 * u).exp());
        let db = half * 2.0 / (1.0 + (2.0 * u).exp());
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let x = if da <= db { lo + da } else { hi - db };
        let v = f(x, da, db);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut prev_diff = f64::INFINITY;
    for _level in 1..=10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        let target = tol.target(estimate);
        // double-exponential convergence: the next error is roughly diff²/prev_diff
        let projected = if prev_diff.is_finite() && prev_diff > 0.0 { diff * diff / prev_diff } else { diff };
        if diff <= target || (projected <= target * 0.1 && diff <= 1e3 * target) {
            return (Estimate { value: estimate, error: diff.max(projected) }, true);
        }
        prev_diff = diff;
    }
    (Estimate { value: estimate, error: prev_diff }, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        // ∫_{-1}^{1} x^18 dx = 2/19
        let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(18)).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_weights_sum_to_beta_integral() {
        for &(a, b) in &[(-0.5, -0.5), (-0.9, 0.0), (0.3, -0.7), (1.5, 2.0), (-0.5, 0.5)] {
            for n in [1usize, 2, 7, 30, 64] {
                let rule = gauss_jacobi(n, a, b);
                let sum: f64 = rule.weights.iter().sum();
                let expect = 2f64.powf(a + b + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(a + b + 2.0);
                assert!((sum - expect).abs() < 5e-11 * expect, "n={n} a={a} b={b}: {sum} vs {expect}");
                assert!(rule.nodes.iter().all(|x| x.abs() < 1.0));
            }
        }
    }

    #[test]
    fn jacobi_first_moment() {
        // ∫ x (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1,b+1) (b-a)/(a+b+2)
        let (a, b) = (-0.6, 0.25);
        let rule = gauss_jacobi(12, a, b);
        let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x).sum();
        let base = 2f64.powf(a + b + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(a + b + 2.0);
        let expect = base * (b - a) / (a + b + 2.0);
        assert!((v - expect).abs() < 1e-12 * expect.abs(), "{v} vs {expect}");
    }

    #[test]
    fn adaptive_handles_peaks() {
        let est = adaptive(|x| (-(x - 0.3f64).powi(2) * 1e4).exp(), 0.0, 1.0, Tolerance::new(0.0, 1e-12)).unwrap();
        let expect = std::f64::consts::PI.sqrt() / 100.0;
        assert!((est.value - expect).abs() < 1e-13);
    }

    #[test]
    fn half_line_gaussian() {
        let est = half_line(|x| (-x * x).exp(), 0.0, 1.0, Tolerance::new(0.0, 1e-12)).unwrap();
        assert!((est.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        // ∫_0^1 x^{-0.9} (1-x)^{-0.5} dx = B(0.1, 0.5)
        let est = tanh_sinh(|_, da, db| da.powf(-0.9) * db.powf(-0.5), 0.0, 1.0, Tolerance::new(0.0, 1e-12)).unwrap();
        let expect = gamma(0.1) * gamma(0.5) / gamma(0.6);
        assert!((est.value - expect).abs() < 1e-10 * expect, "{} vs {expect}", est.value);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let tol = Tolerance { abs: 0.0, rel: 1e-14, max_segments: 4 };
        let r = adaptive(|x| (1.0 / x).sin(), 1e-6, 1.0, tol);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}

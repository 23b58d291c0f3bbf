//! Gamma-family helpers shared by the series, moment and kernel-weight code.

use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln |Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// `sin(πx)`, exactly zero at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    // reduce to r in [-1, 1) with sin(πx) = ±sin(πr)
    let r = x - 2.0 * (x / 2.0).round();
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    if r == 0.5 {
        return 1.0;
    }
    if r == -0.5 {
        return -1.0;
    }
    (PI * r).sin()
}

/// `1/Γ(x)`, an entire function: zero at the poles `x = 0, -1, -2, …`.
pub fn recip_gamma(x: f64) -> f64 {
    if x > 0.0 {
        if x > 171.0 {
            return (-ln_gamma(x)).exp();
        }
        return 1.0 / gamma(x);
    }
    if x == x.floor() {
        return 0.0;
    }
    // reflection: 1/Γ(x) = Γ(1-x) sin(πx) / π
    let s = sin_pi(x);
    let one_minus = 1.0 - x;
    if one_minus < 171.0 {
        gamma(one_minus) * s / PI
    } else {
        s.signum() * (ln_gamma(one_minus) + s.abs().ln() - PI.ln()).exp()
    }
}

/// `Γ(a)/Γ(b)` without intermediate overflow.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 && a < 170.0 && b < 170.0 {
        return gamma(a) / gamma(b);
    }
    let (la, sa) = libm::lgamma_r(a);
    let (lb, sb) = libm::lgamma_r(b);
    f64::from(sa * sb) * (la - lb).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_pi_is_exact_on_lattice() {
        for k in -20..20 {
            assert_eq!(sin_pi(k as f64), 0.0);
        }
        assert_eq!(sin_pi(0.5), 1.0);
        assert_eq!(sin_pi(-2.5), -1.0);
        assert!((sin_pi(0.25) - (PI / 4.0).sin()).abs() < 1e-16);
    }

    #[test]
    fn recip_gamma_poles_and_reflection() {
        for k in 0..30 {
            assert_eq!(recip_gamma(-(k as f64)), 0.0);
        }
        // Γ(-1/2) = -2√π
        let expect = -1.0 / (2.0 * PI.sqrt());
        assert!((recip_gamma(-0.5) - expect).abs() < 1e-15 * expect.abs());
        assert!((recip_gamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-16);
        // large negative argument goes through logs and stays finite
        assert!(recip_gamma(-170.5).is_finite() && recip_gamma(-170.5) != 0.0);
        assert_eq!(recip_gamma(200.0), (-ln_gamma(200.0)).exp());
    }

    #[test]
    fn gamma_ratio_matches_direct() {
        let r = gamma_ratio(5.0, 5.3);
        assert!((r - gamma(5.0) / gamma(5.3)).abs() < 1e-15);
        let big = gamma_ratio(300.5, 300.0);
        assert!((big - 300f64.sqrt()).abs() / 300f64.sqrt() < 1e-3);
    }
}

//! Log-gamma and digamma on the positive real axis.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_405_617_64;

/// Arguments below this are shifted up by the recurrence before the
/// Stirling series is applied.
const STIRLING_MIN: f64 = 10.0;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x >= STIRLING_MIN {
        return stirling(x);
    }
    // lnΓ(x) = lnΓ(x+n) - ln(x (x+1) ... (x+n-1))
    let mut z = x;
    let mut prod = 1.0;
    while z < STIRLING_MIN {
        prod *= z;
        z += 1.0;
    }
    stirling(z) - prod.ln()
}

fn stirling(z: f64) -> f64 {
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_series(z)
}

/// Bernoulli terms B_{2k} / (2k (2k-1) z^{2k-1}), k = 1..7.
fn stirling_series(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0
                + r2 * (-1.0 / 1680.0
                    + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 / 156.0))))))
}

/// lnΓ(x + b) - lnΓ(x + c) for x + b > 0 and x + c > 0, without the
/// cancellation of subtracting two large log-gammas.
pub(crate) fn ln_gamma_ratio(x: f64, b: f64, c: f64) -> f64 {
    let (z1, z2) = (x + b, x + c);
    if z1 < STIRLING_MIN || z2 < STIRLING_MIN || x <= 0.0 {
        return ln_gamma_pos(z1) - ln_gamma_pos(z2);
    }
    // (z - ½) ln z - z with ln z = ln x + ln1p(·/x)
    let l1 = (b / x).ln_1p();
    let l2 = (c / x).ln_1p();
    (b - c) * x.ln() + x * (l1 - l2) + (b - 0.5) * l1 - (c - 0.5) * l2 - (b - c)
        + stirling_series(z1)
        - stirling_series(z2)
}

/// Sign and log-magnitude of Γ(x) for any real `x` that is not a
/// non-positive integer.
pub fn ln_gamma_signed(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gamma of non-finite argument {x}")));
    }
    if x > 0.0 {
        return Ok((1.0, ln_gamma_pos(x)));
    }
    if x == x.round() {
        return Err(Error::domain(format!("gamma has a pole at {x}")));
    }
    // Reflection: Γ(x) Γ(1-x) = π / sin(πx)
    let s = sin_pi(x);
    let ln_abs = PI.ln() - s.abs().ln() - ln_gamma_pos(1.0 - x);
    Ok((s.signum(), ln_abs))
}

/// sin(πx) with argument reduction so that integers map to exact zeros.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).floor(); // r in [0, 2)
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r < 0.5 {
        (PI * r).sin()
    } else if r < 1.5 {
        (PI * (1.0 - r)).sin()
    } else {
        (PI * (r - 2.0)).sin()
    }
}

/// cot(πx), computed from reduced sine and cosine.
pub(crate) fn cot_pi(x: f64) -> f64 {
    let s = sin_pi(x);
    let c = sin_pi(x + 0.5);
    c / s
}

/// The digamma function ψ(x) = Γ'(x)/Γ(x) for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    Ok(digamma_pos(x))
}

pub(crate) fn digamma_pos(x: f64) -> f64 {
    let mut z = x;
    let mut shift = 0.0;
    while z < 8.0 {
        shift += 1.0 / z;
        z += 1.0;
    }
    let r2 = 1.0 / (z * z);
    let tail = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0
                        - r2 * (1.0 / 132.0 - r2 * (691.0 / 32_760.0 - r2 / 12.0))))));
    z.ln() - 0.5 / z - tail - shift
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_at_one_and_two_vanishes() {
        assert!(ln_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_half_is_ln_sqrt_pi() {
        assert_relative_eq!(ln_gamma(0.5).unwrap(), 0.5 * PI.ln(), max_relative = 1e-13);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for n in 2..30 {
            fact *= n as f64;
            assert_relative_eq!(
                ln_gamma(n as f64 + 1.0).unwrap(),
                fact.ln(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn ln_gamma_ratio_matches_direct_difference() {
        for &x in &[0.5, 12.0, 1e3, 1e6] {
            for &(b, c) in &[(0.5, 1.0), (-0.25, 2.5), (1.0, 1.0)] {
                let direct = ln_gamma_pos(x + b) - ln_gamma_pos(x + c);
                let tol = 1e-14 * ln_gamma_pos(x + 3.0).abs().max(1.0);
                assert!((ln_gamma_ratio(x, b, c) - direct).abs() < tol, "x={x} b={b} c={c}");
            }
        }
        // asymptotically (b - c) ln x
        let x = 1e200;
        assert!((ln_gamma_ratio(x, 1.5, 0.5) - x.ln()).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_rejects_nonpositive() {
        assert!(matches!(ln_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(ln_gamma(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn signed_gamma_negative_arguments() {
        // Γ(-0.5) = -2√π
        let (s, l) = ln_gamma_signed(-0.5).unwrap();
        assert_eq!(s, -1.0);
        assert_relative_eq!(l, (2.0 * PI.sqrt()).ln(), max_relative = 1e-14);
        // Γ(-1.5) = 4√π/3
        let (s, l) = ln_gamma_signed(-1.5).unwrap();
        assert_eq!(s, 1.0);
        assert_relative_eq!(l, (4.0 * PI.sqrt() / 3.0).ln(), max_relative = 1e-14);
        assert!(ln_gamma_signed(-2.0).is_err());
    }

    #[test]
    fn digamma_at_one_is_minus_euler_gamma() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-14);
    }

    #[test]
    fn digamma_at_half() {
        // ψ(½) = -γ - 2 ln 2
        let expected = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        assert!((digamma(0.5).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn digamma_recurrence_over_wide_range() {
        let mut x = 1e-3;
        while x < 1e3 {
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "x = {x}");
            x *= 1.7;
        }
    }

    #[test]
    fn digamma_matches_ln_gamma_derivative() {
        for &x in &[0.3, 1.7, 4.2, 12.5, 150.0] {
            let h = 1e-5 * x;
            let fd = (ln_gamma(x + h).unwrap() - ln_gamma(x - h).unwrap()) / (2.0 * h);
            assert!((fd - digamma(x).unwrap()).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn cot_pi_reduces_exactly() {
        assert_eq!(cot_pi(0.5), 0.0);
        assert!(cot_pi(1.0).is_infinite());
        assert_relative_eq!(cot_pi(0.25), 1.0, max_relative = 1e-15);
        assert_relative_eq!(cot_pi(0.6), (0.6 * PI).cos() / (0.6 * PI).sin(), max_relative = 1e-13);
    }
}

//! Hypergeometric series needed by the closed-form integrals.

use crate::error::{Error, Result};
use crate::specfun::gamma::{digamma_pos, ln_gamma_ratio};
use crate::specfun::quad::{quad_improper, Endpoint, Endpoints, QuadOptions};

/// Series evaluation limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub max_terms: usize,
    /// Target relative accuracy of the summed value.
    pub rel_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            max_terms: 1_000_000,
            rel_tol: 1e-13,
        }
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// Gauss hypergeometric ₂F₁(a, b; c; -1).
///
/// Evaluated through the Pfaff transformation
/// ₂F₁(a, b; c; -1) = 2^{-a} ₂F₁(a, c-b; c; ½), whose series converges
/// geometrically.
pub fn gauss_2f1_neg1(a: f64, b: f64, c: f64) -> Result<f64> {
    gauss_2f1_neg1_with(a, b, c, &SeriesOptions::default())
}

pub fn gauss_2f1_neg1_with(a: f64, b: f64, c: f64, opts: &SeriesOptions) -> Result<f64> {
    if !(c > 0.0) || !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(Error::domain(format!(
            "2F1(a, b; c; -1) needs finite parameters and c > 0, got ({a}, {b}, {c})"
        )));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    let bb = c - b;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..opts.max_terms {
        let nf = n as f64;
        term *= (a + nf) * (bb + nf) / ((c + nf) * (nf + 1.0)) * 0.5;
        sum += term;
        if term == 0.0 {
            break;
        }
        // Once the term ratio is below 3/4 the remainder is at most 3|term|.
        let ratio = ((a + nf + 1.0) * (bb + nf + 1.0) / ((c + nf + 1.0) * (nf + 2.0))).abs() * 0.5;
        if ratio < 0.75 && 3.0 * term.abs() <= opts.rel_tol * sum.abs() {
            return Ok(sum * (-a * std::f64::consts::LN_2).exp());
        }
    }
    Err(Error::numeric(
        "2F1 series did not converge",
        sum * (-a * std::f64::consts::LN_2).exp(),
        f64::NAN,
    ))
}

/// Compensated (Neumaier) summation; long series of small terms added to
/// an O(1) sum otherwise drift by many ulps.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Generalized hypergeometric ₄F₃(b₁..b₄; c₁..c₃; 1).
///
/// Convergent only when Σc - Σb > 0; the terms then decay like
/// n^{-(1+s)} with s = Σc - Σb. The partial sum is extended by an
/// Euler–Maclaurin estimate of the remainder built on the continuous
/// gamma-ratio form of the terms.
pub fn hyper_4f3_unit(b: [f64; 4], c: [f64; 3]) -> Result<f64> {
    hyper_4f3_unit_with(b, c, &SeriesOptions::default())
}

pub fn hyper_4f3_unit_with(b: [f64; 4], c: [f64; 3], opts: &SeriesOptions) -> Result<f64> {
    if b.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("4F3 parameters must be finite"));
    }
    if b.contains(&0.0) {
        return Ok(1.0);
    }
    if let Some(&bad) = c.iter().find(|&&v| is_nonpositive_integer(v)) {
        return Err(Error::domain(format!("4F3 lower parameter {bad} is a pole")));
    }
    let s = c.iter().sum::<f64>() - b.iter().sum::<f64>();
    let terminating = b.iter().any(|&v| is_nonpositive_integer(v));
    if !(s > 0.0) && !terminating {
        return Err(Error::domain(format!(
            "4F3 at unit argument diverges: sum(c) - sum(b) = {s} <= 0"
        )));
    }
    // The continuous tail form needs every shifted parameter positive.
    let min_shift = b
        .iter()
        .chain(c.iter())
        .fold(0.0_f64, |m, &v| m.max(-v))
        .ceil() as usize;
    let ratio = |n: f64| -> f64 {
        (n + b[0]) * (n + b[1]) * (n + b[2]) * (n + b[3])
            / ((n + c[0]) * (n + c[1]) * (n + c[2]) * (n + 1.0))
    };
    let mut term = 1.0;
    let mut acc = Neumaier::default();
    let mut n = 0usize;
    while n < opts.max_terms {
        acc.add(term);
        let sum = acc.value();
        let next = term * ratio(n as f64);
        n += 1;
        term = next;
        if term == 0.0 {
            return Ok(sum);
        }
        if terminating {
            continue;
        }
        // Crude remainder size ~ |t_n| n / s, valid once terms are monotone.
        if n > min_shift + 10 && term.abs() * (n as f64) / s <= 1e-3 * opts.rel_tol * sum.abs() {
            return Ok(sum + term);
        }
    }
    let sum = acc.value();
    if terminating {
        return Ok(sum);
    }
    // Remainder Σ_{m ≥ n} t_m with the continuous interpolant
    // t(x) = t_n Π Γ(x+b_j)/Γ(n+b_j) / (Π Γ(x+c_j)/Γ(n+c_j) · Γ(x+1)/Γ(n+1)).
    let n0 = n as f64;
    if n0 <= min_shift as f64 {
        return Err(Error::numeric("4F3 series too short for tail estimate", sum, f64::NAN));
    }
    let pairs = [(b[0], c[0]), (b[1], c[1]), (b[2], c[2]), (b[3], 1.0)];
    let ln_at = |x: f64| -> f64 {
        pairs
            .iter()
            .map(|&(bj, cj)| ln_gamma_ratio(x, bj, cj) - ln_gamma_ratio(n0, bj, cj))
            .sum()
    };
    let t_n = term;
    let tail_fn = |x: f64| t_n * ln_at(x).exp();
    let log_deriv = {
        let mut d = 0.0;
        for &bj in &b {
            d += digamma_pos(n0 + bj);
        }
        for &cj in &c {
            d -= digamma_pos(n0 + cj);
        }
        d - digamma_pos(n0 + 1.0)
    };
    let integral = quad_improper(
        tail_fn,
        n0,
        f64::INFINITY,
        Endpoints::new(Endpoint::Regular, Endpoint::Decay(s)),
        &QuadOptions::precise().with_abs_tol(1e-12 * sum.abs().max(1e-300)),
    )?;
    // Σ_{m≥n} f(m) = ∫_n^∞ f + f(n)/2 - f'(n)/12 + ...
    let tail = integral.value + 0.5 * t_n - t_n * log_deriv / 12.0;
    let em_bound = t_n.abs() * (1.0 + s) * (2.0 + s) * (3.0 + s) / (720.0 * n0.powi(3));
    let bound = em_bound + integral.abs_error_estimate;
    let total = sum + tail;
    if bound > 1e-10 * total.abs() {
        return Err(Error::numeric(
            "4F3 tail bound exceeds tolerance",
            total,
            bound,
        ));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma::ln_gamma;
    use approx::assert_relative_eq;

    /// Euler integral Γ(c)/(Γ(b)Γ(c-b)) ∫₀¹ t^{b-1}(1-t)^{c-b-1}(1+t)^{-a} dt.
    fn euler_oracle(a: f64, b: f64, c: f64) -> f64 {
        let pre = (ln_gamma(c).unwrap() - ln_gamma(b).unwrap() - ln_gamma(c - b).unwrap()).exp();
        let r = quad_improper(
            |t: f64| t.powf(b - 1.0) * (1.0 - t).powf(c - b - 1.0) * (1.0 + t).powf(-a),
            0.0,
            1.0,
            Endpoints::new(Endpoint::Power(b - 1.0), Endpoint::Power(c - b - 1.0)),
            &QuadOptions::precise(),
        )
        .unwrap();
        pre * r.value
    }

    #[test]
    fn trivial_parameters() {
        assert_eq!(gauss_2f1_neg1(0.0, 3.0, 2.0).unwrap(), 1.0);
        assert_eq!(gauss_2f1_neg1(3.0, 0.0, 2.0).unwrap(), 1.0);
        assert_eq!(hyper_4f3_unit([1.0, 0.0, 2.0, 3.0], [4.0, 5.0, 6.0]).unwrap(), 1.0);
    }

    #[test]
    fn gauss_matches_euler_integral() {
        let v = gauss_2f1_neg1(-0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(v, euler_oracle(-0.5, 1.0, 2.0), max_relative = 1e-8);
        assert_relative_eq!(v, (2f64.powf(1.5) - 1.0) / 1.5, max_relative = 1e-12);
        for &(a, b, c) in &[(0.3, 0.7, 1.7), (-1.2, 0.4, 1.4), (2.5, 1.5, 3.0), (-0.4, 0.9, 1.9)] {
            assert_relative_eq!(
                gauss_2f1_neg1(a, b, c).unwrap(),
                euler_oracle(a, b, c),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn gauss_rejects_nonpositive_c() {
        assert!(gauss_2f1_neg1(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn four_f_three_divergent_rejected() {
        assert!(matches!(
            hyper_4f3_unit([1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn four_f_three_reduces_to_zeta() {
        // ₄F₃(1,1,1,1; 2,2,2; 1) = Σ 1/(n+1)^3 = ζ(3)
        let v = hyper_4f3_unit([1.0, 1.0, 1.0, 1.0], [2.0, 2.0, 2.0]).unwrap();
        assert_relative_eq!(v, 1.202_056_903_159_594_3, max_relative = 1e-12);
    }

    #[test]
    fn four_f_three_slow_convergence_matches_gauss_sum() {
        // With b₃ = c₂ and b₄ = c₃ the series collapses to ₂F₁(a, b; c; 1),
        // known in closed form; s = c - a - b = 0.2 makes convergence slow.
        let (a, b, c) = (0.5, 0.7, 1.4);
        let v = hyper_4f3_unit([a, b, 2.5, 3.5], [c, 2.5, 3.5]).unwrap();
        let gauss = (ln_gamma(c).unwrap() + ln_gamma(c - a - b).unwrap()
            - ln_gamma(c - a).unwrap()
            - ln_gamma(c - b).unwrap())
        .exp();
        assert_relative_eq!(v, gauss, max_relative = 1e-10);
    }
}

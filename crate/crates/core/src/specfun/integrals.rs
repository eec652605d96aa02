//! The i- and j-integrals that make up the drift expansions, in closed form
//! and by quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::gamma::{digamma_pos, ln_gamma_pos, ln_gamma_signed, EULER_GAMMA};
use crate::specfun::hyper::{gauss_2f1_neg1, hyper_4f3_unit};
use crate::specfun::quad::{quad_improper, quad_segments, Endpoint, Endpoints, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IKind {
    I0,
    I20,
    I21,
    I1,
    I1Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JKind {
    J0,
    J1,
    J2,
    J1Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralFamilyParams {
    pub nu: f64,
    pub alpha: f64,
}

impl IntegralFamilyParams {
    pub fn new(nu: f64, alpha: f64) -> Self {
        Self { nu, alpha }
    }
}

impl IKind {
    pub const ALL: [IKind; 5] = [IKind::I0, IKind::I20, IKind::I21, IKind::I1, IKind::I1Tilde];

    pub fn name(self) -> &'static str {
        match self {
            IKind::I0 => "i0",
            IKind::I20 => "i20",
            IKind::I21 => "i21",
            IKind::I1 => "i1",
            IKind::I1Tilde => "i1_tilde",
        }
    }

    /// Check the open parameter domain of this integral.
    pub fn check_domain(self, p: IntegralFamilyParams) -> Result<()> {
        let IntegralFamilyParams { nu, alpha } = p;
        if !nu.is_finite() || !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "{}: need finite nu and alpha > 0, got nu = {nu}, alpha = {alpha}",
                self.name()
            )));
        }
        let ok = match self {
            IKind::I0 | IKind::I21 => nu > -1.0 && nu < alpha,
            IKind::I20 => true,
            IKind::I1 => alpha < 2.0 && nu > -1.0,
            IKind::I1Tilde => alpha < 1.0 && nu > -1.0,
        };
        if ok {
            Ok(())
        } else {
            let req = match self {
                IKind::I0 | IKind::I21 => "-1 < nu < alpha",
                IKind::I20 => "alpha > 0",
                IKind::I1 => "0 < alpha < 2 and nu > -1",
                IKind::I1Tilde => "0 < alpha < 1 and nu > -1",
            };
            Err(Error::domain(format!(
                "{} requires {req}, got nu = {nu}, alpha = {alpha}",
                self.name()
            )))
        }
    }
}

impl JKind {
    pub const ALL: [JKind; 4] = [JKind::J0, JKind::J1, JKind::J2, JKind::J1Tilde];

    pub fn name(self) -> &'static str {
        match self {
            JKind::J0 => "j0",
            JKind::J1 => "j1",
            JKind::J2 => "j2",
            JKind::J1Tilde => "j1_tilde",
        }
    }

    pub fn check_domain(self, alpha: f64) -> Result<()> {
        let ok = alpha > 0.0
            && alpha.is_finite()
            && match self {
                JKind::J0 | JKind::J2 => true,
                JKind::J1 => alpha < 2.0,
                JKind::J1Tilde => alpha < 1.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{} is not defined at alpha = {alpha}",
                self.name()
            )))
        }
    }
}

/// (1 + t)^ν - 1 without cancellation for small t.
pub(crate) fn pow1p_m1(nu: f64, t: f64) -> f64 {
    (nu * t.ln_1p()).exp_m1()
}

/// (1 + t)^ν + (1 - t)^ν - 2 for 0 ≤ t ≤ 1, accurate for small t.
pub(crate) fn sym_second_diff(nu: f64, t: f64) -> f64 {
    if t < 0.1 {
        // 2 Σ_{k≥1} C(ν, 2k) t^{2k}
        let t2 = t * t;
        let mut binom = nu * (nu - 1.0) / 2.0;
        let mut pow = t2;
        let mut sum = 0.0;
        let mut m = 2.0;
        for _ in 0..60 {
            let term = binom * pow;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            binom *= (nu - m) * (nu - m - 1.0) / ((m + 1.0) * (m + 2.0));
            pow *= t2;
            m += 2.0;
        }
        2.0 * sum
    } else {
        pow1p_m1(nu, t) + pow1p_m1(nu, -t)
    }
}

/// ((1 + t)^ν + (1 - t)^ν - 2) / t², finite as t → 0.
pub(crate) fn sym_second_diff_over_sq(nu: f64, t: f64) -> f64 {
    if t < 1e-4 {
        let c1 = nu * (nu - 1.0);
        let c2 = c1 * (nu - 2.0) * (nu - 3.0) / 12.0;
        c1 + c2 * t * t
    } else {
        sym_second_diff(nu, t) / (t * t)
    }
}

/// ((1 + t)^ν - 1) / t, finite as t → 0.
pub(crate) fn pow1p_m1_over(nu: f64, t: f64) -> f64 {
    if t.abs() < 1e-8 {
        nu + 0.5 * nu * (nu - 1.0) * t
    } else {
        pow1p_m1(nu, t) / t
    }
}

/// ln(1 + t) / t, finite as t → 0.
fn ln1p_over(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - 0.5 * t
    } else {
        t.ln_1p() / t
    }
}

/// Evaluate an i-integral.
pub fn i_integral(kind: IKind, p: IntegralFamilyParams, method: Method) -> Result<f64> {
    kind.check_domain(p)?;
    match method {
        Method::ClosedForm => i_closed(kind, p),
        Method::Quadrature => i_quad(kind, p, &QuadOptions::precise()),
    }
}

/// Evaluate a j-integral.
pub fn j_integral(kind: JKind, alpha: f64, method: Method) -> Result<f64> {
    kind.check_domain(alpha)?;
    match method {
        Method::ClosedForm => Ok(j_closed(kind, alpha)),
        Method::Quadrature => j_quad(kind, alpha, &QuadOptions::precise()),
    }
}

fn gamma_ratio_signed(num: &[f64], den: &[f64]) -> Result<f64> {
    let mut sign = 1.0;
    let mut l = 0.0;
    for &x in num {
        let (s, v) = ln_gamma_signed(x)?;
        sign *= s;
        l += v;
    }
    for &x in den {
        // 1/Γ vanishes at the poles.
        if x <= 0.0 && x == x.round() {
            return Ok(0.0);
        }
        let (s, v) = ln_gamma_signed(x)?;
        sign *= s;
        l -= v;
    }
    Ok(sign * l.exp())
}

fn i_closed(kind: IKind, p: IntegralFamilyParams) -> Result<f64> {
    let IntegralFamilyParams { nu, alpha } = p;
    Ok(match kind {
        IKind::I0 => {
            let d = alpha - nu;
            gauss_2f1_neg1(-nu, d, d + 1.0)? / d - 1.0 / alpha
        }
        IKind::I20 => 1.0 / alpha,
        IKind::I21 => {
            (ln_gamma_pos(1.0 + nu) + ln_gamma_pos(alpha - nu) - ln_gamma_pos(1.0 + alpha)).exp()
        }
        IKind::I1 => {
            let pre = nu * (nu - 1.0) / (2.0 - alpha);
            if pre == 0.0 {
                0.0
            } else {
                let f = hyper_4f3_unit(
                    [1.0, 1.0 - nu / 2.0, 1.0 - alpha / 2.0, (3.0 - nu) / 2.0],
                    [2.0, 1.5, 2.0 - alpha / 2.0],
                )?;
                pre * f
            }
        }
        IKind::I1Tilde => {
            let r = gamma_ratio_signed(&[1.0 + nu, 1.0 - alpha], &[1.0 - alpha + nu])?;
            (1.0 - r) / alpha
        }
    })
}

fn j_closed(kind: JKind, alpha: f64) -> f64 {
    match kind {
        JKind::J0 => (digamma_pos(alpha) - digamma_pos(alpha / 2.0)) / alpha,
        JKind::J1 => (EULER_GAMMA + digamma_pos(1.0 - alpha / 2.0)) / alpha,
        JKind::J2 => -(EULER_GAMMA + digamma_pos(alpha)) / alpha,
        JKind::J1Tilde => (EULER_GAMMA + digamma_pos(1.0 - alpha)) / alpha,
    }
}

fn pw(b: f64) -> Endpoint {
    if b < 0.0 {
        Endpoint::Power(b)
    } else {
        Endpoint::Regular
    }
}

/// Quadrature for ∫₀¹ split at ½, with the right half reflected so that
/// both singular endpoints sit at zero. `near0(u)` and `near1(s)` are the
/// integrand in terms of u and of s = 1 - u.
fn unit_split<F, G>(
    near0: F,
    e0: Endpoint,
    near1: G,
    e1: Endpoint,
    opts: &QuadOptions,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let a = quad_improper(near0, 0.0, 0.5, Endpoints::new(e0, Endpoint::Regular), opts)?;
    let b = quad_improper(near1, 0.0, 0.5, Endpoints::new(e1, Endpoint::Regular), opts)?;
    Ok(a.combine(b).value)
}

pub(crate) fn i_quad(kind: IKind, p: IntegralFamilyParams, opts: &QuadOptions) -> Result<f64> {
    let IntegralFamilyParams { nu, alpha } = p;
    let m1a = -1.0 - alpha;
    match kind {
        IKind::I0 => Ok(quad_improper(
            |u: f64| {
                if u < 1e8 {
                    pow1p_m1(nu, u) * u.powf(m1a)
                } else {
                    // log space keeps (1+u)^ν from overflowing
                    let lu = u.ln();
                    (nu * u.ln_1p() + m1a * lu).exp() - (m1a * lu).exp()
                }
            },
            1.0,
            f64::INFINITY,
            Endpoints::new(Endpoint::Regular, Endpoint::Decay(alpha - nu.max(0.0))),
            opts,
        )?
        .value),
        IKind::I20 => Ok(quad_improper(
            |u: f64| u.powf(m1a),
            1.0,
            f64::INFINITY,
            Endpoints::new(Endpoint::Regular, Endpoint::Decay(alpha)),
            opts,
        )?
        .value),
        // u = 1 + w
        IKind::I21 => Ok(quad_segments(
            |w: f64| (nu * w.ln() + m1a * w.ln_1p()).exp(),
            &[0.0, 1.0, f64::INFINITY],
            Endpoints::new(pw(nu), Endpoint::Decay(alpha - nu)),
            opts,
        )?
        .value),
        IKind::I1 => unit_split(
            |u: f64| sym_second_diff_over_sq(nu, u) * u.powf(1.0 - alpha),
            Endpoint::Power(1.0 - alpha),
            |s: f64| ((2.0 - s).powf(nu) + s.powf(nu) - 2.0) * (1.0 - s).powf(m1a),
            pw(nu),
            opts,
        ),
        IKind::I1Tilde => unit_split(
            |u: f64| -pow1p_m1_over(nu, -u) * u.powf(-alpha),
            Endpoint::Power(-alpha),
            |s: f64| (s.powf(nu) - 1.0) * (1.0 - s).powf(m1a),
            pw(nu),
            opts,
        ),
    }
}

pub(crate) fn j_quad(kind: JKind, alpha: f64, opts: &QuadOptions) -> Result<f64> {
    let m1a = -1.0 - alpha;
    match kind {
        JKind::J0 => Ok(quad_improper(
            |u: f64| u.ln_1p() * u.powf(m1a),
            1.0,
            f64::INFINITY,
            Endpoints::new(Endpoint::Regular, Endpoint::Decay(alpha)),
            opts,
        )?
        .value),
        // u = 1 + w
        JKind::J2 => Ok(quad_segments(
            |w: f64| w.ln() * (1.0 + w).powf(m1a),
            &[0.0, 1.0, f64::INFINITY],
            Endpoints::new(Endpoint::Log, Endpoint::Decay(alpha)),
            opts,
        )?
        .value),
        JKind::J1 => unit_split(
            |u: f64| -ln1p_over(-u * u) * u.powf(1.0 - alpha),
            Endpoint::Power(1.0 - alpha),
            |s: f64| (s * (2.0 - s)).ln() * (1.0 - s).powf(m1a),
            Endpoint::Log,
            opts,
        ),
        JKind::J1Tilde => unit_split(
            |u: f64| -ln1p_over(-u) * u.powf(-alpha),
            Endpoint::Power(-alpha),
            |s: f64| s.ln() * (1.0 - s).powf(m1a),
            Endpoint::Log,
            opts,
        ),
    }
}

/// Relative disagreement |a - b| / max(|a|, |b|); zero when both are below
/// `1e-12` in magnitude.
pub fn relative_disagreement(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

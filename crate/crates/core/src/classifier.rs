//! Recurrence/transience classification by the cotangent criterion and
//! moment-exponent predictions for return times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov;
use crate::model::{stationary_distribution, BranchKind, ComplexModel};
use crate::specfun::{cot_pi, i_integral, IKind, IntegralFamilyParams, Method};

/// Default tolerance for |K| ≈ 0.
pub const CRITICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Some branch has χα ≥ 1.
    RecurrentHeavySide,
    /// Criterion negative.
    RecurrentNegative,
    /// Criterion positive.
    Transient,
    /// Criterion zero, all densities in D⁺.
    CriticalRecurrent,
    /// Criterion zero, some density without a rate.
    CriticalUndecided,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::RecurrentHeavySide => "recurrent_heavy_side",
            Verdict::RecurrentNegative => "recurrent_negative",
            Verdict::Transient => "transient",
            Verdict::CriticalRecurrent => "critical_recurrent",
            Verdict::CriticalUndecided => "critical_undecided",
        }
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, Verdict::Transient | Verdict::CriticalUndecided)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// K = Σ μ_k cot(χ_k π α_k); absent when some χ_k α_k ≥ 1.
    pub criterion_value: Option<f64>,
    pub max_chi_alpha: f64,
    pub verdict: Verdict,
    /// a_k = π cot(χ_k π α_k), absent at poles.
    pub cot_terms: Vec<Option<f64>>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentPrediction {
    Sharp {
        q_star: f64,
        source: String,
    },
    Interval {
        q_low: f64,
        q_high: f64,
        nu_star: f64,
        nu_tilde: f64,
        source: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flat {
    One,
    Sym,
}

impl Flat {
    pub fn of(kind: BranchKind) -> Self {
        match kind {
            BranchKind::OneSided => Flat::One,
            BranchKind::Symmetric => Flat::Sym,
        }
    }

    pub fn chi(self) -> f64 {
        match self {
            Flat::One => 1.0,
            Flat::Sym => 0.5,
        }
    }
}

/// π cot(χ π α), or `None` at a pole.
pub(crate) fn cot_term(chi: f64, alpha: f64) -> Option<f64> {
    let v = std::f64::consts::PI * cot_pi(chi * alpha);
    v.is_finite().then_some(v)
}

/// K = Σ_k μ_k cot(χ_k π α_k).
pub fn criterion_value(model: &ComplexModel) -> Result<f64> {
    let mu = stationary_distribution(model)?.mu;
    let mut k = 0.0;
    for (b, m) in model.branches().iter().zip(&mu) {
        let ca = b.chi_alpha();
        if ca == ca.round() {
            return Err(Error::domain(format!(
                "branch '{}': chi*alpha = {ca} is a cotangent pole",
                b.id
            )));
        }
        k += m * cot_pi(ca);
    }
    Ok(k)
}

/// Classify with the default critical tolerance.
pub fn classify(model: &ComplexModel) -> Result<Classification> {
    classify_with(model, CRITICAL_TOL)
}

pub fn classify_with(model: &ComplexModel, critical_tol: f64) -> Result<Classification> {
    let mu = stationary_distribution(model)?.mu;
    let max_chi_alpha = model.max_chi_alpha();
    let cot_terms = model
        .branches()
        .iter()
        .map(|b| cot_term(b.chi(), b.alpha()))
        .collect();
    if max_chi_alpha >= 1.0 {
        return Ok(Classification {
            criterion_value: None,
            max_chi_alpha,
            verdict: Verdict::RecurrentHeavySide,
            cot_terms,
            mu,
        });
    }
    let k = criterion_value(model)?;
    let verdict = if k < -critical_tol {
        Verdict::RecurrentNegative
    } else if k > critical_tol {
        Verdict::Transient
    } else if model.branches().iter().all(|b| b.density.is_d_plus()) {
        Verdict::CriticalRecurrent
    } else {
        Verdict::CriticalUndecided
    };
    Ok(Classification {
        criterion_value: Some(k),
        max_chi_alpha,
        verdict,
        cot_terms,
        mu,
    })
}

/// C^♭(ν, α) = i₂₁ (1 + R^♭(α, ν)).
pub fn c_flat(flat: Flat, nu: f64, alpha: f64) -> Result<f64> {
    let p = IntegralFamilyParams::new(nu, alpha);
    let i = |k| i_integral(k, p, Method::ClosedForm);
    match flat {
        Flat::Sym => Ok(i(IKind::I21)? + i(IKind::I0)? + i(IKind::I1)? - i(IKind::I20)?),
        Flat::One => Ok(i(IKind::I21)? + i(IKind::I1Tilde)? - i(IKind::I20)?),
    }
}

/// The root ν₀ ∈ (0, α) of C^♭(·, α), for χα ∈ (½, 1).
pub fn nu0_root(flat: Flat, alpha: f64) -> Result<f64> {
    let ca = flat.chi() * alpha;
    if !(ca > 0.5 && ca < 1.0) {
        return Err(Error::domain(format!(
            "nu0 root needs chi*alpha in (1/2, 1), got {ca}"
        )));
    }
    let eps = 1e-3;
    let f = |nu: f64| c_flat(flat, nu, alpha);
    bisect(f, eps, alpha - eps, 1e-12)
}

/// Bisection for a sign change of `f` on [lo, hi].
pub(crate) fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::numeric(
            format!("no sign change on [{lo}, {hi}]"),
            f64::NAN,
            hi - lo,
        ));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-branch swap-routed model with equal kinds and exponents.
fn homogeneous_two_line(model: &ComplexModel) -> Option<(BranchKind, f64)> {
    if model.len() != 2 {
        return None;
    }
    let p = model.routing();
    if p[0] != [0.0, 1.0] || p[1] != [1.0, 0.0] {
        return None;
    }
    let (a, b) = (model.branch(0), model.branch(1));
    (a.kind == b.kind && a.alpha() == b.alpha()).then_some((a.kind, a.alpha()))
}

/// Sharp q* for the homogeneous two-line walks in their recurrent regime.
pub fn sharp_q_star(model: &ComplexModel) -> Option<MomentPrediction> {
    let (kind, alpha) = homogeneous_two_line(model)?;
    let (q, source) = match kind {
        BranchKind::Symmetric if alpha >= 2.0 => (0.5, "symmetric walk, alpha >= 2"),
        BranchKind::Symmetric if alpha > 1.0 => (1.0 - 1.0 / alpha, "symmetric walk, 1 < alpha < 2"),
        BranchKind::OneSided if alpha >= 1.0 => (alpha, "one-sided oscillating walk, alpha >= 1"),
        BranchKind::OneSided if alpha > 0.5 => (2.0 - 1.0 / alpha, "one-sided oscillating walk, 1/2 < alpha < 1"),
        _ => return None,
    };
    Some(MomentPrediction::Sharp {
        q_star: q,
        source: source.to_string(),
    })
}

/// Interval (ν*/ᾱ, ᾱ/ν̃) locating q* for a recurrent model.
pub fn moment_interval(model: &ComplexModel) -> Result<MomentPrediction> {
    let c = classify(model)?;
    if !matches!(c.verdict, Verdict::RecurrentHeavySide | Verdict::RecurrentNegative) {
        return Err(Error::WrongRegime(format!(
            "moment interval needs a recurrent model, got {}",
            c.verdict.name()
        )));
    }
    let alpha_bar = model
        .branches()
        .iter()
        .map(|b| b.alpha())
        .fold(f64::NEG_INFINITY, f64::max);
    let nu_star = lyapunov::max_feasible_nu(model)?;
    let nu_tilde = lyapunov::first_nonnegative_drift_nu(model, nu_star)?;
    Ok(MomentPrediction::Interval {
        q_low: nu_star / alpha_bar,
        q_high: alpha_bar / nu_tilde,
        nu_star,
        nu_tilde,
        source: "Lyapunov exponent feasibility search".to_string(),
    })
}

/// Sharp prediction when available, otherwise the interval.
pub fn q_prediction(model: &ComplexModel) -> Result<Option<MomentPrediction>> {
    if let Some(p) = sharp_q_star(model) {
        return Ok(Some(p));
    }
    match moment_interval(model) {
        Ok(p) => Ok(Some(p)),
        Err(Error::WrongRegime(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

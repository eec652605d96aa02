//! Lyapunov weights (θ-system, triangular mixed-case construction, critical
//! additive weights) and one-step drift of f_ν, g and h = √g.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::{bisect, classify, cot_term, Flat, Verdict, CRITICAL_TOL};
use crate::error::{Error, Result};
use crate::model::{stationary_of, BranchKind, ComplexModel, TailDensity};
use crate::specfun::{
    i_integral, pow1p_m1, quad_segments, sym_second_diff, Endpoint, Endpoints, IKind,
    IntegralFamilyParams, Method, QuadOptions, QuadratureResult,
};

/// Floor for the triangular construction's A_m.
pub const A_FLOOR: f64 = 1e-3;
/// Default slack in the triangular construction.
pub const DEFAULT_SLACK: f64 = 1e-3;
/// Resolution of the ν feasibility search.
pub const NU_RESOLUTION: f64 = 1e-4;
/// Height at which the drift-sign search for ν̃ is evaluated.
pub const NU_TILDE_X: f64 = 1e5;
/// Distance kept from the ν cap in the ν̃ search.
pub const NU_TILDE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// f_ν(x, k) = λ_k (1 + x)^ν.
    Power,
    /// g(x, k) = ln(1 + x) + λ_k.
    Log,
    /// h(x, k) = √g(x, k).
    SqrtLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ThetaShift,
    Triangular,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovWeights {
    pub mode: Mode,
    pub nu: f64,
    pub lambda: Vec<f64>,
    pub provenance: Provenance,
}

impl LyapunovWeights {
    /// Weights supplied by the caller, checked against the model.
    pub fn manual(model: &ComplexModel, mode: Mode, nu: f64, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != model.len() {
            return Err(Error::domain(format!(
                "expected {} weights, got {}",
                model.len(),
                lambda.len()
            )));
        }
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::domain("weights must be positive and finite"));
        }
        if mode == Mode::Power {
            let amin = model.branches().iter().map(|b| b.alpha()).fold(f64::INFINITY, f64::min);
            if !(nu > -1.0 && nu < amin) {
                return Err(Error::domain(format!("nu must lie in (-1, {amin}), got {nu}")));
            }
        }
        Ok(Self {
            mode,
            nu: if mode == Mode::Power { nu } else { 0.0 },
            lambda,
            provenance: Provenance::Manual,
        })
    }

    pub fn unit(model: &ComplexModel, mode: Mode, nu: f64) -> Result<Self> {
        Self::manual(model, mode, nu, vec![1.0; model.len()])
    }
}

/// Solve (P − I)θ = b, shifted so that min θ = 1.
pub fn solve_theta(p: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = p.len();
    if b.len() != n {
        return Err(Error::domain("right-hand side length differs from routing size"));
    }
    let mu = stationary_of(p)?;
    let fredholm: f64 = mu.iter().zip(b).map(|(m, b)| m * b).sum();
    if fredholm.abs() > 1e-10 {
        return Err(Error::domain(format!(
            "theta system unsolvable: mu^T b = {fredholm:e} is not zero"
        )));
    }
    // Rows of (P − I), last replaced by Σθ = 0.
    let a = DMatrix::from_fn(n, n, |r, c| {
        if r == n - 1 {
            1.0
        } else {
            p[r][c] - if r == c { 1.0 } else { 0.0 }
        }
    });
    let mut rhs = DVector::from_column_slice(b);
    rhs[n - 1] = 0.0;
    let theta = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("singular theta system", f64::NAN, f64::NAN))?;
    let min = theta.iter().cloned().fold(f64::INFINITY, f64::min);
    let theta: Vec<f64> = theta.iter().map(|t| t - min + 1.0).collect();
    let resid = theta_residual(p, &theta, b);
    if resid >= 1e-10 {
        return Err(Error::numeric(
            format!("theta residual {resid:e} too large"),
            resid,
            resid,
        ));
    }
    Ok(theta)
}

/// ‖(P − I)θ − b‖∞.
pub fn theta_residual(p: &[Vec<f64>], theta: &[f64], b: &[f64]) -> f64 {
    (0..p.len())
        .map(|i| {
            let pt: f64 = p[i].iter().zip(theta).map(|(p, t)| p * t).sum();
            (pt - theta[i] - b[i]).abs()
        })
        .fold(0.0, f64::max)
}

fn a_terms(model: &ComplexModel) -> Result<Vec<f64>> {
    model
        .branches()
        .iter()
        .map(|b| {
            cot_term(b.chi(), b.alpha()).ok_or_else(|| {
                Error::domain(format!("branch '{}': cotangent pole at chi*alpha = {}", b.id, b.chi_alpha()))
            })
        })
        .collect()
}

/// Power-mode weights λ_k = 1 + θ_k ν in the cotangent-decided regime.
pub fn lambda_recurrent(model: &ComplexModel, nu: f64) -> Result<LyapunovWeights> {
    if model.max_chi_alpha() >= 1.0 {
        return Err(Error::WrongRegime("some branch has chi*alpha >= 1".into()));
    }
    let a = a_terms(model)?;
    let mu = stationary_of(model.routing())?;
    let mean_a: f64 = mu.iter().zip(&a).map(|(m, a)| m * a).sum();
    let b: Vec<f64> = if nu >= 0.0 {
        if !(mean_a < 0.0) {
            return Err(Error::WrongRegime(format!(
                "nu >= 0 needs a negative criterion, got sum mu_k a_k = {mean_a}"
            )));
        }
        let delta = -mean_a;
        a.iter().map(|a| -a - delta).collect()
    } else {
        if !(mean_a > 0.0) {
            return Err(Error::WrongRegime(format!(
                "nu < 0 needs a positive criterion, got sum mu_k a_k = {mean_a}"
            )));
        }
        let delta = mean_a;
        a.iter().map(|a| -a + delta).collect()
    };
    let b = project(&mu, &b);
    let theta = solve_theta(model.routing(), &b)?;
    let lambda: Vec<f64> = theta.iter().map(|t| 1.0 + t * nu).collect();
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::domain(format!(
            "nu = {nu} gives a nonpositive weight; use a smaller |nu|"
        )));
    }
    Ok(LyapunovWeights {
        mode: Mode::Power,
        nu,
        lambda,
        provenance: Provenance::ThetaShift,
    })
}

/// Remove the μ-mean so that the Fredholm condition holds to rounding.
fn project(mu: &[f64], b: &[f64]) -> Vec<f64> {
    let m: f64 = mu.iter().zip(b).map(|(m, b)| m * b).sum();
    b.iter().map(|b| b - m).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedCasePartition {
    /// S_0, …, S_M.
    pub levels: Vec<Vec<usize>>,
    /// U[m][n] for n > m (other entries zero).
    pub u: Vec<Vec<f64>>,
    /// A[m] for m ≥ 1; A[0] is unused.
    pub a: Vec<f64>,
    /// Strictly lower-triangular L; empty until constructed.
    pub l: Vec<Vec<f64>>,
}

impl MixedCasePartition {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level_of(&self, i: usize) -> usize {
        self.levels.iter().position(|s| s.contains(&i)).expect("levels cover all branches")
    }
}

fn mass(p: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&j| p[j]).sum()
}

/// Levels S_m by one-step reachability of S_{m−1}, with U and A.
pub fn build_partition(model: &ComplexModel) -> Result<MixedCasePartition> {
    let n = model.len();
    let s0: Vec<usize> = (0..n).filter(|&i| model.branch(i).chi_alpha() >= 1.0).collect();
    if s0.is_empty() {
        return Err(Error::WrongRegime("no branch has chi*alpha >= 1".into()));
    }
    let p = model.routing();
    let mut assigned = vec![false; n];
    for &i in &s0 {
        assigned[i] = true;
    }
    let mut levels = vec![s0];
    while assigned.iter().any(|a| !a) {
        let prev = levels.last().unwrap();
        let next: Vec<usize> = (0..n)
            .filter(|&i| !assigned[i] && mass(&p[i], prev) > 0.0)
            .collect();
        if next.is_empty() {
            return Err(Error::numeric("levels do not cover the branches", f64::NAN, f64::NAN));
        }
        for &i in &next {
            assigned[i] = true;
        }
        levels.push(next);
    }
    let big_m = levels.len() - 1;
    let mut u = vec![vec![0.0; big_m + 1]; big_m + 1];
    let mut a = vec![0.0; big_m + 1];
    let cot = a_terms_partial(model);
    for m in 1..=big_m {
        for nn in m + 1..=big_m {
            u[m][nn] = levels[m]
                .iter()
                .map(|&i| mass(&p[i], &levels[nn]) / mass(&p[i], &levels[m - 1]))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let am = levels[m]
            .iter()
            .map(|&i| cot[i] / mass(&p[i], &levels[m - 1]))
            .fold(f64::NEG_INFINITY, f64::max);
        a[m] = am.max(A_FLOOR);
    }
    Ok(MixedCasePartition {
        levels,
        u,
        a,
        l: Vec::new(),
    })
}

/// a_i where defined; branches at a pole only occur in S_0 and are unused.
fn a_terms_partial(model: &ComplexModel) -> Vec<f64> {
    model
        .branches()
        .iter()
        .map(|b| cot_term(b.chi(), b.alpha()).unwrap_or(f64::NAN))
        .collect()
}

/// Lower-triangular L with L_{m,m−1} = (UL)_{m,m} + A_m + slack and
/// L_{k,ℓ} = L_{ℓ+1,ℓ} + ⋯ + L_{k,k−1}.
#[allow(non_snake_case)]
pub fn construct_L(u: &[Vec<f64>], a: &[f64], slack: f64) -> Result<Vec<Vec<f64>>> {
    if !(slack > 0.0) {
        return Err(Error::domain("slack must be positive"));
    }
    let big_m = a.len() - 1;
    if a[1..].iter().any(|&am| !(am > 0.0)) {
        return Err(Error::domain("A_m must be positive"));
    }
    let mut l = vec![vec![0.0; big_m + 1]; big_m + 1];
    for m in (1..=big_m).rev() {
        let ul: f64 = (m + 1..=big_m).map(|n| u[m][n] * l[n][m]).sum();
        l[m][m - 1] = ul + a[m] + slack;
        // Fill column m−1 below the subdiagonal.
        for k in m + 1..=big_m {
            l[k][m - 1] = l[k][m] + l[m][m - 1];
        }
    }
    Ok(l)
}

/// Power-mode weights from the triangular construction, min weight 1.
pub fn lambda_mixed(model: &ComplexModel, nu: f64, slack: f64) -> Result<LyapunovWeights> {
    if !(nu > 0.0) {
        return Err(Error::domain("mixed-case weights need nu > 0"));
    }
    let mut part = build_partition(model)?;
    let big_m = part.depth();
    part.l = construct_L(&part.u, &part.a, slack)?;
    let top = nu * part.l[big_m][0];
    let level_weight = |m: usize| (top - nu * part.l[big_m][m]).exp();
    let mut lambda = vec![0.0; model.len()];
    for (m, set) in part.levels.iter().enumerate() {
        for &i in set {
            lambda[i] = level_weight(m);
        }
    }
    Ok(LyapunovWeights {
        mode: Mode::Power,
        nu,
        lambda,
        provenance: Provenance::Triangular,
    })
}

/// Additive weights for the critical case: a_k + Σ_j p(k,j)(λ_j − λ_k) = 0.
pub fn solve_crit_lambda(model: &ComplexModel) -> Result<LyapunovWeights> {
    if model.max_chi_alpha() >= 1.0 {
        return Err(Error::WrongRegime("some branch has chi*alpha >= 1".into()));
    }
    let a = a_terms(model)?;
    let mu = stationary_of(model.routing())?;
    let mean_a: f64 = mu.iter().zip(&a).map(|(m, a)| m * a).sum();
    if mean_a.abs() > std::f64::consts::PI * CRITICAL_TOL {
        return Err(Error::domain(format!(
            "critical weights need sum mu_k a_k = 0, got {mean_a:e}"
        )));
    }
    let b: Vec<f64> = a.iter().map(|a| -a).collect();
    let b = project(&mu, &b);
    let lambda = solve_theta(model.routing(), &b)?;
    Ok(LyapunovWeights {
        mode: Mode::Log,
        nu: 0.0,
        lambda,
        provenance: Provenance::ThetaShift,
    })
}

/// ‖a + (P − I)λ‖∞ for additive weights.
pub fn crit_residual(model: &ComplexModel, w: &LyapunovWeights) -> Result<f64> {
    let a = a_terms(model)?;
    let neg: Vec<f64> = a.iter().map(|a| -a).collect();
    Ok(theta_residual(model.routing(), &w.lambda, &neg))
}

/// R^♭(α, ν).
pub fn r_flat(flat: Flat, alpha: f64, nu: f64) -> Result<f64> {
    let p = IntegralFamilyParams::new(nu, alpha);
    let i = |k| i_integral(k, p, Method::ClosedForm);
    let i21 = i(IKind::I21)?;
    match flat {
        Flat::Sym => Ok((i(IKind::I0)? + i(IKind::I1)? - i(IKind::I20)?) / i21),
        Flat::One => Ok((i(IKind::I1Tilde)? - i(IKind::I20)?) / i21),
    }
}

fn p_lambda_ratio(model: &ComplexModel, lambda: &[f64], i: usize) -> f64 {
    let pl: f64 = model.routing()[i].iter().zip(lambda).map(|(p, l)| p * l).sum();
    pl / lambda[i]
}

/// Leading coefficient of x^{ν−α_i} in Df_ν(x, i).
pub fn drift_asymptotic(model: &ComplexModel, w: &LyapunovWeights, i: usize) -> Result<f64> {
    if w.mode != Mode::Power {
        return Err(Error::domain("drift asymptotics apply to power-mode weights"));
    }
    let b = model.branch(i);
    if b.chi_alpha() >= 1.0 {
        return Err(Error::domain(format!("branch '{}' has chi*alpha >= 1", b.id)));
    }
    let alpha = b.alpha();
    let nu = w.nu;
    if !(nu > -1.0 && nu < alpha.min(1.0)) {
        return Err(Error::domain(format!("nu must lie in (-1, {}), got {nu}", alpha.min(1.0))));
    }
    let i21 = i_integral(IKind::I21, IntegralFamilyParams::new(nu, alpha), Method::ClosedForm)?;
    let r = r_flat(Flat::of(b.kind), alpha, nu)?;
    Ok(b.chi() * w.lambda[i] * b.density.c_const() * i21 * (p_lambda_ratio(model, &w.lambda, i) + r))
}

/// Slacks tried by the feasibility search in the mixed case.
pub const SEARCH_SLACKS: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Candidate weights at ν: the θ-shift construction, or the triangular
/// construction for each slack in [`SEARCH_SLACKS`].
fn candidate_weights(model: &ComplexModel, nu: f64) -> Result<Vec<LyapunovWeights>> {
    if model.max_chi_alpha() >= 1.0 {
        SEARCH_SLACKS.iter().map(|&s| lambda_mixed(model, nu, s)).collect()
    } else {
        Ok(vec![lambda_recurrent(model, nu)?])
    }
}

fn asymptotically_negative(model: &ComplexModel, w: &LyapunovWeights) -> Result<bool> {
    for i in 0..model.len() {
        if model.branch(i).chi_alpha() < 1.0 && !(drift_asymptotic(model, w, i)? < 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Constructed weights at ν with negative asymptotic drift, if any.
pub fn feasible_weights(model: &ComplexModel, nu: f64) -> Result<Option<LyapunovWeights>> {
    let cands = match candidate_weights(model, nu) {
        Ok(c) => c,
        Err(Error::Domain(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    for w in cands {
        if asymptotically_negative(model, &w)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Upper end of the ν search range: min(1, min_k α_k).
pub fn nu_cap(model: &ComplexModel) -> f64 {
    model
        .branches()
        .iter()
        .map(|b| b.alpha())
        .fold(1.0, f64::min)
}

/// Whether constructed weights at ν give a negative asymptotic drift
/// coefficient on every branch with χα < 1.
pub fn is_feasible(model: &ComplexModel, nu: f64) -> Result<bool> {
    Ok(feasible_weights(model, nu)?.is_some())
}

/// Largest ν (to [`NU_RESOLUTION`]) admitting weights with negative drift.
pub fn max_feasible_nu(model: &ComplexModel) -> Result<f64> {
    let c = classify(model)?;
    if !matches!(c.verdict, Verdict::RecurrentHeavySide | Verdict::RecurrentNegative) {
        return Err(Error::WrongRegime(format!(
            "feasibility search needs a recurrent model, got {}",
            c.verdict.name()
        )));
    }
    let cap = nu_cap(model);
    let mut lo = NU_RESOLUTION.min(0.5 * cap);
    if !is_feasible(model, lo)? {
        return Err(Error::numeric("no feasible Lyapunov exponent found", 0.0, lo));
    }
    let mut hi = cap - NU_RESOLUTION;
    if is_feasible(model, hi)? {
        return Ok(hi);
    }
    while hi - lo > NU_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if is_feasible(model, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest ν ≥ ν* at which the quadrature drift at x = 10⁵ is
/// nonnegative on some branch, or the search cap if none is.
pub fn first_nonnegative_drift_nu(model: &ComplexModel, nu_star: f64) -> Result<f64> {
    let cap = nu_cap(model) - NU_TILDE_MARGIN;
    let max_drift = |nu: f64| -> Result<f64> {
        let w = match feasible_weights(model, nu)? {
            Some(w) => w,
            None => candidate_weights(model, nu)?.swap_remove(0),
        };
        let mut worst = f64::NEG_INFINITY;
        for i in 0..model.len() {
            worst = worst.max(drift_power(model, &w, NU_TILDE_X, i)?.value);
        }
        Ok(worst)
    };
    if nu_star >= cap || max_drift(cap)? < 0.0 {
        return Ok(cap.max(nu_star));
    }
    if max_drift(nu_star)? >= 0.0 {
        return Ok(nu_star);
    }
    // Sign change of the worst branch drift on [ν*, cap].
    let f = |nu: f64| max_drift(nu).map(|d| if d >= 0.0 { 1.0 } else { -1.0 });
    bisect(f, nu_star, cap, NU_RESOLUTION)
}

fn drift_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_evals: 2_000_000,
    }
}

/// Breakpoints on [lo, hi] (hi may be ∞): decades around each centre, the
/// density's support edge and the ends.
fn breakpoints(lo: f64, hi: f64, centres: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut pts = Vec::new();
    let scale = centres.iter().cloned().fold(1.0, f64::max);
    for &c in centres {
        let mut d = 1.0;
        while d <= 10.0 * scale {
            pts.push(c + d);
            pts.push(c - d);
            d *= 10.0;
        }
    }
    pts.extend_from_slice(extra);
    pts.retain(|&p| p > lo && p < hi && p.is_finite());
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|&q| p - q > 1e-9 * q.abs().max(1.0)) {
            out.push(p);
        } else if p == hi {
            *out.last_mut().unwrap() = hi;
        }
    }
    out
}

fn integrate(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    decay: Option<f64>,
    centres: &[f64],
    extra: &[f64],
) -> Result<QuadratureResult> {
    if !(hi > lo) {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let pts = breakpoints(lo, hi, centres, extra);
    let upper = match decay {
        Some(k) if hi.is_infinite() => Endpoint::Decay(k),
        _ => Endpoint::Regular,
    };
    quad_segments(f, &pts, Endpoints::new(Endpoint::Regular, upper), &drift_opts())
}

fn scale(r: QuadratureResult, s: f64) -> QuadratureResult {
    QuadratureResult {
        value: s * r.value,
        abs_error_estimate: s.abs() * r.abs_error_estimate,
        evaluations: r.evaluations,
    }
}

fn exact(v: f64) -> QuadratureResult {
    QuadratureResult {
        value: v,
        abs_error_estimate: 0.0,
        evaluations: 0,
    }
}

/// ln((1 + x − y)/(1 + x)) for 0 ≤ y ≤ x.
fn log_down_ratio(x: f64, y: f64, l: f64) -> f64 {
    let t = y / (1.0 + x);
    if t <= 0.5 {
        (-t).ln_1p()
    } else {
        (x - y).ln_1p() - l
    }
}

fn check_drift_args(model: &ComplexModel, w: &LyapunovWeights, x: f64, i: usize) -> Result<()> {
    if i >= model.len() {
        return Err(Error::domain(format!("branch index {i} out of range")));
    }
    if w.lambda.len() != model.len() {
        return Err(Error::domain("weight vector length differs from branch count"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("x must be finite and >= 0, got {x}")));
    }
    Ok(())
}

fn support_points(d: &TailDensity, shift: f64) -> Vec<f64> {
    match *d {
        TailDensity::CutoffPareto { y0, .. } => vec![y0 - shift],
        TailDensity::ShiftedPareto { .. } => Vec::new(),
    }
}

/// Df_ν(x, i) = E[f_ν(X₁, ξ₁) − f_ν(x, i) | X₀ = x, ξ₀ = i] by quadrature.
pub fn drift_power(model: &ComplexModel, w: &LyapunovWeights, x: f64, i: usize) -> Result<QuadratureResult> {
    check_drift_args(model, w, x, i)?;
    if w.mode != Mode::Power {
        return Err(Error::domain("drift_power needs power-mode weights"));
    }
    let b = model.branch(i);
    let d = b.density;
    let alpha = d.alpha();
    let nu = w.nu;
    if !(nu > -1.0 && nu < alpha) {
        return Err(Error::domain(format!("nu must lie in (-1, {alpha}), got {nu}")));
    }
    let lam = w.lambda[i];
    let rho = p_lambda_ratio(model, &w.lambda, i);
    let l = x.ln_1p();
    let fx = (nu * l).exp();
    let t_of = |y: f64| y / (1.0 + x);
    let decay = alpha - nu.max(0.0);
    let in_support = support_points(&d, 0.0);
    let cross_support = support_points(&d, x);

    // Crossing: ∫_x^∞ v(y)[ρ(1 + y − x)^ν − f(x)] dy, in w = y − x.
    let q = integrate(|w| d.density(x + w) * (nu * w.ln_1p()).exp(), 0.0, f64::INFINITY, Some(decay), &[x], &cross_support)?;
    let q_diff = integrate(
        |w| d.density(x + w) * (nu * (w.ln_1p() - l)).exp_m1(),
        0.0,
        f64::INFINITY,
        Some(decay),
        &[x],
        &cross_support,
    )?;
    let crossing = scale(q, rho - 1.0).combine(scale(q_diff, fx));

    let total = match b.kind {
        BranchKind::OneSided => {
            let down = integrate(
                |y| {
                    let r = log_down_ratio(x, y, l);
                    d.density(y) * (nu * r).exp_m1()
                },
                0.0,
                x,
                None,
                &[0.0, x],
                &in_support,
            )?;
            scale(down, fx).combine(crossing)
        }
        BranchKind::Symmetric => {
            let both = integrate(
                |y| {
                    let t = t_of(y);
                    let d2 = if t <= 0.5 {
                        sym_second_diff(nu, t)
                    } else {
                        pow1p_m1(nu, t) + (nu * log_down_ratio(x, y, l)).exp_m1()
                    };
                    d.density(y) * d2
                },
                0.0,
                x,
                None,
                &[0.0, x],
                &in_support,
            )?;
            let up = integrate(
                |y| d.density(y) * pow1p_m1(nu, t_of(y)),
                x,
                f64::INFINITY,
                Some(decay),
                &[x],
                &in_support,
            )?;
            scale(scale(both, fx).combine(scale(up, fx)).combine(crossing), 0.5)
        }
    };
    Ok(scale(total, lam))
}

/// Dg(x, i) for g(x, k) = ln(1 + x) + λ_k.
pub fn drift_log(model: &ComplexModel, w: &LyapunovWeights, x: f64, i: usize) -> Result<QuadratureResult> {
    check_drift_args(model, w, x, i)?;
    if w.mode == Mode::Power {
        return Err(Error::domain("drift_log needs log-mode weights"));
    }
    let b = model.branch(i);
    let d = b.density;
    let alpha = d.alpha();
    let l = x.ln_1p();
    let t_of = |y: f64| y / (1.0 + x);
    let in_support = support_points(&d, 0.0);
    let cross_support = support_points(&d, x);
    let jump: f64 = model.routing()[i]
        .iter()
        .zip(&w.lambda)
        .map(|(p, lj)| p * (lj - w.lambda[i]))
        .sum();
    let crossing = integrate(
        |w| d.density(x + w) * (w.ln_1p() - l),
        0.0,
        f64::INFINITY,
        Some(alpha),
        &[x],
        &cross_support,
    )?
    .combine(exact(jump * d.tail(x)));
    let total = match b.kind {
        BranchKind::OneSided => {
            let down = integrate(|y| d.density(y) * log_down_ratio(x, y, l), 0.0, x, None, &[0.0, x], &in_support)?;
            down.combine(crossing)
        }
        BranchKind::Symmetric => {
            let both = integrate(
                |y| {
                    let t = t_of(y);
                    let s = if t <= 0.5 { (-t * t).ln_1p() } else { t.ln_1p() + log_down_ratio(x, y, l) };
                    d.density(y) * s
                },
                0.0,
                x,
                None,
                &[0.0, x],
                &in_support,
            )?;
            let up = integrate(|y| d.density(y) * t_of(y).ln_1p(), x, f64::INFINITY, Some(alpha), &[x], &in_support)?;
            scale(both.combine(up).combine(crossing), 0.5)
        }
    };
    Ok(total)
}

/// Dh(x, i) for h(x, k) = (ln(1 + x) + λ_k)^{1/2}.
pub fn drift_sqrtlog(model: &ComplexModel, w: &LyapunovWeights, x: f64, i: usize) -> Result<QuadratureResult> {
    check_drift_args(model, w, x, i)?;
    if w.mode == Mode::Power {
        return Err(Error::domain("drift_sqrtlog needs log-mode weights"));
    }
    let b = model.branch(i);
    let d = b.density;
    let alpha = d.alpha();
    let l = x.ln_1p();
    let lam_i = w.lambda[i];
    let h0 = (l + lam_i).sqrt();
    // √(g0 + Δ) − √g0 without cancellation.
    let dh = |delta: f64| delta / ((l + lam_i + delta).sqrt() + h0);
    let t_of = |y: f64| y / (1.0 + x);
    let in_support = support_points(&d, 0.0);
    let cross_support = support_points(&d, x);
    let row = &model.routing()[i];
    let lambda = &w.lambda;
    let crossing = integrate(
        |w| {
            let lw = w.ln_1p() - l;
            let s: f64 = row
                .iter()
                .zip(lambda)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &lj)| p * dh(lw + lj - lam_i))
                .sum();
            d.density(x + w) * s
        },
        0.0,
        f64::INFINITY,
        Some(alpha),
        &[x],
        &cross_support,
    )?;
    let total = match b.kind {
        BranchKind::OneSided => {
            let down = integrate(|y| d.density(y) * dh(log_down_ratio(x, y, l)), 0.0, x, None, &[0.0, x], &in_support)?;
            down.combine(crossing)
        }
        BranchKind::Symmetric => {
            let both = integrate(
                |y| d.density(y) * (dh(t_of(y).ln_1p()) + dh(log_down_ratio(x, y, l))),
                0.0,
                x,
                None,
                &[0.0, x],
                &in_support,
            )?;
            let up = integrate(|y| d.density(y) * dh(t_of(y).ln_1p()), x, f64::INFINITY, Some(alpha), &[x], &in_support)?;
            scale(both.combine(up).combine(crossing), 0.5)
        }
    };
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{preset, PresetFamily};
    use crate::model::BranchSpec;
    use std::f64::consts::PI;

    fn swap() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0], vec![1.0, 0.0]]
    }

    fn chain_model() -> ComplexModel {
        let spec = |id: &str, kind, a| BranchSpec {
            id: id.into(),
            kind,
            density: TailDensity::shifted_pareto(a),
        };
        ComplexModel::new(
            vec![
                spec("heavy", BranchKind::OneSided, 1.2),
                spec("mid", BranchKind::OneSided, 0.45),
                spec("far", BranchKind::Symmetric, 0.8),
            ],
            vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn theta_for_zero_rhs_is_constant() {
        assert_eq!(solve_theta(&swap(), &[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn theta_swap_example() {
        let t = solve_theta(&swap(), &[1.0, -1.0]).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-14 && (t[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn theta_rejects_fredholm_violation() {
        assert!(matches!(solve_theta(&swap(), &[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn theta_shift_keeps_residual() {
        let p = vec![vec![0.2, 0.8, 0.0], vec![0.0, 0.1, 0.9], vec![0.7, 0.0, 0.3]];
        let mu = stationary_of(&p).unwrap();
        let b = project(&mu, &[1.0, -2.0, 0.5]);
        let t = solve_theta(&p, &b).unwrap();
        let shifted: Vec<f64> = t.iter().map(|v| v + 3.7).collect();
        assert!(theta_residual(&p, &t, &b) < 1e-12);
        assert!(theta_residual(&p, &shifted, &b) < 1e-12);
    }

    #[test]
    fn recurrent_weights_two_line() {
        let m = preset(PresetFamily::Osc1, 0.6, 0.7).unwrap();
        let w = lambda_recurrent(&m, 0.05).unwrap();
        assert!(w.lambda.iter().all(|&l| l > 0.0));
        let a = a_terms(&m).unwrap();
        let mu = stationary_of(m.routing()).unwrap();
        let delta = -(mu[0] * a[0] + mu[1] * a[1]);
        let theta: Vec<f64> = w.lambda.iter().map(|l| (l - 1.0) / 0.05).collect();
        let b: Vec<f64> = a.iter().map(|a| -a - delta).collect();
        assert!(theta_residual(m.routing(), &theta, &b) < 1e-10);
    }

    #[test]
    fn equal_cot_terms_give_equal_weights() {
        let m = preset(PresetFamily::Osc1, 0.7, 0.7).unwrap();
        let w = lambda_recurrent(&m, 0.1).unwrap();
        assert!((w.lambda[0] - w.lambda[1]).abs() < 1e-14);
    }

    #[test]
    fn too_negative_nu_is_rejected() {
        let m = preset(PresetFamily::Osc1, 0.2, 0.45).unwrap();
        assert!(matches!(lambda_recurrent(&m, -50.0), Err(Error::Domain(_))));
        assert!(matches!(lambda_recurrent(&m, 0.1), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn partition_follows_reachability() {
        let part = build_partition(&chain_model()).unwrap();
        assert_eq!(part.levels, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(part.level_of(2), 2);
        assert!((part.u[1][2] - 1.0).abs() < 1e-15);
        let a1 = PI * cot_pi_ref(0.45) / 0.5;
        assert!((part.a[1] - a1).abs() < 1e-12);
        assert!((part.a[2] - A_FLOOR.max(PI * cot_pi_ref(0.4))).abs() < 1e-12);
    }

    fn cot_pi_ref(x: f64) -> f64 {
        (PI * x).cos() / (PI * x).sin()
    }

    #[test]
    fn all_heavy_gives_single_level() {
        let m = preset(PresetFamily::Osc1, 1.2, 1.5).unwrap();
        let part = build_partition(&m).unwrap();
        assert_eq!(part.depth(), 0);
        let w = lambda_mixed(&m, 0.1, DEFAULT_SLACK).unwrap();
        assert_eq!(w.lambda, vec![1.0, 1.0]);
    }

    #[test]
    fn triangular_recursion_by_hand() {
        let (u12, s) = (0.7, 1e-3);
        let u = vec![vec![0.0; 3], vec![0.0, 0.0, u12], vec![0.0; 3]];
        let a = vec![0.0, 0.4, 0.9];
        let l = construct_L(&u, &a, s).unwrap();
        let l21 = 0.9 + s;
        let l10 = u12 * l21 + 0.4 + s;
        assert!((l[2][1] - l21).abs() < 1e-15);
        assert!((l[1][0] - l10).abs() < 1e-15);
        assert!((l[2][0] - (l10 + l21)).abs() < 1e-15);
        let l1 = construct_L(&[vec![0.0; 2], vec![0.0; 2]], &[0.0, 0.3], s).unwrap();
        assert!((l1[1][0] - (0.3 + s)).abs() < 1e-15);
    }

    #[test]
    fn mixed_weights_increase_with_level() {
        let w = lambda_mixed(&chain_model(), 0.01, DEFAULT_SLACK).unwrap();
        assert!((w.lambda[0] - 1.0).abs() < 1e-14);
        assert!(w.lambda[0] < w.lambda[1] && w.lambda[1] < w.lambda[2]);
    }

    #[test]
    fn zero_exponent_has_zero_drift() {
        let m = preset(PresetFamily::Osc3, 1.3, 0.6).unwrap();
        let w = LyapunovWeights::unit(&m, Mode::Power, 0.0).unwrap();
        for i in 0..2 {
            assert_eq!(drift_power(&m, &w, 50.0, i).unwrap().value, 0.0);
        }
    }

    #[test]
    fn r_flat_at_zero_is_minus_one() {
        for a in [0.3, 0.7] {
            assert!((r_flat(Flat::One, a, 0.0).unwrap() + 1.0).abs() < 1e-12);
        }
        for a in [0.5, 1.5] {
            assert!((r_flat(Flat::Sym, a, 0.0).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn r_flat_slope_is_cotangent() {
        let a = 0.35;
        let s = |nu: f64| (r_flat(Flat::One, a, nu).unwrap() + 1.0) / nu;
        let rich = 2.0 * s(1e-5) - s(2e-5);
        assert!((rich - PI * cot_pi_ref(a)).abs() < 1e-5);
        let s = |nu: f64| (r_flat(Flat::Sym, 1.3, nu).unwrap() + 1.0) / nu;
        let rich = 2.0 * s(1e-5) - s(2e-5);
        assert!((rich - PI * cot_pi_ref(0.65)).abs() < 1e-5);
    }

    #[test]
    fn unit_weights_coefficient_uses_c_flat() {
        let m = preset(PresetFamily::Sym, 1.5, 1.5).unwrap();
        let w = LyapunovWeights::unit(&m, Mode::Power, 0.2).unwrap();
        let c = crate::classifier::c_flat(Flat::Sym, 0.2, 1.5).unwrap();
        assert!((drift_asymptotic(&m, &w, 0).unwrap() - 0.5 * 1.5 * c).abs() < 1e-12);
    }

    #[test]
    fn critical_weights_mixed_boundary() {
        let m = preset(PresetFamily::Osc3, 1.2, 0.4).unwrap();
        assert!((cot_pi_ref(0.6) + cot_pi_ref(0.4)).abs() < 1e-15);
        let w = solve_crit_lambda(&m).unwrap();
        assert!(crit_residual(&m, &w).unwrap() < 1e-10);
        assert!(w.lambda.iter().all(|&l| l >= 1.0));
    }

    #[test]
    fn critical_weights_constant_when_cot_vanishes() {
        let m = preset(PresetFamily::Osc1, 0.5, 0.5).unwrap();
        assert_eq!(solve_crit_lambda(&m).unwrap().lambda, vec![1.0, 1.0]);
    }

    #[test]
    fn log_drift_matches_g_estimate_symmetric() {
        let a = 0.6;
        let m = preset(PresetFamily::Sym, a, a).unwrap();
        let w = LyapunovWeights::unit(&m, Mode::Log, 0.0).unwrap();
        let x: f64 = 1e5;
        let got = drift_log(&m, &w, x, 0).unwrap().value * x.powf(a);
        let expected = 0.5 * a * (PI / a) * cot_pi_ref(a / 2.0);
        assert!((got / expected - 1.0).abs() < 0.02, "{got} vs {expected}");
    }

    #[test]
    fn one_sided_heavy_branch_has_negative_drift() {
        let m = preset(PresetFamily::Osc1, 1.4, 1.4).unwrap();
        let w = LyapunovWeights::unit(&m, Mode::Power, 0.5).unwrap();
        for x in [1e3, 1e4, 1e5, 1e6] {
            assert!(drift_power(&m, &w, x, 0).unwrap().value < 0.0);
        }
    }

    #[test]
    fn feasible_nu_tracks_nu0() {
        let m = preset(PresetFamily::Sym, 1.5, 1.5).unwrap();
        let nu = max_feasible_nu(&m).unwrap();
        assert!(nu > 0.5 - 2.0 * NU_RESOLUTION && nu < 0.5);
        let t = preset(PresetFamily::Sym, 0.8, 0.8).unwrap();
        assert!(matches!(max_feasible_nu(&t), Err(Error::WrongRegime(_))));
    }
}

//! Walk specification on a complex of half-lines: branches, jump densities,
//! routing, validation and the stationary routing distribution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of branches in a complex.
pub const MAX_BRANCHES: usize = 64;

/// Tolerance on routing row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    /// Jumps always point toward the origin.
    OneSided,
    /// Jumps are symmetric about the current position.
    Symmetric,
}

impl BranchKind {
    /// The branch-type constant χ: 1 for one-sided, ½ for symmetric.
    pub fn chi(self) -> f64 {
        match self {
            BranchKind::OneSided => 1.0,
            BranchKind::Symmetric => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchKind::OneSided => "one_sided",
            BranchKind::Symmetric => "symmetric",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "one_sided" => Some(BranchKind::OneSided),
            "symmetric" => Some(BranchKind::Symmetric),
            _ => None,
        }
    }
}

/// A jump-magnitude density v(y) = c(y) y^{-1-α} on (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TailDensity {
    /// v(y) = α (1 + y)^{-1-α}.
    ShiftedPareto { alpha: f64 },
    /// v(y) = α y₀^α y^{-1-α} for y > y₀, zero below.
    CutoffPareto { alpha: f64, y0: f64 },
}

impl TailDensity {
    pub fn shifted_pareto(alpha: f64) -> Self {
        TailDensity::ShiftedPareto { alpha }
    }

    pub fn cutoff_pareto(alpha: f64, y0: f64) -> Self {
        TailDensity::CutoffPareto { alpha, y0 }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            TailDensity::ShiftedPareto { .. } => "shifted_pareto",
            TailDensity::CutoffPareto { .. } => "cutoff_pareto",
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { alpha } | TailDensity::CutoffPareto { alpha, .. } => alpha,
        }
    }

    /// The limit c = lim c(y).
    pub fn c_const(&self) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { alpha } => alpha,
            TailDensity::CutoffPareto { alpha, y0 } => alpha * y0.powf(alpha),
        }
    }

    /// Rate δ in c(y) = c + O(y^{-δ}).
    pub fn delta(&self) -> f64 {
        1.0
    }

    /// Whether c(y) converges to c at a polynomial rate. Both built-in
    /// families do.
    pub fn is_d_plus(&self) -> bool {
        true
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { .. } => 0.0,
            TailDensity::CutoffPareto { y0, .. } => y0,
        }
    }

    /// v(y) for y > 0.
    pub fn density(&self, y: f64) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { alpha } => alpha * (-(1.0 + alpha) * y.ln_1p()).exp(),
            TailDensity::CutoffPareto { alpha, y0 } => {
                if y > y0 {
                    alpha / y0 * (y0 / y).powf(1.0 + alpha)
                } else {
                    0.0
                }
            }
        }
    }

    /// c(y) = v(y) y^{1+α}.
    pub fn c_of_y(&self, y: f64) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { alpha } => alpha * (y / (1.0 + y)).powf(1.0 + alpha),
            TailDensity::CutoffPareto { alpha, y0 } => {
                if y > y0 {
                    alpha * y0.powf(alpha)
                } else {
                    0.0
                }
            }
        }
    }

    /// Tail mass T(x) = ∫_x^∞ v(y) dy for x ≥ 0.
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { alpha } => (-alpha * x.max(0.0).ln_1p()).exp(),
            TailDensity::CutoffPareto { alpha, y0 } => {
                if x > y0 {
                    (y0 / x).powf(alpha)
                } else {
                    1.0
                }
            }
        }
    }

    /// Tail quantile: the y with T(y) = u, for u in (0, 1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        Ok(self.quantile_unchecked(u))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        match *self {
            TailDensity::ShiftedPareto { alpha } => (-u.ln() / alpha).exp_m1(),
            TailDensity::CutoffPareto { alpha, y0 } => y0 * (-u.ln() / alpha).exp(),
        }
    }
}

/// v(y); see [`TailDensity::density`].
pub fn density_eval(d: &TailDensity, y: f64) -> f64 {
    d.density(y)
}

/// T(x); see [`TailDensity::tail`].
#[allow(non_snake_case)]
pub fn tail_T(d: &TailDensity, x: f64) -> f64 {
    d.tail(x)
}

/// Tail quantile; see [`TailDensity::quantile`].
pub fn quantile(d: &TailDensity, u: f64) -> Result<f64> {
    d.quantile(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub id: String,
    pub kind: BranchKind,
    pub density: TailDensity,
}

impl BranchSpec {
    pub fn chi(&self) -> f64 {
        self.kind.chi()
    }

    pub fn alpha(&self) -> f64 {
        self.density.alpha()
    }

    pub fn chi_alpha(&self) -> f64 {
        self.chi() * self.alpha()
    }
}

/// Unvalidated model description, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawModel {
    pub branches: Vec<RawBranch>,
    pub routing: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBranch {
    pub id: String,
    pub kind: String,
    pub family: String,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
}

/// A validated walk specification. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexModel {
    branches: Vec<BranchSpec>,
    routing: Vec<Vec<f64>>,
}

impl ComplexModel {
    /// Build and validate from parts.
    pub fn new(branches: Vec<BranchSpec>, routing: Vec<Vec<f64>>) -> Result<Self> {
        validate(&RawModel {
            branches: branches
                .iter()
                .map(|b| RawBranch {
                    id: b.id.clone(),
                    kind: b.kind.name().to_string(),
                    family: b.density.family_name().to_string(),
                    alpha: b.alpha(),
                    y0: match b.density {
                        TailDensity::CutoffPareto { y0, .. } => Some(y0),
                        TailDensity::ShiftedPareto { .. } => None,
                    },
                })
                .collect(),
            routing,
        })
    }

    /// Parse JSON and validate.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)
            .map_err(|e| Error::Validation(vec![format!("malformed model file: {e}")]))?;
        validate(&raw)
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            branches: self
                .branches
                .iter()
                .map(|b| RawBranch {
                    id: b.id.clone(),
                    kind: b.kind.name().to_string(),
                    family: b.density.family_name().to_string(),
                    alpha: b.alpha(),
                    y0: match b.density {
                        TailDensity::CutoffPareto { y0, .. } => Some(y0),
                        TailDensity::ShiftedPareto { .. } => None,
                    },
                })
                .collect(),
            routing: self.routing.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("model serializes")
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn branch(&self, i: usize) -> &BranchSpec {
        &self.branches[i]
    }

    pub fn routing(&self) -> &[Vec<f64>] {
        &self.routing
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.routing[i][j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    pub fn max_chi_alpha(&self) -> f64 {
        self.branches
            .iter()
            .map(BranchSpec::chi_alpha)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Replace the densities, keeping kinds and routing.
    pub fn with_densities(&self, densities: &[TailDensity]) -> Result<Self> {
        let branches = self
            .branches
            .iter()
            .zip(densities)
            .map(|(b, d)| BranchSpec {
                id: b.id.clone(),
                kind: b.kind,
                density: *d,
            })
            .collect();
        ComplexModel::new(branches, self.routing.clone())
    }
}

/// Validate a raw specification, reporting every violated invariant.
pub fn validate(raw: &RawModel) -> Result<ComplexModel> {
    let mut errs = Vec::new();
    let n = raw.branches.len();
    if n == 0 {
        errs.push("model has no branches".to_string());
    }
    if n > MAX_BRANCHES {
        errs.push(format!("model has {n} branches; at most {MAX_BRANCHES} are supported"));
    }
    let mut branches = Vec::with_capacity(n);
    for (i, b) in raw.branches.iter().enumerate() {
        if raw.branches[..i].iter().any(|o| o.id == b.id) {
            errs.push(format!("duplicate branch id '{}'", b.id));
        }
        let kind = BranchKind::parse(&b.kind);
        if kind.is_none() {
            errs.push(format!("branch '{}': unknown kind '{}'", b.id, b.kind));
        }
        if !(b.alpha > 0.0) || !b.alpha.is_finite() {
            errs.push(format!("branch '{}': alpha must be positive, got {}", b.id, b.alpha));
        }
        let density = match b.family.as_str() {
            "shifted_pareto" => {
                if b.y0.is_some() {
                    errs.push(format!("branch '{}': y0 only applies to cutoff_pareto", b.id));
                }
                Some(TailDensity::ShiftedPareto { alpha: b.alpha })
            }
            "cutoff_pareto" => match b.y0 {
                Some(y0) if y0 > 0.0 && y0.is_finite() => {
                    Some(TailDensity::CutoffPareto { alpha: b.alpha, y0 })
                }
                Some(y0) => {
                    errs.push(format!("branch '{}': y0 must be positive, got {y0}", b.id));
                    None
                }
                None => {
                    errs.push(format!("branch '{}': cutoff_pareto needs y0", b.id));
                    None
                }
            },
            other => {
                errs.push(format!("branch '{}': unknown family '{other}'", b.id));
                None
            }
        };
        if let (Some(kind), Some(density)) = (kind, density) {
            branches.push(BranchSpec {
                id: b.id.clone(),
                kind,
                density,
            });
        }
    }
    let p = &raw.routing;
    let square = p.len() == n && p.iter().all(|r| r.len() == n);
    if !square {
        errs.push(format!("routing must be a {n}x{n} matrix"));
    } else {
        for (i, row) in p.iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                errs.push(format!("routing row {i} has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                errs.push(format!("routing row {i} not stochastic (sums to {s})"));
            }
        }
        if n > 0 && !strongly_connected(p) {
            errs.push("routing is reducible (positive entries are not strongly connected)".into());
        }
    }
    if errs.is_empty() {
        Ok(ComplexModel {
            branches,
            routing: p.clone(),
        })
    } else {
        Err(Error::Validation(errs))
    }
}

#[allow(clippy::needless_range_loop)]
fn reach_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    reach_all(n, |i, j| p[i][j] > 0.0) && reach_all(n, |i, j| p[j][i] > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub mu: Vec<f64>,
}

/// Solve μᵀP = μᵀ, Σμ = 1 for a validated (irreducible) model.
pub fn stationary_distribution(model: &ComplexModel) -> Result<StationaryDistribution> {
    let mu = stationary_of(model.routing())?;
    Ok(StationaryDistribution { mu })
}

pub(crate) fn stationary_of(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    // Rows of (Pᵀ - I), last one replaced by the normalization.
    let a = DMatrix::from_fn(n, n, |r, c| {
        if r == n - 1 {
            1.0
        } else {
            p[c][r] - if r == c { 1.0 } else { 0.0 }
        }
    });
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut mu = lu
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("singular stationary system", f64::NAN, f64::NAN))?;
    // One step of iterative refinement.
    let r = &rhs - &a * &mu;
    if let Some(d) = lu.solve(&r) {
        mu += d;
    }
    let total: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|v| v / total).collect();
    let resid = stationary_residual(p, &mu);
    if resid >= 1e-12 || mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::numeric(
            format!("stationary solve inaccurate (residual {resid:e})"),
            resid,
            resid,
        ));
    }
    Ok(mu)
}

/// ‖μᵀP − μᵀ‖∞.
pub fn stationary_residual(p: &[Vec<f64>], mu: &[f64]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|k| ((0..n).map(|j| mu[j] * p[j][k]).sum::<f64>() - mu[k]).abs())
        .fold(0.0, f64::max)
}

/// Two-branch walks folded onto the real line.
pub mod presets {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
    #[serde(rename_all = "snake_case")]
    pub enum PresetFamily {
        /// Symmetric increments with a common exponent on both sides.
        Sym,
        /// One-sided jumps toward the origin, exponents α (plus) and β (minus).
        Osc1,
        /// Symmetric jumps, exponents α (plus) and β (minus).
        Osc2,
        /// Symmetric on the plus side (α), one-sided on the minus side (β).
        Osc3,
    }

    impl PresetFamily {
        pub fn parse(s: &str) -> Option<Self> {
            match s {
                "sym" => Some(PresetFamily::Sym),
                "osc1" => Some(PresetFamily::Osc1),
                "osc2" => Some(PresetFamily::Osc2),
                "osc3" => Some(PresetFamily::Osc3),
                _ => None,
            }
        }

        pub fn name(self) -> &'static str {
            match self {
                PresetFamily::Sym => "sym",
                PresetFamily::Osc1 => "osc1",
                PresetFamily::Osc2 => "osc2",
                PresetFamily::Osc3 => "osc3",
            }
        }

        pub fn kinds(self) -> (BranchKind, BranchKind) {
            match self {
                PresetFamily::Sym | PresetFamily::Osc2 => (BranchKind::Symmetric, BranchKind::Symmetric),
                PresetFamily::Osc1 => (BranchKind::OneSided, BranchKind::OneSided),
                PresetFamily::Osc3 => (BranchKind::Symmetric, BranchKind::OneSided),
            }
        }
    }

    /// Two branches "plus" and "minus" with swap routing. For `Sym`, `beta`
    /// is ignored and both sides use `alpha`.
    pub fn preset(family: PresetFamily, alpha: f64, beta: f64) -> Result<ComplexModel> {
        let beta = if family == PresetFamily::Sym { alpha } else { beta };
        preset_with(
            family,
            TailDensity::shifted_pareto(alpha),
            TailDensity::shifted_pareto(beta),
        )
    }

    pub fn preset_with(
        family: PresetFamily,
        plus: TailDensity,
        minus: TailDensity,
    ) -> Result<ComplexModel> {
        let (kp, km) = family.kinds();
        ComplexModel::new(
            vec![
                BranchSpec {
                    id: "plus".into(),
                    kind: kp,
                    density: plus,
                },
                BranchSpec {
                    id: "minus".into(),
                    kind: km,
                    density: minus,
                },
            ],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
    }
}

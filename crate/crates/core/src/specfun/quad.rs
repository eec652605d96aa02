//! Adaptive Gauss–Kronrod quadrature with endpoint substitutions for
//! integrable algebraic or logarithmic singularities and infinite ranges.
//!
//! Substitutions only map the integration variable; the integrand still
//! receives the original coordinate `u`. Callers that need full precision
//! next to a singular endpoint should place that endpoint at 0, where
//! floating point can resolve `u` arbitrarily close to it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local behaviour of the integrand at one end of the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Endpoint {
    /// Bounded and smooth up to the endpoint.
    #[default]
    Regular,
    /// Behaves like `|u - e|^beta` with `beta > -1`, possibly times a log.
    Power(f64),
    /// Logarithmic singularity.
    Log,
    /// Infinite endpoint with integrand decaying like `u^{-1-kappa}`,
    /// `kappa > 0`.
    Decay(f64),
}

/// Endpoint behaviour at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Endpoints {
    pub lower: Endpoint,
    pub upper: Endpoint,
}

impl Endpoints {
    pub fn new(lower: Endpoint, upper: Endpoint) -> Self {
        Self { lower, upper }
    }

    pub fn regular() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_evals: 1_000_000,
        }
    }
}

impl QuadOptions {
    /// Tight tolerances for closed-form cross-checks.
    pub fn precise() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_evals: 1_000_000,
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    /// Sum of two results over disjoint ranges.
    pub fn combine(self, other: QuadratureResult) -> QuadratureResult {
        QuadratureResult {
            value: self.value + other.value,
            abs_error_estimate: self.abs_error_estimate + other.abs_error_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// Integrate `f` over `[lower, upper]`, where `upper` may be `+∞`.
pub fn quad_improper<F>(
    f: F,
    lower: f64,
    upper: f64,
    ends: Endpoints,
    opts: &QuadOptions,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    quad_segments(f, &[lower, upper], ends, opts)
}

/// Integrate `f` over consecutive segments separated by `points`.
///
/// `points` must be strictly increasing; the last entry may be `+∞`.
/// Interior breakpoints are treated as regular endpoints of their
/// neighbouring segments.
pub fn quad_segments<F>(
    f: F,
    points: &[f64],
    ends: Endpoints,
    opts: &QuadOptions,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if points.len() < 2 {
        return Err(Error::domain("quadrature needs at least two points"));
    }
    for w in points.windows(2) {
        if !(w[0] < w[1]) || w[0].is_nan() || w[0].is_infinite() {
            return Err(Error::domain(format!(
                "quadrature points must be finite and increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let n = points.len() - 1;
    let mut pieces: Vec<Piece<'_>> = Vec::new();
    let f: &dyn Fn(f64) -> f64 = &f;
    for k in 0..n {
        let lo_end = if k == 0 { ends.lower } else { Endpoint::Regular };
        let hi_end = if k == n - 1 { ends.upper } else { Endpoint::Regular };
        push_segment(&mut pieces, Box::new(f), points[k], points[k + 1], lo_end, hi_end)?;
    }
    adaptive(&pieces, opts)
}

type Integrand<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

struct Piece<'a> {
    g: Integrand<'a>,
    a: f64,
    b: f64,
}

fn check_endpoint(e: Endpoint, infinite: bool) -> Result<()> {
    match e {
        Endpoint::Power(beta) if !(beta > -1.0) => Err(Error::domain(format!(
            "endpoint exponent {beta} is not integrable"
        ))),
        Endpoint::Decay(kappa) if !(kappa > 0.0) => Err(Error::domain(format!(
            "decay exponent {kappa} is not integrable"
        ))),
        Endpoint::Decay(_) if !infinite => Err(Error::domain(
            "decay behaviour only applies to an infinite endpoint",
        )),
        _ => Ok(()),
    }
}

/// Substitution power for an endpoint, or `None` if no substitution helps.
fn substitution_power(e: Endpoint) -> Option<f64> {
    match e {
        Endpoint::Power(beta) if beta < 0.0 => Some(2.0 / (1.0 + beta)),
        Endpoint::Log => Some(2.0),
        _ => None,
    }
}

fn push_segment<'a>(
    out: &mut Vec<Piece<'a>>,
    f: Integrand<'a>,
    a: f64,
    b: f64,
    lo_end: Endpoint,
    hi_end: Endpoint,
) -> Result<()> {
    check_endpoint(lo_end, false)?;
    check_endpoint(hi_end, b.is_infinite())?;
    if b.is_infinite() {
        if a <= 0.0 {
            let f = std::rc::Rc::new(f);
            let f1 = f.clone();
            push_segment(out, Box::new(move |u| (*f1)(u)), a, 1.0, lo_end, Endpoint::Regular)?;
            return push_segment(out, Box::new(move |u| (*f)(u)), 1.0, b, Endpoint::Regular, hi_end);
        }
        // u = a / v maps [a, ∞) onto (0, 1]
        let v_lower = match hi_end {
            Endpoint::Decay(kappa) => Endpoint::Power(kappa - 1.0),
            Endpoint::Regular => Endpoint::Regular,
            other => other,
        };
        let g: Integrand<'a> = Box::new(move |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let u = a / v;
            f(u) * u / v
        });
        return push_segment(out, g, 0.0, 1.0, v_lower, lo_end);
    }
    let p_lo = substitution_power(lo_end);
    let p_hi = substitution_power(hi_end);
    match (p_lo, p_hi) {
        (Some(_), Some(_)) => {
            let m = 0.5 * (a + b);
            let f = std::rc::Rc::new(f);
            let f1 = f.clone();
            push_segment(out, Box::new(move |u| (*f1)(u)), a, m, lo_end, Endpoint::Regular)?;
            push_segment(out, Box::new(move |u| (*f)(u)), m, b, Endpoint::Regular, hi_end)
        }
        (Some(p), None) => {
            let h = b - a;
            out.push(Piece {
                g: Box::new(move |t: f64| {
                    let tp = t.powf(p);
                    f(a + h * tp) * h * p * tp / t
                }),
                a: 0.0,
                b: 1.0,
            });
            Ok(())
        }
        (None, Some(p)) => {
            let h = b - a;
            out.push(Piece {
                g: Box::new(move |t: f64| {
                    let tp = t.powf(p);
                    f(b - h * tp) * h * p * tp / t
                }),
                a: 0.0,
                b: 1.0,
            });
            Ok(())
        }
        (None, None) => {
            out.push(Piece { g: f, a, b });
            Ok(())
        }
    }
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[inline]
fn eval(g: &dyn Fn(f64) -> f64, u: f64) -> f64 {
    let v = g(u);
    // Non-finite values only arise when a substituted node rounds onto a
    // singular endpoint, where the transformed integrand tends to zero.
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// One G7/K15 panel: (Kronrod estimate, |K - G|).
fn gk15(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = eval(g, c);
    let mut k = fc * WGK[7];
    let mut gs = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = eval(g, c - dx) + eval(g, c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            gs += WG[j / 2] * s;
        }
    }
    (k * h, ((k - gs) * h).abs())
}

struct Panel {
    piece: usize,
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn adaptive(pieces: &[Piece<'_>], opts: &QuadOptions) -> Result<QuadratureResult> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut value = 0.0;
    let mut err = 0.0;
    // Panels too narrow to split further.
    let mut frozen = QuadratureResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };
    for (i, p) in pieces.iter().enumerate() {
        let (v, e) = gk15(&*p.g, p.a, p.b);
        evals += 15;
        value += v;
        err += e;
        heap.push(Panel {
            piece: i,
            a: p.a,
            b: p.b,
            value: v,
            err: e,
        });
    }
    let mut iter = 0usize;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if err <= tol {
            break;
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::numeric(
                format!("quadrature did not reach tolerance {tol:e} within {evals} evaluations"),
                value,
                err,
            ));
        }
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            frozen.value += worst.value;
            frozen.abs_error_estimate += worst.err;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let g = &*pieces[worst.piece].g;
        let (v1, e1) = gk15(g, worst.a, m);
        let (v2, e2) = gk15(g, m, worst.b);
        evals += 30;
        value += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Panel {
            piece: worst.piece,
            a: worst.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            piece: worst.piece,
            a: m,
            b: worst.b,
            value: v2,
            err: e2,
        });
        iter += 1;
        if iter.is_multiple_of(64) {
            // Refresh running sums to keep cancellation from accumulating.
            value = frozen.value + heap.iter().map(|p| p.value).sum::<f64>();
            err = frozen.abs_error_estimate + heap.iter().map(|p| p.err).sum::<f64>();
        }
    }
    let value = frozen.value + heap.iter().map(|p| p.value).sum::<f64>();
    let err = frozen.abs_error_estimate + heap.iter().map(|p| p.err).sum::<f64>();
    let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
    if err > tol {
        return Err(Error::numeric(
            "quadrature panels could not be refined further",
            value,
            err,
        ));
    }
    Ok(QuadratureResult {
        value,
        abs_error_estimate: err,
        evaluations: evals,
    })
}

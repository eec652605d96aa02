//! Nearest-neighbour walks on ℤ² whose traces on the horizontal axis are
//! discrete oscillating walks, and tail fits of the embedded jumps.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{open_uniform, stream_rng, Estimator, TailFit};
use crate::specfun::ln_gamma;

/// Lattice steps allowed between two axis returns before censoring.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;
/// Minimum sample size for an embedded tail fit.
pub const MIN_EMBEDDED: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeVariant {
    /// Axis points leave upward for x₁ > 0, downward for x₁ < 0, either way at 0.
    Example41,
    /// Axis points leave up or down with probability ½ each.
    Example42a,
    /// As `Example42a` for x₁ ≥ 0, always downward for x₁ < 0.
    Example42b,
}

impl LatticeVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "example41" => Some(LatticeVariant::Example41),
            "example42a" => Some(LatticeVariant::Example42a),
            "example42b" => Some(LatticeVariant::Example42b),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatticeVariant::Example41 => "example41",
            LatticeVariant::Example42a => "example42a",
            LatticeVariant::Example42b => "example42b",
        }
    }

    /// Probability of leaving the axis point (x₁, 0) upward.
    pub fn up_probability(self, x1: i64) -> f64 {
        match self {
            LatticeVariant::Example41 => match x1.signum() {
                1 => 1.0,
                -1 => 0.0,
                _ => 0.5,
            },
            LatticeVariant::Example42a => 0.5,
            LatticeVariant::Example42b => {
                if x1 >= 0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

/// One transition of the lattice walk.
pub fn lattice_step<R: RngCore + ?Sized>(variant: LatticeVariant, pos: (i64, i64), rng: &mut R) -> (i64, i64) {
    let (x1, x2) = pos;
    if x2 == 0 {
        let up = variant.up_probability(x1);
        let go_up = up >= 1.0 || (up > 0.0 && open_uniform(rng.next_u64()) < up);
        return (x1, if go_up { 1 } else { -1 });
    }
    match rng.next_u64() % 3 {
        0 => (x1, x2 + 1),
        1 => (x1, x2 - 1),
        _ => (x1 - x2.signum(), x2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedStep {
    /// x₁ at the previous axis visit.
    pub from: i64,
    /// X_{n+1} − X_n, or `None` when censored.
    pub jump: Option<i64>,
    /// +1 for an excursion above the axis, −1 below.
    pub side: i8,
    /// Lattice steps taken (the cap when censored).
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample {
    pub variant: LatticeVariant,
    pub start: i64,
    pub steps: Vec<EmbeddedStep>,
}

impl EmbeddedSample {
    pub fn jumps(&self) -> Vec<i64> {
        self.steps.iter().filter_map(|s| s.jump).collect()
    }

    pub fn n_censored(&self) -> usize {
        self.steps.iter().filter(|s| s.jump.is_none()).count()
    }
}

/// ln P(T ≥ 2m + 1) = ln(C(2m, m) 4^{−m}) for the first passage T of a
/// simple walk from 1 to 0.
fn ln_survival(m: u64) -> f64 {
    let m = m as f64;
    ln_gamma(m + 0.5).unwrap() - ln_gamma(m + 1.0).unwrap() - 0.5 * std::f64::consts::PI.ln()
}

/// First-passage time from 1 to 0 of a simple ±1 walk, by inversion.
fn first_passage<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    let lu = open_uniform(rng.next_u64()).ln();
    // Smallest m with P(T ≥ 2m + 3) < U; then T = 2m + 1.
    let (mut lo, mut hi) = (0u64, 1u64);
    while ln_survival(hi + 1) >= lu {
        lo = hi;
        hi *= 2;
        if hi >= 1 << 60 {
            break;
        }
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ln_survival(mid + 1) < lu {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    2 * lo + 1
}

/// Horizontal steps accompanying `t` vertical steps: NegBin(t, 2/3) failures.
fn horizontal_steps<R: RngCore + ?Sized>(t: u64, rng: &mut R) -> u64 {
    let g = Gamma::new(t as f64, 0.5).expect("positive shape").sample(rng);
    if !(g > 0.0) {
        return 0;
    }
    Poisson::new(g).expect("positive rate").sample(rng) as u64
}

fn check_start(start: (i64, i64)) -> Result<()> {
    if start.1 != 0 {
        return Err(Error::domain(format!(
            "embedded chains start on the axis, got x2 = {}",
            start.1
        )));
    }
    Ok(())
}

/// Embedded chain of x₁ at successive axis returns, sampled one excursion
/// at a time. A censored excursion restarts the chain at `start`.
pub fn extract_embedded<R: RngCore + ?Sized>(
    variant: LatticeVariant,
    start: (i64, i64),
    n_returns: usize,
    step_cap: u64,
    rng: &mut R,
) -> Result<EmbeddedSample> {
    check_start(start)?;
    if n_returns == 0 {
        return Err(Error::domain("need at least one return"));
    }
    let mut x = start.0;
    let mut steps = Vec::with_capacity(n_returns);
    for _ in 0..n_returns {
        let up = variant.up_probability(x);
        let side: i8 = if up >= 1.0 || (up > 0.0 && rng.random::<f64>() < up) { 1 } else { -1 };
        let t = first_passage(rng);
        let total = if t >= step_cap { u64::MAX } else { 1 + t + horizontal_steps(t, rng) };
        if total > step_cap {
            steps.push(EmbeddedStep {
                from: x,
                jump: None,
                side,
                steps: step_cap,
            });
            x = start.0;
            continue;
        }
        let h = (total - 1 - t) as i64;
        let jump = -(side as i64) * h;
        steps.push(EmbeddedStep {
            from: x,
            jump: Some(jump),
            side,
            steps: total,
        });
        x += jump;
    }
    Ok(EmbeddedSample {
        variant,
        start: start.0,
        steps,
    })
}

/// Same chain by direct simulation of every lattice step.
pub fn extract_embedded_direct<R: RngCore + ?Sized>(
    variant: LatticeVariant,
    start: (i64, i64),
    n_returns: usize,
    step_cap: u64,
    rng: &mut R,
) -> Result<EmbeddedSample> {
    check_start(start)?;
    let mut x = start.0;
    let mut steps = Vec::with_capacity(n_returns);
    for _ in 0..n_returns {
        let mut pos = lattice_step(variant, (x, 0), rng);
        let side: i8 = pos.1.signum() as i8;
        let mut n = 1u64;
        while pos.1 != 0 && n < step_cap {
            pos = lattice_step(variant, pos, rng);
            n += 1;
        }
        if pos.1 != 0 {
            steps.push(EmbeddedStep {
                from: x,
                jump: None,
                side,
                steps: step_cap,
            });
            x = start.0;
            continue;
        }
        steps.push(EmbeddedStep {
            from: x,
            jump: Some(pos.0 - x),
            side,
            steps: n,
        });
        x = pos.0;
    }
    Ok(EmbeddedSample {
        variant,
        start: start.0,
        steps,
    })
}

/// Lower end of the embedded-tail fit range.
pub const FIT_LOW: f64 = 1e3;

/// Log-log CCDF slope of |jump| over the decades from [`FIT_LOW`] up to
/// the last level with at least 100 exceedances (at most cap/10).
pub fn fit_embedded_tail(sample: &EmbeddedSample, step_cap: u64) -> Result<TailFit> {
    let n = sample.steps.len();
    if n < MIN_EMBEDDED {
        return Err(Error::InsufficientData {
            needed: MIN_EMBEDDED,
            have: n,
        });
    }
    let big = step_cap as f64;
    // Censored excursions exceed every fitted level.
    let mags: Vec<(f64, bool)> = sample
        .steps
        .iter()
        .map(|s| match s.jump {
            Some(j) => (j.unsigned_abs() as f64, false),
            None => (big, true),
        })
        .collect();
    let (slope, se) = ccdf_fit(&mags, FIT_LOW, big / 10.0, 100)?;
    Ok(TailFit {
        estimator: Estimator::LoglogCcdf,
        exponent: slope,
        stderr: se,
        k_order: 0,
        n_samples: n,
        n_censored: sample.n_censored(),
    })
}

/// Least-squares slope (negated) and its standard error of ln P(T > t) on
/// ln t, over log-spaced levels in [lo, min(cap, level with `min_above`
/// exceedances)].
pub fn ccdf_fit(samples: &[(f64, bool)], lo: f64, cap: f64, min_above: usize) -> Result<(f64, f64)> {
    let n = samples.len();
    let mut t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let hi = t[n.saturating_sub(min_above)].min(cap);
    if !(hi > lo * 10.0) {
        return Err(Error::InsufficientData { needed: 2, have: 1 });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut level = lo;
    while level <= hi * (1.0 + 1e-12) {
        let above = n - t.partition_point(|&v| v <= level);
        xs.push(level.ln());
        ys.push((above as f64 / n as f64).ln());
        level *= 10f64.powf(0.1);
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - b * (x - mx)).powi(2)).sum();
    let se = (rss / (m - 2.0).max(1.0) / sxx).sqrt();
    Ok((-b, se))
}

/// Embedded tail fit on one side: jumps from x > 0 (`positive`) or x < 0.
pub fn fit_embedded_side(sample: &EmbeddedSample, positive: bool, step_cap: u64) -> Result<TailFit> {
    let steps: Vec<EmbeddedStep> = sample
        .steps
        .iter()
        .copied()
        .filter(|s| if positive { s.from > 0 } else { s.from < 0 })
        .collect();
    fit_embedded_tail(
        &EmbeddedSample {
            variant: sample.variant,
            start: sample.start,
            steps,
        },
        step_cap,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedProbe {
    pub horizons: Vec<usize>,
    pub median_abs_x: Vec<f64>,
}

/// Median |X_H| of the embedded chain over independent replicas; replica
/// `r` uses stream `r` of `seed`.
pub fn probe_embedded(
    variant: LatticeVariant,
    replicas: usize,
    horizons: &[usize],
    step_cap: u64,
    seed: u64,
) -> Result<EmbeddedProbe> {
    let hmax = *horizons.iter().max().ok_or_else(|| Error::domain("no horizons"))?;
    let paths: Vec<Vec<i64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let s = extract_embedded(variant, (0, 0), hmax, step_cap, &mut rng)?;
            let mut x = 0i64;
            let mut pos = Vec::with_capacity(hmax);
            for st in &s.steps {
                x = match st.jump {
                    Some(j) => x + j,
                    None => 0,
                };
                pos.push(x);
            }
            Ok(pos)
        })
        .collect::<Result<_>>()?;
    let median_abs_x = horizons
        .iter()
        .map(|&h| {
            let mut v: Vec<f64> = paths.iter().map(|p| p[h - 1].unsigned_abs() as f64).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        })
        .collect();
    Ok(EmbeddedProbe {
        horizons: horizons.to_vec(),
        median_abs_x,
    })
}

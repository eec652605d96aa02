//! Exact simulation of the walk, excursion/return-time measurement, tail
//! index estimation and empirical drift checks.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{drift_log, drift_power, drift_sqrtlog, LyapunovWeights, Mode};
use crate::model::{BranchKind, ComplexModel, TailDensity};

/// Minimum number of uncensored excursions for a tail fit.
pub const MIN_UNCENSORED: usize = 100;
/// Bootstrap resamples for tail-fit standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Stream reserved for bootstrap resampling.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval (0, 1) from the top 52 bits.
#[inline]
pub fn open_uniform(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkState {
    pub x: f64,
    pub branch: usize,
}

impl WalkState {
    pub fn new(x: f64, branch: usize) -> Self {
        Self { x, branch }
    }
}

struct BranchSampler {
    one_sided: bool,
    density: TailDensity,
    cum: Vec<f64>,
}

/// Precomputed transition kernel of a model.
pub struct Kernel {
    branches: Vec<BranchSampler>,
}

impl Kernel {
    pub fn new(model: &ComplexModel) -> Self {
        let branches = model
            .branches()
            .iter()
            .zip(model.routing())
            .map(|(b, row)| {
                let mut acc = 0.0;
                let cum = row
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                BranchSampler {
                    one_sided: b.kind == BranchKind::OneSided,
                    density: b.density,
                    cum,
                }
            })
            .collect();
        Self { branches }
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// One transition from `s`.
    #[inline]
    pub fn step<R: RngCore + ?Sized>(&self, s: WalkState, rng: &mut R) -> WalkState {
        let b = &self.branches[s.branch];
        let bits = rng.next_u64();
        let y = b.density.quantile_unchecked(open_uniform(bits));
        let phi = if b.one_sided || bits & 1 == 0 { -y } else { y };
        let z = s.x + phi;
        if z >= 0.0 {
            return WalkState::new(z, s.branch);
        }
        let u = open_uniform(rng.next_u64());
        let last = b.cum.len() - 1;
        let eta = b.cum.iter().position(|&c| u < c).unwrap_or(last);
        WalkState::new(-z, eta)
    }
}

/// One transition; builds a kernel on each call, so prefer [`Kernel`] in loops.
pub fn step<R: RngCore + ?Sized>(model: &ComplexModel, s: WalkState, rng: &mut R) -> WalkState {
    Kernel::new(model).step(s, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    pub start: WalkState,
    /// Return time τ_a, or the horizon when censored.
    pub tau: u64,
    pub censored: bool,
    pub max_x: f64,
    pub end: WalkState,
}

fn check_start(model: &ComplexModel, start: WalkState, a: f64) -> Result<()> {
    if start.branch >= model.len() {
        return Err(Error::domain(format!("start branch {} out of range", start.branch)));
    }
    if !(start.x > a) {
        return Err(Error::domain(format!(
            "start position {} must exceed the return level {a}",
            start.x
        )));
    }
    Ok(())
}

fn excursion_with<R: RngCore>(kernel: &Kernel, start: WalkState, a: f64, horizon: u64, rng: &mut R) -> ExcursionRecord {
    let mut s = start;
    let mut max_x = start.x;
    let mut n = 0;
    while n < horizon {
        s = kernel.step(s, rng);
        n += 1;
        if s.x > max_x {
            max_x = s.x;
        }
        if s.x <= a {
            return ExcursionRecord {
                start,
                tau: n,
                censored: false,
                max_x,
                end: s,
            };
        }
    }
    ExcursionRecord {
        start,
        tau: horizon,
        censored: true,
        max_x,
        end: s,
    }
}

/// Run until X_n ≤ a or the horizon is reached.
pub fn run_excursion<R: RngCore>(
    model: &ComplexModel,
    start: WalkState,
    a: f64,
    horizon: u64,
    rng: &mut R,
) -> Result<ExcursionRecord> {
    check_start(model, start, a)?;
    Ok(excursion_with(&Kernel::new(model), start, a, horizon, rng))
}

/// `n` independent excursions; excursion `i` uses stream `i` of `seed`.
pub fn run_excursions(
    model: &ComplexModel,
    start: WalkState,
    a: f64,
    horizon: u64,
    n: usize,
    seed: u64,
) -> Result<Vec<ExcursionRecord>> {
    check_start(model, start, a)?;
    let kernel = Kernel::new(model);
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| excursion_with(&kernel, start, a, horizon, &mut stream_rng(seed, i)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Hill,
    LoglogCcdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub estimator: Estimator,
    pub exponent: f64,
    pub stderr: f64,
    pub k_order: usize,
    pub n_samples: usize,
    pub n_censored: usize,
}

/// Hill estimate over the top `k` of `(value, censored)` samples, with
/// censored values counted in the log-excess sum but not as exceedances.
pub fn hill_censored(samples: &[(f64, bool)], k: usize) -> Result<f64> {
    let n = samples.len();
    if k == 0 || k >= n {
        return Err(Error::InsufficientData { needed: k + 1, have: n });
    }
    let mut v: Vec<(f64, bool)> = samples.to_vec();
    // Top k in v[n-k..], threshold at v[n-k-1].
    v.select_nth_unstable_by(n - k - 1, |a, b| a.0.partial_cmp(&b.0).unwrap());
    let u = v[n - k - 1].0;
    if !(u > 0.0) {
        return Err(Error::domain("Hill threshold must be positive"));
    }
    let lu = u.ln();
    let mut sum = 0.0;
    let mut hits = 0usize;
    for &(t, c) in &v[n - k..] {
        sum += t.ln() - lu;
        if !c {
            hits += 1;
        }
    }
    if hits == 0 || !(sum > 0.0) {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    Ok(hits as f64 / sum)
}

/// Slope of log P(T > t) against log t over the upper decade below
/// `cap`, negated.
pub fn loglog_ccdf_slope(samples: &[(f64, bool)], cap: f64) -> Result<f64> {
    let n = samples.len();
    let mut t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Highest level with at least 10 samples above it, capped.
    let hi = t[n.saturating_sub(10).min(n - 1)].min(cap);
    let lo = hi / 10.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut i = 0;
    while i < n {
        let v = t[i];
        let mut j = i;
        while j < n && t[j] == v {
            j += 1;
        }
        if v >= lo && v <= hi {
            let above = (n - j) as f64;
            if above > 0.0 {
                xs.push(v.ln());
                ys.push((above / n as f64).ln());
            }
        }
        i = j;
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, have: xs.len() });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

fn estimate(samples: &[(f64, bool)], estimator: Estimator, k: usize, cap: f64) -> Result<f64> {
    match estimator {
        Estimator::Hill => hill_censored(samples, k),
        Estimator::LoglogCcdf => loglog_ccdf_slope(samples, cap),
    }
}

/// max(⌊√n⌋, 4 × censored count), clamped to [1, n − 1].
pub fn default_k_order(n: usize, n_censored: usize) -> usize {
    let root = (n as f64).sqrt().floor() as usize;
    root.max(4 * n_censored).clamp(1, n.saturating_sub(1).max(1))
}

/// Tail fit of `(value, censored)` samples with a bootstrap standard error.
pub fn fit_tail(
    samples: &[(f64, bool)],
    horizon: f64,
    estimator: Estimator,
    k_order: Option<usize>,
    seed: u64,
) -> Result<TailFit> {
    let n = samples.len();
    let n_censored = samples.iter().filter(|s| s.1).count();
    if n - n_censored < MIN_UNCENSORED {
        return Err(Error::InsufficientData {
            needed: MIN_UNCENSORED,
            have: n - n_censored,
        });
    }
    let k = k_order.unwrap_or_else(|| default_k_order(n, n_censored));
    let cap = horizon / 10.0;
    let exponent = estimate(samples, estimator, k, cap)?;
    let mut rng = stream_rng(seed, BOOTSTRAP_STREAM);
    let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = vec![(0.0, false); n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in buf.iter_mut() {
            *slot = samples[(rng.next_u64() % n as u64) as usize];
        }
        if let Ok(e) = estimate(&buf, estimator, k, cap) {
            reps.push(e);
        }
    }
    let m = reps.len() as f64;
    let mean = reps.iter().sum::<f64>() / m;
    let var = reps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1.0).max(1.0);
    Ok(TailFit {
        estimator,
        exponent,
        stderr: var.sqrt(),
        k_order: k,
        n_samples: n,
        n_censored,
    })
}

/// Fit the tail of τ_a from `n` simulated excursions.
#[allow(clippy::too_many_arguments)]
pub fn estimate_return_tail(
    model: &ComplexModel,
    start: WalkState,
    a: f64,
    n: usize,
    horizon: u64,
    estimator: Estimator,
    k_order: Option<usize>,
    seed: u64,
) -> Result<TailFit> {
    let recs = run_excursions(model, start, a, horizon, n, seed)?;
    fit_tail(&excursion_samples(&recs), horizon as f64, estimator, k_order, seed)
}

pub fn excursion_samples(recs: &[ExcursionRecord]) -> Vec<(f64, bool)> {
    recs.iter().map(|r| (r.tau as f64, r.censored)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub walks: usize,
    pub horizons: Vec<u64>,
    pub start: WalkState,
    pub a: f64,
    pub seed: u64,
}

impl ProbeParams {
    pub fn new(walks: usize, seed: u64) -> Self {
        Self {
            walks,
            horizons: vec![1_000, 10_000, 100_000],
            start: WalkState::new(100.0, 0),
            a: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: u64,
    pub returning_fraction: f64,
    pub median_x: f64,
    pub median_min_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeHint {
    SuggestsRecurrent,
    SuggestsTransient,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub params: ProbeParams,
    pub horizons: Vec<HorizonSummary>,
    /// median X at each horizon over median X at the previous one.
    pub growth_ratios: Vec<f64>,
    pub hint: ProbeHint,
}

/// Returning fraction above which the probe hints at recurrence.
pub const PROBE_RETURN_THRESHOLD: f64 = 0.95;
/// Per-step median growth ratio above which the probe hints at transience.
pub const PROBE_GROWTH_THRESHOLD: f64 = 2.0;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical recurrence diagnostics. Never ground truth.
pub fn recurrence_probe(model: &ComplexModel, params: &ProbeParams) -> Result<ProbeReport> {
    check_start(model, params.start, params.a)?;
    if params.walks == 0 || params.horizons.is_empty() {
        return Err(Error::domain("probe needs at least one walk and one horizon"));
    }
    let mut hs = params.horizons.clone();
    hs.sort_unstable();
    hs.dedup();
    let kernel = Kernel::new(model);
    // Per walk and horizon: (returned by then, X at horizon, min X so far).
    let paths: Vec<Vec<(bool, f64, f64)>> = (0..params.walks as u64)
        .into_par_iter()
        .map(|w| {
            let mut rng = stream_rng(params.seed, w);
            let mut s = params.start;
            let mut min_x = s.x;
            let mut n = 0u64;
            let mut out = Vec::with_capacity(hs.len());
            for &h in &hs {
                while n < h {
                    s = kernel.step(s, &mut rng);
                    min_x = min_x.min(s.x);
                    n += 1;
                }
                out.push((min_x <= params.a, s.x, min_x));
            }
            out
        })
        .collect();
    let b = params.walks as f64;
    let summaries: Vec<HorizonSummary> = hs
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let returned = paths.iter().filter(|p| p[k].0).count() as f64;
            let mut xs: Vec<f64> = paths.iter().map(|p| p[k].1).collect();
            let mut mins: Vec<f64> = paths.iter().map(|p| p[k].2).collect();
            HorizonSummary {
                horizon: h,
                returning_fraction: returned / b,
                median_x: median(&mut xs),
                median_min_x: median(&mut mins),
            }
        })
        .collect();
    let growth_ratios: Vec<f64> = summaries.windows(2).map(|w| w[1].median_x / w[0].median_x).collect();
    let last = summaries.last().unwrap();
    let hint = if last.returning_fraction >= PROBE_RETURN_THRESHOLD {
        ProbeHint::SuggestsRecurrent
    } else if !growth_ratios.is_empty() && growth_ratios.iter().all(|&g| g >= PROBE_GROWTH_THRESHOLD) {
        ProbeHint::SuggestsTransient
    } else {
        ProbeHint::Inconclusive
    };
    Ok(ProbeReport {
        params: ProbeParams {
            horizons: hs,
            ..params.clone()
        },
        horizons: summaries,
        growth_ratios,
        hint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub x: f64,
    pub branch: usize,
    pub mean_increment: f64,
    pub stderr: f64,
    pub quadrature: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub mode: Mode,
    pub points: Vec<DriftPoint>,
    pub all_agree: bool,
}

fn lyapunov_value(w: &LyapunovWeights, s: WalkState) -> f64 {
    let lam = w.lambda[s.branch];
    match w.mode {
        Mode::Power => lam * (w.nu * s.x.ln_1p()).exp(),
        Mode::Log => s.x.ln_1p() + lam,
        Mode::SqrtLog => (s.x.ln_1p() + lam).sqrt(),
    }
}

/// Monte Carlo one-step mean increment of the Lyapunov function at each
/// (x, branch), compared with the quadrature drift within 3 standard errors.
pub fn empirical_supermartingale_check(
    model: &ComplexModel,
    w: &LyapunovWeights,
    x_grid: &[f64],
    n_per_point: usize,
    seed: u64,
) -> Result<SupermartingaleReport> {
    if n_per_point < 2 {
        return Err(Error::InsufficientData { needed: 2, have: n_per_point });
    }
    let kernel = Kernel::new(model);
    let jobs: Vec<(usize, f64)> = (0..model.len())
        .flat_map(|i| x_grid.iter().map(move |&x| (i, x)))
        .collect();
    let points: Vec<Result<DriftPoint>> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, x))| {
            let s0 = WalkState::new(x, i);
            let f0 = lyapunov_value(w, s0);
            let mut rng = stream_rng(seed, idx as u64);
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..n_per_point {
                let d = lyapunov_value(w, kernel.step(s0, &mut rng)) - f0;
                let delta = d - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (d - mean);
            }
            let se = (m2 / (n_per_point - 1) as f64 / n_per_point as f64).sqrt();
            let quad = match w.mode {
                Mode::Power => drift_power(model, w, x, i)?,
                Mode::Log => drift_log(model, w, x, i)?,
                Mode::SqrtLog => drift_sqrtlog(model, w, x, i)?,
            }
            .value;
            Ok(DriftPoint {
                x,
                branch: i,
                mean_increment: mean,
                stderr: se,
                quadrature: quad,
                agrees: (mean - quad).abs() <= 3.0 * se,
            })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let all_agree = points.iter().all(|p| p.agrees);
    Ok(SupermartingaleReport {
        mode: w.mode,
        points,
        all_agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{preset, PresetFamily};

    #[test]
    fn open_uniform_stays_inside() {
        assert!(open_uniform(0) > 0.0);
        assert!(open_uniform(u64::MAX) < 1.0);
    }

    #[test]
    fn one_sided_never_moves_up_without_switching() {
        let m = preset(PresetFamily::Osc1, 0.6, 0.7).unwrap();
        let k = Kernel::new(&m);
        let mut rng = stream_rng(1, 0);
        let mut s = WalkState::new(10.0, 0);
        for _ in 0..10_000 {
            let next = k.step(s, &mut rng);
            assert!(next.x <= s.x || next.branch != s.branch);
            s = next;
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let m = preset(PresetFamily::Sym, 1.5, 1.5).unwrap();
        let a = run_excursions(&m, WalkState::new(5.0, 0), 1.0, 1000, 50, 9).unwrap();
        let b = run_excursions(&m, WalkState::new(5.0, 0), 1.0, 1000, 50, 9).unwrap();
        assert_eq!(a, b);
        let mut r = stream_rng(9, 3);
        let single = run_excursion(&m, WalkState::new(5.0, 0), 1.0, 1000, &mut r).unwrap();
        assert_eq!(single, a[3]);
    }

    #[test]
    fn start_below_level_is_rejected() {
        let m = preset(PresetFamily::Sym, 1.5, 1.5).unwrap();
        let mut r = stream_rng(0, 0);
        assert!(run_excursion(&m, WalkState::new(1.0, 0), 1.0, 10, &mut r).is_err());
    }

    #[test]
    fn hill_without_censoring_matches_plain_formula() {
        let s: Vec<(f64, bool)> = (1..=10).map(|i| (i as f64, false)).collect();
        let k = 3;
        let plain = k as f64 / ((10f64 / 7.0).ln() + (9f64 / 7.0).ln() + (8f64 / 7.0).ln());
        assert!((hill_censored(&s, k).unwrap() - plain).abs() < 1e-14);
    }

    #[test]
    fn k_order_grows_with_censoring() {
        assert_eq!(default_k_order(10_000, 0), 100);
        assert_eq!(default_k_order(10_000, 40), 160);
        assert_eq!(default_k_order(100, 90), 99);
    }

    #[test]
    fn too_few_returns_is_insufficient() {
        let s: Vec<(f64, bool)> = (1..=500).map(|i| (i as f64, i > 50)).collect();
        assert!(matches!(
            fit_tail(&s, 1e3, Estimator::Hill, None, 0),
            Err(Error::InsufficientData { .. })
        ));
    }
}

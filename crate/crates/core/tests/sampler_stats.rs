use halfline::model::{BranchKind, BranchSpec, ComplexModel, TailDensity};
use halfline::sampler::{
    fit_tail, hill_censored, open_uniform, run_excursions, stream_rng, Estimator, Kernel, WalkState,
};
use rand::RngCore;

fn three_branch() -> ComplexModel {
    let b = |id: &str, kind, a| BranchSpec {
        id: id.into(),
        kind,
        density: TailDensity::shifted_pareto(a),
    };
    ComplexModel::new(
        vec![
            b("a", BranchKind::OneSided, 0.7),
            b("b", BranchKind::Symmetric, 1.3),
            b("c", BranchKind::Symmetric, 0.9),
        ],
        vec![vec![0.0, 0.2, 0.8], vec![0.5, 0.0, 0.5], vec![0.6, 0.4, 0.0]],
    )
    .unwrap()
}

/// Kolmogorov–Smirnov distance of sorted samples from a CDF.
fn ks(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn one_sided_step_matches_tail() {
    let m = three_branch();
    let k = Kernel::new(&m);
    let d = TailDensity::shifted_pareto(0.7);
    let x = 50.0;
    let mut rng = stream_rng(7, 0);
    let n = 100_000;
    let mut drops: Vec<f64> = Vec::new();
    for _ in 0..n {
        let s = k.step(WalkState::new(x, 0), &mut rng);
        if s.branch == 0 && s.x <= x {
            drops.push(x - s.x);
        }
    }
    // Given no crossing, x − X₁ is Y conditioned on Y ≤ x.
    let p_stay = 1.0 - d.tail(x);
    let frac = drops.len() as f64 / n as f64;
    assert!((frac - p_stay).abs() < 4.0 * (p_stay * (1.0 - p_stay) / n as f64).sqrt() + 1e-3);
    drops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dist = ks(&drops, |y| (1.0 - d.tail(y)) / p_stay);
    assert!(dist < 1.63 / (drops.len() as f64).sqrt(), "KS {dist}");
}

#[test]
fn symmetric_step_is_symmetric_far_from_origin() {
    let m = three_branch();
    let k = Kernel::new(&m);
    let d = TailDensity::shifted_pareto(1.3);
    let x = 1e6;
    let mut rng = stream_rng(8, 0);
    let mut incs: Vec<f64> = (0..100_000)
        .map(|_| k.step(WalkState::new(x, 1), &mut rng))
        .filter(|s| s.branch == 1)
        .map(|s| s.x - x)
        .collect();
    incs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cdf = |z: f64| if z < 0.0 { 0.5 * d.tail(-z) } else { 1.0 - 0.5 * d.tail(z) };
    let dist = ks(&incs, cdf);
    assert!(dist < 1.63 / (incs.len() as f64).sqrt(), "KS {dist}");
}

#[test]
fn crossings_follow_routing_row() {
    let m = three_branch();
    let k = Kernel::new(&m);
    let mut rng = stream_rng(9, 0);
    let mut counts = [0usize; 3];
    // From the origin a symmetric branch crosses on half the jumps.
    let mut crossings = 0;
    for _ in 0..200_000 {
        let s = k.step(WalkState::new(0.0, 2), &mut rng);
        if s.branch != 2 {
            counts[s.branch] += 1;
            crossings += 1;
        }
    }
    let n = crossings as f64;
    for (j, &p) in [0.6, 0.4].iter().enumerate() {
        let c = counts[j] as f64;
        assert!((c / n - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt(), "branch {j}: {}", c / n);
    }
    assert!((n / 200_000.0 - 0.5).abs() < 0.01);
}

#[test]
fn hill_recovers_pareto_index_with_censoring() {
    let mut rng = stream_rng(10, 0);
    let q = 0.4;
    let cap = 1e9;
    let samples: Vec<(f64, bool)> = (0..100_000)
        .map(|_| {
            let t = open_uniform(rng.next_u64()).powf(-1.0 / q);
            if t > cap {
                (cap, true)
            } else {
                (t, false)
            }
        })
        .collect();
    let fit = fit_tail(&samples, cap, Estimator::Hill, None, 1).unwrap();
    assert!((fit.exponent - q).abs() < 3.0 * fit.stderr + 0.01, "{fit:?}");
    assert!(fit.n_censored > 0);
    let plain = hill_censored(&samples, 1000).unwrap();
    assert!((plain - q).abs() < 0.05);
}

#[test]
fn excursions_do_not_depend_on_thread_count() {
    let m = three_branch();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_excursions(&m, WalkState::new(20.0, 1), 1.0, 10_000, 300, 42).unwrap())
    };
    assert_eq!(run(1), run(8));
}

use approx::assert_relative_eq;
use halfline::model::presets::{preset, PresetFamily};
use halfline::model::{stationary_distribution, stationary_residual, validate, RawBranch, RawModel, TailDensity};
use halfline::specfun::{quad_improper, Endpoint, Endpoints, QuadOptions};
use proptest::prelude::*;

fn densities(alpha: f64) -> [TailDensity; 2] {
    [TailDensity::shifted_pareto(alpha), TailDensity::cutoff_pareto(alpha, 0.7)]
}

#[test]
fn densities_integrate_to_one() {
    for &alpha in &[0.3, 0.8, 1.0, 1.5, 2.5] {
        for d in densities(alpha) {
            let lo = d.support_min();
            let r = quad_improper(
                |y| d.density(y),
                lo,
                f64::INFINITY,
                Endpoints::new(Endpoint::Regular, Endpoint::Decay(alpha)),
                &QuadOptions::precise(),
            )
            .unwrap();
            assert_relative_eq!(r.value, 1.0, max_relative = 1e-9);
        }
    }
}

#[test]
fn c_of_y_converges_at_rate_one_over_y() {
    for &alpha in &[0.4, 1.2, 1.9] {
        for d in densities(alpha) {
            let c = d.c_const();
            for &y in &[10.0, 1e2, 1e3, 1e4, 1e5] {
                assert!((d.c_of_y(y) - c).abs() <= 3.0 * c / y, "{d:?} at {y}");
            }
        }
    }
}

proptest! {
    #[test]
    fn quantile_inverts_tail(alpha in 0.05f64..3.0, u in 1e-12f64..0.999_999, y0 in 0.1f64..5.0) {
        for d in [TailDensity::shifted_pareto(alpha), TailDensity::cutoff_pareto(alpha, y0)] {
            let y = d.quantile(u).unwrap();
            prop_assert!(y >= d.support_min());
            prop_assert!((d.tail(y) - u).abs() <= 1e-12 * u.max(1e-3) + 1e-15);
        }
    }

    #[test]
    fn stationary_vector_solves_balance(seed in proptest::collection::vec(0.05f64..1.0, 16)) {
        let n = 4;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let r = &seed[i * n..(i + 1) * n];
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect();
        let raw = RawModel {
            branches: (0..n)
                .map(|i| RawBranch {
                    id: format!("b{i}"),
                    kind: "symmetric".into(),
                    family: "shifted_pareto".into(),
                    alpha: 1.5,
                    y0: None,
                })
                .collect(),
            routing: rows.clone(),
        };
        let m = validate(&raw).unwrap();
        let mu = stationary_distribution(&m).unwrap();
        prop_assert!(stationary_residual(&rows, &mu.mu) < 1e-12);
        prop_assert!((mu.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn quantile_rejects_levels_outside_unit_interval() {
    let d = TailDensity::shifted_pareto(1.0);
    assert!(d.quantile(0.0).is_err());
    assert!(d.quantile(1.0).is_err());
}

#[test]
fn presets_round_trip_through_json() {
    for fam in [PresetFamily::Sym, PresetFamily::Osc1, PresetFamily::Osc2, PresetFamily::Osc3] {
        let m = preset(fam, 0.6, 0.7).unwrap();
        let back = halfline::model::ComplexModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }
}

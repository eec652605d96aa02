use halfline::specfun::{
    digamma, i_integral, j_integral, relative_disagreement, IKind, IntegralFamilyParams, JKind,
    Method,
};

fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// In-domain (ν, α) grid with at least 50 points for an i-integral kind.
pub fn i_grid(kind: IKind) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    match kind {
        IKind::I0 | IKind::I21 => {
            for alpha in [0.25, 0.6, 1.0, 1.4, 1.9, 2.7] {
                for nu in lin(-0.9, alpha - 0.05, 10) {
                    pts.push((nu, alpha));
                }
            }
        }
        IKind::I20 => {
            for alpha in lin(0.05, 5.0, 60) {
                pts.push((0.0, alpha));
            }
        }
        IKind::I1 => {
            for alpha in [0.15, 0.5, 0.95, 1.3, 1.7, 1.95] {
                for nu in lin(-0.9, 3.0, 10) {
                    pts.push((nu, alpha));
                }
            }
        }
        IKind::I1Tilde => {
            for alpha in [0.1, 0.3, 0.5, 0.7, 0.85, 0.95] {
                for nu in lin(-0.9, 3.0, 10) {
                    pts.push((nu, alpha));
                }
            }
        }
    }
    pts
}

fn j_grid(kind: JKind) -> Vec<f64> {
    match kind {
        JKind::J0 | JKind::J2 => lin(0.05, 4.0, 60),
        JKind::J1 => lin(0.04, 1.96, 60),
        JKind::J1Tilde => lin(0.02, 0.98, 60),
    }
}

#[test]
fn closed_forms_agree_with_quadrature_on_grid() {
    for kind in IKind::ALL {
        let grid = i_grid(kind);
        assert!(grid.len() >= 50);
        for (nu, alpha) in grid {
            let p = IntegralFamilyParams::new(nu, alpha);
            let c = i_integral(kind, p, Method::ClosedForm).unwrap();
            let q = i_integral(kind, p, Method::Quadrature)
                .unwrap_or_else(|e| panic!("{} at ({nu}, {alpha}): {e}", kind.name()));
            let d = relative_disagreement(c, q);
            assert!(d < 1e-8, "{} at ({nu}, {alpha}): {c} vs {q} ({d:e})", kind.name());
        }
    }
    for kind in JKind::ALL {
        for alpha in j_grid(kind) {
            let c = j_integral(kind, alpha, Method::ClosedForm).unwrap();
            let q = j_integral(kind, alpha, Method::Quadrature).unwrap();
            let d = relative_disagreement(c, q);
            assert!(d < 1e-8, "{} at {alpha}: {c} vs {q} ({d:e})", kind.name());
        }
    }
}

#[test]
fn digamma_reflection_identity() {
    for k in 1..19 {
        let a = 0.05 * k as f64;
        let lhs = digamma(1.0 - a).unwrap() - digamma(a).unwrap();
        let rhs = std::f64::consts::PI / (std::f64::consts::PI * a).tan();
        assert!((lhs - rhs).abs() < 1e-10, "a = {a}");
    }
}

#[test]
fn i21_is_positive() {
    for (nu, alpha) in i_grid(IKind::I21) {
        let p = IntegralFamilyParams::new(nu, alpha);
        assert!(i_integral(IKind::I21, p, Method::ClosedForm).unwrap() > 0.0);
    }
}

#[test]
fn nu_derivative_at_zero_gives_j_integrals() {
    let h = 1e-5;
    let pairs = [
        (IKind::I0, JKind::J0, [0.4, 1.1, 2.3]),
        (IKind::I21, JKind::J2, [0.4, 1.1, 2.3]),
        (IKind::I1, JKind::J1, [0.4, 1.1, 1.8]),
        (IKind::I1Tilde, JKind::J1Tilde, [0.2, 0.5, 0.8]),
    ];
    for (ik, jk, alphas) in pairs {
        for alpha in alphas {
            let f = |nu: f64| {
                i_integral(ik, IntegralFamilyParams::new(nu, alpha), Method::ClosedForm).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let j = j_integral(jk, alpha, Method::ClosedForm).unwrap();
            assert!((fd - j).abs() < 1e-6, "{} at {alpha}: {fd} vs {j}", ik.name());
        }
    }
}

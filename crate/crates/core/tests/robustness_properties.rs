use renyi_core::estimation::{fit_weighted, SolverOptions};
use renyi_core::linalg::Matrix;
use renyi_core::robustness::{ges, influence_closed, influence_general, sup_influence};
use renyi_core::{Alpha, Model, ParametricModel, QuadratureSpec};

const ALPHAS: [f64; 3] = [0.1, 0.5, 1.0];

fn models() -> Vec<(Model, Vec<f64>)> {
    vec![
        (Model::normal_scale(0.5), vec![1.5]),
        (Model::normal_location(2.0).unwrap(), vec![-1.0]),
        (Model::exponential(), vec![0.8]),
        (Model::mvn_mean(Matrix::from_row_major(2, 2, vec![1.0, 0.4, 0.4, 2.0])).unwrap(), vec![0.5, -0.5]),
    ]
}

// 200 points spread over ±8 standardized units (or [0, 20θ] for the exponential)
fn grid(model: &Model, theta: &[f64]) -> Vec<Vec<f64>> {
    (0..200)
        .map(|i| {
            let t = -8.0 + 16.0 * i as f64 / 199.0;
            match model {
                Model::NormalScale(m) => vec![m.mean + theta[0] * t],
                Model::NormalLocation(m) => vec![theta[0] + m.sd * t],
                Model::Exponential(_) => vec![theta[0] * 20.0 * i as f64 / 199.0],
                Model::MvnMean(_) => vec![theta[0] + t, theta[1] + 0.5 * t * t - 4.0],
            }
        })
        .collect()
}

#[test]
fn general_and_closed_forms_agree() {
    let q = QuadratureSpec::default();
    for (model, theta) in models() {
        for a in ALPHAS {
            for x in grid(&model, &theta) {
                let g = influence_general(&model, &theta, Alpha::new(a).unwrap(), &x, &q).unwrap();
                let c = influence_closed(&model, &theta, a, &x).unwrap();
                let d = g.iter().zip(&c).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                assert!(d < 1e-5, "{:?} alpha {a} x {x:?}: {g:?} vs {c:?}", model.kind());
            }
        }
    }
}

// One-sided differences at ε = 1e-4 carry an O(ε) curvature bias that
// reaches a few 1e-3 in the far tails at α = 0.1, so the step-ε and step-ε/2
// quotients are combined by Richardson extrapolation.
#[test]
fn influence_matches_contamination_derivative() {
    let opts = SolverOptions { tol: 1e-13, ..SolverOptions::default() };
    let eps = 1e-4;
    for (model, theta) in models() {
        let (pts, w) = model.discretize(&theta, &opts.quadrature);
        for a in ALPHAS {
            let alpha = Alpha::new(a).unwrap();
            let base = fit_weighted(&model, &pts, &w, alpha, &opts).unwrap().theta_hat;
            let mixture_fit = |x: &[f64], e: f64| {
                let mut p2 = pts.clone();
                p2.extend_from_slice(x);
                let mut w2: Vec<f64> = w.iter().map(|v| v * (1.0 - e)).collect();
                w2.push(e);
                fit_weighted(&model, &p2, &w2, alpha, &opts).unwrap().theta_hat
            };
            for x in grid(&model, &theta).into_iter().step_by(20) {
                let t1 = mixture_fit(&x, eps);
                let t2 = mixture_fit(&x, eps / 2.0);
                let c = influence_closed(&model, &theta, a, &x).unwrap();
                for j in 0..theta.len() {
                    let d1 = (t1[j] - base[j]) / eps;
                    let d2 = (t2[j] - base[j]) / (eps / 2.0);
                    let fd = 2.0 * d2 - d1;
                    assert!((fd - c[j]).abs() < 1e-3, "{:?} alpha {a} x {x:?}: {fd} vs {}", model.kind(), c[j]);
                }
            }
        }
    }
}

#[test]
fn influence_is_bounded_by_ges() {
    for (model, theta) in models() {
        for a in ALPHAS {
            let g = ges(&model, &theta, a).unwrap();
            match &model {
                Model::NormalScale(_) | Model::NormalLocation(_) => {
                    let s = sup_influence(&model, &theta, a).unwrap();
                    assert!((s - g).abs() < 1e-6, "{:?} alpha {a}: {s} vs {g}", model.kind());
                }
                Model::Exponential(_) => {
                    // the closed form covers the lobe x ≥ θ/(α+1); the
                    // boundary value |IF(0)| = θ(α+1)² is reported separately
                    let t = theta[0];
                    let lobe = (0..=200_000)
                        .map(|i| t / (1.0 + a) + 1e-4 * t * i as f64)
                        .map(|x| influence_closed(&model, &theta, a, &[x]).unwrap()[0].abs())
                        .fold(0.0, f64::max);
                    assert!((lobe - g).abs() < 1e-6, "exp lobe alpha {a}: {lobe} vs {g}");
                    let s = sup_influence(&model, &theta, a).unwrap();
                    assert!((s - g.max(t * (1.0 + a).powi(2))).abs() < 1e-6);
                }
                Model::MvnMean(m) => {
                    // worst direction is the top eigenvector of V
                    let c = m.covariance();
                    let (v11, v12) = (c[(0, 0)], c[(0, 1)]);
                    let l = m.covariance().max_symmetric_eigenvalue();
                    let e = [v12, l - v11];
                    let n = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    let sup = (0..=200_000)
                        .map(|i| 1e-4 * i as f64)
                        .map(|t| {
                            let x = [theta[0] + t * e[0] / n, theta[1] + t * e[1] / n];
                            let v = influence_closed(&model, &theta, a, &x).unwrap();
                            (v[0] * v[0] + v[1] * v[1]).sqrt()
                        })
                        .fold(0.0, f64::max);
                    assert!((sup - g).abs() < 1e-6, "mvn alpha {a}: {sup} vs {g}");
                }
            }
            // far tails are negligible
            let far: Vec<f64> = theta.iter().map(|t| t + 1e6).collect();
            let v = influence_closed(&model, &theta, a, &far).unwrap();
            assert!(v.iter().all(|c| c.abs() < 1e-12));
        }
    }
}

#[test]
fn location_influence_redescends() {
    for (model, theta) in models() {
        if matches!(model, Model::NormalScale(_) | Model::Exponential(_)) {
            continue;
        }
        for a in ALPHAS {
            let mut x = theta.clone();
            x[0] += 1e3;
            let v = influence_closed(&model, &theta, a, &x).unwrap();
            assert!(v.iter().map(|c| c * c).sum::<f64>().sqrt() < 1e-10);
        }
    }
}

#[test]
fn ges_is_infinite_at_zero() {
    for (model, theta) in models() {
        assert!(ges(&model, &theta, 0.0).unwrap().is_infinite());
    }
}

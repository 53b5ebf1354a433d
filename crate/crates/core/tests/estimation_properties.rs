use proptest::prelude::*;
use renyi_core::estimation::{estimating_equation, fit_min_r_alpha, fit_weighted, SolverOptions};
use renyi_core::linalg::Matrix;
use renyi_core::models::sample_seeded;
use renyi_core::{Alpha, Exponential, Model, MvnMean, NormalLocation, NormalScale, ParametricModel};

fn tight() -> SolverOptions {
    SolverOptions { tol: 1e-12, ..SolverOptions::default() }
}

fn population_fit(model: &dyn ParametricModel, theta0: &[f64], alpha: f64) -> Vec<f64> {
    let opts = tight();
    let (pts, w) = model.discretize(theta0, &opts.quadrature);
    fit_weighted(model, &pts, &w, Alpha::new(alpha).unwrap(), &opts).unwrap().theta_hat
}

#[test]
fn fisher_consistency_on_theta_grids() {
    let scale = NormalScale::new(0.5);
    let loc = NormalLocation::new(1.5).unwrap();
    let mvn = MvnMean::new(Matrix::from_row_major(2, 2, vec![1.0, 0.3, 0.3, 2.0])).unwrap();
    for a in [0.1, 0.5, 1.0] {
        for t in [0.3, 0.8, 1.0, 2.5, 7.0] {
            let s = population_fit(&scale, &[t], a);
            assert!((s[0] - t).abs() < 1e-4, "scale {t} alpha {a}: {s:?}");
            let e = population_fit(&Exponential, &[t], a);
            assert!((e[0] - t).abs() < 1e-4, "exp {t} alpha {a}: {e:?}");
        }
        for m in [-3.0, -0.5, 0.0, 1.2, 10.0] {
            let l = population_fit(&loc, &[m], a);
            assert!((l[0] - m).abs() < 1e-4, "loc {m} alpha {a}: {l:?}");
            let v = population_fit(&mvn, &[m, -m / 2.0], a);
            assert!((v[0] - m).abs() < 1e-4 && (v[1] + m / 2.0).abs() < 1e-4, "mvn {m}: {v:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn location_and_scale_are_affine_equivariant(seed in 0u64..1000, a in prop_oneof![-3.0..-0.2f64, 0.2..3.0f64], b in -5.0..5.0f64) {
        let opts = tight();
        for alpha in [0.0, 0.25, 1.0] {
            let alpha = Alpha::new(alpha).unwrap();

            let loc = NormalLocation::new(1.0).unwrap();
            let x = sample_seeded(&loc, &[0.4], 40, seed).unwrap();
            let m = fit_min_r_alpha(&loc, &x, alpha, &opts).unwrap().theta_hat[0];
            let loc_t = NormalLocation::new(a.abs()).unwrap();
            let mt = fit_min_r_alpha(&loc_t, &x.affine(a, b), alpha, &opts).unwrap().theta_hat[0];
            prop_assert!((mt - (a * m + b)).abs() < 1e-7 * (1.0 + mt.abs()), "{mt} vs {}", a * m + b);

            let sc = NormalScale::new(1.0);
            let y = sample_seeded(&sc, &[1.3], 40, seed).unwrap();
            let s = fit_min_r_alpha(&sc, &y, alpha, &opts).unwrap().theta_hat[0];
            let sc_t = NormalScale::new(a + b);
            let st = fit_min_r_alpha(&sc_t, &y.affine(a, b), alpha, &opts).unwrap().theta_hat[0];
            prop_assert!((st - a.abs() * s).abs() < 1e-7 * st, "{st} vs {}", a.abs() * s);
        }
    }

    #[test]
    fn estimating_equation_vanishes_at_the_fit(seed in 0u64..1000, alpha in 0.05..1.5f64) {
        let opts = SolverOptions::default();
        let alpha = Alpha::new(alpha).unwrap();
        let models: [(Model, Vec<f64>); 4] = [
            (Model::normal_scale(0.0), vec![2.0]),
            (Model::normal_location(1.0).unwrap(), vec![-1.0]),
            (Model::exponential(), vec![0.7]),
            (Model::mvn_mean(Matrix::identity(3)).unwrap(), vec![0.0, 1.0, -1.0]),
        ];
        for (model, theta) in &models {
            let x = sample_seeded(model, theta, 60, seed).unwrap();
            let fit = fit_min_r_alpha(model, &x, alpha, &opts).unwrap();
            prop_assert!(fit.converged);
            let ee = estimating_equation(model, &fit.theta_hat, &x, alpha, &opts.quadrature).unwrap();
            let norm = ee.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm < 10.0 * opts.tol, "{:?}: {norm}", model.kind());
        }
    }
}

#[test]
fn alpha_zero_returns_closed_form_mles() {
    let x = renyi_core::Sample::univariate(vec![1.0, -1.0]).unwrap();
    let opts = SolverOptions::default();
    let fit = fit_min_r_alpha(&NormalScale::new(0.0), &x, Alpha::ZERO, &opts).unwrap();
    assert_eq!(fit.theta_hat, vec![1.0]);
    let y = renyi_core::Sample::univariate(vec![0.5, 2.0, 3.5]).unwrap();
    let fit = fit_min_r_alpha(&NormalLocation::new(1.0).unwrap(), &y, Alpha::ZERO, &opts).unwrap();
    assert!((fit.theta_hat[0] - 2.0).abs() < 1e-15);
}

#[test]
fn error_shrinks_with_sample_size() {
    let opts = SolverOptions::default();
    let alpha = Alpha::new(0.5).unwrap();
    let model = NormalScale::new(0.0);
    let median_err = |n: usize| {
        let mut errs: Vec<f64> = (0..41)
            .map(|r| {
                let x = sample_seeded(&model, &[1.0], n, 1000 + r).unwrap();
                (fit_min_r_alpha(&model, &x, alpha, &opts).unwrap().theta_hat[0] - 1.0).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        errs[20]
    };
    let e: Vec<f64> = [50, 200, 800].into_iter().map(median_err).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

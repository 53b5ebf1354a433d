use renyi_core::asymptotics::{are, closed_form_covariance, fisher_inverse, sandwich};
use renyi_core::linalg::Matrix;
use renyi_core::{Alpha, Exponential, MvnMean, NormalLocation, NormalScale, ParametricModel, QuadratureSpec};

const ALPHAS: [f64; 3] = [0.1, 0.5, 1.0];

fn check_1d(model: &dyn ParametricModel, theta: &[f64]) {
    let q = QuadratureSpec::default();
    for a in ALPHAS {
        let sc = sandwich(model, theta, Alpha::new(a).unwrap(), &q).unwrap();
        let ratio = fisher_inverse(model, theta).unwrap()[(0, 0)] / sc.v[(0, 0)];
        let e = are(model.kind(), a, 1).unwrap();
        assert!((ratio / e - 1.0).abs() < 1e-3, "{:?} alpha {a}: {ratio} vs {e}", model.kind());
    }
}

#[test]
fn sandwich_matches_are_for_univariate_families() {
    for s in [0.5, 1.0, 2.0] {
        check_1d(&NormalScale::new(0.3), &[s]);
        check_1d(&NormalLocation::new(s).unwrap(), &[-0.7]);
        check_1d(&Exponential, &[s]);
    }
}

#[test]
fn sandwich_matches_mvn_closed_form() {
    let q = QuadratureSpec::default();
    let covs = [
        Matrix::identity(2),
        Matrix::from_row_major(2, 2, vec![2.0, 0.5, 0.5, 1.0]),
        Matrix::from_row_major(3, 3, vec![1.0, 0.2, 0.0, 0.2, 1.5, -0.3, 0.0, -0.3, 0.8]),
    ];
    for cov in covs {
        let p = cov.rows();
        let model = MvnMean::new(cov.clone()).unwrap();
        let theta = vec![0.5; p];
        for a in ALPHAS {
            let sc = sandwich(&model, &theta, Alpha::new(a).unwrap(), &q).unwrap();
            let factor = ((1.0 + a) / (1.0 + 2.0 * a).sqrt()).powi(p as i32 + 2);
            let expect = cov.scale(factor);
            assert!(sc.v.max_abs_diff(&expect) < 1e-3 * expect.max_abs(), "p={p} alpha {a}");
            let cf = closed_form_covariance(&model, &theta, a).unwrap();
            assert!(cf.max_abs_diff(&expect) < 1e-10 * expect.max_abs());
        }
    }
}

#[test]
fn m_and_s_are_symmetric() {
    let q = QuadratureSpec::default();
    let model = MvnMean::new(Matrix::from_row_major(2, 2, vec![2.0, 0.5, 0.5, 1.0])).unwrap();
    for a in ALPHAS {
        let sc = sandwich(&model, &[1.0, -1.0], Alpha::new(a).unwrap(), &q).unwrap();
        assert!(sc.m.asymmetry() < 1e-10 && sc.s.asymmetry() < 1e-10);
    }
}

#[test]
fn alpha_zero_is_rejected() {
    let q = QuadratureSpec::default();
    assert!(sandwich(&Exponential, &[1.0], Alpha::ZERO, &q).is_err());
}

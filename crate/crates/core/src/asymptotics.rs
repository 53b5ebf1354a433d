//! Sandwich covariance of the min R_α estimator, the asymptotic variance of
//! R̂_α and closed-form asymptotic relative efficiencies.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::alpha::Alpha;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::{ModelKind, ParametricModel};
use crate::pseudodistance::{centering, ln_power_integral};
use crate::quadrature::QuadratureSpec;

/// `S = −∫∂²h dP_θ`, `M = ∫∂h ∂hᵀ dP_θ` and `V = S⁻¹ M S⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichCov {
    pub s: Matrix,
    pub m: Matrix,
    pub v: Matrix,
}

/// Sandwich covariance at θ₀ with analytic derivatives of
/// `h(x, θ) = p_θ^α(x)/C_α(θ)`:
///
/// ```text
/// ∂h  = α h (s − c)
/// ∂²h = h [α² (s − c)(s − c)ᵀ + α ∂s − α ∂c]
/// ```
///
/// where `s` is the score and `c` the centering term.
pub fn sandwich<M: ParametricModel + ?Sized>(
    model: &M,
    theta0: &[f64],
    alpha: Alpha,
    quad: &QuadratureSpec,
) -> Result<SandwichCov> {
    let a = alpha.require_positive()?;
    model.validate_theta(theta0)?;
    let d = model.theta_dim();
    let k = 1.0 + a;
    let cen = centering(model, theta0, a, quad)?;
    let ln_c = a / k * cen.ln_integral;
    let mut out = vec![0.0; 2 * d * d];
    let mut s = vec![0.0; d];
    let mut ds = vec![0.0; d * d];
    // integrate against P_θ: p^{2α} for M, p^α for S
    model.power_integral(theta0, 1.0, quad, &mut out, &mut |x, o| {
        let lp = model.ln_density(theta0, x);
        let h = (a * lp - ln_c).exp();
        model.score(theta0, x, &mut s);
        model.score_jacobian(theta0, x, &mut ds);
        for i in 0..d {
            let ui = s[i] - cen.c[i];
            for j in 0..d {
                let uj = s[j] - cen.c[j];
                o[i * d + j] = h * h * a * a * ui * uj;
                o[d * d + i * d + j] = -h * (a * a * ui * uj + a * ds[i * d + j] - a * cen.jacobian[i * d + j]);
            }
        }
    })?;
    let mut m = Matrix::from_row_major(d, d, out[..d * d].to_vec());
    let mut s_mat = Matrix::from_row_major(d, d, out[d * d..].to_vec());
    m.symmetrize();
    s_mat.symmetrize();
    let chol = s_mat.cholesky().ok_or(Error::SingularS)?;
    let sinv = chol.inverse();
    let mut v = sinv.matmul(&m).matmul(&sinv);
    v.symmetrize();
    Ok(SandwichCov { s: s_mat, m, v })
}

/// `σ²(θ₀) = ∫h² dP_θ₀ − (∫h dP_θ₀)²`, the asymptotic variance of
/// `√n (R̂_α − R_α(θ₀))`.
pub fn sigma2_rhat<M: ParametricModel + ?Sized>(model: &M, theta0: &[f64], alpha: Alpha, quad: &QuadratureSpec) -> Result<f64> {
    let a = alpha.require_positive()?;
    model.validate_theta(theta0)?;
    let k = 1.0 + a;
    let l1 = ln_power_integral(model, theta0, k, quad)?;
    let l2 = ln_power_integral(model, theta0, 1.0 + 2.0 * a, quad)?;
    let ln_c = a / k * l1;
    let v = (l2 - 2.0 * ln_c).exp() - (l1 - ln_c).exp().powi(2);
    if !v.is_finite() {
        return Err(Error::NonFiniteIntegral { what: "h moments" });
    }
    Ok(v.max(0.0))
}

/// Closed-form asymptotic relative efficiency of min R_α versus the MLE.
/// `dim` is only read for the multivariate normal mean model.
pub fn are(kind: ModelKind, alpha: f64, dim: usize) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    let a = alpha;
    let a1 = 1.0 + a;
    let a2 = 1.0 + 2.0 * a;
    Ok(match kind {
        ModelKind::NormalScale => 2.0 * a2.powf(2.5) / (a1.powi(3) * (3.0 * a * a + 4.0 * a + 2.0)),
        ModelKind::Exponential => a2.powi(3) / (a1.powi(4) * (2.0 * a * a + 2.0 * a + 1.0)),
        ModelKind::NormalLocation => a2.powf(1.5) / a1.powi(3),
        ModelKind::MvnMean => {
            if dim == 0 {
                return Err(Error::InvalidInput("mvn-mean needs a positive dimension"));
            }
            (a2.sqrt() / a1).powi(dim as i32 + 2)
        }
    })
}

/// Inverse Fisher information per observation.
pub fn fisher_inverse<M: ParametricModel + ?Sized>(model: &M, theta: &[f64]) -> Result<Matrix> {
    model.validate_theta(theta)?;
    let d = model.theta_dim();
    Ok(match model.kind() {
        ModelKind::NormalScale => Matrix::diag(&[theta[0] * theta[0] / 2.0]),
        ModelKind::Exponential => Matrix::diag(&[theta[0] * theta[0]]),
        ModelKind::NormalLocation | ModelKind::MvnMean => {
            // -E[∂s] is constant for these models
            let mut j = vec![0.0; d * d];
            let x: Vec<f64> = theta.to_vec();
            model.score_jacobian(theta, &x, &mut j);
            let info = Matrix::from_row_major(d, d, j.iter().map(|v| -v).collect());
            info.cholesky().ok_or(Error::SingularS)?.inverse()
        }
    })
}

/// Closed-form asymptotic covariance `Fisher⁻¹ / ARE`.
pub fn closed_form_covariance<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], alpha: f64) -> Result<Matrix> {
    let e = are(model.kind(), alpha, model.theta_dim())?;
    Ok(fisher_inverse(model, theta)?.scale(1.0 / e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Exponential, MvnMean, NormalLocation, NormalScale};

    #[test]
    fn sandwich_examples() {
        let q = QuadratureSpec::default();
        let sc = sandwich(&NormalLocation::new(1.0).unwrap(), &[0.0], Alpha::new(0.5).unwrap(), &q).unwrap();
        assert!((sc.v[(0, 0)] - 1.19324).abs() < 1e-4);
        let mvn = MvnMean::new(Matrix::identity(2)).unwrap();
        let sc = sandwich(&mvn, &[0.0, 0.0], Alpha::new(1.0).unwrap(), &q).unwrap();
        assert!((sc.v[(0, 0)] - 16.0 / 9.0).abs() < 1e-6);
        assert!(sc.v[(0, 1)].abs() < 1e-10);
        let recon = {
            let si = sc.s.cholesky().unwrap().inverse();
            si.matmul(&sc.m).matmul(&si)
        };
        assert!(recon.max_abs_diff(&sc.v) < 1e-10);
    }

    #[test]
    fn sandwich_near_zero_is_fisher() {
        let q = QuadratureSpec::default();
        let a = Alpha::new(1e-3).unwrap();
        let sc = sandwich(&NormalScale::new(0.0), &[1.3], a, &q).unwrap();
        let fi = fisher_inverse(&NormalScale::new(0.0), &[1.3]).unwrap();
        assert!((sc.v[(0, 0)] / fi[(0, 0)] - 1.0).abs() < 0.01);
        let sc = sandwich(&Exponential, &[2.0], a, &q).unwrap();
        assert!((sc.v[(0, 0)] / 4.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn are_examples() {
        assert!((are(ModelKind::NormalScale, 0.2, 1).unwrap() - 0.91922).abs() < 1e-5);
        assert!((are(ModelKind::Exponential, 1.0, 1).unwrap() - 0.33750).abs() < 1e-5);
        assert!((are(ModelKind::MvnMean, 1.0, 4).unwrap() - 27.0 / 64.0).abs() < 1e-15);
        for k in [ModelKind::NormalScale, ModelKind::Exponential, ModelKind::NormalLocation, ModelKind::MvnMean] {
            assert_eq!(are(k, 0.0, 2).unwrap(), 1.0);
        }
    }

    #[test]
    fn sigma2_is_nonnegative() {
        let q = QuadratureSpec::default();
        for s in [0.5, 1.0, 3.0] {
            let v = sigma2_rhat(&NormalScale::new(0.0), &[s], Alpha::new(0.5).unwrap(), &q).unwrap();
            assert!(v > 0.0);
        }
    }
}

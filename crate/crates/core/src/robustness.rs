//! Influence functions, gross error sensitivities and the most B-robust
//! order.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::alpha::{Alpha, DEFAULT_BETA_MAX};
use crate::asymptotics::are;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::models::{Model, ParametricModel};
use crate::pseudodistance::centering;
use crate::quadrature::QuadratureSpec;
use crate::roots::golden_section;

/// Precomputed `M_α(θ)` and `c_α(θ)` for repeated influence evaluations.
///
/// `M_α(θ) = ∫p^{1+α} s sᵀ dλ − (∫p^{1+α} s dλ)(∫p^{1+α} s dλ)ᵀ / ∫p^{1+α} dλ`
/// with `s` the score.
#[derive(Debug, Clone)]
pub struct InfluenceContext {
    theta: Vec<f64>,
    alpha: f64,
    c: Vec<f64>,
    m_alpha: Matrix,
    chol: Cholesky,
}

impl InfluenceContext {
    pub fn new<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], alpha: Alpha, quad: &QuadratureSpec) -> Result<Self> {
        let a = alpha.require_positive()?;
        model.validate_theta(theta)?;
        let d = model.theta_dim();
        let mut out = vec![0.0; 1 + d + d * d];
        let mut s = vec![0.0; d];
        model.power_integral(theta, 1.0 + a, quad, &mut out, &mut |x, o| {
            model.score(theta, x, &mut s);
            o[0] = 1.0;
            for i in 0..d {
                o[1 + i] = s[i];
                for j in 0..d {
                    o[1 + d + i * d + j] = s[i] * s[j];
                }
            }
        })?;
        let i0 = out[0];
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = out[1 + d + i * d + j] - out[1 + i] * out[1 + j] / i0;
            }
        }
        let mut m_alpha = Matrix::from_row_major(d, d, m);
        m_alpha.symmetrize();
        let chol = m_alpha.cholesky().ok_or(Error::SingularMAlpha)?;
        let c = centering(model, theta, a, quad)?.c;
        Ok(InfluenceContext { theta: theta.to_vec(), alpha: a, c, m_alpha, chol })
    }

    pub fn m_alpha(&self) -> &Matrix {
        &self.m_alpha
    }

    /// `M_α⁻¹ p_θ^α(x) [s_θ(x) − c_α(θ)]`.
    pub fn eval<M: ParametricModel + ?Sized>(&self, model: &M, x: &[f64]) -> Vec<f64> {
        let d = self.c.len();
        let w = (self.alpha * model.ln_density(&self.theta, x)).exp();
        if w == 0.0 {
            return vec![0.0; d];
        }
        let mut s = vec![0.0; d];
        model.score(&self.theta, x, &mut s);
        let rhs: Vec<f64> = s.iter().zip(&self.c).map(|(s, c)| w * (s - c)).collect();
        self.chol.solve(&rhs)
    }
}

/// Influence function of the min R_α functional at `P_θ`, with `M_α` by
/// quadrature.
pub fn influence_general<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    alpha: Alpha,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    Ok(InfluenceContext::new(model, theta, alpha, quad)?.eval(model, x))
}

/// Closed-form influence functions of the four built-in families.
pub fn influence_closed(model: &Model, theta: &[f64], alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
    model.validate_theta(theta)?;
    let a = alpha;
    let a1 = 1.0 + a;
    Ok(match model {
        Model::NormalScale(m) => {
            let s = theta[0];
            let u = (x[0] - m.mean) / s;
            vec![s * a1.powf(2.5) / 2.0 * (u * u - 1.0 / a1) * (-0.5 * a * u * u).exp()]
        }
        Model::Exponential(_) => {
            let t = theta[0];
            let r = x[0] / t;
            if x[0] < 0.0 {
                vec![0.0]
            } else {
                vec![t * a1.powi(3) * (r - 1.0 / a1) * (-a * r).exp()]
            }
        }
        Model::NormalLocation(m) => {
            let z = (x[0] - theta[0]) / m.sd;
            vec![a1.powf(1.5) * (x[0] - theta[0]) * (-0.5 * a * z * z).exp()]
        }
        Model::MvnMean(m) => {
            let p = m.dim() as f64;
            let f = a1.powf(0.5 * (p + 2.0)) * (-0.5 * a * m.mahalanobis2(theta, x)).exp();
            x.iter().zip(theta).map(|(xi, mi)| f * (xi - mi)).collect()
        }
    })
}

/// Gross error sensitivity from the closed forms; `+∞` at α = 0.
///
/// For the exponential model this is the supremum over the lobe
/// `x ≥ θ/(α+1)`; see [`sup_influence`] for the supremum over the whole
/// support.
pub fn ges(model: &Model, theta: &[f64], alpha: f64) -> Result<f64> {
    model.validate_theta(theta)?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 0.0 {
        return Ok(f64::INFINITY);
    }
    let a = alpha;
    let a1 = 1.0 + a;
    Ok(match model {
        Model::NormalScale(_) => {
            let s = theta[0];
            let centre = s * a1.powf(1.5) / 2.0;
            let lobe = s * a1.powf(2.5) / a * (-(3.0 * a + 2.0) / (2.0 * a1)).exp();
            centre.max(lobe)
        }
        Model::Exponential(_) => theta[0] * a1.powi(3) / a * (-(2.0 * a + 1.0) / a1).exp(),
        Model::NormalLocation(m) => a1.powf(1.5) * m.sd / a.sqrt() * (-0.5f64).exp(),
        Model::MvnMean(m) => {
            let lmax = m.covariance().max_symmetric_eigenvalue();
            a1.powf(0.5 * (m.dim() as f64 + 2.0)) * (lmax / a).sqrt() * (-0.5f64).exp()
        }
    })
}

/// `sup_x |IF(x)|` for the univariate families, by a dense grid in
/// standardized units refined with golden-section search. The tails of all
/// closed forms vanish, so the grid needs no tail correction.
pub fn sup_influence(model: &Model, theta: &[f64], alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (centre, scale, lo, hi) = match model {
        Model::NormalScale(m) => (m.mean, theta[0], -60.0, 60.0),
        Model::NormalLocation(m) => (theta[0], m.sd, -60.0, 60.0),
        Model::Exponential(_) => (0.0, theta[0], 0.0, 400.0),
        Model::MvnMean(_) => return Err(Error::UnsupportedModel("mvn-mean")),
    };
    let f = |t: f64| -> f64 { influence_closed(model, theta, alpha, &[centre + scale * t]).map_or(0.0, |v| v[0].abs()) };
    let steps = 40_000;
    let h = (hi - lo) / steps as f64;
    let mut best = (lo, f(lo));
    for i in 1..=steps {
        let t = lo + h * i as f64;
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let a = (best.0 - h).max(lo);
    let b = (best.0 + h).min(hi);
    let t = golden_section(&mut |t| -f(t), a, b, 1e-12);
    Ok(best.1.max(f(t)).max(f(a)).max(f(b)))
}

/// Minimizes [`ges`] over `interval ⊂ (0, beta_max]` by golden-section
/// search to `1e-5` in α. Returns `(α*, GES(α*))`.
pub fn most_brobust_alpha(model: &Model, theta: &[f64], interval: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = interval;
    if !(lo > 0.0 && hi > lo && hi <= DEFAULT_BETA_MAX) {
        return Err(Error::InvalidInput("search interval must lie in (0, beta_max]"));
    }
    model.validate_theta(theta)?;
    let a = golden_section(&mut |a| ges(model, theta, a).unwrap_or(f64::INFINITY), lo, hi, 1e-7);
    Ok((a, ges(model, theta, a)?))
}

/// The ψ function of the location normal model,
/// `α (α+1)^{α/(2(α+1))} σ^{−(3α+2)/(α+1)} (2π)^{−α/(2(α+1))} (x − m) e^{−α z²/2}`
/// with `z = (x − m)/σ`.
pub fn psi_location(x: f64, m: f64, sigma: f64, alpha: f64) -> f64 {
    let a = alpha;
    let a1 = 1.0 + a;
    let z = (x - m) / sigma;
    a * a1.powf(a / (2.0 * a1))
        * sigma.powf(-(3.0 * a + 2.0) / a1)
        * (2.0 * core::f64::consts::PI).powf(-a / (2.0 * a1))
        * (x - m)
        * (-0.5 * a * z * z).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub alpha: Alpha,
    pub if_values: Vec<(Vec<f64>, Vec<f64>)>,
    pub ges: f64,
    pub are: f64,
    pub most_brobust: Option<(f64, f64)>,
}

/// Closed-form influence values on `grid`, GES and ARE at one α, plus the
/// most B-robust order when `search` is given.
pub fn robustness_report(
    model: &Model,
    theta: &[f64],
    alpha: Alpha,
    grid: &[Vec<f64>],
    search: Option<(f64, f64)>,
) -> Result<RobustnessReport> {
    let a = alpha.value();
    let if_values = grid.iter().map(|x| Ok((x.clone(), influence_closed(model, theta, a, x)?))).collect::<Result<Vec<_>>>()?;
    Ok(RobustnessReport {
        alpha,
        if_values,
        ges: ges(model, theta, a)?,
        are: are(model.kind(), a, model.theta_dim())?,
        most_brobust: search.map(|s| most_brobust_alpha(model, theta, s)).transpose()?,
    })
}

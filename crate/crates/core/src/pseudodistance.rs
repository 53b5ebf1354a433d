//! The R_α pseudodistance, its normalizer and the empirical criterion.
//!
//! For α > 0
//!
//! ```text
//! R_α(P, Q) = 1/(1+α) ln ∫p^α dP + 1/(α(1+α)) ln ∫q^α dQ − 1/α ln ∫p^α dQ
//! ```
//!
//! and for α = 0 the limit `R_0(P, Q) = ∫ln q dQ − ∫ln p dQ`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::alpha::Alpha;
use crate::error::{Error, Result};
use crate::models::{ParametricModel, Sample};
use crate::quadrature::QuadratureSpec;

/// A member `p_θ` of a parametric family.
#[derive(Clone, Copy)]
pub struct Density<'a> {
    pub model: &'a dyn ParametricModel,
    pub theta: &'a [f64],
}

impl<'a> Density<'a> {
    pub fn new(model: &'a dyn ParametricModel, theta: &'a [f64]) -> Result<Self> {
        model.validate_theta(theta)?;
        Ok(Density { model, theta })
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.model.ln_density(self.theta, x)
    }

    /// `∫ g dP`.
    fn expect(&self, quad: &QuadratureSpec, g: &mut dyn FnMut(&[f64]) -> f64) -> Result<f64> {
        let mut out = [0.0];
        self.model.power_integral(self.theta, 1.0, quad, &mut out, &mut |x, o| o[0] = g(x))?;
        Ok(out[0])
    }
}

/// The three terms of the decomposition
/// `R_α(P, Q) = r0_p + r1_q − cross / α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// `1/(1+α) ln ∫p^α dP`.
    pub r0_p: f64,
    /// `1/(α(1+α)) ln ∫q^α dQ`.
    pub r1_q: f64,
    /// `ln ∫p^α dQ`.
    pub cross: f64,
}

impl Decomposition {
    pub fn total(&self, alpha: f64) -> f64 {
        self.r0_p + self.r1_q - self.cross / alpha
    }
}

/// `ln ∫ p_θ^κ dλ`, closed form when the model registers one.
pub fn ln_power_integral<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    kappa: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    match model.ln_power_integral(theta, kappa) {
        Some(v) => Ok(v),
        None => ln_power_integral_quadrature(model, theta, kappa, quad),
    }
}

/// `ln ∫ p_θ^κ dλ` by quadrature against `P_θ`, ignoring closed forms.
pub fn ln_power_integral_quadrature<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    kappa: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let mut out = [0.0];
    let a = kappa - 1.0;
    model.power_integral(theta, 1.0, quad, &mut out, &mut |x, o| o[0] = (a * model.ln_density(theta, x)).exp())?;
    finite_ln(out[0], "power integral of the density")
}

fn finite_ln(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v.ln())
    } else {
        Err(Error::NonFiniteIntegral { what })
    }
}

/// Term-by-term decomposition of `R_α(P, Q)` for α > 0. The first two
/// terms use closed forms where available; the cross term is integrated
/// against Lebesgue measure for univariate densities.
pub fn decomposition(p: Density<'_>, q: Density<'_>, alpha: Alpha, quad: &QuadratureSpec) -> Result<Decomposition> {
    let a = alpha.require_positive()?;
    let lp = ln_power_integral(p.model, p.theta, 1.0 + a, quad)?;
    let lq = ln_power_integral(q.model, q.theta, 1.0 + a, quad)?;
    let cross = match shared_bounds(p, q, quad.truncation) {
        // Gauss–Hermite under Q loses accuracy when p is much narrower than q
        Some((lo, hi)) => {
            let mut out = [0.0];
            ln_integrals(quad, lo, hi, &mut out, &mut |x, o| o[0] = a * p.ln_pdf(&[x]) + q.ln_pdf(&[x]))?;
            out[0]
        }
        None => finite_ln(q.expect(quad, &mut |x| (a * p.ln_pdf(x)).exp())?, "p^alpha dQ")?,
    };
    if !cross.is_finite() {
        return Err(Error::NonFiniteIntegral { what: "p^alpha dQ" });
    }
    Ok(Decomposition { r0_p: lp / (1.0 + a), r1_q: lq / (a * (1.0 + a)), cross })
}

/// `R_α(P, Q)`.
///
/// With `quad.cross_check` set, the value is recomputed through the
/// Hölder form and `CrossCheck` is returned when the two disagree by more
/// than `1e-6` relative.
pub fn renyi_pseudodistance(p: Density<'_>, q: Density<'_>, alpha: Alpha, quad: &QuadratureSpec) -> Result<f64> {
    let value = if alpha.is_zero() {
        let v = q.expect(quad, &mut |x| q.ln_pdf(x) - p.ln_pdf(x))?;
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegral { what: "log-likelihood ratio" });
        }
        v
    } else {
        decomposition(p, q, alpha, quad)?.total(alpha.value())
    };
    if quad.cross_check && !alpha.is_zero() {
        let other = holder_form(p, q, alpha, quad)?;
        if (value - other).abs() > 1e-6 * (1.0 + value.abs()) {
            return Err(Error::CrossCheck { first: value, second: other });
        }
    }
    Ok(value)
}

/// The Hölder form
/// `1/α { ln[(∫p^{1+α})^{α/(1+α)} (∫q^{1+α})^{1/(1+α)}] − ln ∫p^α q dλ }`,
/// with every integral taken against Lebesgue measure by adaptive Simpson
/// for univariate densities. Multivariate densities fall back to the
/// model-reference rules.
pub fn holder_form(p: Density<'_>, q: Density<'_>, alpha: Alpha, quad: &QuadratureSpec) -> Result<f64> {
    let a = alpha.require_positive()?;
    let k = 1.0 + a;
    let (lp, lq, lpq) = match shared_bounds(p, q, quad.truncation) {
        Some((lo, hi)) => {
            let mut out = [0.0; 3];
            ln_integrals(quad, lo, hi, &mut out, &mut |x, o| {
                let lp = p.ln_pdf(&[x]);
                let lq = q.ln_pdf(&[x]);
                o[0] = k * lp;
                o[1] = k * lq;
                o[2] = a * lp + lq;
            })?;
            (out[0], out[1], out[2])
        }
        None => (
            ln_power_integral_quadrature(p.model, p.theta, k, quad)?,
            ln_power_integral_quadrature(q.model, q.theta, k, quad)?,
            finite_ln(q.expect(quad, &mut |x| (a * p.ln_pdf(x)).exp())?, "p^alpha q")?,
        ),
    };
    let v = (a / k * lp + lq / k - lpq) / a;
    if !v.is_finite() {
        return Err(Error::NonFiniteIntegral { what: "holder form" });
    }
    Ok(v)
}

// ln ∫ exp(g_j) dλ over [lo, hi] for each component, shifting every
// integrand by its peak on a coarse grid so tiny integrals keep their
// relative accuracy.
fn ln_integrals(quad: &QuadratureSpec, lo: f64, hi: f64, out: &mut [f64], logf: &mut dyn FnMut(f64, &mut [f64])) -> Result<()> {
    let k = out.len();
    let mut shift = vec![f64::NEG_INFINITY; k];
    let mut buf = vec![0.0; k];
    const GRID: usize = 512;
    for i in 0..=GRID {
        logf(lo + (hi - lo) * i as f64 / GRID as f64, &mut buf);
        for (s, b) in shift.iter_mut().zip(&buf) {
            if *b > *s {
                *s = *b;
            }
        }
    }
    if shift.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteIntegral { what: "log integrand" });
    }
    quad.integrate_interval(lo, hi, out, &mut |x, o| {
        logf(x, o);
        for (v, s) in o.iter_mut().zip(&shift) {
            *v = (*v - s).exp();
        }
    })?;
    for (v, s) in out.iter_mut().zip(&shift) {
        *v = v.ln() + s;
    }
    Ok(())
}

fn shared_bounds(p: Density<'_>, q: Density<'_>, radius: f64) -> Option<(f64, f64)> {
    match (p.model.lebesgue_bounds(p.theta, radius), q.model.lebesgue_bounds(q.theta, radius)) {
        (Some(bp), Some(bq)) => Some((bp.0.min(bq.0), bp.1.max(bq.1))),
        _ => None,
    }
}

/// The normalizer `C_α(θ) = (∫p_θ^{1+α} dλ)^{α/(1+α)}`.
pub fn c_alpha<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], alpha: Alpha, quad: &QuadratureSpec) -> Result<f64> {
    model.validate_theta(theta)?;
    let a = alpha.value();
    let k = 1.0 + a;
    Ok((a / k * ln_power_integral(model, theta, k, quad)?).exp())
}

/// The kernel `h(x, θ) = p_θ^α(x) / C_α(θ)`.
pub fn h_kernel<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    alpha: Alpha,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let a = alpha.require_positive()?;
    let c = c_alpha(model, theta, alpha, quad)?;
    Ok((a * model.ln_density(theta, x)).exp() / c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    AlphaPositive,
    LogLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    pub value: f64,
    pub branch: Branch,
}

/// Empirical criterion: `(1/n) Σ ln p_θ(X_i)` at α = 0, otherwise
/// `−1/(1+α) ln ∫p_θ^α dP_θ + 1/α ln (1/n) Σ p_θ^α(X_i)`.
pub fn criterion<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    sample: &Sample,
    alpha: Alpha,
    quad: &QuadratureSpec,
) -> Result<CriterionValue> {
    sample.check_model(model)?;
    let w = sample.uniform_weights();
    let value = weighted_criterion(model, theta, sample.points(), &w, alpha.value(), quad)?;
    let branch = if alpha.is_zero() { Branch::LogLikelihood } else { Branch::AlphaPositive };
    Ok(CriterionValue { value, branch })
}

/// The ratio form `C_α(θ)⁻¹ (1/n) Σ p_θ^α(X_i)`; its logarithm divided by α
/// is [`criterion`].
pub fn criterion_ratio<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    sample: &Sample,
    alpha: Alpha,
    quad: &QuadratureSpec,
) -> Result<f64> {
    sample.check_model(model)?;
    let a = alpha.require_positive()?;
    let c = c_alpha(model, theta, alpha, quad)?;
    let n = sample.len() as f64;
    let s: f64 = sample.iter().map(|x| (a * model.ln_density(theta, x)).exp()).sum();
    Ok(s / n / c)
}

/// `ln Σ π_i p_θ(x_i)^α` computed stably. Zero-density points contribute 0.
pub(crate) fn ln_weighted_power_mean<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    points: &[f64],
    weights: &[f64],
    alpha: f64,
) -> Result<f64> {
    let d = model.obs_dim();
    let lw: Vec<f64> = points.chunks_exact(d).zip(weights).map(|(x, w)| alpha * model.ln_density(theta, x) + w.ln()).collect();
    let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::NonFiniteCriterion("every sample point has zero density"));
    }
    Ok(mx + lw.iter().map(|v| (v - mx).exp()).sum::<f64>().ln())
}

/// Criterion for a weighted point set (weights summing to one).
pub fn weighted_criterion<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    points: &[f64],
    weights: &[f64],
    alpha: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    model.validate_theta(theta)?;
    if weights.is_empty() {
        return Err(Error::EmptySample);
    }
    if alpha == 0.0 {
        let d = model.obs_dim();
        let mut s = 0.0;
        for (x, w) in points.chunks_exact(d).zip(weights) {
            let l = model.ln_density(theta, x);
            if !l.is_finite() {
                return Err(Error::NonFiniteCriterion("sample point with zero density"));
            }
            s += w * l;
        }
        return Ok(s);
    }
    let k = 1.0 + alpha;
    let li = ln_power_integral(model, theta, k, quad)?;
    Ok(-li / k + ln_weighted_power_mean(model, theta, points, weights, alpha)? / alpha)
}

/// The centering term `c_α(θ) = ∫p_θ^α ṗ_θ dλ / ∫p_θ^{1+α} dλ` and its
/// Jacobian, together with `ln ∫p_θ^{1+α} dλ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub ln_integral: f64,
    pub c: Vec<f64>,
    /// Row-major `d × d`.
    pub jacobian: Vec<f64>,
}

pub fn centering<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], alpha: f64, quad: &QuadratureSpec) -> Result<Centering> {
    let d = model.theta_dim();
    let k = 1.0 + alpha;
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    if let Some(li) = model.ln_power_integral(theta, k) {
        if model.ln_power_integral_derivatives(theta, k, &mut grad, &mut hess) {
            return Ok(Centering {
                ln_integral: li,
                c: grad.iter().map(|g| g / k).collect(),
                jacobian: hess.iter().map(|h| h / k).collect(),
            });
        }
    }
    centering_quadrature(model, theta, alpha, quad)
}

/// [`centering`] by quadrature only.
pub fn centering_quadrature<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    alpha: f64,
    quad: &QuadratureSpec,
) -> Result<Centering> {
    let d = model.theta_dim();
    let k = 1.0 + alpha;
    let mut out = vec![0.0; 1 + d + d * d];
    let mut s = vec![0.0; d];
    let mut ds = vec![0.0; d * d];
    model.power_integral(theta, 1.0, quad, &mut out, &mut |x, o| {
        let w = (alpha * model.ln_density(theta, x)).exp();
        model.score(theta, x, &mut s);
        model.score_jacobian(theta, x, &mut ds);
        o[0] = w;
        for i in 0..d {
            o[1 + i] = w * s[i];
            for j in 0..d {
                o[1 + d + i * d + j] = w * (k * s[i] * s[j] + ds[i * d + j]);
            }
        }
    })?;
    let i0 = out[0];
    let ln_integral = finite_ln(i0, "p^(1+alpha)")?;
    let c: Vec<f64> = out[1..=d].iter().map(|v| v / i0).collect();
    let mut jacobian = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            jacobian[i * d + j] = out[1 + d + i * d + j] / i0 - k * c[i] * c[j];
        }
    }
    Ok(Centering { ln_integral, c, jacobian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Exponential, NormalLocation, NormalScale};

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn pseudodistance_examples() {
        let m = NormalLocation::new(1.0).unwrap();
        let a = Alpha::new(0.5).unwrap();
        let p = Density::new(&m, &[0.0]).unwrap();
        assert!(renyi_pseudodistance(p, p, a, &q()).unwrap().abs() < 1e-12);
        let p1 = Density::new(&m, &[1.0]).unwrap();
        let r0 = renyi_pseudodistance(p1, p, Alpha::ZERO, &q()).unwrap();
        assert!((r0 - 0.5).abs() < 1e-12);
        let s = NormalScale::new(0.0);
        let pa = Density::new(&s, &[1.0]).unwrap();
        let pb = Density::new(&s, &[2.0]).unwrap();
        let quad = q().with_cross_check(true);
        assert!(renyi_pseudodistance(pa, pb, a, &quad).unwrap() > 1e-3);
    }

    #[test]
    fn c_alpha_examples() {
        let one = Alpha::new(1.0).unwrap();
        let c = c_alpha(&NormalScale::new(0.0), &[1.0], one, &q()).unwrap();
        let expect = (2.0 * core::f64::consts::PI).powf(-0.25) * 2f64.powf(-0.25);
        assert!((c - expect).abs() < 1e-14);
        assert!((c - 0.53112).abs() < 1e-5);
        let c = c_alpha(&Exponential, &[1.0], one, &q()).unwrap();
        assert!((c - 0.5f64.sqrt()).abs() < 1e-14);
        let c = c_alpha(&Exponential, &[3.0], Alpha::new(1e-9).unwrap(), &q()).unwrap();
        assert!((c - 1.0).abs() < 1e-8);
        let h = h_kernel(&NormalScale::new(0.0), &[1.0], one, &[0.0], &q()).unwrap();
        assert!((h - 0.75112).abs() < 1e-5);
        assert_eq!(h_kernel(&Exponential, &[1.0], one, &[-1.0], &q()).unwrap(), 0.0);
    }

    #[test]
    fn criterion_examples() {
        let m = NormalLocation::new(1.0).unwrap();
        let s = Sample::univariate(vec![0.0]).unwrap();
        let v = criterion(&m, &[0.0], &s, Alpha::ZERO, &q()).unwrap();
        assert_eq!(v.branch, Branch::LogLikelihood);
        assert!((v.value + 0.918_938_533_204_672_7).abs() < 1e-12);

        let sc = NormalScale::new(0.0);
        let s = Sample::univariate(vec![1.0, -1.0]).unwrap();
        let a = Alpha::new(0.5).unwrap();
        let v = criterion(&sc, &[1.0], &s, a, &q()).unwrap();
        let r = criterion_ratio(&sc, &[1.0], &s, a, &q()).unwrap();
        assert!((v.value - r.ln() / 0.5).abs() < 1e-8);

        let v0 = criterion(&sc, &[1.3], &s, Alpha::ZERO, &q()).unwrap().value;
        let v1 = criterion(&sc, &[1.3], &s, Alpha::new(1e-5).unwrap(), &q()).unwrap().value;
        assert!((v0 - v1).abs() < 1e-3);
    }

    #[test]
    fn zero_density_points() {
        let s = Sample::univariate(vec![-1.0, 2.0]).unwrap();
        let a = Alpha::new(0.5).unwrap();
        assert!(criterion(&Exponential, &[1.0], &s, a, &q()).is_ok());
        assert!(matches!(criterion(&Exponential, &[1.0], &s, Alpha::ZERO, &q()), Err(Error::NonFiniteCriterion(_))));
        let s = Sample::univariate(vec![-1.0]).unwrap();
        assert!(matches!(criterion(&Exponential, &[1.0], &s, a, &q()), Err(Error::NonFiniteCriterion(_))));
    }

    #[test]
    fn centering_closed_matches_quadrature() {
        for alpha in [0.1, 0.5, 1.0] {
            let closed = centering(&Exponential, &[1.7], alpha, &q()).unwrap();
            let quad = centering_quadrature(&Exponential, &[1.7], alpha, &q()).unwrap();
            assert!((closed.c[0] - quad.c[0]).abs() < 1e-8);
            assert!((closed.jacobian[0] - quad.jacobian[0]).abs() < 1e-8);
            let closed = centering(&NormalScale::new(0.3), &[0.8], alpha, &q()).unwrap();
            let quad = centering_quadrature(&NormalScale::new(0.3), &[0.8], alpha, &q()).unwrap();
            assert!((closed.c[0] - quad.c[0]).abs() < 1e-8);
            assert!((closed.jacobian[0] - quad.jacobian[0]).abs() < 1e-8);
        }
        let c = centering_quadrature(&NormalLocation::new(1.0).unwrap(), &[0.4], 0.5, &q()).unwrap();
        assert!(c.c[0].abs() < 1e-12);
    }
}

//! Parametric families, samples and contamination.
//!
//! Four families are built in: the normal scale model with known mean, the
//! normal location model with known standard deviation, the exponential
//! model with mean θ, and the multivariate normal mean model with known
//! covariance. σ always denotes a standard deviation.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::quadrature::QuadratureSpec;
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Consistency constant of the MAD at the normal.
pub const MAD_NORMAL: f64 = 0.674_489_750_196_081_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    NormalScale,
    NormalLocation,
    Exponential,
    MvnMean,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NormalScale => "normal-scale",
            ModelKind::NormalLocation => "normal-location",
            ModelKind::Exponential => "exponential",
            ModelKind::MvnMean => "mvn-mean",
        }
    }
}

/// A density family `p_θ` on ℝᵈ, dominated by Lebesgue measure.
///
/// Implementors supply the log-density, the score `∂ ln p_θ / ∂θ` and its
/// Jacobian; every other quantity in the crate is built from these plus the
/// power integrals `∫ f p_θ^κ dλ`.
pub trait ParametricModel {
    fn kind(&self) -> ModelKind;
    fn theta_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    /// `DomainError` when θ is outside the open parameter domain.
    fn validate_theta(&self, theta: &[f64]) -> Result<()>;

    /// `ln p_θ(x)`, `-∞` outside the support.
    fn ln_density(&self, theta: &[f64], x: &[f64]) -> f64;

    fn density(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.ln_density(theta, x).exp()
    }

    /// `∂ ln p_θ(x) / ∂θ` into `out` (length `theta_dim`).
    fn score(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// `∂² ln p_θ(x) / ∂θ∂θᵀ`, row-major into `out` (length `theta_dim²`).
    fn score_jacobian(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Closed form of `ln ∫ p_θ^κ dλ`, when known.
    fn ln_power_integral(&self, _theta: &[f64], _kappa: f64) -> Option<f64> {
        None
    }

    /// Gradient and Hessian in θ of `ln ∫ p_θ^κ dλ`, when known in closed
    /// form. Returns `false` otherwise.
    fn ln_power_integral_derivatives(&self, _theta: &[f64], _kappa: f64, _grad: &mut [f64], _hess: &mut [f64]) -> bool {
        false
    }

    /// `∫ f(x) p_θ(x)^κ dλ(x)` for a vector-valued `f`.
    fn power_integral(
        &self,
        theta: &[f64],
        kappa: f64,
        quad: &QuadratureSpec,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()>;

    /// Finite interval carrying all but a negligible part of the mass, for
    /// Lebesgue-measure quadrature. Univariate families only.
    fn lebesgue_bounds(&self, _theta: &[f64], _radius: f64) -> Option<(f64, f64)> {
        None
    }

    /// One draw from `P_θ` into `out` (length `obs_dim`).
    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);

    /// Scale-type parameters are optimized on the log scale.
    fn log_parametrized(&self) -> bool;

    /// Maximum likelihood estimate for a weighted point set (weights sum to
    /// one). Points are flattened row-major.
    fn weighted_mle(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>>;

    /// Median/MAD-type starting value.
    fn robust_start(&self, points: &[f64], weights: &[f64]) -> Vec<f64>;

    /// Dispersed starting values for the multi-start policy.
    fn grid_starts(&self, points: &[f64], weights: &[f64]) -> Vec<Vec<f64>>;

    /// Weighted nodes approximating `P_θ`.
    fn discretize(&self, theta: &[f64], quad: &QuadratureSpec) -> (Vec<f64>, Vec<f64>);
}

fn check_dim(theta: &[f64], dim: usize) -> Result<()> {
    if theta.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: theta.len() });
    }
    Ok(())
}

fn positive(v: f64, what: &'static str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(what))
    }
}

/// Normal scale model `N(m, σ)` with known mean `m`, θ = σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalScale {
    pub mean: f64,
}

impl NormalScale {
    pub fn new(mean: f64) -> Self {
        NormalScale { mean }
    }
}

impl ParametricModel for NormalScale {
    fn kind(&self) -> ModelKind {
        ModelKind::NormalScale
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim(theta, 1)?;
        positive(theta[0], "sigma must be positive")
    }

    fn ln_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        let s = theta[0];
        let z = (x[0] - self.mean) / s;
        -s.ln() - 0.5 * LN_2PI - 0.5 * z * z
    }

    fn score(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let s = theta[0];
        let z = (x[0] - self.mean) / s;
        out[0] = (z * z - 1.0) / s;
    }

    fn score_jacobian(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let s = theta[0];
        let z = (x[0] - self.mean) / s;
        out[0] = (1.0 - 3.0 * z * z) / (s * s);
    }

    fn ln_power_integral(&self, theta: &[f64], kappa: f64) -> Option<f64> {
        Some(normal_ln_power_integral(theta[0], kappa))
    }

    fn ln_power_integral_derivatives(&self, theta: &[f64], kappa: f64, grad: &mut [f64], hess: &mut [f64]) -> bool {
        let s = theta[0];
        grad[0] = (1.0 - kappa) / s;
        hess[0] = -(1.0 - kappa) / (s * s);
        true
    }

    fn power_integral(
        &self,
        theta: &[f64],
        kappa: f64,
        quad: &QuadratureSpec,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        let s = theta[0];
        quad.expect_normal(self.mean, s / kappa.sqrt(), out, &mut |x, o| f(&[x], o))?;
        let c = normal_ln_power_integral(s, kappa).exp();
        out.iter_mut().for_each(|v| *v *= c);
        Ok(())
    }

    fn lebesgue_bounds(&self, theta: &[f64], radius: f64) -> Option<(f64, f64)> {
        Some((self.mean - radius * theta[0], self.mean + radius * theta[0]))
    }

    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = self.mean + theta[0] * rng::standard_normal(rng);
    }

    fn log_parametrized(&self) -> bool {
        true
    }

    fn weighted_mle(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let v: f64 = points.iter().zip(weights).map(|(x, w)| w * (x - self.mean).powi(2)).sum();
        let s = v.sqrt();
        if !(s > 0.0) {
            return Err(Error::DegenerateSample);
        }
        Ok(vec![s])
    }

    fn robust_start(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        let dev: Vec<f64> = points.iter().map(|x| (x - self.mean).abs()).collect();
        let mad = weighted_quantile(&dev, weights, 0.5) / MAD_NORMAL;
        if mad > 0.0 {
            vec![mad]
        } else {
            self.weighted_mle(points, weights).unwrap_or_else(|_| vec![1.0])
        }
    }

    fn grid_starts(&self, points: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
        let r = self.robust_start(points, weights)[0];
        [0.5, 2.0, 8.0].iter().map(|k| vec![k * r]).collect()
    }

    fn discretize(&self, theta: &[f64], quad: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
        quad.normal_nodes(self.mean, theta[0]).into_iter().unzip()
    }
}

fn normal_ln_power_integral(sigma: f64, kappa: f64) -> f64 {
    (1.0 - kappa) * (sigma.ln() + 0.5 * LN_2PI) - 0.5 * kappa.ln()
}

/// Normal location model `N(m, σ)` with known σ, θ = m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLocation {
    pub sd: f64,
}

impl NormalLocation {
    pub fn new(sd: f64) -> Result<Self> {
        positive(sd, "sigma must be positive")?;
        Ok(NormalLocation { sd })
    }
}

impl ParametricModel for NormalLocation {
    fn kind(&self) -> ModelKind {
        ModelKind::NormalLocation
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim(theta, 1)?;
        if theta[0].is_finite() {
            Ok(())
        } else {
            Err(Error::DomainError("location must be finite"))
        }
    }

    fn ln_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        let z = (x[0] - theta[0]) / self.sd;
        -self.sd.ln() - 0.5 * LN_2PI - 0.5 * z * z
    }

    fn score(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = (x[0] - theta[0]) / (self.sd * self.sd);
    }

    fn score_jacobian(&self, _theta: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = -1.0 / (self.sd * self.sd);
    }

    fn ln_power_integral(&self, _theta: &[f64], kappa: f64) -> Option<f64> {
        Some(normal_ln_power_integral(self.sd, kappa))
    }

    fn ln_power_integral_derivatives(&self, _theta: &[f64], _kappa: f64, grad: &mut [f64], hess: &mut [f64]) -> bool {
        grad[0] = 0.0;
        hess[0] = 0.0;
        true
    }

    fn power_integral(
        &self,
        theta: &[f64],
        kappa: f64,
        quad: &QuadratureSpec,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        quad.expect_normal(theta[0], self.sd / kappa.sqrt(), out, &mut |x, o| f(&[x], o))?;
        let c = normal_ln_power_integral(self.sd, kappa).exp();
        out.iter_mut().for_each(|v| *v *= c);
        Ok(())
    }

    fn lebesgue_bounds(&self, theta: &[f64], radius: f64) -> Option<(f64, f64)> {
        Some((theta[0] - radius * self.sd, theta[0] + radius * self.sd))
    }

    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = theta[0] + self.sd * rng::standard_normal(rng);
    }

    fn log_parametrized(&self) -> bool {
        false
    }

    fn weighted_mle(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![points.iter().zip(weights).map(|(x, w)| w * x).sum()])
    }

    fn robust_start(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        vec![weighted_quantile(points, weights, 0.5)]
    }

    fn grid_starts(&self, points: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
        let (lo, hi) = min_max(points);
        vec![vec![weighted_quantile(points, weights, 0.1)], vec![weighted_quantile(points, weights, 0.9)], vec![0.5 * (lo + hi)]]
    }

    fn discretize(&self, theta: &[f64], quad: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
        quad.normal_nodes(theta[0], self.sd).into_iter().unzip()
    }
}

/// Exponential model with density `θ⁻¹ e^{-x/θ}` on `x ≥ 0`, θ = mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Exponential;

impl ParametricModel for Exponential {
    fn kind(&self) -> ModelKind {
        ModelKind::Exponential
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim(theta, 1)?;
        positive(theta[0], "theta must be positive")
    }

    fn ln_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        if x[0] < 0.0 {
            return f64::NEG_INFINITY;
        }
        -theta[0].ln() - x[0] / theta[0]
    }

    fn score(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let t = theta[0];
        out[0] = (x[0] - t) / (t * t);
    }

    fn score_jacobian(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let t = theta[0];
        out[0] = (t - 2.0 * x[0]) / (t * t * t);
    }

    fn ln_power_integral(&self, theta: &[f64], kappa: f64) -> Option<f64> {
        Some((1.0 - kappa) * theta[0].ln() - kappa.ln())
    }

    fn ln_power_integral_derivatives(&self, theta: &[f64], kappa: f64, grad: &mut [f64], hess: &mut [f64]) -> bool {
        let t = theta[0];
        grad[0] = (1.0 - kappa) / t;
        hess[0] = -(1.0 - kappa) / (t * t);
        true
    }

    fn power_integral(
        &self,
        theta: &[f64],
        kappa: f64,
        quad: &QuadratureSpec,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        let t = theta[0];
        quad.expect_exponential(t / kappa, out, &mut |x, o| f(&[x], o))?;
        let c = ((1.0 - kappa) * t.ln() - kappa.ln()).exp();
        out.iter_mut().for_each(|v| *v *= c);
        Ok(())
    }

    fn lebesgue_bounds(&self, theta: &[f64], radius: f64) -> Option<(f64, f64)> {
        Some((0.0, radius * theta[0]))
    }

    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = rng::exponential(rng, theta[0]);
    }

    fn log_parametrized(&self) -> bool {
        true
    }

    fn weighted_mle(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let m: f64 = points.iter().zip(weights).map(|(x, w)| w * x).sum();
        if !(m > 0.0) {
            return Err(Error::DegenerateSample);
        }
        Ok(vec![m])
    }

    fn robust_start(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        let med = weighted_quantile(points, weights, 0.5) / core::f64::consts::LN_2;
        if med > 0.0 {
            vec![med]
        } else {
            self.weighted_mle(points, weights).unwrap_or_else(|_| vec![1.0])
        }
    }

    fn grid_starts(&self, points: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
        let r = self.robust_start(points, weights)[0];
        [0.5, 2.0, 8.0].iter().map(|k| vec![k * r]).collect()
    }

    fn discretize(&self, theta: &[f64], quad: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
        quad.exponential_nodes(theta[0]).into_iter().unzip()
    }
}

/// Largest supported dimension of the multivariate normal mean model.
pub const MAX_MVN_DIM: usize = 8;

/// Multivariate normal `N_p(m, V)` with known covariance `V`, θ = m.
#[derive(Debug, Clone)]
pub struct MvnMean {
    cov: Matrix,
    chol: Cholesky,
    precision: Matrix,
    ln_det: f64,
}

impl MvnMean {
    pub fn new(cov: Matrix) -> Result<Self> {
        if !cov.is_square() || cov.rows() == 0 {
            return Err(Error::InvalidInput("covariance must be a nonempty square matrix"));
        }
        if cov.rows() > MAX_MVN_DIM {
            return Err(Error::InvalidInput("mvn-mean supports dimension at most 8"));
        }
        if cov.asymmetry() > 1e-12 * (1.0 + cov.max_abs()) {
            return Err(Error::DomainError("covariance must be symmetric"));
        }
        let chol = cov.cholesky().ok_or(Error::DomainError("covariance must be positive definite"))?;
        let precision = chol.inverse();
        let ln_det = chol.ln_det();
        Ok(MvnMean { cov, chol, precision, ln_det })
    }

    pub fn dim(&self) -> usize {
        self.cov.rows()
    }

    pub fn covariance(&self) -> &Matrix {
        &self.cov
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    fn ln_power(&self, kappa: f64) -> f64 {
        let p = self.dim() as f64;
        (1.0 - kappa) * (0.5 * p * LN_2PI + 0.5 * self.ln_det) - 0.5 * p * kappa.ln()
    }

    /// `(x − m)ᵀ V⁻¹ (x − m)`.
    pub fn mahalanobis2(&self, m: &[f64], x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(m).map(|(a, b)| a - b).collect();
        let pd = self.precision.matvec(&d);
        d.iter().zip(&pd).map(|(a, b)| a * b).sum()
    }
}

impl ParametricModel for MvnMean {
    fn kind(&self) -> ModelKind {
        ModelKind::MvnMean
    }

    fn theta_dim(&self) -> usize {
        self.dim()
    }

    fn obs_dim(&self) -> usize {
        self.dim()
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim(theta, self.dim())?;
        if theta.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::DomainError("mean must be finite"))
        }
    }

    fn ln_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        let p = self.dim() as f64;
        -0.5 * p * LN_2PI - 0.5 * self.ln_det - 0.5 * self.mahalanobis2(theta, x)
    }

    fn score(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let d: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
        out.copy_from_slice(&self.precision.matvec(&d));
    }

    fn score_jacobian(&self, _theta: &[f64], _x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(self.precision.as_slice()) {
            *o = -v;
        }
    }

    fn ln_power_integral(&self, _theta: &[f64], kappa: f64) -> Option<f64> {
        Some(self.ln_power(kappa))
    }

    fn ln_power_integral_derivatives(&self, _theta: &[f64], _kappa: f64, grad: &mut [f64], hess: &mut [f64]) -> bool {
        grad.iter_mut().for_each(|v| *v = 0.0);
        hess.iter_mut().for_each(|v| *v = 0.0);
        true
    }

    fn power_integral(
        &self,
        theta: &[f64],
        kappa: f64,
        quad: &QuadratureSpec,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        let chol = self.chol.scaled(1.0 / kappa.sqrt());
        quad.expect_mvn(theta, &chol, out, f)?;
        let c = self.ln_power(kappa).exp();
        out.iter_mut().for_each(|v| *v *= c);
        Ok(())
    }

    fn lebesgue_bounds(&self, theta: &[f64], radius: f64) -> Option<(f64, f64)> {
        if self.dim() == 1 {
            let s = self.cov[(0, 0)].sqrt();
            Some((theta[0] - radius * s, theta[0] + radius * s))
        } else {
            None
        }
    }

    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng::standard_normal(rng)).collect();
        self.chol.lower_mul(&z, out);
        out.iter_mut().zip(theta).for_each(|(o, m)| *o += m);
    }

    fn log_parametrized(&self) -> bool {
        false
    }

    fn weighted_mle(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let p = self.dim();
        let mut m = vec![0.0; p];
        for (row, w) in points.chunks_exact(p).zip(weights) {
            m.iter_mut().zip(row).for_each(|(a, x)| *a += w * x);
        }
        Ok(m)
    }

    fn robust_start(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        coordinate_quantiles(points, weights, self.dim(), 0.5)
    }

    fn grid_starts(&self, points: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
        let p = self.dim();
        let mid = (0..p)
            .map(|j| {
                let col: Vec<f64> = points.chunks_exact(p).map(|r| r[j]).collect();
                let (lo, hi) = min_max(&col);
                0.5 * (lo + hi)
            })
            .collect();
        vec![coordinate_quantiles(points, weights, p, 0.1), coordinate_quantiles(points, weights, p, 0.9), mid]
    }

    fn discretize(&self, theta: &[f64], quad: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
        quad.mvn_nodes(theta, &self.chol)
    }
}

/// Any of the built-in families.
#[derive(Debug, Clone)]
pub enum Model {
    NormalScale(NormalScale),
    NormalLocation(NormalLocation),
    Exponential(Exponential),
    MvnMean(MvnMean),
}

impl Model {
    pub fn normal_scale(mean: f64) -> Self {
        Model::NormalScale(NormalScale::new(mean))
    }

    pub fn normal_location(sd: f64) -> Result<Self> {
        Ok(Model::NormalLocation(NormalLocation::new(sd)?))
    }

    pub fn exponential() -> Self {
        Model::Exponential(Exponential)
    }

    pub fn mvn_mean(cov: Matrix) -> Result<Self> {
        Ok(Model::MvnMean(MvnMean::new(cov)?))
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::NormalScale($m) => $e,
            Model::NormalLocation($m) => $e,
            Model::Exponential($m) => $e,
            Model::MvnMean($m) => $e,
        }
    };
}

impl ParametricModel for Model {
    fn kind(&self) -> ModelKind {
        delegate!(self, m => m.kind())
    }

    fn theta_dim(&self) -> usize {
        delegate!(self, m => m.theta_dim())
    }

    fn obs_dim(&self) -> usize {
        delegate!(self, m => m.obs_dim())
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        delegate!(self, m => m.validate_theta(theta))
    }

    fn ln_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        delegate!(self, m => m.ln_density(theta, x))
    }

    fn score(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        delegate!(self, m => m.score(theta, x, out))
    }

    fn score_jacobian(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        delegate!(self, m => m.score_jacobian(theta, x, out))
    }

    fn ln_power_integral(&self, theta: &[f64], kappa: f64) -> Option<f64> {
        delegate!(self, m => m.ln_power_integral(theta, kappa))
    }

    fn ln_power_integral_derivatives(&self, theta: &[f64], kappa: f64, grad: &mut [f64], hess: &mut [f64]) -> bool {
        delegate!(self, m => m.ln_power_integral_derivatives(theta, kappa, grad, hess))
    }

    fn power_integral(
        &self,
        theta: &[f64],
        kappa: f64,
        quad: &QuadratureSpec,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        delegate!(self, m => m.power_integral(theta, kappa, quad, out, f))
    }

    fn lebesgue_bounds(&self, theta: &[f64], radius: f64) -> Option<(f64, f64)> {
        delegate!(self, m => m.lebesgue_bounds(theta, radius))
    }

    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        delegate!(self, m => m.draw(theta, rng, out))
    }

    fn log_parametrized(&self) -> bool {
        delegate!(self, m => m.log_parametrized())
    }

    fn weighted_mle(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        delegate!(self, m => m.weighted_mle(points, weights))
    }

    fn robust_start(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        delegate!(self, m => m.robust_start(points, weights))
    }

    fn grid_starts(&self, points: &[f64], weights: &[f64]) -> Vec<Vec<f64>> {
        delegate!(self, m => m.grid_starts(points, weights))
    }

    fn discretize(&self, theta: &[f64], quad: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
        delegate!(self, m => m.discretize(theta, quad))
    }
}

/// Smallest value whose cumulative weight reaches `q` of the total.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let target = q * total;
    let mut acc = 0.0;
    for &i in &idx {
        acc += weights[i];
        if acc >= target * (1.0 - 1e-12) {
            return values[i];
        }
    }
    values[idx[idx.len() - 1]]
}

fn coordinate_quantiles(points: &[f64], weights: &[f64], p: usize, q: f64) -> Vec<f64> {
    (0..p)
        .map(|j| {
            let col: Vec<f64> = points.chunks_exact(p).map(|r| r[j]).collect();
            weighted_quantile(&col, weights, q)
        })
        .collect()
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Observations of a fixed dimension, stored row-major. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    points: Vec<f64>,
}

impl Sample {
    pub fn univariate(points: Vec<f64>) -> Result<Self> {
        Self::from_rows(1, points)
    }

    pub fn from_rows(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("observation dimension must be positive"));
        }
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: points.len() % dim });
        }
        Ok(Sample { dim, points })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    /// Equal weights `1/n`.
    pub fn uniform_weights(&self) -> Vec<f64> {
        vec![1.0 / self.len() as f64; self.len()]
    }

    /// Applies `x ↦ a x + b` coordinatewise.
    pub fn affine(&self, a: f64, b: f64) -> Sample {
        Sample { dim: self.dim, points: self.points.iter().map(|x| a * x + b).collect() }
    }

    pub(crate) fn check_model<M: ParametricModel + ?Sized>(&self, model: &M) -> Result<()> {
        if self.dim != model.obs_dim() {
            return Err(Error::DimensionMismatch { expected: model.obs_dim(), got: self.dim });
        }
        Ok(())
    }
}

/// Contaminating distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Contaminant {
    Normal { mean: f64, sd: f64 },
    Exponential { mean: f64 },
    PointMass(Vec<f64>),
}

/// `round(ε n)` of the `n` draws come from the contaminant.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminantSpec {
    pub kind: Contaminant,
    pub epsilon: f64,
}

impl ContaminantSpec {
    pub fn new(kind: Contaminant, epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::InvalidInput("contamination fraction must lie in [0, 0.5)"));
        }
        match &kind {
            Contaminant::Normal { sd, .. } => positive(*sd, "contaminant sd must be positive")?,
            Contaminant::Exponential { mean } => positive(*mean, "contaminant mean must be positive")?,
            Contaminant::PointMass(at) if at.is_empty() => return Err(Error::InvalidInput("point mass needs a location")),
            Contaminant::PointMass(_) => {}
        }
        Ok(ContaminantSpec { kind, epsilon })
    }

    /// Number of contaminated draws in a sample of size `n`.
    pub fn count(&self, n: usize) -> usize {
        (self.epsilon * n as f64).round() as usize
    }

    fn dim(&self) -> usize {
        match &self.kind {
            Contaminant::PointMass(at) => at.len(),
            _ => 1,
        }
    }

    fn draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match &self.kind {
            Contaminant::Normal { mean, sd } => out[0] = mean + sd * rng::standard_normal(rng),
            Contaminant::Exponential { mean } => out[0] = rng::exponential(rng, *mean),
            Contaminant::PointMass(at) => out.copy_from_slice(at),
        }
    }
}

/// `p_θ(x)` with θ validated.
pub fn density<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], x: &[f64]) -> Result<f64> {
    model.validate_theta(theta)?;
    Ok(model.density(theta, x))
}

/// `∂p_θ(x)/∂θ = p_θ(x) · score`.
pub fn grad_theta_density<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    model.validate_theta(theta)?;
    let p = model.density(theta, x);
    let mut s = vec![0.0; model.theta_dim()];
    if p > 0.0 {
        model.score(theta, x, &mut s);
        s.iter_mut().for_each(|v| *v *= p);
    }
    Ok(s)
}

/// `n` i.i.d. draws from `P_θ`.
pub fn sample<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Sample> {
    sample_contaminated(model, theta, n, None, rng)
}

/// `n − k` draws from `P_θ` followed by `k = round(ε n)` contaminant draws.
pub fn sample_contaminated<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    contaminant: Option<&ContaminantSpec>,
    rng: &mut dyn RngCore,
) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    model.validate_theta(theta)?;
    let d = model.obs_dim();
    let k = contaminant.map_or(0, |c| c.count(n));
    if let Some(c) = contaminant {
        if c.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
        }
    }
    let mut points = vec![0.0; n * d];
    for row in points.chunks_exact_mut(d).take(n - k) {
        model.draw(theta, rng, row);
    }
    if let Some(c) = contaminant {
        for row in points.chunks_exact_mut(d).skip(n - k) {
            c.draw(rng, row);
        }
    }
    Sample::from_rows(d, points)
}

/// Seeded convenience wrapper around [`sample`] using the replicate-0 stream.
pub fn sample_seeded<M: ParametricModel + ?Sized>(model: &M, theta: &[f64], n: usize, seed: u64) -> Result<Sample> {
    let mut r = rng::replicate_rng(seed, 0);
    sample(model, theta, n, &mut r)
}

/// Seeded convenience wrapper around [`sample_contaminated`].
pub fn sample_contaminated_seeded<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    contaminant: &ContaminantSpec,
    seed: u64,
) -> Result<Sample> {
    let mut r = rng::replicate_rng(seed, 0);
    sample_contaminated(model, theta, n, Some(contaminant), &mut r)
}

/// `(2π)^{-1/2}`, the standard normal density at 0.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use std::vec::Vec;

    fn families() -> Vec<(Model, Vec<f64>)> {
        vec![
            (Model::normal_scale(0.5), vec![1.3]),
            (Model::normal_location(0.7).unwrap(), vec![-0.4]),
            (Model::exponential(), vec![1.7]),
            (Model::mvn_mean(Matrix::from_row_major(2, 2, vec![2.0, 0.3, 0.3, 1.0])).unwrap(), vec![0.5, -1.0]),
        ]
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&Exponential, &[1.0], &[0.0]).unwrap(), 1.0);
        let p = density(&NormalScale::new(0.0), &[2.0], &[0.0]).unwrap();
        assert!((p - 0.199_471_140_200_716_35).abs() < 1e-15);
        let mvn = MvnMean::new(Matrix::diag(&[2.0, 1.0])).unwrap();
        let p = density(&mvn, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((p - 1.0 / (2.0 * PI * 2f64.sqrt())).abs() < 1e-15);
        assert!((p - 0.11254).abs() < 1e-5);
        assert!(matches!(density(&Exponential, &[-1.0], &[0.0]), Err(Error::DomainError(_))));
        assert!(matches!(density(&NormalScale::new(0.0), &[0.0], &[0.0]), Err(Error::DomainError(_))));
    }

    #[test]
    fn gradient_examples() {
        let g = grad_theta_density(&NormalLocation::new(1.0).unwrap(), &[0.0], &[0.0]).unwrap();
        assert_eq!(g[0], 0.0);
        let g = grad_theta_density(&Exponential, &[1.0], &[1.0]).unwrap();
        assert!(g[0].abs() < 1e-16);
        let g = grad_theta_density(&NormalScale::new(0.0), &[1.0], &[2.0]).unwrap();
        assert!((g[0] - 3.0 * INV_SQRT_2PI * (-2.0f64).exp()).abs() < 1e-15);
        assert!((g[0] - 0.16198).abs() < 1e-5);
    }

    #[test]
    fn densities_integrate_to_one() {
        let quad = QuadratureSpec::default();
        for (m, theta) in families() {
            let mut out = [0.0];
            m.power_integral(&theta, 1.0, &quad, &mut out, &mut |_, o| o[0] = 1.0).unwrap();
            assert!((out[0] - 1.0).abs() < 1e-6, "{:?}", m.kind());
            // Lebesgue route where available
            if let Some((a, b)) = m.lebesgue_bounds(&theta, 40.0) {
                quad.integrate_interval(a, b, &mut out, &mut |x, o| o[0] = m.density(&theta, &[x])).unwrap();
                assert!((out[0] - 1.0).abs() < 1e-6, "{:?}", m.kind());
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-6;
        for (m, theta) in families() {
            let d = m.theta_dim();
            let mut rng = rng::SplitMix64::new(11);
            for _ in 0..100 {
                let mut x = vec![0.0; m.obs_dim()];
                m.draw(&theta, &mut rng, &mut x);
                let g = grad_theta_density(&m, &theta, &x).unwrap();
                for k in 0..d {
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[k] += h;
                    tm[k] -= h;
                    let fd = (m.density(&tp, &x) - m.density(&tm, &x)) / (2.0 * h);
                    let scale = g[k].abs().max(1e-3 * m.density(&theta, &x)).max(1e-12);
                    assert!((fd - g[k]).abs() / scale < 1e-5, "{:?} x={x:?} fd={fd} g={}", m.kind(), g[k]);
                }
            }
        }
    }

    #[test]
    fn score_jacobian_matches_differences() {
        let h = 1e-6;
        for (m, theta) in families() {
            let d = m.theta_dim();
            let x: Vec<f64> = theta.iter().map(|t| t + 0.37).collect();
            let mut jac = vec![0.0; d * d];
            m.score_jacobian(&theta, &x, &mut jac);
            for k in 0..d {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let mut sp = vec![0.0; d];
                let mut sm = vec![0.0; d];
                m.score(&tp, &x, &mut sp);
                m.score(&tm, &x, &mut sm);
                for i in 0..d {
                    let fd = (sp[i] - sm[i]) / (2.0 * h);
                    assert!((fd - jac[i * d + k]).abs() < 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn closed_power_integrals_match_quadrature() {
        let quad = QuadratureSpec::default();
        for (m, theta) in families() {
            for alpha in [0.1, 0.5, 1.0] {
                let kappa = 1.0 + alpha;
                let closed = m.ln_power_integral(&theta, kappa).unwrap().exp();
                let mut out = [0.0];
                // integrate p^κ against P_θ as p^{κ-1}
                m.power_integral(&theta, 1.0, &quad, &mut out, &mut |x, o| o[0] = m.density(&theta, x).powf(alpha)).unwrap();
                assert!((out[0] - closed).abs() < 1e-8 * closed.max(1.0), "{:?} {alpha}", m.kind());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_counts_contamination() {
        let m = NormalScale::new(0.0);
        let a = sample_seeded(&m, &[1.0], 50, 3).unwrap();
        let b = sample_seeded(&m, &[1.0], 50, 3).unwrap();
        assert_eq!(a, b);
        let c = ContaminantSpec::new(Contaminant::PointMass(vec![10.0]), 0.05).unwrap();
        let s = sample_contaminated_seeded(&m, &[1.0], 100, &c, 9).unwrap();
        assert_eq!(s.points().iter().filter(|&&x| x == 10.0).count(), 5);
        assert!(ContaminantSpec::new(Contaminant::PointMass(vec![1.0]), 0.5).is_err());
        assert!(matches!(sample(&m, &[1.0], 0, &mut rng::SplitMix64::new(0)), Err(Error::EmptySample)));
    }

    #[test]
    fn large_sample_variance() {
        let s = sample_seeded(&NormalScale::new(0.0), &[1.0], 1_000_000, 2024).unwrap();
        let n = s.len() as f64;
        let mean = s.points().iter().sum::<f64>() / n;
        let var = s.points().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.005, "{var}");
    }

    #[test]
    fn mvn_rejects_bad_covariance() {
        assert!(MvnMean::new(Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(MvnMean::new(Matrix::identity(9)).is_err());
    }

    #[test]
    fn weighted_median() {
        assert_eq!(weighted_quantile(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 0.5), 2.0);
        assert_eq!(weighted_quantile(&[3.0, 1.0, 2.0], &[0.1, 0.1, 0.8], 0.5), 2.0);
    }
}

//! Min R_α estimation in the Gaussian linear model `Y = βᵀX + σε`.
//!
//! The estimator maximizes `σ^{−α/(α+1)} Σ exp(−α u_i²/2)` with
//! `u_i = (Y_i − βᵀX_i)/σ`, equivalently solves
//!
//! ```text
//! Σ φ(u_i) X_i = 0,   Σ χ(u_i) = 0,
//! φ(u) = u e^{−αu²/2},   χ(u) = (u² − 1/(α+1)) e^{−αu²/2}.
//! ```

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::alpha::Alpha;
use crate::error::{Error, Result};
use crate::estimation::SolverOptions;
use crate::linalg::{least_squares, solve_general, Matrix};
use crate::models::{weighted_quantile, MAD_NORMAL};
use crate::roots::refine_root;

/// Design matrix (`n × p`, row-major) and response.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    x: Matrix,
    y: Vec<f64>,
}

impl RegressionData {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.rows(), got: y.len() });
        }
        if x.cols() == 0 {
            return Err(Error::InvalidInput("design needs at least one column"));
        }
        if x.rows() <= x.cols() {
            return Err(Error::SampleTooSmall { n: x.rows(), dim: x.cols() });
        }
        if !x.as_slice().iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("regression data must be finite"));
        }
        Ok(RegressionData { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        let fitted = self.x.matvec(beta);
        self.y.iter().zip(&fitted).map(|(y, f)| y - f).collect()
    }

    fn response_scale(&self) -> f64 {
        let m = self.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub beta_hat: Vec<f64>,
    pub sigma_hat: f64,
    /// `exp(−α u_i²/2)` at the solution.
    pub weights: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// The redescending ψ components for one α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiComponents {
    pub alpha: f64,
}

impl PsiComponents {
    pub fn new(alpha: f64) -> Self {
        PsiComponents { alpha }
    }

    pub fn phi(&self, u: f64) -> f64 {
        u * (-0.5 * self.alpha * u * u).exp()
    }

    pub fn chi(&self, u: f64) -> f64 {
        (u * u - 1.0 / (1.0 + self.alpha)) * (-0.5 * self.alpha * u * u).exp()
    }

    pub fn dphi(&self, u: f64) -> f64 {
        (1.0 - self.alpha * u * u) * (-0.5 * self.alpha * u * u).exp()
    }

    pub fn dchi(&self, u: f64) -> f64 {
        let a = self.alpha;
        (2.0 * u - a * u * (u * u - 1.0 / (1.0 + a))) * (-0.5 * a * u * u).exp()
    }
}

/// `(1/n) σ^{−α/(α+1)} Σ exp(−α u_i²/2)`.
pub fn regression_objective(data: &RegressionData, beta: &[f64], sigma: f64, alpha: f64) -> f64 {
    let r = data.residuals(beta);
    objective_from_residuals(&r, sigma, alpha)
}

fn objective_from_residuals(r: &[f64], sigma: f64, alpha: f64) -> f64 {
    let s: f64 = r.iter().map(|e| (-0.5 * alpha * (e / sigma).powi(2)).exp()).sum();
    sigma.powf(-alpha / (1.0 + alpha)) * s / r.len() as f64
}

/// Left-hand sides `(1/n) Σ φ(u_i) X_i` and `(1/n) Σ χ(u_i)`.
pub fn regression_system(data: &RegressionData, beta: &[f64], sigma: f64, alpha: f64) -> (Vec<f64>, f64) {
    let psi = PsiComponents::new(alpha);
    let r = data.residuals(beta);
    let p = data.p();
    let n = data.n() as f64;
    let mut fb = vec![0.0; p];
    let mut fs = 0.0;
    for (i, e) in r.iter().enumerate() {
        let u = e / sigma;
        let ph = psi.phi(u);
        for (f, x) in fb.iter_mut().zip(data.x.row(i)) {
            *f += ph * x;
        }
        fs += psi.chi(u);
    }
    fb.iter_mut().for_each(|v| *v /= n);
    (fb, fs / n)
}

fn system_norm(data: &RegressionData, beta: &[f64], sigma: f64, alpha: f64) -> f64 {
    let (fb, fs) = regression_system(data, beta, sigma, alpha);
    (fb.iter().map(|v| v * v).sum::<f64>() + fs * fs).sqrt()
}

/// Fits `(β, σ)`.
///
/// α = 0 gives least squares with `σ̂² = RSS/n`. For α > 0, iteratively
/// reweighted least squares on β alternates with a root solve for σ in
/// `log σ`, followed by a Newton polish of the joint system. Two starts are
/// used (least squares β with MAD scale, and with the root-mean-square
/// scale); the converged solution with the larger objective wins.
pub fn fit_regression(data: &RegressionData, alpha: Alpha, opts: &SolverOptions) -> Result<RegressionFit> {
    opts.validate()?;
    let a = alpha.value();
    let ols = least_squares(&data.x, &data.y).ok_or(Error::RankDeficient)?;
    let r = data.residuals(&ols);
    let n = data.n() as f64;
    let rms = (r.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let floor = 1e-8 * data.response_scale();
    if a == 0.0 {
        if rms < floor {
            return Err(Error::DegenerateScale);
        }
        return Ok(RegressionFit { beta_hat: ols, sigma_hat: rms, weights: vec![1.0; data.n()], converged: true, iterations: 0 });
    }
    if rms < floor {
        return Err(Error::DegenerateScale);
    }
    let mad = mad_scale(&r);
    let mut starts = vec![];
    if mad > floor {
        starts.push((ols.clone(), mad));
    }
    starts.push((ols, rms));
    starts.truncate(opts.n_starts.max(1));

    let mut best: Option<(RegressionFit, f64)> = None;
    let mut last_err = Error::NoConvergence;
    for (b0, s0) in starts {
        match fit_from(data, a, b0, s0, opts, floor) {
            Ok(fit) if fit.converged => {
                let obj = regression_objective(data, &fit.beta_hat, fit.sigma_hat, a);
                if best.as_ref().is_none_or(|(_, o)| obj > *o) {
                    best = Some((fit, obj));
                }
            }
            Ok(_) => {}
            Err(e) => last_err = e,
        }
    }
    best.map(|(f, _)| f).ok_or(last_err)
}

fn mad_scale(r: &[f64]) -> f64 {
    let w = vec![1.0; r.len()];
    let med = weighted_quantile(r, &w, 0.5);
    let dev: Vec<f64> = r.iter().map(|e| (e - med).abs()).collect();
    weighted_quantile(&dev, &w, 0.5) / MAD_NORMAL
}

/// Root of `Σ χ(r_i/σ)` in σ where the sum changes from positive to
/// negative, searched on a log grid over `[10⁻³ s, 10³ s]`. Among several
/// such roots the one with the largest objective is taken.
fn sigma_step(r: &[f64], alpha: f64, s: f64) -> Option<f64> {
    let psi = PsiComponents::new(alpha);
    let f = |t: f64| -> f64 {
        let sigma = t.exp();
        r.iter().map(|e| psi.chi(e / sigma)).sum()
    };
    let (lo, hi) = ((1e-3 * s).ln(), (1e3 * s).ln());
    let steps = 240;
    let h = (hi - lo) / steps as f64;
    let mut prev = (lo, f(lo));
    let mut best: Option<(f64, f64)> = None;
    for i in 1..=steps {
        let t = lo + h * i as f64;
        let ft = f(t);
        if prev.1 > 0.0 && ft <= 0.0 {
            let mut g = f;
            let root = refine_root(&mut g, prev.0, t, prev.1, ft, 1e-15).exp();
            let obj = objective_from_residuals(r, root, alpha);
            if best.is_none_or(|(_, o)| obj > o) {
                best = Some((root, obj));
            }
        }
        prev = (t, ft);
    }
    best.map(|(s, _)| s)
}

fn weighted_ls_step(data: &RegressionData, r: &[f64], sigma: f64, alpha: f64) -> Result<Vec<f64>> {
    let n = data.n();
    let p = data.p();
    let mut xw = Vec::with_capacity(n * p);
    let mut yw = Vec::with_capacity(n);
    for (i, e) in r.iter().enumerate() {
        let w = (-0.25 * alpha * (e / sigma).powi(2)).exp();
        xw.extend(data.x.row(i).iter().map(|v| v * w));
        yw.push(data.y[i] * w);
    }
    least_squares(&Matrix::from_row_major(n, p, xw), &yw).ok_or(Error::RankDeficient)
}

fn fit_from(
    data: &RegressionData,
    alpha: f64,
    mut beta: Vec<f64>,
    mut sigma: f64,
    opts: &SolverOptions,
    floor: f64,
) -> Result<RegressionFit> {
    let tol = opts.tol;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let r = data.residuals(&beta);
        let mut s_ref = mad_scale(&r);
        if !(s_ref > floor) {
            s_ref = sigma;
        }
        let new_sigma = sigma_step(&r, alpha, s_ref).ok_or(Error::DegenerateScale)?;
        if new_sigma < floor {
            return Err(Error::DegenerateScale);
        }
        let j0 = objective_from_residuals(&r, new_sigma, alpha);
        let target = weighted_ls_step(data, &r, new_sigma, alpha)?;
        let mut step: Vec<f64> = target.iter().zip(&beta).map(|(t, b)| t - b).collect();
        let mut accepted = beta.clone();
        for _ in 0..=20 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, d)| b + d).collect();
            if regression_objective(data, &cand, new_sigma, alpha) >= j0 {
                accepted = cand;
                break;
            }
            step.iter_mut().for_each(|d| *d *= 0.5);
        }
        let db = accepted.iter().zip(&beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn = accepted.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ds = (new_sigma - sigma).abs();
        beta = accepted;
        sigma = new_sigma;
        if db <= 1e-3 * tol * (1.0 + bn) && ds <= 1e-3 * tol * sigma {
            break;
        }
        if system_norm(data, &beta, sigma, alpha) < 1e-2 * tol {
            break;
        }
    }
    let (beta, sigma) = newton_polish(data, alpha, beta, sigma);
    if sigma < floor {
        return Err(Error::DegenerateScale);
    }
    let res = system_norm(data, &beta, sigma, alpha);
    let weights = data.residuals(&beta).iter().map(|e| (-0.5 * alpha * (e / sigma).powi(2)).exp()).collect();
    Ok(RegressionFit { beta_hat: beta, sigma_hat: sigma, weights, converged: res < tol, iterations })
}

/// Newton iterations on the joint system; a step is kept only when it
/// lowers the residual norm.
fn newton_polish(data: &RegressionData, alpha: f64, mut beta: Vec<f64>, mut sigma: f64) -> (Vec<f64>, f64) {
    let psi = PsiComponents::new(alpha);
    let p = data.p();
    let mut res = system_norm(data, &beta, sigma, alpha);
    for _ in 0..20 {
        if res < 1e-15 {
            break;
        }
        let r = data.residuals(&beta);
        let (fb, fs) = regression_system(data, &beta, sigma, alpha);
        let d = p + 1;
        let mut jac = vec![0.0; d * d];
        let n = data.n() as f64;
        for (i, e) in r.iter().enumerate() {
            let u = e / sigma;
            let x = data.x.row(i);
            let dp = psi.dphi(u);
            let dc = psi.dchi(u);
            for j in 0..p {
                for k in 0..p {
                    jac[j * d + k] -= dp * x[j] * x[k] / sigma / n;
                }
                jac[j * d + p] -= dp * u * x[j] / sigma / n;
                jac[p * d + j] -= dc * x[j] / sigma / n;
            }
            jac[p * d + p] -= dc * u / sigma / n;
        }
        let mut rhs: Vec<f64> = fb.iter().map(|v| -v).collect();
        rhs.push(-fs);
        let Some(step) = solve_general(&Matrix::from_row_major(d, d, jac), &rhs) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let nb: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let ns = sigma + t * step[p];
            if ns > 0.0 {
                let nr = system_norm(data, &nb, ns, alpha);
                if nr < res {
                    beta = nb;
                    sigma = ns;
                    res = nr;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (beta, sigma)
}

/// Closed-form asymptotic covariance of `√n (ξ̂ − ξ)`, `ξ = (β, σ)`:
/// `diag(σ²(α+1)³/(2α+1)^{3/2} V_X⁻¹, σ²(α+1)³(3α²+4α+2)/(4(2α+1)^{5/2}))`.
pub fn regression_asymptotic_cov(vx: &Matrix, sigma: f64, alpha: f64) -> Result<Matrix> {
    if !vx.is_square() {
        return Err(Error::SingularVX);
    }
    let p = vx.rows();
    let inv = vx.cholesky().ok_or(Error::SingularVX)?.inverse();
    let a1 = 1.0 + alpha;
    let a2 = 1.0 + 2.0 * alpha;
    let cb = sigma * sigma * a1.powi(3) / a2.powf(1.5);
    let cs = sigma * sigma * a1.powi(3) * (3.0 * alpha * alpha + 4.0 * alpha + 2.0) / (4.0 * a2.powf(2.5));
    let mut out = Matrix::zeros(p + 1, p + 1);
    let mut data = out.as_slice().to_vec();
    for i in 0..p {
        for j in 0..p {
            data[i * (p + 1) + j] = cb * inv[(i, j)];
        }
    }
    data[p * (p + 1) + p] = cs;
    out = Matrix::from_row_major(p + 1, p + 1, data);
    Ok(out)
}

/// Influence functions of the β and σ functionals at `(x₀, y₀)`:
/// `σ(α+1)^{3/2} φ(u) V_X⁻¹ x₀` and `(α+1)^{5/2}/2 · χ(u)`, with
/// `u = (y₀ − βᵀx₀)/σ`.
pub fn regression_influence(x0: &[f64], y0: f64, beta: &[f64], sigma: f64, vx: &Matrix, alpha: f64) -> Result<(Vec<f64>, f64)> {
    if x0.len() != beta.len() || vx.rows() != x0.len() || !vx.is_square() {
        return Err(Error::DimensionMismatch { expected: beta.len(), got: x0.len() });
    }
    let chol = vx.cholesky().ok_or(Error::SingularVX)?;
    let psi = PsiComponents::new(alpha);
    let u = (y0 - x0.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>()) / sigma;
    let a1 = 1.0 + alpha;
    let f = sigma * a1.powf(1.5) * psi.phi(u);
    let ib = chol.solve(x0).iter().map(|v| f * v).collect();
    Ok((ib, a1.powf(2.5) / 2.0 * psi.chi(u)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(n: usize) -> (Matrix, Vec<f64>) {
        let mut x = vec![];
        let mut y = vec![];
        for i in 0..n {
            let t = i as f64 / n as f64;
            x.extend([1.0, t]);
            y.push(1.0 - 2.0 * t);
        }
        (Matrix::from_row_major(n, 2, x), y)
    }

    #[test]
    fn exact_fit_is_degenerate() {
        let (x, y) = design(20);
        let d = RegressionData::new(x, y).unwrap();
        let r = fit_regression(&d, Alpha::new(0.5).unwrap(), &SolverOptions::default());
        assert_eq!(r, Err(Error::DegenerateScale));
    }

    #[test]
    fn rank_deficient_design() {
        let x = Matrix::from_row_major(4, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let d = RegressionData::new(x, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(fit_regression(&d, Alpha::ZERO, &SolverOptions::default()), Err(Error::RankDeficient));
    }

    #[test]
    fn covariance_examples() {
        let c = regression_asymptotic_cov(&Matrix::identity(2), 1.0, 0.5).unwrap();
        assert!((c[(0, 0)] - 1.19324).abs() < 1e-5);
        assert_eq!(c[(0, 2)], 0.0);
        let c = regression_asymptotic_cov(&Matrix::identity(2), 2.0, 0.0).unwrap();
        assert!((c[(2, 2)] - 2.0).abs() < 1e-15);
        assert_eq!(regression_asymptotic_cov(&Matrix::zeros(2, 2), 1.0, 0.5), Err(Error::SingularVX));
    }

    #[test]
    fn influence_examples() {
        let (ib, _) = regression_influence(&[1.0, 0.0], 1.0, &[0.0, 0.0], 1.0, &Matrix::identity(2), 0.5).unwrap();
        assert!((ib[0] - 1.5f64.powf(1.5) * (-0.25f64).exp()).abs() < 1e-14 && ib[1] == 0.0);
        let (ib, _) = regression_influence(&[1.0, 2.0], 5.0, &[1.0, 2.0], 1.0, &Matrix::identity(2), 0.5).unwrap();
        assert_eq!(ib, vec![0.0, 0.0]);
        let (ib, is) = regression_influence(&[1.0, 2.0], 1e3, &[1.0, 2.0], 1.0, &Matrix::identity(2), 0.5).unwrap();
        assert!(ib.iter().all(|v| v.abs() < 1e-100) && is.abs() < 1e-100);
    }

    #[test]
    fn psi_redescends() {
        let p = PsiComponents::new(0.5);
        assert_eq!(p.phi(2.0), -p.phi(-2.0));
        assert!(p.phi(50.0).abs() < 1e-100 && p.chi(50.0).abs() < 1e-100);
        let h = 1e-6;
        for u in [-2.0, -0.3, 0.7, 3.0] {
            assert!(((p.phi(u + h) - p.phi(u - h)) / (2.0 * h) - p.dphi(u)).abs() < 1e-8);
            assert!(((p.chi(u + h) - p.chi(u - h)) / (2.0 * h) - p.dchi(u)).abs() < 1e-8);
        }
    }
}

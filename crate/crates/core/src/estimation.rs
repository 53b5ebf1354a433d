//! Minimum R_α fitting, the density power divergence competitor for the
//! normal scale model, and the statistic R̂_α.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::alpha::Alpha;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::{NormalScale, ParametricModel, Sample};
use crate::pseudodistance::{centering, ln_weighted_power_mean, weighted_criterion};
use crate::quadrature::QuadratureSpec;
use crate::roots::refine_root;

/// Which start is tried first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartStrategy {
    #[default]
    MleStart,
    RobustStart,
    Grid,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub n_starts: usize,
    pub start_strategy: StartStrategy,
    pub quadrature: QuadratureSpec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 200,
            n_starts: 5,
            start_strategy: StartStrategy::MleStart,
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tol must be positive"));
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidInput("n_starts must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub theta_hat: Vec<f64>,
    pub criterion_at_opt: f64,
    pub iterations: usize,
    pub starts_tried: usize,
    pub converged: bool,
    /// Norm of the estimating equation at `theta_hat`.
    pub gradient_norm: f64,
}

/// Maximizes the empirical criterion over θ.
///
/// α = 0 returns the closed-form MLE. For α > 0 the local solver is run from
/// up to `opts.n_starts` starts and the converged point with the largest
/// criterion wins; near ties go to the point closest to the robust start.
pub fn fit_min_r_alpha<M: ParametricModel + ?Sized>(
    model: &M,
    sample: &Sample,
    alpha: Alpha,
    opts: &SolverOptions,
) -> Result<EstimatorResult> {
    sample.check_model(model)?;
    let d = model.theta_dim();
    if sample.len() < d + 1 {
        return Err(Error::SampleTooSmall { n: sample.len(), dim: d });
    }
    fit_weighted(model, sample.points(), &sample.uniform_weights(), alpha, opts)
}

/// [`fit_min_r_alpha`] on a weighted point set, weights summing to one.
/// Population fits pass quadrature nodes here.
pub fn fit_weighted<M: ParametricModel + ?Sized>(
    model: &M,
    points: &[f64],
    weights: &[f64],
    alpha: Alpha,
    opts: &SolverOptions,
) -> Result<EstimatorResult> {
    opts.validate()?;
    if weights.is_empty() {
        return Err(Error::EmptySample);
    }
    if points.len() != weights.len() * model.obs_dim() {
        return Err(Error::DimensionMismatch { expected: weights.len() * model.obs_dim(), got: points.len() });
    }
    let a = alpha.value();
    let quad = &opts.quadrature;
    let mle = model.weighted_mle(points, weights)?;
    if a == 0.0 {
        let ev = evaluate(model, &mle, points, weights, 0.0, quad)?;
        return Ok(EstimatorResult {
            criterion_at_opt: ev.value,
            gradient_norm: norm(&ev.ee),
            theta_hat: mle,
            iterations: 0,
            starts_tried: 1,
            converged: true,
        });
    }
    let robust = model.robust_start(points, weights);
    let grid = model.grid_starts(points, weights);
    let mut starts: Vec<Vec<f64>> = match opts.start_strategy {
        StartStrategy::MleStart => [vec![mle, robust.clone()], grid].concat(),
        StartStrategy::RobustStart => [vec![robust.clone(), mle], grid].concat(),
        StartStrategy::Grid => [grid, vec![mle, robust.clone()]].concat(),
    };
    starts.truncate(opts.n_starts);

    let spread = weighted_spread(points, weights, model.obs_dim());
    let mut best: Option<Local> = None;
    let mut tried = 0;
    for start in &starts {
        if model.validate_theta(start).is_err() {
            continue;
        }
        tried += 1;
        let local = if model.theta_dim() == 1 {
            solve_1d(model, start[0], points, weights, a, opts, spread)
        } else {
            solve_newton(model, start, points, weights, a, opts)
        };
        let Ok(local) = local else { continue };
        if !local.converged {
            continue;
        }
        best = Some(match best {
            None => local,
            Some(b) => {
                if (local.value - b.value).abs() <= 1e-10 * (1.0 + b.value.abs()) {
                    if dist(&local.theta, &robust) < dist(&b.theta, &robust) {
                        local
                    } else {
                        b
                    }
                } else if local.value > b.value {
                    local
                } else {
                    b
                }
            }
        });
    }
    let best = best.ok_or(Error::NoConvergence)?;
    Ok(EstimatorResult {
        theta_hat: best.theta,
        criterion_at_opt: best.value,
        iterations: best.iterations,
        starts_tried: tried,
        converged: true,
        gradient_norm: best.ee_norm,
    })
}

/// `(1/n) Σ p_θ^α(X_i) [s_θ(X_i) − c_α(θ)]`, with `s_θ` the score; this is
/// `(1/n) Σ [p_θ^{α−1} ṗ_θ − c_α(θ) p_θ^α](X_i)`.
pub fn estimating_equation<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    sample: &Sample,
    alpha: Alpha,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    sample.check_model(model)?;
    model.validate_theta(theta)?;
    let a = alpha.value();
    let d = model.theta_dim();
    let c = centering(model, theta, a, quad)?.c;
    let mut out = vec![0.0; d];
    let mut s = vec![0.0; d];
    for x in sample.iter() {
        let w = (a * model.ln_density(theta, x)).exp();
        if w == 0.0 {
            continue;
        }
        model.score(theta, x, &mut s);
        for k in 0..d {
            out[k] += w * (s[k] - c[k]);
        }
    }
    let n = sample.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// `R̂_α = (1/n) Σ h(X_i, θ̂)` at the min R_α estimate.
pub fn r_alpha_hat<M: ParametricModel + ?Sized>(model: &M, sample: &Sample, alpha: Alpha, opts: &SolverOptions) -> Result<f64> {
    let a = alpha.require_positive()?;
    sample.check_model(model)?;
    let fit = fit_weighted(model, sample.points(), &sample.uniform_weights(), alpha, opts)?;
    let c = crate::pseudodistance::c_alpha(model, &fit.theta_hat, alpha, &opts.quadrature)?;
    let n = sample.len() as f64;
    Ok(sample.iter().map(|x| (a * model.ln_density(&fit.theta_hat, x)).exp()).sum::<f64>() / n / c)
}

/// Density power divergence estimate of σ in the normal scale model: the
/// root of `α/(α+1)^{3/2} + (1/n) Σ (u_i² − 1) e^{−α u_i²/2}`,
/// `u_i = (X_i − m)/σ`.
///
/// Sign changes are located on a logarithmic grid over `[10⁻³ s, 10³ s]`
/// (`s` the sample standard deviation) and refined; among several roots
/// the one with the smallest divergence objective is returned, and that
/// objective is reported as `criterion_at_opt`.
pub fn fit_basu_dpd(model: &NormalScale, sample: &Sample, alpha: Alpha, opts: &SolverOptions) -> Result<EstimatorResult> {
    sample.check_model(model)?;
    opts.validate()?;
    let a = alpha.value();
    let m = model.mean;
    let xs = sample.points();
    let n = xs.len() as f64;
    if a == 0.0 {
        let sigma = model.weighted_mle(xs, &sample.uniform_weights())?[0];
        let v = weighted_criterion(model, &[sigma], xs, &sample.uniform_weights(), 0.0, &opts.quadrature)?;
        return Ok(EstimatorResult {
            theta_hat: vec![sigma],
            criterion_at_opt: -v,
            iterations: 0,
            starts_tried: 1,
            converged: true,
            gradient_norm: 0.0,
        });
    }
    let k0 = a / (1.0 + a).powf(1.5);
    let f = |sigma: f64| -> f64 {
        k0 + xs
            .iter()
            .map(|x| {
                let u2 = ((x - m) / sigma).powi(2);
                (u2 - 1.0) * (-0.5 * a * u2).exp()
            })
            .sum::<f64>()
            / n
    };
    // divergence objective ∫p^{1+α} − (1 + 1/α)(1/n) Σ p^α, up to a constant
    let objective = |sigma: f64| -> f64 {
        let c = (2.0 * core::f64::consts::PI).powf(-0.5 * a) * sigma.powf(-a);
        c / (1.0 + a).sqrt()
            - (1.0 + 1.0 / a) * c * xs.iter().map(|x| (-0.5 * a * ((x - m) / sigma).powi(2)).exp()).sum::<f64>() / n
    };
    let mean = xs.iter().sum::<f64>() / n;
    let mut s = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    if !(s > 0.0) {
        s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    }
    if !(s > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let (lo, hi) = (1e-3 * s, 1e3 * s);
    let steps = 600;
    let h = (hi / lo).ln() / steps as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut prev = (lo, f(lo));
    let mut evals = steps;
    for i in 1..=steps {
        let sg = lo * (h * i as f64).exp();
        let fs = f(sg);
        if prev.1 > 0.0 && fs <= 0.0 {
            let mut g = |t: f64| f(t.exp());
            let t = refine_root(&mut g, prev.0.ln(), sg.ln(), prev.1, fs, 1e-15);
            evals += 60;
            let root = t.exp();
            let obj = objective(root);
            if best.is_none_or(|(_, o)| obj < o) {
                best = Some((root, obj));
            }
        }
        prev = (sg, fs);
    }
    let (sigma, obj) = best.ok_or(Error::NoRoot { lo, hi })?;
    let residual = f(sigma).abs();
    Ok(EstimatorResult {
        theta_hat: vec![sigma],
        criterion_at_opt: obj,
        iterations: evals,
        starts_tried: 1,
        converged: residual < opts.tol.max(1e-12),
        gradient_norm: residual,
    })
}

/// Criterion value, gradient, Hessian and estimating equation at θ.
pub(crate) struct Evaluation {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub ee: Vec<f64>,
}

pub(crate) fn evaluate<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    points: &[f64],
    weights: &[f64],
    alpha: f64,
    quad: &QuadratureSpec,
) -> Result<Evaluation> {
    model.validate_theta(theta)?;
    let d = model.theta_dim();
    let od = model.obs_dim();
    let lw: Vec<f64> = points.chunks_exact(od).zip(weights).map(|(x, w)| alpha * model.ln_density(theta, x) + w.ln()).collect();
    let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::NonFiniteCriterion("every sample point has zero density"));
    }
    let mut total = 0.0;
    let mut gbar = vec![0.0; d];
    let mut a_mat = vec![0.0; d * d];
    let mut s = vec![0.0; d];
    let mut ds = vec![0.0; d * d];
    for (x, l) in points.chunks_exact(od).zip(&lw) {
        let w = (l - mx).exp();
        if w == 0.0 {
            continue;
        }
        if alpha == 0.0 && !model.ln_density(theta, x).is_finite() {
            return Err(Error::NonFiniteCriterion("sample point with zero density"));
        }
        model.score(theta, x, &mut s);
        model.score_jacobian(theta, x, &mut ds);
        total += w;
        for i in 0..d {
            gbar[i] += w * s[i];
            for j in 0..d {
                a_mat[i * d + j] += w * (alpha * s[i] * s[j] + ds[i * d + j]);
            }
        }
    }
    gbar.iter_mut().for_each(|v| *v /= total);
    a_mat.iter_mut().for_each(|v| *v /= total);
    let cen = centering(model, theta, alpha, quad)?;
    let grad: Vec<f64> = gbar.iter().zip(&cen.c).map(|(g, c)| g - c).collect();
    let mut hess = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            hess[i * d + j] = a_mat[i * d + j] - alpha * gbar[i] * gbar[j] - cen.jacobian[i * d + j];
        }
    }
    let (value, mean_w) = if alpha == 0.0 {
        (weighted_criterion(model, theta, points, weights, 0.0, quad)?, 1.0)
    } else {
        let lm = ln_weighted_power_mean(model, theta, points, weights, alpha)?;
        (-cen.ln_integral / (1.0 + alpha) + lm / alpha, lm.exp())
    };
    let ee = grad.iter().map(|g| g * mean_w).collect();
    Ok(Evaluation { value, grad, hess, ee })
}

struct Local {
    theta: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    ee_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn weighted_spread(points: &[f64], weights: &[f64], dim: usize) -> f64 {
    let mut m = 0.0;
    let mut m2 = 0.0;
    let tw: f64 = weights.iter().sum();
    for (x, w) in points.chunks_exact(dim).zip(weights) {
        m += w * x[0];
        m2 += w * x[0] * x[0];
    }
    m /= tw;
    m2 /= tw;
    (m2 - m * m).max(0.0).sqrt().max(1e-8 * (1.0 + m.abs()))
}

/// Safeguarded Newton for a scalar parameter, on `η = ln θ` for scale
/// parameters. A bracket `[lo, hi]` with the η-gradient positive at `lo` and
/// negative at `hi` is maintained once found; Newton steps leaving it are
/// replaced by bisection.
fn solve_1d<M: ParametricModel + ?Sized>(
    model: &M,
    theta0: f64,
    points: &[f64],
    weights: &[f64],
    alpha: f64,
    opts: &SolverOptions,
    spread: f64,
) -> Result<Local> {
    let log = model.log_parametrized();
    let quad = &opts.quadrature;
    let to_theta = |eta: f64| if log { eta.exp() } else { eta };
    let cap = if log { 1.0 } else { 2.0 * spread };
    let mut eta = if log { theta0.ln() } else { theta0 };
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut last;
    loop {
        iterations += 1;
        let t = to_theta(eta);
        let ev = evaluate(model, &[t], points, weights, alpha, quad)?;
        let (g, h) = if log { (t * ev.grad[0], t * t * ev.hess[0] + t * ev.grad[0]) } else { (ev.grad[0], ev.hess[0]) };
        last = (t, ev.value, ev.ee[0].abs(), h);
        if g > 0.0 {
            lo = eta;
            if hi <= lo {
                hi = f64::INFINITY;
            }
        } else if g < 0.0 {
            hi = eta;
            if lo >= hi {
                lo = f64::NEG_INFINITY;
            }
        } else {
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let mut step = if h < 0.0 { -g / h } else { g.signum() * cap };
        if step.abs() > cap {
            step = step.signum() * cap;
        }
        let mut next = eta + step;
        if lo.is_finite() && hi.is_finite() && !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if !log && !to_theta(next).is_finite() {
            return Err(Error::NoConvergence);
        }
        let small = 1e-14 * (1.0 + eta.abs());
        let done = (next - eta).abs() <= small || (lo.is_finite() && hi.is_finite() && hi - lo <= small);
        eta = next;
        if done {
            let t = to_theta(eta);
            let ev = evaluate(model, &[t], points, weights, alpha, quad)?;
            last = (t, ev.value, ev.ee[0].abs(), last.3);
            break;
        }
        if log && !(eta.abs() < 700.0) {
            return Err(Error::NoConvergence);
        }
    }
    let (theta, value, ee_norm, h) = last;
    Ok(Local { theta: vec![theta], value, iterations, converged: ee_norm < opts.tol && h <= 0.0, ee_norm })
}

/// Damped Newton with backtracking; the steepest-ascent direction replaces
/// the Newton direction when the Hessian is not negative definite.
fn solve_newton<M: ParametricModel + ?Sized>(
    model: &M,
    theta0: &[f64],
    points: &[f64],
    weights: &[f64],
    alpha: f64,
    opts: &SolverOptions,
) -> Result<Local> {
    let quad = &opts.quadrature;
    let d = theta0.len();
    let mut theta = theta0.to_vec();
    let mut ev = evaluate(model, &theta, points, weights, alpha, quad)?;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let neg = Matrix::from_row_major(d, d, ev.hess.iter().map(|v| -v).collect());
        let dir = match neg.cholesky() {
            Some(ch) => ch.solve(&ev.grad),
            None => ev.grad.clone(),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            if let Ok(e) = evaluate(model, &cand, points, weights, alpha, quad) {
                if e.value >= ev.value - 1e-15 * ev.value.abs() {
                    let step = t * norm(&dir);
                    theta = cand;
                    ev = e;
                    moved = step > 1e-14 * (1.0 + norm(&theta));
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let h = Matrix::from_row_major(d, d, ev.hess.iter().map(|v| -v).collect());
    let ee_norm = norm(&ev.ee);
    Ok(Local { converged: ee_norm < opts.tol && h.cholesky().is_some(), theta, value: ev.value, iterations, ee_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_seeded, Exponential, NormalLocation};

    #[test]
    fn closed_form_mles() {
        let opts = SolverOptions::default();
        let m = NormalLocation::new(1.0).unwrap();
        let s = Sample::univariate(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(fit_min_r_alpha(&m, &s, Alpha::ZERO, &opts).unwrap().theta_hat, vec![2.0]);
        let s = Sample::univariate(vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        let r = fit_min_r_alpha(&NormalScale::new(0.0), &s, Alpha::ZERO, &opts).unwrap();
        assert_eq!(r.theta_hat[0], 2.5f64.sqrt());
        let s = Sample::univariate(vec![0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            fit_min_r_alpha(&NormalScale::new(0.0), &s, Alpha::new(0.5).unwrap(), &opts),
            Err(Error::DegenerateSample)
        ));
    }

    #[test]
    fn grid_search_oracle() {
        let model = NormalScale::new(0.0);
        let s = sample_seeded(&model, &[1.0], 20, 77).unwrap();
        let a = Alpha::new(0.5).unwrap();
        let opts = SolverOptions::default();
        let fit = fit_min_r_alpha(&model, &s, a, &opts).unwrap();
        let w = s.uniform_weights();
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=49_000 {
            let sigma = 0.1 + 1e-4 * i as f64;
            let v = weighted_criterion(&model, &[sigma], s.points(), &w, 0.5, &opts.quadrature).unwrap();
            if v > best.1 {
                best = (sigma, v);
            }
        }
        assert!((fit.theta_hat[0] - best.0).abs() < 2e-4, "{} vs {}", fit.theta_hat[0], best.0);
        assert!(fit.converged && fit.gradient_norm < 1e-9);
        let ee = estimating_equation(&model, &fit.theta_hat, &s, a, &opts.quadrature).unwrap();
        assert!(ee[0].abs() < 1e-6);
    }

    #[test]
    fn estimating_equation_is_scaled_gradient() {
        let model = NormalScale::new(0.0);
        let s = Sample::univariate(vec![1.0, -1.0]).unwrap();
        let q = QuadratureSpec::default();
        let a = Alpha::new(0.2).unwrap();
        let ee = estimating_equation(&model, &[1.0], &s, a, &q).unwrap()[0];
        let w = s.uniform_weights();
        let h = 1e-5;
        let cp = weighted_criterion(&model, &[1.0 + h], s.points(), &w, 0.2, &q).unwrap();
        let cm = weighted_criterion(&model, &[1.0 - h], s.points(), &w, 0.2, &q).unwrap();
        let mean_pa: f64 = s.iter().map(|x| model.density(&[1.0], x).powf(0.2)).sum::<f64>() / 2.0;
        let fd = (cp - cm) / (2.0 * h) * mean_pa;
        assert!((fd - ee).abs() < 1e-5, "{fd} {ee}");
    }

    #[test]
    fn basu_examples() {
        let model = NormalScale::new(0.0);
        let opts = SolverOptions::default();
        let s = Sample::univariate(vec![1.0, -1.0]).unwrap();
        assert_eq!(fit_basu_dpd(&model, &s, Alpha::ZERO, &opts).unwrap().theta_hat[0], 1.0);
        let clean = sample_seeded(&model, &[1.0], 100, 5).unwrap();
        let r = fit_basu_dpd(&model, &clean, Alpha::new(0.2).unwrap(), &opts).unwrap();
        assert!((r.theta_hat[0] - 1.0).abs() < 0.2 && r.converged);
        let mut pts = sample_seeded(&model, &[1.0], 99, 6).unwrap().points().to_vec();
        pts.push(10.0);
        let s = Sample::univariate(pts).unwrap();
        let a = Alpha::new(0.5).unwrap();
        let dpd = fit_basu_dpd(&model, &s, a, &opts).unwrap().theta_hat[0];
        let mle = fit_min_r_alpha(&model, &s, Alpha::ZERO, &opts).unwrap().theta_hat[0];
        assert!(dpd < mle);
    }

    #[test]
    fn exponential_fit_converges() {
        let s = sample_seeded(&Exponential, &[2.0], 200, 4).unwrap();
        let r = fit_min_r_alpha(&Exponential, &s, Alpha::new(0.5).unwrap(), &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.theta_hat[0] - 2.0).abs() < 0.5);
    }

    #[test]
    fn r_alpha_hat_single_point() {
        let model = NormalScale::new(0.0);
        let s = Sample::univariate(vec![1.5]).unwrap();
        let a = Alpha::new(0.5).unwrap();
        let opts = SolverOptions::default();
        let r = r_alpha_hat(&model, &s, a, &opts).unwrap();
        let q = &opts.quadrature;
        let mut best = 0.0f64;
        for i in 1..20_000 {
            let sig = 1e-3 * i as f64;
            best = best.max(crate::pseudodistance::h_kernel(&model, &[sig], a, &[1.5], q).unwrap());
        }
        assert!((r - best).abs() < 1e-6 * best);
    }
}

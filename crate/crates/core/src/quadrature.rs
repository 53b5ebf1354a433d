//! Numerical integration rules.
//!
//! Gaussian-family integrals use Gauss–Hermite rules against a reference
//! normal, exponential-family integrals use adaptive Simpson on the
//! truncated half-line, and a seeded Monte Carlo rule is available for
//! cross-checks. Every routine integrates vector-valued functions: the
//! closure writes `out.len()` values for each node and the rule returns their
//! weighted sums.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::rng::{standard_normal, SplitMix64};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Gauss–Hermite for Gaussian families; half-line families fall back to
    /// adaptive Simpson.
    GaussHermite,
    /// Adaptive Simpson on a truncated interval (univariate only).
    AdaptiveSimpson,
    /// Plain Monte Carlo with `nodes` draws from a fixed seed.
    MonteCarloCheck,
}

/// Integration settings plus the precomputed Gauss–Hermite rule.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    scheme: Scheme,
    nodes: usize,
    /// Truncation radius in units of the reference scale.
    pub truncation: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Recompute the pseudodistance through the Hölder form and fail on
    /// disagreement.
    pub cross_check: bool,
    rule: Vec<(f64, f64)>,
}

const MAX_TENSOR_EVALUATIONS: f64 = 1_048_576.0;
const MIN_TENSOR_NODES: usize = 8;
const MC_SEED: u64 = 0x0000_5eed_0fc0_ffee;
const EXP_PANELS: usize = 2000;

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::gauss_hermite(64).expect("64 nodes is a valid rule")
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(nodes: usize) -> Result<Self> {
        if nodes < 16 {
            return Err(Error::InvalidInput("gauss-hermite needs at least 16 nodes"));
        }
        Ok(QuadratureSpec {
            scheme: Scheme::GaussHermite,
            nodes,
            truncation: 40.0,
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            cross_check: false,
            rule: gauss_hermite_rule(nodes),
        })
    }

    pub fn adaptive_simpson(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::InvalidInput("abs_tol must be positive"));
        }
        Ok(Self { scheme: Scheme::AdaptiveSimpson, abs_tol, rel_tol: rel_tol.max(0.0), ..Self::default() })
    }

    pub fn monte_carlo_check(draws: usize) -> Result<Self> {
        if draws == 0 {
            return Err(Error::InvalidInput("monte carlo check needs at least one draw"));
        }
        Ok(Self { scheme: Scheme::MonteCarloCheck, nodes: draws, ..Self::default() })
    }

    pub fn with_cross_check(mut self, on: bool) -> Self {
        self.cross_check = on;
        self
    }

    pub fn with_truncation(mut self, radius: f64) -> Self {
        self.truncation = radius;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Gauss–Hermite nodes and weights for `∫ g(y) e^{-y²} dy`.
    pub fn rule(&self) -> &[(f64, f64)] {
        &self.rule
    }

    /// `E[f(X)]` for `X ~ N(mean, sd²)`.
    pub fn expect_normal(&self, mean: f64, sd: f64, out: &mut [f64], f: &mut dyn FnMut(f64, &mut [f64])) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self.scheme {
            Scheme::GaussHermite => {
                let mut buf = vec![0.0; out.len()];
                let c = core::f64::consts::SQRT_2 * sd;
                for &(y, w) in &self.rule {
                    f(mean + c * y, &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += w * b;
                    }
                }
                let norm = 1.0 / PI.sqrt();
                out.iter_mut().for_each(|v| *v *= norm);
            }
            Scheme::AdaptiveSimpson => {
                let r = self.truncation * sd;
                let inv = 1.0 / (sd * (2.0 * PI).sqrt());
                let mut g = |x: f64, buf: &mut [f64]| {
                    f(x, buf);
                    let z = (x - mean) / sd;
                    let w = inv * (-0.5 * z * z).exp();
                    buf.iter_mut().for_each(|v| *v *= w);
                };
                self.integrate_interval(mean - r, mean + r, out, &mut g)?;
            }
            Scheme::MonteCarloCheck => {
                let mut rng = SplitMix64::new(MC_SEED);
                let mut buf = vec![0.0; out.len()];
                for _ in 0..self.nodes {
                    f(mean + sd * standard_normal(&mut rng), &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += b;
                    }
                }
                let k = self.nodes as f64;
                out.iter_mut().for_each(|v| *v /= k);
            }
        }
        finite(out, "normal expectation")
    }

    /// `E[f(X)]` for `X ~ N(mean, L Lᵀ)` by a tensor-product Gauss–Hermite
    /// rule. The per-axis node count shrinks with the dimension to keep the
    /// grid below about 10⁶ points; the rule stays exact for polynomials of
    /// degree `2·nodes − 1` along each axis.
    pub fn expect_mvn(
        &self,
        mean: &[f64],
        chol: &Cholesky,
        out: &mut [f64],
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Result<()> {
        let d = mean.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; out.len()];
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        match self.scheme {
            Scheme::AdaptiveSimpson if d > 1 => {
                return Err(Error::InvalidInput("adaptive simpson supports univariate integrals only"))
            }
            Scheme::MonteCarloCheck => {
                let mut rng = SplitMix64::new(MC_SEED);
                for _ in 0..self.nodes {
                    z.iter_mut().for_each(|v| *v = standard_normal(&mut rng));
                    chol.lower_mul(&z, &mut x);
                    x.iter_mut().zip(mean).for_each(|(v, m)| *v += m);
                    f(&x, &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += b;
                    }
                }
                let k = self.nodes as f64;
                out.iter_mut().for_each(|v| *v /= k);
            }
            _ => {
                let per_axis = self.mvn_axis_nodes(d);
                let rule = if per_axis == self.nodes { self.rule.clone() } else { gauss_hermite_rule(per_axis) };
                let mut idx = vec![0usize; d];
                let s2 = core::f64::consts::SQRT_2;
                'grid: loop {
                    let mut w = 1.0;
                    for (k, &i) in idx.iter().enumerate() {
                        z[k] = s2 * rule[i].0;
                        w *= rule[i].1;
                    }
                    chol.lower_mul(&z, &mut x);
                    x.iter_mut().zip(mean).for_each(|(v, m)| *v += m);
                    f(&x, &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += w * b;
                    }
                    for k in 0..d {
                        idx[k] += 1;
                        if idx[k] < per_axis {
                            continue 'grid;
                        }
                        idx[k] = 0;
                    }
                    break;
                }
                let norm = PI.powf(-(d as f64) / 2.0);
                out.iter_mut().for_each(|v| *v *= norm);
            }
        }
        finite(out, "multivariate normal expectation")
    }

    /// `E[f(X)]` for `X` exponential with the given mean, integrating
    /// `f(mean·t) e^{-t}` over `t ∈ [0, truncation]`.
    pub fn expect_exponential(&self, mean: f64, out: &mut [f64], f: &mut dyn FnMut(f64, &mut [f64])) -> Result<()> {
        match self.scheme {
            Scheme::MonteCarloCheck => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut rng = SplitMix64::new(MC_SEED);
                let mut buf = vec![0.0; out.len()];
                for _ in 0..self.nodes {
                    let u = crate::rng::open_unit(&mut rng);
                    f(-mean * u.ln(), &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += b;
                    }
                }
                let k = self.nodes as f64;
                out.iter_mut().for_each(|v| *v /= k);
            }
            _ => {
                let mut g = |t: f64, buf: &mut [f64]| {
                    f(mean * t, buf);
                    let w = (-t).exp();
                    buf.iter_mut().for_each(|v| *v *= w);
                };
                self.integrate_interval(0.0, self.truncation, out, &mut g)?;
            }
        }
        finite(out, "exponential expectation")
    }

    /// Weighted nodes approximating `N(mean, sd²)`: the Gauss–Hermite nodes,
    /// or `nodes` seeded draws for the Monte Carlo scheme.
    pub fn normal_nodes(&self, mean: f64, sd: f64) -> Vec<(f64, f64)> {
        match self.scheme {
            Scheme::MonteCarloCheck => {
                let mut rng = SplitMix64::new(MC_SEED);
                let w = 1.0 / self.nodes as f64;
                (0..self.nodes).map(|_| (mean + sd * standard_normal(&mut rng), w)).collect()
            }
            _ => {
                let c = core::f64::consts::SQRT_2 * sd;
                let norm = 1.0 / PI.sqrt();
                self.rule.iter().map(|&(y, w)| (mean + c * y, w * norm)).collect()
            }
        }
    }

    /// Weighted nodes approximating the exponential law with the given mean:
    /// composite Simpson on `[0, truncation]` with `2·EXP_PANELS` intervals.
    pub fn exponential_nodes(&self, mean: f64) -> Vec<(f64, f64)> {
        match self.scheme {
            Scheme::MonteCarloCheck => {
                let mut rng = SplitMix64::new(MC_SEED);
                let w = 1.0 / self.nodes as f64;
                (0..self.nodes).map(|_| (-mean * crate::rng::open_unit(&mut rng).ln(), w)).collect()
            }
            _ => {
                let m = 2 * EXP_PANELS;
                let h = self.truncation / m as f64;
                (0..=m)
                    .map(|i| {
                        let t = h * i as f64;
                        let c = if i == 0 || i == m {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        (mean * t, c * h / 3.0 * (-t).exp())
                    })
                    .collect()
            }
        }
    }

    /// Weighted nodes approximating `N(mean, L Lᵀ)`, flattened row-major,
    /// with the same per-axis node count as [`Self::expect_mvn`].
    pub fn mvn_nodes(&self, mean: &[f64], chol: &Cholesky) -> (Vec<f64>, Vec<f64>) {
        let d = mean.len();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        if self.scheme == Scheme::MonteCarloCheck {
            let mut rng = SplitMix64::new(MC_SEED);
            for _ in 0..self.nodes {
                z.iter_mut().for_each(|v| *v = standard_normal(&mut rng));
                chol.lower_mul(&z, &mut x);
                points.extend(x.iter().zip(mean).map(|(v, m)| v + m));
                weights.push(1.0 / self.nodes as f64);
            }
            return (points, weights);
        }
        let per = self.mvn_axis_nodes(d);
        let rule = if per == self.nodes { self.rule.clone() } else { gauss_hermite_rule(per) };
        let norm = PI.powf(-(d as f64) / 2.0);
        let s2 = core::f64::consts::SQRT_2;
        let mut idx = vec![0usize; d];
        'grid: loop {
            let mut w = norm;
            for (k, &i) in idx.iter().enumerate() {
                z[k] = s2 * rule[i].0;
                w *= rule[i].1;
            }
            chol.lower_mul(&z, &mut x);
            points.extend(x.iter().zip(mean).map(|(v, m)| v + m));
            weights.push(w);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per {
                    continue 'grid;
                }
                *slot = 0;
            }
            break;
        }
        (points, weights)
    }

    fn mvn_axis_nodes(&self, d: usize) -> usize {
        if d <= 1 {
            self.nodes
        } else {
            let budget = MAX_TENSOR_EVALUATIONS.powf(1.0 / d as f64).floor() as usize;
            budget.clamp(MIN_TENSOR_NODES, self.nodes)
        }
    }

    /// `∫_a^b f(x) dx` by adaptive Simpson with the spec's tolerances.
    pub fn integrate_interval(&self, a: f64, b: f64, out: &mut [f64], f: &mut dyn FnMut(f64, &mut [f64])) -> Result<()> {
        adaptive_simpson(f, a, b, out, self.abs_tol, self.rel_tol)?;
        finite(out, "interval integral")
    }
}

fn finite(out: &[f64], what: &'static str) -> Result<()> {
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteIntegral { what })
    }
}

/// Gauss–Hermite rule for weight `e^{-y²}` on ℝ, nodes in increasing order.
///
/// Newton iteration on the orthonormal Hermite recurrence, so the weights do
/// not overflow for large `n`.
pub fn gauss_hermite_rule(n: usize) -> Vec<(f64, f64)> {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let mut rule: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

const INITIAL_PANELS: usize = 64;
const MAX_DEPTH: u32 = 40;

fn adaptive_simpson(
    f: &mut dyn FnMut(f64, &mut [f64]),
    a: f64,
    b: f64,
    out: &mut [f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<()> {
    let k = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    if !(b > a) {
        return Ok(());
    }
    // Coarse pass fixes the absolute target from the relative tolerance.
    let h = (b - a) / INITIAL_PANELS as f64;
    let mut panels = Vec::with_capacity(INITIAL_PANELS);
    let mut coarse = vec![0.0; k];
    let mut fa = vec![0.0; k];
    f(a, &mut fa);
    for i in 0..INITIAL_PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let mut fm = vec![0.0; k];
        let mut fb = vec![0.0; k];
        f(mid, &mut fm);
        f(hi, &mut fb);
        for j in 0..k {
            coarse[j] += (hi - lo) / 6.0 * (fa[j] + 4.0 * fm[j] + fb[j]);
        }
        panels.push((lo, hi, fa.clone(), fm, fb.clone()));
        fa = fb;
    }
    let scale = coarse.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return Err(Error::NonFiniteIntegral { what: "adaptive simpson" });
    }
    let tol = abs_tol.max(rel_tol * scale) / INITIAL_PANELS as f64;
    for (lo, hi, fa, fm, fb) in panels {
        let whole: Vec<f64> = (0..k).map(|j| (hi - lo) / 6.0 * (fa[j] + 4.0 * fm[j] + fb[j])).collect();
        let part = simpson_recurse(f, lo, hi, &fa, &fm, &fb, &whole, tol, MAX_DEPTH);
        for j in 0..k {
            out[j] += part[j];
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &mut dyn FnMut(f64, &mut [f64]),
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
) -> Vec<f64> {
    let k = fa.len();
    let m = 0.5 * (a + b);
    let mut fl = vec![0.0; k];
    let mut fr = vec![0.0; k];
    f(0.5 * (a + m), &mut fl);
    f(0.5 * (m + b), &mut fr);
    let h = b - a;
    let left: Vec<f64> = (0..k).map(|j| h / 12.0 * (fa[j] + 4.0 * fl[j] + fm[j])).collect();
    let right: Vec<f64> = (0..k).map(|j| h / 12.0 * (fm[j] + 4.0 * fr[j] + fb[j])).collect();
    let err = (0..k).map(|j| (left[j] + right[j] - whole[j]).abs()).fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol || !err.is_finite() {
        return (0..k).map(|j| left[j] + right[j] + (left[j] + right[j] - whole[j]) / 15.0).collect();
    }
    let mut l = simpson_recurse(f, a, m, fa, &fl, fm, &left, 0.5 * tol, depth - 1);
    let r = simpson_recurse(f, m, b, fm, &fr, fb, &right, 0.5 * tol, depth - 1);
    l.iter_mut().zip(r).for_each(|(x, y)| *x += y);
    l
}

//! Seeded contamination studies.
//!
//! Replicate `r` draws its sample from `replicate_rng(seed, r)`, every
//! configured estimator is applied to that same sample, and per-replicate
//! results are reduced in replicate order. Reports are therefore identical
//! whether replicates run serially or on any number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use renyi_core::estimation::{fit_basu_dpd, fit_min_r_alpha, SolverOptions};
use renyi_core::linalg::Matrix;
use renyi_core::models::sample_contaminated;
use renyi_core::rng::replicate_rng;
use renyi_core::{Alpha, Contaminant, ContaminantSpec, Model, ParametricModel, Sample};

use crate::error::{Error, Result};

/// Caps the worker count of [`run_study`].
pub const THREADS_ENV: &str = "ROBUST_RENYI_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    NormalScale { mean: f64 },
    NormalLocation { sd: f64 },
    Exponential,
    MvnMean { cov: Vec<Vec<f64>> },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelConfig::NormalScale { mean } => Model::normal_scale(*mean),
            ModelConfig::NormalLocation { sd } => Model::normal_location(*sd)?,
            ModelConfig::Exponential => Model::exponential(),
            ModelConfig::MvnMean { cov } => {
                let p = cov.len();
                if cov.iter().any(|r| r.len() != p) {
                    return Err(Error::Config("covariance must be a square matrix".into()));
                }
                Model::mvn_mean(Matrix::from_row_major(p, p, cov.concat()))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContaminantConfig {
    Normal { mean: f64, sd: f64, epsilon: f64 },
    Exponential { mean: f64, epsilon: f64 },
    PointMass { at: Vec<f64>, epsilon: f64 },
}

impl ContaminantConfig {
    pub fn build(&self) -> Result<ContaminantSpec> {
        let (kind, eps) = match self {
            ContaminantConfig::Normal { mean, sd, epsilon } => (Contaminant::Normal { mean: *mean, sd: *sd }, *epsilon),
            ContaminantConfig::Exponential { mean, epsilon } => (Contaminant::Exponential { mean: *mean }, *epsilon),
            ContaminantConfig::PointMass { at, epsilon } => (Contaminant::PointMass(at.clone()), *epsilon),
        };
        Ok(ContaminantSpec::new(kind, eps)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorFamily {
    /// Minimum R_α.
    #[serde(alias = "minR")]
    MinR,
    /// Density power divergence (normal scale only).
    #[serde(alias = "minD")]
    MinD,
    Mle,
}

impl EstimatorFamily {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorFamily::MinR => "min-r",
            EstimatorFamily::MinD => "min-d",
            EstimatorFamily::Mle => "mle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub family: EstimatorFamily,
    #[serde(default)]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub theta: Vec<f64>,
    pub n: usize,
    pub n_replicates: usize,
    #[serde(default)]
    pub contaminant: Option<ContaminantConfig>,
    pub estimators: Vec<EstimatorConfig>,
    pub seed: u64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
}

fn default_beta_max() -> f64 {
    renyi_core::DEFAULT_BETA_MAX
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("study config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_replicates == 0 {
            return Err(Error::Config("n_replicates must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        let model = self.model.build()?;
        model.validate_theta(&self.theta)?;
        if let Some(c) = &self.contaminant {
            c.build()?;
        }
        for e in &self.estimators {
            if e.family == EstimatorFamily::MinD && !matches!(self.model, ModelConfig::NormalScale { .. }) {
                return Err(Error::Config("min-d is only available for the normal-scale model".into()));
            }
            for &a in &e.alphas {
                Alpha::with_beta_max(a, self.beta_max)?;
            }
        }
        Ok(())
    }

    /// The standard estimators in configuration order. An `mle` entry
    /// without alphas contributes a single α = 0 row.
    pub fn estimators(&self) -> Result<Vec<Box<dyn Estimator>>> {
        let model = self.model.build()?;
        let mut out: Vec<Box<dyn Estimator>> = vec![];
        for e in &self.estimators {
            let alphas = if e.family == EstimatorFamily::Mle && e.alphas.is_empty() { vec![0.0] } else { e.alphas.clone() };
            for a in alphas {
                let alpha = Alpha::with_beta_max(a, self.beta_max)?;
                out.push(Box::new(StandardEstimator {
                    family: e.family,
                    alpha,
                    model: model.clone(),
                    opts: SolverOptions::default(),
                }));
            }
        }
        Ok(out)
    }
}

/// One estimator row of a study.
pub trait Estimator: Send + Sync {
    fn family(&self) -> &str;
    fn alpha(&self) -> f64;
    /// `None` when the fit fails or does not converge.
    fn estimate(&self, sample: &Sample) -> Option<Vec<f64>>;
}

pub struct StandardEstimator {
    pub family: EstimatorFamily,
    pub alpha: Alpha,
    pub model: Model,
    pub opts: SolverOptions,
}

impl Estimator for StandardEstimator {
    fn family(&self) -> &str {
        self.family.label()
    }

    fn alpha(&self) -> f64 {
        self.alpha.value()
    }

    fn estimate(&self, sample: &Sample) -> Option<Vec<f64>> {
        let fit = match (self.family, &self.model) {
            (EstimatorFamily::MinD, Model::NormalScale(m)) => fit_basu_dpd(m, sample, self.alpha, &self.opts),
            (EstimatorFamily::MinD, _) => return None,
            (EstimatorFamily::Mle, _) => fit_min_r_alpha(&self.model, sample, Alpha::ZERO, &self.opts),
            (EstimatorFamily::MinR, _) => fit_min_r_alpha(&self.model, sample, self.alpha, &self.opts),
        };
        match fit {
            Ok(f) if f.converged && f.theta_hat.iter().all(|v| v.is_finite()) => Some(f.theta_hat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub estimator: String,
    pub alpha: f64,
    /// Mean of θ̂ over converged replicates, per component.
    pub mean_estimate: Vec<f64>,
    /// Monte Carlo standard error of each component of `mean_estimate`.
    pub se_mean: Vec<f64>,
    /// `(1/R) Σ ‖θ̂_r − θ‖²` over the R converged replicates.
    pub mse_hat: f64,
    pub se_mse: f64,
    pub n_converged: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub theta: Vec<f64>,
    pub n: usize,
    pub n_replicates: usize,
    pub seed: u64,
    pub rows: Vec<StudyRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Rayon, with at most `ROBUST_RENYI_THREADS` workers when set.
    #[default]
    Parallel,
}

/// Runs a study with the estimators named in `config`.
pub fn run_study(config: &StudyConfig, exec: Execution) -> Result<StudyReport> {
    config.validate()?;
    let estimators = config.estimators()?;
    run_study_with(config, &estimators, exec)
}

/// Runs a study with caller-supplied estimators; sampling follows `config`.
pub fn run_study_with(config: &StudyConfig, estimators: &[Box<dyn Estimator>], exec: Execution) -> Result<StudyReport> {
    if config.n_replicates == 0 {
        return Err(Error::Config("n_replicates must be at least 1".into()));
    }
    let model = config.model.build()?;
    model.validate_theta(&config.theta)?;
    let contaminant = config.contaminant.as_ref().map(|c| c.build()).transpose()?;

    let replicate = |r: usize| -> Vec<Option<Vec<f64>>> {
        let mut rng = replicate_rng(config.seed, r as u64);
        match sample_contaminated(&model, &config.theta, config.n, contaminant.as_ref(), &mut rng) {
            Ok(s) => estimators.iter().map(|e| e.estimate(&s)).collect(),
            Err(_) => vec![None; estimators.len()],
        }
    };

    let results: Vec<Vec<Option<Vec<f64>>>> = match exec {
        Execution::Serial => (0..config.n_replicates).map(replicate).collect(),
        Execution::Parallel => {
            let work = || (0..config.n_replicates).into_par_iter().map(replicate).collect();
            match thread_cap() {
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                    .install(work),
                None => work(),
            }
        }
    };

    let rows = estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let ok: Vec<&Vec<f64>> = results.iter().filter_map(|r| r[k].as_ref()).collect();
            summarize(e.family(), e.alpha(), &config.theta, &ok, config.n_replicates - ok.len())
        })
        .collect();
    Ok(StudyReport { theta: config.theta.clone(), n: config.n, n_replicates: config.n_replicates, seed: config.seed, rows })
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&t| t > 0)
}

fn summarize(family: &str, alpha: f64, theta: &[f64], ok: &[&Vec<f64>], n_failed: usize) -> StudyRow {
    let d = theta.len();
    let mut mean_estimate = vec![f64::NAN; d];
    let mut se_mean = vec![f64::NAN; d];
    for j in 0..d {
        let col: Vec<f64> = ok.iter().map(|t| t[j]).collect();
        if !col.is_empty() {
            mean_estimate[j] = col.iter().sum::<f64>() / col.len() as f64;
        }
        se_mean[j] = mc_standard_error(&col).unwrap_or(f64::NAN);
    }
    let sq: Vec<f64> = ok.iter().map(|t| t.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum()).collect();
    let mse_hat = if sq.is_empty() { f64::NAN } else { sq.iter().sum::<f64>() / sq.len() as f64 };
    StudyRow {
        estimator: family.to_string(),
        alpha,
        mean_estimate,
        se_mean,
        mse_hat,
        se_mse: mc_standard_error(&sq).unwrap_or(f64::NAN),
        n_converged: ok.len(),
        n_failed,
    }
}

/// Standard deviation of the replicate values (divisor = count) over
/// `√count`.
pub fn mc_standard_error(values: &[f64]) -> renyi_core::Result<f64> {
    if values.len() < 2 {
        return Err(renyi_core::Error::TooFewReplicates(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / n.sqrt())
}

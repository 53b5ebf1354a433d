//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on parse and numerical
//! failures. In JSON mode failures are also reported on standard output as
//! `{"error": {"kind": ..., "message": ...}}`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use renyi_core::asymptotics::{are, closed_form_covariance, sandwich};
use renyi_core::estimation::{fit_basu_dpd, fit_min_r_alpha, SolverOptions, StartStrategy};
use renyi_core::linalg::Matrix;
use renyi_core::regression::{fit_regression, RegressionData};
use renyi_core::robustness::{ges, influence_closed, most_brobust_alpha, InfluenceContext};
use renyi_core::{Alpha, Model, ModelKind, ParametricModel, QuadratureSpec, Sample};

use crate::error::{Error, Result};
use crate::io::{read_regression, read_rows, read_univariate, Cell, Table};
use crate::montecarlo::{run_study, Execution, StudyConfig};

#[derive(Debug, Parser)]
#[command(name = "robust-renyi", version, about = "Minimum pseudodistance estimation, robustness curves and Monte Carlo studies")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Write output here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Print numbers at full precision instead of 6 significant digits.
    #[arg(long, global = true)]
    pub full_precision: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a parametric model to a data file.
    Estimate(EstimateArgs),
    /// Fit the Gaussian linear regression model.
    Regress(RegressArgs),
    /// Influence function on an x-grid.
    Influence(InfluenceArgs),
    /// Gross error sensitivity as a function of alpha.
    GesCurve(GesArgs),
    /// Asymptotic relative efficiencies.
    AreTable(AreArgs),
    /// Asymptotic covariance at a model point.
    Asympt(AsymptArgs),
    /// Run a Monte Carlo study from a JSON configuration.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    NormalScale,
    NormalLocation,
    Exponential,
    MvnMean,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    /// Known mean of the normal scale model.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub m: f64,
    /// Known standard deviation of the normal location model.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Known covariance of the mvn-mean model, row-major, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub cov: Vec<f64>,
}

impl ModelArgs {
    pub fn build(&self) -> Result<Model> {
        Ok(match self.model {
            ModelName::NormalScale => Model::normal_scale(self.m),
            ModelName::NormalLocation => Model::normal_location(self.sigma)?,
            ModelName::Exponential => Model::exponential(),
            ModelName::MvnMean => {
                let p = (self.cov.len() as f64).sqrt().round() as usize;
                if p == 0 || p * p != self.cov.len() {
                    return Err(Error::Usage("mvn-mean needs --cov with p*p entries".into()));
                }
                Model::mvn_mean(Matrix::from_row_major(p, p, self.cov.clone()))?
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Convergence tolerance on the estimating equation.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Extra starting points tried before giving up.
    #[arg(long, default_value_t = 5)]
    pub n_starts: usize,
    #[arg(long, value_enum, default_value_t = StartArg::Mle)]
    pub start: StartArg,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Mle,
    Robust,
    Grid,
}

#[derive(Debug, Args)]
pub struct QuadArgs {
    /// Gauss-Hermite nodes.
    #[arg(long, default_value_t = 64)]
    pub quad_nodes: usize,
    /// Use adaptive Simpson with this absolute tolerance instead.
    #[arg(long)]
    pub simpson_tol: Option<f64>,
}

impl QuadArgs {
    pub fn build(&self) -> Result<QuadratureSpec> {
        Ok(match self.simpson_tol {
            Some(t) => QuadratureSpec::adaptive_simpson(t, 1e-11)?,
            None => QuadratureSpec::gauss_hermite(self.quad_nodes)?,
        })
    }
}

impl SolverArgs {
    pub fn build(&self) -> Result<SolverOptions> {
        let opts = SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            n_starts: self.n_starts,
            start_strategy: match self.start {
                StartArg::Mle => StartStrategy::MleStart,
                StartArg::Robust => StartStrategy::RobustStart,
                StartArg::Grid => StartStrategy::Grid,
            },
            quadrature: self.quad.build()?,
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    MinR,
    MinD,
    Mle,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// One or more orders, comma separated. Ignored by `--estimator mle`.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub alpha: Vec<f64>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::MinR)]
    pub estimator: EstimatorArg,
    /// Headerless CSV, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// CSV with header x1,...,xp,y.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model point, comma separated for mvn-mean.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
    pub alpha: Vec<f64>,
    /// Grid start, as an offset from θ along the first coordinate for mvn-mean.
    #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Use M_α by quadrature instead of the closed forms.
    #[arg(long)]
    pub general: bool,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Args)]
pub struct GesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model point, comma separated for mvn-mean.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_from: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_to: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Print only the most B-robust order in [alpha-from, alpha-to].
    #[arg(long)]
    pub optimum: bool,
}

#[derive(Debug, Args)]
pub struct AreArgs {
    /// `all` or a comma-separated list of model names.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub models: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.02,0.05,0.1,0.2,0.25,0.5,1")]
    pub alphas: Vec<f64>,
    /// Dimensions of the mvn-mean rows.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovMethod {
    Sandwich,
    ClosedForm,
}

#[derive(Debug, Args)]
pub struct AsymptArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model point, comma separated for mvn-mean.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CovMethod::Sandwich)]
    pub method: CovMethod,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Study configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the replicate count in the configuration.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Run replicates on the calling thread.
    #[arg(long)]
    pub serial: bool,
}

/// Parses `args` and runs the command, writing to `stdout`/`stderr`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok(table) => match emit(&cli, &table, stdout) {
            Ok(()) => 0,
            Err(e) => report(&cli, &e, stdout, stderr),
        },
        Err(e) => report(&cli, &e, stdout, stderr),
    }
}

fn report(cli: &Cli, e: &Error, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    if cli.format == Format::Json {
        let obj = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
        let _ = writeln!(stdout, "{obj}");
    }
    e.exit_code()
}

fn emit(cli: &Cli, table: &Table, stdout: &mut dyn Write) -> Result<()> {
    let mut file;
    let out: &mut dyn Write = match &cli.output {
        Some(p) => {
            file = File::create(p)?;
            &mut file
        }
        None => stdout,
    };
    match cli.format {
        Format::Csv => table.write_csv(out, cli.full_precision),
        Format::Json => table.write_json(out),
    }
}

pub fn execute(cli: &Cli) -> Result<Table> {
    match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Regress(a) => regress(a),
        Command::Influence(a) => influence(a),
        Command::GesCurve(a) => ges_curve(a),
        Command::AreTable(a) => are_table(a),
        Command::Asympt(a) => asympt(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn alpha(v: f64) -> Result<Alpha> {
    Ok(Alpha::new(v)?)
}

fn theta_for(model: &Model, theta: &[f64]) -> Result<()> {
    if theta.len() != model.theta_dim() {
        return Err(Error::Usage(format!("--theta needs {} value(s)", model.theta_dim())));
    }
    model.validate_theta(theta)?;
    Ok(())
}

fn estimate(a: &EstimateArgs) -> Result<Table> {
    let model = a.model.build()?;
    let opts = a.solver.build()?;
    let sample = if model.obs_dim() == 1 {
        Sample::univariate(read_univariate(open(&a.input)?)?)?
    } else {
        let (w, v) = read_rows(open(&a.input)?)?;
        if w != model.obs_dim() {
            return Err(Error::Parse(format!("expected {} columns, found {w}", model.obs_dim())));
        }
        Sample::from_rows(w, v)?
    };
    let mut t =
        Table::new(&["estimator", "alpha", "component", "estimate", "criterion", "converged", "iterations", "gradient_norm"]);
    let alphas = if a.estimator == EstimatorArg::Mle { vec![0.0] } else { a.alpha.clone() };
    for av in alphas {
        let (label, fit) = match a.estimator {
            EstimatorArg::MinR => ("min-r", fit_min_r_alpha(&model, &sample, alpha(av)?, &opts)?),
            EstimatorArg::Mle => ("mle", fit_min_r_alpha(&model, &sample, Alpha::ZERO, &opts)?),
            EstimatorArg::MinD => match &model {
                Model::NormalScale(m) => ("min-d", fit_basu_dpd(m, &sample, alpha(av)?, &opts)?),
                _ => return Err(Error::Usage("min-d is only available for normal-scale".into())),
            },
        };
        for (j, v) in fit.theta_hat.iter().enumerate() {
            t.push(vec![
                label.into(),
                av.into(),
                (j + 1).into(),
                (*v).into(),
                fit.criterion_at_opt.into(),
                fit.converged.into(),
                fit.iterations.into(),
                fit.gradient_norm.into(),
            ]);
        }
    }
    Ok(t)
}

fn regress(a: &RegressArgs) -> Result<Table> {
    let opts = a.solver.build()?;
    let input = read_regression(open(&a.input)?)?;
    let data = RegressionData::new(input.x, input.y)?;
    let mut t = Table::new(&["alpha", "parameter", "estimate", "converged", "iterations"]);
    for &av in &a.alpha {
        let fit = fit_regression(&data, alpha(av)?, &opts)?;
        for (name, b) in input.names.iter().zip(&fit.beta_hat) {
            t.push(vec![av.into(), name.as_str().into(), (*b).into(), fit.converged.into(), fit.iterations.into()]);
        }
        t.push(vec![av.into(), "sigma".into(), fit.sigma_hat.into(), fit.converged.into(), fit.iterations.into()]);
    }
    Ok(t)
}

fn grid(from: f64, to: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(to > from) {
        return Err(Error::Usage("grid needs from < to and at least 2 points".into()));
    }
    Ok((0..points).map(|i| from + (to - from) * i as f64 / (points - 1) as f64).collect())
}

fn influence(a: &InfluenceArgs) -> Result<Table> {
    let model = a.model.build()?;
    theta_for(&model, &a.theta)?;
    let quad = a.quad.build()?;
    let xs = grid(a.from, a.to, a.points)?;
    let mut t = Table::new(&["alpha", "x", "component", "influence"]);
    for &av in &a.alpha {
        let al = alpha(av)?;
        let ctx = if a.general { Some(InfluenceContext::new(&model, &a.theta, al, &quad)?) } else { None };
        for &x in &xs {
            let point: Vec<f64> = match &model {
                Model::MvnMean(_) => {
                    let mut p = a.theta.clone();
                    p[0] += x;
                    p
                }
                _ => vec![x],
            };
            let v = match &ctx {
                Some(c) => c.eval(&model, &point),
                None => influence_closed(&model, &a.theta, av, &point)?,
            };
            for (j, c) in v.iter().enumerate() {
                t.push(vec![av.into(), point[0].into(), (j + 1).into(), (*c).into()]);
            }
        }
    }
    Ok(t)
}

fn ges_curve(a: &GesArgs) -> Result<Table> {
    let model = a.model.build()?;
    theta_for(&model, &a.theta)?;
    if a.optimum {
        let (s, g) = most_brobust_alpha(&model, &a.theta, (a.alpha_from, a.alpha_to))?;
        let mut t = Table::new(&["alpha_star", "ges"]);
        t.push(vec![s.into(), g.into()]);
        return Ok(t);
    }
    let mut t = Table::new(&["alpha", "ges"]);
    for av in grid(a.alpha_from, a.alpha_to, a.points)? {
        t.push(vec![av.into(), ges(&model, &a.theta, av)?.into()]);
    }
    Ok(t)
}

fn are_table(a: &AreArgs) -> Result<Table> {
    let mut kinds = vec![];
    for m in &a.models {
        match m.as_str() {
            "all" => {
                kinds.extend([ModelKind::NormalScale, ModelKind::Exponential, ModelKind::NormalLocation, ModelKind::MvnMean])
            }
            "normal-scale" => kinds.push(ModelKind::NormalScale),
            "exponential" => kinds.push(ModelKind::Exponential),
            "normal-location" => kinds.push(ModelKind::NormalLocation),
            "mvn-mean" => kinds.push(ModelKind::MvnMean),
            other => return Err(Error::Usage(format!("unknown model '{other}'"))),
        }
    }
    let mut rows: Vec<(String, ModelKind, usize)> = vec![];
    for k in kinds {
        if k == ModelKind::MvnMean {
            for &p in &a.dims {
                rows.push((format!("mvn-mean-p{p}"), k, p));
            }
        } else {
            rows.push((k.name().to_string(), k, 1));
        }
    }
    let mut t = Table::new(&["model", "alpha", "are"]);
    for (label, k, p) in rows {
        for &av in &a.alphas {
            t.push(vec![label.clone().into(), av.into(), Cell::Trunc5(are(k, av, p)?)]);
        }
    }
    Ok(t)
}

fn asympt(a: &AsymptArgs) -> Result<Table> {
    let model = a.model.build()?;
    theta_for(&model, &a.theta)?;
    let mut t = Table::new(&["matrix", "row", "col", "value"]);
    let mut push = |name: &str, m: &Matrix| {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                t.push(vec![name.into(), (i + 1).into(), (j + 1).into(), m[(i, j)].into()]);
            }
        }
    };
    match a.method {
        CovMethod::Sandwich => {
            let sc = sandwich(&model, &a.theta, alpha(a.alpha)?, &a.quad.build()?)?;
            push("S", &sc.s);
            push("M", &sc.m);
            push("V", &sc.v);
        }
        CovMethod::ClosedForm => {
            alpha(a.alpha)?;
            push("V", &closed_form_covariance(&model, &a.theta, a.alpha)?);
        }
    }
    Ok(t)
}

fn simulate(a: &SimulateArgs) -> Result<Table> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::Parse(format!("{}: {e}", a.config.display())))?;
    let mut config = StudyConfig::from_json(&text)?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(r) = a.replicates {
        config.n_replicates = r;
    }
    let exec = if a.serial { Execution::Serial } else { Execution::Parallel };
    let report = run_study(&config, exec)?;
    let mut t = Table::new(&[
        "estimator",
        "alpha",
        "component",
        "mean_estimate",
        "se_mean",
        "mse_hat",
        "se_mse",
        "n_converged",
        "n_failed",
    ]);
    for r in &report.rows {
        for j in 0..r.mean_estimate.len() {
            t.push(vec![
                r.estimator.as_str().into(),
                r.alpha.into(),
                (j + 1).into(),
                r.mean_estimate[j].into(),
                r.se_mean[j].into(),
                r.mse_hat.into(),
                r.se_mse.into(),
                r.n_converged.into(),
                r.n_failed.into(),
            ]);
        }
    }
    Ok(t)
}

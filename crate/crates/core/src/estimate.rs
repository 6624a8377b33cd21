//! Maximum-likelihood estimation on log-parameters.
//!
//! Two modes are offered:
//! * [`Optimizer::NelderMead`]: simplex search, positivity through the log
//!   map, started from a caller-supplied point (typically the truth).
//! * [`Optimizer::Lbfgs`]: box-constrained quasi-Newton with analytic
//!   gradients for exponential-family kernels and central differences otherwise.
//!
//! Both reject parameter sets with spectral radius above `1 - stationarity_margin`.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::likelihood::{loglik_gradient, loglik_with, ExpGradient, LikelihoodOptions, LikelihoodVariant};
use crate::model::{HawkesModel, Kernel};
use crate::optim::{lbfgs_box, nelder_mead, LbfgsOptions, NelderMeadOptions, OptimResult};
use crate::series::EventSeries;

/// Univariate kernel family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "family")]
pub enum FitFamily {
    /// Sum of `terms` exponentials (`terms == 1` is the plain exponential).
    SumExp { terms: usize },
    PowerLaw,
}

impl FitFamily {
    pub fn exponential() -> Self {
        FitFamily::SumExp { terms: 1 }
    }
}

/// Parameter tying for bivariate and general multivariate fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// Free `lambda_0^m`, `alpha^{mn}`, `beta^{mn}`.
    General,
    /// Shared `lambda_0` and `beta`, `[[a0, am], [am, a0]]`.
    Symmetric,
    /// Shared `lambda_0` and `beta`, `[[a0, am1], [am2, a0]]`.
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    NelderMead,
    Lbfgs,
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Optimizer::NelderMead => "nelder-mead",
            Optimizer::Lbfgs => "l-bfgs-b",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub variant: LikelihoodVariant,
    pub optimizer: Optimizer,
    /// Fits are restricted to `rho <= 1 - stationarity_margin`.
    pub stationarity_margin: f64,
    /// Box for the log-parameters in bounded mode.
    pub log_bounds: (f64, f64),
    pub nelder_mead: NelderMeadOptions,
    pub lbfgs: LbfgsOptions,
    pub likelihood: LikelihoodOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            variant: LikelihoodVariant::Standard,
            optimizer: Optimizer::NelderMead,
            stationarity_margin: 1e-4,
            log_bounds: (-30.0, 30.0),
            nelder_mead: NelderMeadOptions::default(),
            lbfgs: LbfgsOptions::default(),
            likelihood: LikelihoodOptions::default(),
        }
    }
}

impl FitOptions {
    pub fn with_variant(mut self, variant: LikelihoodVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.optimizer = optimizer;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: HawkesModel,
    pub loglik: f64,
    pub variant: LikelihoodVariant,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub optimizer: Optimizer,
    /// Spectral radius of the estimate (the endogeneity for `M = 1`).
    pub spectral_radius: f64,
    /// Number of free parameters.
    pub parameter_count: usize,
    pub loglik_at_init: f64,
    pub message: String,
}

/// Mapping between a model shape and its unconstrained log-parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    SumExp { terms: usize },
    PowerLaw,
    General { dim: usize },
    Symmetric,
    Asymmetric,
}

impl Parametrization {
    pub fn len(&self) -> usize {
        match *self {
            Parametrization::SumExp { terms } => 1 + 2 * terms,
            Parametrization::PowerLaw => 4,
            Parametrization::General { dim } => dim + 2 * dim * dim,
            Parametrization::Symmetric => 4,
            Parametrization::Asymmetric => 5,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_exponential_family(&self) -> bool {
        !matches!(self, Parametrization::PowerLaw)
    }

    /// Log-parameters of `model`, which must have this shape.
    pub fn encode(&self, model: &HawkesModel) -> Result<Vec<f64>> {
        let shape_err = || HawkesError::InvalidParameter(format!("initial model does not match {self:?}"));
        let sum_exp = |m: usize, n: usize| model.kernel(m, n).as_sum_exp().ok_or_else(shape_err);
        let single = |m: usize, n: usize| -> Result<(f64, f64)> {
            let k = sum_exp(m, n)?;
            if k.len() != 1 {
                return Err(shape_err());
            }
            Ok((k.terms()[0].alpha, k.terms()[0].beta))
        };
        let raw: Vec<f64> = match *self {
            Parametrization::SumExp { terms } => {
                if model.dimension() != 1 {
                    return Err(shape_err());
                }
                let k = sum_exp(0, 0)?;
                if k.len() != terms {
                    return Err(shape_err());
                }
                let mut v = vec![model.baseline()[0]];
                v.extend(k.terms().iter().map(|t| t.alpha));
                v.extend(k.terms().iter().map(|t| t.beta));
                v
            }
            Parametrization::PowerLaw => {
                if model.dimension() != 1 {
                    return Err(shape_err());
                }
                match model.kernel(0, 0) {
                    Kernel::PowerLaw(p) => vec![model.baseline()[0], p.u, p.v, -1.0 - p.w],
                    _ => return Err(shape_err()),
                }
            }
            Parametrization::General { dim } => {
                if model.dimension() != dim {
                    return Err(shape_err());
                }
                let mut v = model.baseline().to_vec();
                let mut betas = Vec::new();
                for m in 0..dim {
                    for n in 0..dim {
                        let (a, b) = single(m, n)?;
                        v.push(a);
                        betas.push(b);
                    }
                }
                v.extend(betas);
                v
            }
            Parametrization::Symmetric | Parametrization::Asymmetric => {
                if model.dimension() != 2 {
                    return Err(shape_err());
                }
                let (a00, b) = single(0, 0)?;
                let (a01, _) = single(0, 1)?;
                let (a10, _) = single(1, 0)?;
                if matches!(self, Parametrization::Symmetric) {
                    vec![model.baseline()[0], a00, a01, b]
                } else {
                    vec![model.baseline()[0], a00, a01, a10, b]
                }
            }
        };
        Ok(raw.iter().map(|v| v.max(1e-300).ln()).collect())
    }

    pub fn decode(&self, theta: &[f64]) -> Result<HawkesModel> {
        let x: Vec<f64> = theta.iter().map(|v| v.exp()).collect();
        match *self {
            Parametrization::SumExp { terms } => {
                HawkesModel::univariate(x[0], Kernel::sum_exp(&x[1..1 + terms], &x[1 + terms..])?)
            }
            Parametrization::PowerLaw => HawkesModel::univariate(x[0], Kernel::power_law(x[1], x[2], -1.0 - x[3])?),
            Parametrization::General { dim } => {
                let base = x[..dim].to_vec();
                let a = &x[dim..dim + dim * dim];
                let b = &x[dim + dim * dim..];
                let kernels = (0..dim)
                    .map(|m| (0..dim).map(|n| Kernel::exponential(a[m * dim + n], b[m * dim + n])).collect())
                    .collect::<Result<Vec<Vec<Kernel>>>>()?;
                HawkesModel::new(base, kernels)
            }
            Parametrization::Symmetric => HawkesModel::symmetric(x[0], x[1], x[2], x[3]),
            Parametrization::Asymmetric => HawkesModel::asymmetric(x[0], x[1], x[2], x[3], x[4]),
        }
    }

    /// Chain rule from natural-parameter gradients to log-parameters.
    fn chain(&self, model: &HawkesModel, g: &ExpGradient) -> Vec<f64> {
        let a = |m: usize, n: usize, j: usize| model.kernel(m, n).as_sum_exp().expect("exp family").terms()[j].alpha;
        let b = |m: usize, n: usize, j: usize| model.kernel(m, n).as_sum_exp().expect("exp family").terms()[j].beta;
        let base = model.baseline();
        match *self {
            Parametrization::SumExp { terms } => {
                let mut v = vec![base[0] * g.baseline[0]];
                v.extend((0..terms).map(|j| a(0, 0, j) * g.alpha[0][0][j]));
                v.extend((0..terms).map(|j| b(0, 0, j) * g.beta[0][0][j]));
                v
            }
            Parametrization::General { dim } => {
                let mut v: Vec<f64> = (0..dim).map(|m| base[m] * g.baseline[m]).collect();
                for m in 0..dim {
                    for n in 0..dim {
                        v.push(a(m, n, 0) * g.alpha[m][n][0]);
                    }
                }
                for m in 0..dim {
                    for n in 0..dim {
                        v.push(b(m, n, 0) * g.beta[m][n][0]);
                    }
                }
                v
            }
            Parametrization::Symmetric | Parametrization::Asymmetric => {
                let l0 = base[0] * (g.baseline[0] + g.baseline[1]);
                let a0 = a(0, 0, 0) * (g.alpha[0][0][0] + g.alpha[1][1][0]);
                let a01 = a(0, 1, 0) * g.alpha[0][1][0];
                let a10 = a(1, 0, 0) * g.alpha[1][0][0];
                let beta = b(0, 0, 0) * (0..2).flat_map(|m| (0..2).map(move |n| (m, n))).map(|(m, n)| g.beta[m][n][0]).sum::<f64>();
                if matches!(self, Parametrization::Symmetric) {
                    vec![l0, a0, a01 + a10, beta]
                } else {
                    vec![l0, a0, a01, a10, beta]
                }
            }
            Parametrization::PowerLaw => unreachable!("power-law gradients are numerical"),
        }
    }
}

/// Univariate fit.
pub fn mle(series: &EventSeries, family: FitFamily, init: &HawkesModel, options: &FitOptions) -> Result<FitResult> {
    let p = match family {
        FitFamily::SumExp { terms } if terms >= 1 => Parametrization::SumExp { terms },
        FitFamily::SumExp { .. } => return Err(HawkesError::InvalidParameter("need at least one exponential".into())),
        FitFamily::PowerLaw => Parametrization::PowerLaw,
    };
    if series.dimension() > 1 {
        return Err(HawkesError::InvalidSeries("univariate fit on a labelled multivariate series".into()));
    }
    fit_with(series, p, init, options)
}

/// Multivariate exponential-kernel fit.
pub fn mle_multivariate(
    series: &EventSeries,
    structure: Structure,
    init: &HawkesModel,
    options: &FitOptions,
) -> Result<FitResult> {
    let p = match structure {
        Structure::General => Parametrization::General { dim: init.dimension() },
        Structure::Symmetric => Parametrization::Symmetric,
        Structure::Asymmetric => Parametrization::Asymmetric,
    };
    if init.dimension() < 2 {
        return Err(HawkesError::InvalidParameter("multivariate fit needs M >= 2".into()));
    }
    series.check_dimension(init.dimension())?;
    fit_with(series, p, init, options)
}

/// Fit for an explicit parameterisation.
pub fn fit_with(
    series: &EventSeries,
    param: Parametrization,
    init: &HawkesModel,
    options: &FitOptions,
) -> Result<FitResult> {
    if series.len() < 2 {
        return Err(HawkesError::InsufficientData(format!(
            "need at least 2 events to fit, got {}",
            series.len()
        )));
    }
    let theta0 = param.encode(init)?;
    let rho_max = 1.0 - options.stationarity_margin;
    let objective = |theta: &[f64]| -> Option<(HawkesModel, f64)> {
        let model = param.decode(theta).ok()?;
        if !(model.spectral_radius() <= rho_max) {
            return None;
        }
        let ll = loglik_with(&model, series, options.variant, &options.likelihood).ok()?.value;
        ll.is_finite().then_some((model, -ll))
    };
    let init_ll = objective(&theta0).map(|(_, f)| -f).ok_or_else(|| {
        HawkesError::InvalidParameter("initial parameters are infeasible (non-stationary or invalid)".into())
    })?;

    let run: OptimResult = match options.optimizer {
        Optimizer::NelderMead => nelder_mead(
            |theta| objective(theta).map_or(f64::INFINITY, |(_, f)| f),
            &theta0,
            &options.nelder_mead,
        ),
        Optimizer::Lbfgs => {
            let (lo, hi) = options.log_bounds;
            let lower: Vec<f64> = theta0.iter().map(|v| lo.min(*v)).collect();
            let upper: Vec<f64> = theta0.iter().map(|v| hi.max(*v)).collect();
            let fg = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
                if param.is_exponential_family() {
                    let model = param.decode(theta).ok()?;
                    if !(model.spectral_radius() <= rho_max) {
                        return None;
                    }
                    let (ll, g) = loglik_gradient(&model, series, options.variant).ok()?;
                    let grad = param.chain(&model, &g).iter().map(|v| -v).collect();
                    ll.value.is_finite().then_some((-ll.value, grad))
                } else {
                    let (_, f) = objective(theta)?;
                    Some((f, numerical_gradient(&objective, theta, f)))
                }
            };
            lbfgs_box(fg, &theta0, &lower, &upper, &options.lbfgs)
        }
    };

    // never report something worse than the starting point
    let (theta, f) = if run.f.is_finite() && run.f <= -init_ll {
        (run.x.clone(), run.f)
    } else {
        (theta0.clone(), -init_ll)
    };
    let model = param.decode(&theta)?;
    Ok(FitResult {
        spectral_radius: model.spectral_radius(),
        parameter_count: param.len(),
        model,
        loglik: -f,
        variant: options.variant,
        converged: run.converged,
        iterations: run.iterations,
        evaluations: run.evaluations,
        optimizer: options.optimizer,
        loglik_at_init: init_ll,
        message: run.message,
    })
}

/// Central differences, falling back to one-sided steps at infeasible neighbours.
fn numerical_gradient<F>(objective: &F, theta: &[f64], f0: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Option<(HawkesModel, f64)>,
{
    let h = 1e-6;
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            x[i] = theta[i] + h;
            let fp = objective(&x).map(|r| r.1);
            x[i] = theta[i] - h;
            let fm = objective(&x).map(|r| r.1);
            x[i] = theta[i];
            match (fp, fm) {
                (Some(p), Some(m)) => (p - m) / (2.0 * h),
                (Some(p), None) => (p - f0) / h,
                (None, Some(m)) => (f0 - m) / h,
                (None, None) => 0.0,
            }
        })
        .collect()
}

/// Heuristic starting point for sum-of-exponential fits on data: half the
/// events attributed to the baseline, the remaining endogeneity split evenly
/// across terms, and decay rates spread over two decades around the mean
/// event rate.
pub fn default_sum_exp_init(series: &EventSeries, terms: usize) -> Result<HawkesModel> {
    if series.is_empty() || terms == 0 {
        return Err(HawkesError::InsufficientData("cannot initialise a fit on an empty series".into()));
    }
    let rate = series.len() as f64 / series.horizon();
    let n = 0.5;
    let betas: Vec<f64> = if terms == 1 {
        vec![rate]
    } else {
        (0..terms)
            .map(|j| 10.0 * rate * 100f64.powf(-(j as f64) / (terms - 1) as f64))
            .collect()
    };
    let alphas: Vec<f64> = betas.iter().map(|b| n / terms as f64 * b).collect();
    HawkesModel::univariate(rate * (1.0 - n), Kernel::sum_exp(&alphas, &betas)?)
}

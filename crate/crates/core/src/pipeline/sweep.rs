//! Synthetic parameter sweeps comparing forward and backward event series.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{write_figure_csv, Direction, FigurePoint, Summary};
use crate::error::{HawkesError, Result};
use crate::estimate::{mle, mle_multivariate, FitFamily, FitOptions, FitResult, Optimizer, Structure};
use crate::exec::Executor;
use crate::gof::{assess, pvalue_histogram, Histogram, MIN_KS_SAMPLE};
use crate::likelihood::{loglik, LikelihoodVariant};
use crate::model::{HawkesModel, Kernel, PowerLaw};
use crate::nonparametric::{default_settings, exp_from_nonparametric, nonparametric_kernel, ExpReadout};
use crate::rng::derive_seed2;
use crate::series::EventSeries;
use crate::simulate::{intensity_trace, reverse, simulate, simulate_stationary, TracePoint};

/// Model family and parameter grid. Every level of [`SweepConfig::levels`]
/// is combined with every grid permutation; the decay (or shift, or
/// cross-excitation) is solved from the level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepModel {
    /// `K(t) = alpha e^{-beta t}` with `beta = alpha / n`.
    Exponential { baselines: Vec<f64>, alphas: Vec<f64> },
    /// `K(t) = u (t + v)^w` with `v` solved from `n`.
    PowerLaw { baselines: Vec<f64>, amplitudes: Vec<f64>, exponent: f64 },
    /// `[[a0, am], [am, a0]]`, shared `beta`, `am = rho beta - a0`.
    Symmetric { baselines: Vec<f64>, alpha_self: Vec<f64>, beta: f64 },
    /// `[[a0, a12], [a21, a0]]`, shared `beta`, `a21 = (rho beta - a0)^2 / a12`.
    Asymmetric { baselines: Vec<f64>, alpha_self: Vec<f64>, alpha_12: Vec<f64>, beta: f64 },
}

impl SweepModel {
    /// Number of grid permutations.
    pub fn cells(&self) -> usize {
        match self {
            SweepModel::Exponential { baselines, alphas } => baselines.len() * alphas.len(),
            SweepModel::PowerLaw { baselines, amplitudes, .. } => baselines.len() * amplitudes.len(),
            SweepModel::Symmetric { baselines, alpha_self, .. } => baselines.len() * alpha_self.len(),
            SweepModel::Asymmetric { baselines, alpha_self, alpha_12, .. } => {
                baselines.len() * alpha_self.len() * alpha_12.len()
            }
        }
    }

    /// Model for grid cell `cell` (baselines vary fastest) at `level`.
    pub fn build(&self, level: f64, cell: usize) -> Result<HawkesModel> {
        let pick = |v: &[f64], stride: usize| v[(cell / stride) % v.len()];
        match self {
            SweepModel::Exponential { baselines, alphas } => {
                let a = pick(alphas, baselines.len());
                HawkesModel::univariate(pick(baselines, 1), Kernel::exponential(a, a / level)?)
            }
            SweepModel::PowerLaw { baselines, amplitudes, exponent } => {
                let u = pick(amplitudes, baselines.len());
                let v = PowerLaw::shift_for_endogeneity(u, *exponent, level)?;
                HawkesModel::univariate(pick(baselines, 1), Kernel::power_law(u, v, *exponent)?)
            }
            SweepModel::Symmetric { baselines, alpha_self, beta } => {
                let a0 = pick(alpha_self, baselines.len());
                let am = level * beta - a0;
                if !(am > 0.0) {
                    return Err(HawkesError::Config(format!(
                        "alpha_self {a0} leaves no cross-excitation for rho = {level}"
                    )));
                }
                HawkesModel::symmetric(pick(baselines, 1), a0, am, *beta)
            }
            SweepModel::Asymmetric { baselines, alpha_self, alpha_12, beta } => {
                let a0 = pick(alpha_self, baselines.len());
                let a12 = pick(alpha_12, baselines.len() * alpha_self.len());
                let root = level * beta - a0;
                if !(root > 0.0) {
                    return Err(HawkesError::Config(format!(
                        "alpha_self {a0} leaves no cross-excitation for rho = {level}"
                    )));
                }
                HawkesModel::asymmetric(pick(baselines, 1), a0, a12, root * root / a12, *beta)
            }
        }
    }

    pub fn parameter_names(&self) -> Vec<&'static str> {
        match self {
            SweepModel::Exponential { .. } => vec!["lambda0", "alpha", "beta", "n"],
            SweepModel::PowerLaw { .. } => vec!["lambda0", "u", "v", "w", "n"],
            SweepModel::Symmetric { .. } => vec!["lambda0", "alpha0", "alpham", "beta", "rho"],
            SweepModel::Asymmetric { .. } => vec!["lambda0", "alpha0", "alpham1", "alpham2", "beta", "rho"],
        }
    }

    /// Natural parameters of a model of this family, in [`Self::parameter_names`] order.
    pub fn parameters(&self, m: &HawkesModel) -> Vec<f64> {
        let exp = |a: usize, b: usize| m.kernel(a, b).as_sum_exp().map_or((f64::NAN, f64::NAN), |k| {
            let t = k.terms()[0];
            (t.alpha, t.beta)
        });
        let l0 = m.baseline()[0];
        match self {
            SweepModel::Exponential { .. } => {
                let (a, b) = exp(0, 0);
                vec![l0, a, b, m.spectral_radius()]
            }
            SweepModel::PowerLaw { .. } => match m.kernel(0, 0) {
                Kernel::PowerLaw(p) => vec![l0, p.u, p.v, p.w, m.spectral_radius()],
                Kernel::SumExp(_) => vec![l0, f64::NAN, f64::NAN, f64::NAN, m.spectral_radius()],
            },
            SweepModel::Symmetric { .. } => {
                let (a0, b) = exp(0, 0);
                let (am, _) = exp(0, 1);
                vec![l0, a0, am, b, m.spectral_radius()]
            }
            SweepModel::Asymmetric { .. } => {
                let (a0, b) = exp(0, 0);
                vec![l0, a0, exp(0, 1).0, exp(1, 0).0, b, m.spectral_radius()]
            }
        }
    }

    fn fit(&self, s: &EventSeries, init: &HawkesModel, options: &FitOptions) -> Result<FitResult> {
        match self {
            SweepModel::Exponential { .. } => mle(s, FitFamily::exponential(), init, options),
            SweepModel::PowerLaw { .. } => mle(s, FitFamily::PowerLaw, init, options),
            SweepModel::Symmetric { .. } => mle_multivariate(s, Structure::Symmetric, init, options),
            SweepModel::Asymmetric { .. } => mle_multivariate(s, Structure::Asymmetric, init, options),
        }
    }

    fn is_univariate_exponential(&self) -> bool {
        matches!(self, SweepModel::Exponential { .. })
    }
}

/// Filters marking a converged fit as unusable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvalidFitFilter {
    /// Fits with spectral radius at or above this are pinned to the stationarity boundary.
    pub rho_limit: f64,
    /// Fits with any `|relative error|` above this are treated as nonsensical.
    pub max_rel_error: f64,
}

impl Default for InvalidFitFilter {
    fn default() -> Self {
        Self { rho_limit: 0.999, max_rel_error: 10.0 }
    }
}

fn default_name() -> String {
    "sweep".into()
}
fn default_true() -> bool {
    true
}
fn default_bins() -> usize {
    20
}
fn default_figure() -> String {
    "ll_rel_diff".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Prefix of every output file.
    #[serde(default = "default_name")]
    pub name: String,
    pub model: SweepModel,
    /// Target endogeneity `n` (univariate) or spectral radius `rho` (bivariate).
    pub levels: Vec<f64>,
    /// Runs per level; run `r` uses grid cell `r mod cells`.
    pub runs: usize,
    pub expected_events: f64,
    pub seed: u64,
    /// Variant for the true-parameter likelihood and all GoF tests.
    #[serde(default)]
    pub variant: LikelihoodVariant,
    /// One MLE pair (forward and backward) per listed variant; the first
    /// one also feeds the MLE GoF tests. Empty: no fitting.
    #[serde(default)]
    pub fit_variants: Vec<LikelihoodVariant>,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub gof: bool,
    /// Non-parametric kernel and exponential readout (univariate exponential sweeps only).
    #[serde(default)]
    pub nonparametric: bool,
    #[serde(default = "default_true")]
    pub burn_in: bool,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Intensity-trace samples for the first run of the first level; 0 for none.
    #[serde(default)]
    pub trace_points: usize,
    #[serde(default)]
    pub invalid_fit: InvalidFitFilter,
    /// Figure series copied to `<name>.csv`.
    #[serde(default = "default_figure")]
    pub figure: String,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Figure series this configuration produces.
    pub fn figure_keys(&self) -> Vec<String> {
        let mut keys = vec!["ll_rel_diff".to_string(), "ll_diff_per_t".to_string()];
        for v in &self.fit_variants {
            for p in self.model.parameter_names() {
                for d in Direction::BOTH {
                    keys.push(format!("{v}_{p}_{d}"));
                }
            }
        }
        keys
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HawkesError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("invalid sweep name `{}`", self.name));
        }
        if self.model.cells() == 0 {
            return bad("parameter grid is empty".into());
        }
        if !(self.expected_events > 0.0 && self.expected_events.is_finite()) {
            return bad(format!("expected_events must be > 0, got {}", self.expected_events));
        }
        if self.levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return bad(format!("levels must lie in (0, 1), got {:?}", self.levels));
        }
        if self.nonparametric && !self.model.is_univariate_exponential() {
            return bad("non-parametric estimation is only run on univariate exponential sweeps".into());
        }
        if !self.figure_keys().contains(&self.figure) {
            return bad(format!("unknown figure `{}`; available: {}", self.figure, self.figure_keys().join(", ")));
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be >= 1".into());
        }
        if self.runs > 0 {
            for &l in &self.levels {
                for c in 0..self.model.cells() {
                    self.model.build(l, c)?.check_stationary()?;
                }
            }
        }
        Ok(())
    }
}

/// Estimates of one fit, in the sweep's parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub params: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    /// Converged and not caught by the [`InvalidFitFilter`].
    pub valid: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPair {
    pub variant: LikelihoodVariant,
    pub forward: FitRecord,
    pub backward: FitRecord,
}

impl FitPair {
    pub fn get(&self, d: Direction) -> &FitRecord {
        match d {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }
}

/// Forward and backward KS p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PPair {
    pub forward: f64,
    pub backward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpRecord {
    pub readout: ExpReadout,
    /// Grid resolution and window used.
    pub delta: f64,
    pub window: f64,
    pub regularization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub level: f64,
    pub run: usize,
    pub cell: usize,
    pub seed: u64,
    pub truth: Vec<f64>,
    pub events: usize,
    pub horizon: f64,
    pub ll_forward: f64,
    pub ll_backward: f64,
    pub fits: Vec<FitPair>,
    pub p_ks_true: Option<PPair>,
    pub p_ks_mle: Option<PPair>,
    pub p_ks_np: Option<PPair>,
    pub np: Option<NpRecord>,
    /// Set when the run could not be completed; such runs are left out of every aggregate.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn ll_rel_diff(&self) -> f64 {
        (self.ll_forward - self.ll_backward) / self.ll_forward.abs()
    }

    pub fn ll_diff_per_t(&self) -> f64 {
        (self.ll_forward - self.ll_backward) / self.horizon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAggregate {
    pub name: String,
    /// Signed `(estimate - truth) / truth`.
    pub rel_error: Summary,
    pub abs_rel_error: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitAggregate {
    pub variant: LikelihoodVariant,
    /// Runs where both directions converged.
    pub converged_pairs: usize,
    pub nonconverged_forward: usize,
    pub nonconverged_backward: usize,
    pub invalid_forward: usize,
    pub invalid_backward: usize,
    /// Among converged pairs: fitted backward log-likelihood above forward.
    pub backward_wins: usize,
    pub backward_wins_fraction: f64,
    pub forward: Vec<ParamAggregate>,
    pub backward: Vec<ParamAggregate>,
}

/// KS rejection counts at the 5% level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub count: usize,
    pub forward_rejected: usize,
    pub backward_rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAggregate {
    pub level: f64,
    pub runs: usize,
    pub failed: usize,
    pub ll_rel_diff: Summary,
    pub ll_diff_per_t: Summary,
    /// True-parameter backward log-likelihood above forward.
    pub true_backward_wins: usize,
    pub fits: Vec<FitAggregate>,
    pub rejection_true: Option<Rejection>,
    pub rejection_mle: Option<Rejection>,
    pub rejection_np: Option<Rejection>,
    pub np_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceData {
    pub forward: Vec<TracePoint>,
    pub backward: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalReport {
    pub name: String,
    pub parameter_names: Vec<String>,
    pub total_runs: usize,
    pub levels: Vec<LevelAggregate>,
    /// Figure series keyed by name, `x` = level.
    pub figures: BTreeMap<String, Vec<FigurePoint>>,
    /// KS p-value histograms keyed `pks_<source>_<direction>`.
    pub histograms: BTreeMap<String, Histogram>,
    pub trace: Option<TraceData>,
    pub warnings: Vec<String>,
    pub runs: Vec<RunRecord>,
}

impl ReversalReport {
    /// KS p-values of one source (`true`, `mle`, `np`) and direction, in run order.
    pub fn p_values(&self, source: &str, d: Direction) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| match source {
                "true" => r.p_ks_true,
                "mle" => r.p_ks_mle,
                "np" => r.p_ks_np,
                _ => None,
            })
            .map(|p| if d == Direction::Forward { p.forward } else { p.backward })
            .collect()
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<ReversalReport> {
    run_sweep_with(cfg, &Executor::default(), &|_, _| {})
}

/// Runs the sweep on `exec`; `progress(done, total)` is called after each run.
pub fn run_sweep_with(
    cfg: &SweepConfig,
    exec: &Executor,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<ReversalReport> {
    cfg.validate()?;
    let total = cfg.runs * cfg.levels.len();
    let done = AtomicUsize::new(0);
    let runs = exec.map_range(total, |i| {
        let rec = run_one(cfg, i / cfg.runs.max(1), i % cfg.runs.max(1));
        progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
        rec
    });
    let trace = if cfg.trace_points > 0 && !cfg.levels.is_empty() { Some(trace_of(cfg)?) } else { None };
    Ok(assemble(cfg, runs, trace))
}

fn trace_of(cfg: &SweepConfig) -> Result<TraceData> {
    let model = cfg.model.build(cfg.levels[0], 0)?;
    let f = simulate_run(cfg, &model, derive_seed2(cfg.seed, 0, 0))?;
    Ok(TraceData {
        forward: intensity_trace(&model, &f, cfg.trace_points),
        backward: intensity_trace(&model, &reverse(&f), cfg.trace_points),
    })
}

fn simulate_run(cfg: &SweepConfig, model: &HawkesModel, seed: u64) -> Result<EventSeries> {
    let horizon = model.horizon_for_expected_events(cfg.expected_events)?;
    if cfg.burn_in {
        Ok(simulate_stationary(model, horizon, seed)?.series)
    } else {
        simulate(model, horizon, seed)
    }
}

fn run_one(cfg: &SweepConfig, level_index: usize, run: usize) -> RunRecord {
    let level = cfg.levels[level_index];
    let cell = run % cfg.model.cells();
    let seed = derive_seed2(cfg.seed, level_index as u64, run as u64);
    let mut rec = RunRecord {
        level,
        run,
        cell,
        seed,
        truth: Vec::new(),
        events: 0,
        horizon: 0.0,
        ll_forward: 0.0,
        ll_backward: 0.0,
        fits: Vec::new(),
        p_ks_true: None,
        p_ks_mle: None,
        p_ks_np: None,
        np: None,
        error: None,
    };
    if let Err(e) = fill_run(cfg, &mut rec) {
        rec.error = Some(e.to_string());
    }
    rec
}

fn fill_run(cfg: &SweepConfig, rec: &mut RunRecord) -> Result<()> {
    let model = cfg.model.build(rec.level, rec.cell)?;
    rec.truth = cfg.model.parameters(&model);
    let f = simulate_run(cfg, &model, rec.seed)?;
    if f.len() < MIN_KS_SAMPLE + 1 {
        return Err(HawkesError::InsufficientData(format!("only {} events after burn-in", f.len())));
    }
    let b = reverse(&f);
    rec.events = f.len();
    rec.horizon = f.horizon();
    rec.ll_forward = loglik(&model, &f, cfg.variant)?.value;
    rec.ll_backward = loglik(&model, &b, cfg.variant)?.value;

    let p_ks = |m: &HawkesModel, variant| -> Result<PPair> {
        Ok(PPair {
            forward: assess(m, &f, variant, 0.0, None, None)?.p_ks,
            backward: assess(m, &b, variant, 0.0, None, None)?.p_ks,
        })
    };
    if cfg.gof {
        rec.p_ks_true = Some(p_ks(&model, cfg.variant)?);
    }

    for &variant in &cfg.fit_variants {
        let options = FitOptions::default().with_variant(variant).with_optimizer(cfg.optimizer);
        let forward = cfg.model.fit(&f, &model, &options)?;
        let backward = cfg.model.fit(&b, &model, &options)?;
        if cfg.gof && rec.fits.is_empty() {
            rec.p_ks_mle = Some(PPair {
                forward: assess(&forward.model, &f, variant, forward.loglik, None, None)?.p_ks,
                backward: assess(&backward.model, &b, variant, backward.loglik, None, None)?.p_ks,
            });
        }
        rec.fits.push(FitPair {
            variant,
            forward: fit_record(cfg, &forward, &rec.truth),
            backward: fit_record(cfg, &backward, &rec.truth),
        });
    }

    if cfg.nonparametric {
        let settings = default_settings(&f)?;
        let kernel = nonparametric_kernel(&f, settings.delta, settings.window)?;
        let readout = exp_from_nonparametric(&kernel, f.len(), f.horizon());
        if cfg.gof {
            if let Some((l0, a, be)) = readout.params() {
                let m = HawkesModel::univariate(l0, Kernel::exponential(a, be)?)?;
                rec.p_ks_np = Some(p_ks(&m, cfg.variant)?);
            }
        }
        rec.np = Some(NpRecord {
            readout,
            delta: kernel.delta,
            window: kernel.window,
            regularization: kernel.regularization,
        });
    }
    Ok(())
}

fn fit_record(cfg: &SweepConfig, fit: &FitResult, truth: &[f64]) -> FitRecord {
    let params = cfg.model.parameters(&fit.model);
    let sane = params
        .iter()
        .zip(truth)
        .all(|(e, t)| ((e - t) / t).abs() <= cfg.invalid_fit.max_rel_error);
    FitRecord {
        valid: fit.converged && fit.spectral_radius < cfg.invalid_fit.rho_limit && sane,
        params,
        loglik: fit.loglik,
        converged: fit.converged,
        evaluations: fit.evaluations,
    }
}

fn rejection(runs: &[&RunRecord], pick: impl Fn(&RunRecord) -> Option<PPair>) -> Option<Rejection> {
    let ps: Vec<PPair> = runs.iter().filter_map(|r| pick(r)).collect();
    (!ps.is_empty()).then(|| Rejection {
        count: ps.len(),
        forward_rejected: ps.iter().filter(|p| p.forward < 0.05).count(),
        backward_rejected: ps.iter().filter(|p| p.backward < 0.05).count(),
    })
}

fn assemble(cfg: &SweepConfig, runs: Vec<RunRecord>, trace: Option<TraceData>) -> ReversalReport {
    let names = cfg.model.parameter_names();
    let mut warnings = Vec::new();
    let mut figures: BTreeMap<String, Vec<FigurePoint>> = BTreeMap::new();
    let mut levels = Vec::new();

    for &level in &cfg.levels {
        let all: Vec<&RunRecord> = runs.iter().filter(|r| r.level.to_bits() == level.to_bits()).collect();
        let ok: Vec<&RunRecord> = all.iter().copied().filter(|r| r.ok()).collect();
        let failed = all.len() - ok.len();
        if failed > 0 {
            warnings.push(format!("level {level}: {failed} of {} runs failed", all.len()));
        }
        let ll_rel_diff = Summary::of(ok.iter().map(|r| r.ll_rel_diff()));
        let ll_diff_per_t = Summary::of(ok.iter().map(|r| r.ll_diff_per_t()));
        figures.entry("ll_rel_diff".into()).or_default().push(FigurePoint::new(level, ll_rel_diff));
        figures.entry("ll_diff_per_t".into()).or_default().push(FigurePoint::new(level, ll_diff_per_t));

        let mut fits = Vec::new();
        for (vi, &variant) in cfg.fit_variants.iter().enumerate() {
            let pairs: Vec<&FitPair> = ok.iter().map(|r| &r.fits[vi]).collect();
            let both: Vec<&&FitPair> = pairs.iter().filter(|p| p.forward.converged && p.backward.converged).collect();
            let wins = both.iter().filter(|p| p.backward.loglik > p.forward.loglik).count();
            if !pairs.is_empty() && both.is_empty() {
                warnings.push(format!("level {level}: no {variant} fit pair converged"));
            }
            let per_dir = |d: Direction| -> Vec<ParamAggregate> {
                names
                    .iter()
                    .enumerate()
                    .map(|(k, name)| {
                        let errs: Vec<f64> = ok
                            .iter()
                            .zip(&pairs)
                            .map(|(r, p)| (r, p.get(d)))
                            .filter(|(_, f)| f.converged)
                            .map(|(r, f)| (f.params[k] - r.truth[k]) / r.truth[k])
                            .collect();
                        ParamAggregate {
                            name: name.to_string(),
                            rel_error: Summary::of(errs.iter().copied()),
                            abs_rel_error: Summary::of(errs.iter().map(|e| e.abs())),
                        }
                    })
                    .collect()
            };
            let agg = FitAggregate {
                variant,
                converged_pairs: both.len(),
                nonconverged_forward: pairs.iter().filter(|p| !p.forward.converged).count(),
                nonconverged_backward: pairs.iter().filter(|p| !p.backward.converged).count(),
                invalid_forward: pairs.iter().filter(|p| !p.forward.valid).count(),
                invalid_backward: pairs.iter().filter(|p| !p.backward.valid).count(),
                backward_wins: wins,
                backward_wins_fraction: if both.is_empty() { 0.0 } else { wins as f64 / both.len() as f64 },
                forward: per_dir(Direction::Forward),
                backward: per_dir(Direction::Backward),
            };
            for d in Direction::BOTH {
                let params = if d == Direction::Forward { &agg.forward } else { &agg.backward };
                for p in params {
                    figures
                        .entry(format!("{variant}_{}_{d}", p.name))
                        .or_default()
                        .push(FigurePoint::new(level, p.rel_error));
                }
            }
            fits.push(agg);
        }

        let np_valid = ok.iter().filter(|r| r.np.as_ref().is_some_and(|n| n.readout.is_valid())).count();
        levels.push(LevelAggregate {
            level,
            runs: ok.len(),
            failed,
            ll_rel_diff,
            ll_diff_per_t,
            true_backward_wins: ok.iter().filter(|r| r.ll_backward > r.ll_forward).count(),
            fits,
            rejection_true: rejection(&ok, |r| r.p_ks_true),
            rejection_mle: rejection(&ok, |r| r.p_ks_mle),
            rejection_np: rejection(&ok, |r| r.p_ks_np),
            np_valid,
        });
    }

    let mut report = ReversalReport {
        name: cfg.name.clone(),
        parameter_names: names.iter().map(|s| s.to_string()).collect(),
        total_runs: runs.len(),
        levels,
        figures,
        histograms: BTreeMap::new(),
        trace,
        warnings,
        runs,
    };
    if cfg.gof {
        for source in ["true", "mle", "np"] {
            for d in Direction::BOTH {
                let ps = report.p_values(source, d);
                if !ps.is_empty() {
                    if let Ok(h) = pvalue_histogram(&ps, cfg.histogram_bins) {
                        report.histograms.insert(format!("pks_{source}_{d}"), h);
                    }
                }
            }
        }
    }
    report
}

/// Writes the report JSON, the per-fit CSV, every figure series, histograms
/// and traces into `dir`; returns the written paths.
pub fn write_sweep_outputs(report: &ReversalReport, cfg: &SweepConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = &report.name;
    let mut written = Vec::new();

    let p = dir.join(format!("{name}_report.json"));
    std::fs::write(&p, serde_json::to_string_pretty(report)? + "\n")?;
    written.push(p);

    let p = dir.join(format!("{name}_runs.csv"));
    write_runs_csv(&p, report)?;
    written.push(p);

    for (key, points) in &report.figures {
        let p = dir.join(format!("{name}_{key}.csv"));
        write_figure_csv(&p, points)?;
        written.push(p);
    }
    if let Some(points) = report.figures.get(&cfg.figure) {
        let p = dir.join(format!("{name}.csv"));
        write_figure_csv(&p, points)?;
        written.push(p);
    }
    for (key, h) in &report.histograms {
        let p = dir.join(format!("{name}_{key}.csv"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (i, c) in h.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", h.edges[i], h.edges[i + 1], c)?;
        }
        w.flush()?;
        written.push(p);
    }
    if let Some(t) = &report.trace {
        for (d, points) in [(Direction::Forward, &t.forward), (Direction::Backward, &t.backward)] {
            let p = dir.join(format!("{name}_trace_{d}.csv"));
            let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
            writeln!(w, "time,intensity,is_event")?;
            for tp in points {
                writeln!(w, "{},{},{}", tp.time, tp.intensity, u8::from(tp.is_event))?;
            }
            w.flush()?;
            written.push(p);
        }
    }
    Ok(written)
}

fn write_runs_csv(path: &Path, report: &ReversalReport) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let names = report.parameter_names.join(",");
    writeln!(
        w,
        "level,run,cell,seed,events,horizon,ll_true_forward,ll_true_backward,variant,direction,converged,valid,loglik,{names},error"
    )?;
    let blank = ",".repeat(report.parameter_names.len() - 1);
    for r in &report.runs {
        let head = format!(
            "{},{},{},{},{},{},{},{}",
            r.level, r.run, r.cell, r.seed, r.events, r.horizon, r.ll_forward, r.ll_backward
        );
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        if r.fits.is_empty() {
            writeln!(w, "{head},,,,,,{blank},{err}")?;
        }
        for fp in &r.fits {
            for d in Direction::BOTH {
                let f = fp.get(d);
                let ps: Vec<String> = f.params.iter().map(|x| x.to_string()).collect();
                writeln!(w, "{head},{},{d},{},{},{},{},{err}", fp.variant, f.converged, f.valid, f.loglik, ps.join(","))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: usize) -> SweepConfig {
        SweepConfig {
            name: "t".into(),
            model: SweepModel::Exponential { baselines: vec![0.5, 1.0], alphas: vec![0.5] },
            levels: vec![0.5, 0.7],
            runs,
            expected_events: 300.0,
            seed: 11,
            variant: LikelihoodVariant::Modified,
            fit_variants: vec![LikelihoodVariant::Modified],
            optimizer: Optimizer::Lbfgs,
            gof: true,
            nonparametric: false,
            burn_in: true,
            histogram_bins: 10,
            trace_points: 0,
            invalid_fit: InvalidFitFilter::default(),
            figure: default_figure(),
        }
    }

    #[test]
    fn grid_cells_and_derived_parameters() {
        let m = SweepModel::Exponential { baselines: vec![0.1, 0.2], alphas: vec![0.01, 0.02, 0.03] };
        assert_eq!(m.cells(), 6);
        let model = m.build(0.5, 3).unwrap();
        assert_eq!(m.parameters(&model), vec![0.2, 0.02, 0.04, 0.5]);

        let s = SweepModel::Symmetric { baselines: vec![0.001], alpha_self: vec![0.049], beta: 0.1 };
        let model = s.build(0.75, 0).unwrap();
        assert!((model.spectral_radius() - 0.75).abs() < 1e-12);

        let a = SweepModel::Asymmetric { baselines: vec![0.001], alpha_self: vec![0.02], alpha_12: vec![0.049], beta: 0.1 };
        let model = a.build(0.9, 0).unwrap();
        assert!((model.spectral_radius() - 0.9).abs() < 1e-12);
        let p = a.parameters(&model);
        assert!((p[3] - 0.1).abs() < 1e-12);

        let s = SweepModel::Symmetric { baselines: vec![0.001], alpha_self: vec![0.2], beta: 0.1 };
        assert!(s.build(0.5, 0).is_err());
    }

    #[test]
    fn zero_runs_give_an_empty_report() {
        let r = run_sweep(&small(0)).unwrap();
        assert_eq!(r.total_runs, 0);
        assert!(r.runs.is_empty());
        assert!(r.levels.iter().all(|l| l.runs == 0));
    }

    #[test]
    fn small_sweep_is_deterministic_across_workers() {
        let cfg = small(4);
        let a = run_sweep_with(&cfg, &Executor::sequential(), &|_, _| {}).unwrap();
        let b = run_sweep_with(&cfg, &Executor::new(3), &|_, _| {}).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.levels.len(), 2);
        assert_eq!(a.levels[0].runs + a.levels[0].failed, 4);
        assert!(a.figures.contains_key("modified_alpha_backward"));
        assert!(a.histograms.contains_key("pks_true_forward"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small(1);
        c.levels = vec![1.2];
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.nonparametric = true;
        c.model = SweepModel::Symmetric { baselines: vec![0.1], alpha_self: vec![0.01], beta: 0.1 };
        assert!(c.validate().is_err());
        assert!(SweepConfig::from_json(r#"{"model":{"kind":"exponential","baselines":[1],"alphas":[1]},"levels":[0.5],"runs":1,"expected_events":10,"seed":1,"bogus":1}"#).is_err());
    }
}

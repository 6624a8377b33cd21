//! Exact log-likelihoods and compensators.
//!
//! All intensities are left limits `lambda(t_i-)`. The modified variant
//! replaces the constant baseline of component `m` by
//! `lambda_0^m + (mu^m - lambda_0^m) * h_m(t)`, where
//! `h_m(t) = sum_n G^{mn}(t) / sum_n G^{mn}(0)`, which describes a process
//! that was already stationary at time 0.
//!
//! Exponential-family models are evaluated in `O(N M^2 P)` with the usual
//! recursion; any model containing a power-law kernel goes through the
//! `O(N^2)` pairwise path, capped by [`LikelihoodOptions::quadratic_cap`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::exec::par_map_range;
use crate::model::{HawkesModel, Kernel};
use crate::series::EventSeries;

/// Intensities below this are floored before taking the logarithm.
pub const INTENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodVariant {
    #[default]
    Standard,
    Modified,
}

impl std::fmt::Display for LikelihoodVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LikelihoodVariant::Standard => "standard",
            LikelihoodVariant::Modified => "modified",
        })
    }
}

impl std::str::FromStr for LikelihoodVariant {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "modified" => Ok(Self::Modified),
            other => Err(HawkesError::Config(format!("unknown likelihood variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodOptions {
    /// Maximum series length accepted by the quadratic (power-law) path.
    pub quadratic_cap: usize,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        Self { quadratic_cap: 200_000 }
    }
}

/// Log-likelihood with its per-component breakdown and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikValue {
    pub value: f64,
    pub variant: LikelihoodVariant,
    pub per_component: Vec<f64>,
    /// `int_0^T lambda^m(s) ds` per component.
    pub integrated_intensity: Vec<f64>,
    /// Number of intensities that hit [`INTENSITY_FLOOR`].
    pub floor_hits: usize,
}

/// Gradient of the log-likelihood of an exponential-family model with
/// respect to `lambda_0^m`, `alpha_j^{mn}` and `beta_j^{mn}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpGradient {
    pub baseline: Vec<f64>,
    /// `[m][n][j]`
    pub alpha: Vec<Vec<Vec<f64>>>,
    /// `[m][n][j]`
    pub beta: Vec<Vec<Vec<f64>>>,
}

/// Compensators `Lambda(t_{i-1}, t_i)` between consecutive events of each component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatorSeries {
    /// One series per component, `N_m - 1` values each.
    pub values: Vec<Vec<f64>>,
    /// Pooled index of the event closing each interval.
    pub event_index: Vec<Vec<usize>>,
}

impl CompensatorSeries {
    /// All components concatenated (component 0 first).
    pub fn pooled(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn loglik_standard(model: &HawkesModel, series: &EventSeries) -> Result<LogLikValue> {
    loglik(model, series, LikelihoodVariant::Standard)
}

pub fn loglik_modified(model: &HawkesModel, series: &EventSeries) -> Result<LogLikValue> {
    loglik(model, series, LikelihoodVariant::Modified)
}

pub fn loglik(model: &HawkesModel, series: &EventSeries, variant: LikelihoodVariant) -> Result<LogLikValue> {
    loglik_with(model, series, variant, &LikelihoodOptions::default())
}

pub fn loglik_with(
    model: &HawkesModel,
    series: &EventSeries,
    variant: LikelihoodVariant,
    options: &LikelihoodOptions,
) -> Result<LogLikValue> {
    series.check_dimension(model.dimension())?;
    let corr = Correction::new(model, variant)?;
    if model.is_exponential_family() {
        Ok(ExpEngine::new(model, &corr).run::<false>(series).0)
    } else {
        if series.len() > options.quadratic_cap {
            return Err(HawkesError::InvalidParameter(format!(
                "series of {} events exceeds the quadratic-path cap of {}",
                series.len(),
                options.quadratic_cap
            )));
        }
        Ok(generic_loglik(model, series, &corr))
    }
}

/// Log-likelihood and its analytic gradient (exponential-family models only).
pub fn loglik_gradient(
    model: &HawkesModel,
    series: &EventSeries,
    variant: LikelihoodVariant,
) -> Result<(LogLikValue, ExpGradient)> {
    series.check_dimension(model.dimension())?;
    if !model.is_exponential_family() {
        return Err(HawkesError::InvalidParameter(
            "analytic gradients exist only for exponential-family kernels".into(),
        ));
    }
    let corr = Correction::new(model, variant)?;
    let (ll, grad) = ExpEngine::new(model, &corr).run::<true>(series);
    Ok((ll, grad.expect("gradient requested")))
}

/// Stationarity correction of the baseline: coefficient `mu^m - lambda_0^m`.
struct Correction {
    variant: LikelihoodVariant,
    coef: Vec<f64>,
    mu: Vec<f64>,
}

impl Correction {
    fn new(model: &HawkesModel, variant: LikelihoodVariant) -> Result<Self> {
        let m = model.dimension();
        match variant {
            LikelihoodVariant::Standard => Ok(Self { variant, coef: vec![0.0; m], mu: Vec::new() }),
            LikelihoodVariant::Modified => {
                let mu = model.mean_intensity()?;
                let coef = mu.iter().zip(model.baseline()).map(|(u, b)| u - b).collect();
                Ok(Self { variant, coef, mu })
            }
        }
    }

    fn active(&self) -> bool {
        self.variant == LikelihoodVariant::Modified
    }
}

// ---------------------------------------------------------------------------
// exponential family

#[derive(Debug, Clone, Copy)]
struct Term {
    target: usize,
    source: usize,
    j: usize,
    alpha: f64,
    beta: f64,
}

struct ExpEngine<'a> {
    model: &'a HawkesModel,
    corr: &'a Correction,
    terms: Vec<Term>,
    by_target: Vec<Vec<usize>>,
    by_source: Vec<Vec<usize>>,
    /// `S_m = sum of all weights in row m`
    row_weight: Vec<f64>,
}

impl<'a> ExpEngine<'a> {
    fn new(model: &'a HawkesModel, corr: &'a Correction) -> Self {
        let m = model.dimension();
        let mut terms = Vec::new();
        let mut by_target = vec![Vec::new(); m];
        let mut by_source = vec![Vec::new(); m];
        for target in 0..m {
            for source in 0..m {
                let k = model.kernel(target, source).as_sum_exp().expect("exponential family");
                for (j, t) in k.terms().iter().enumerate() {
                    by_target[target].push(terms.len());
                    by_source[source].push(terms.len());
                    terms.push(Term { target, source, j, alpha: t.alpha, beta: t.beta });
                }
            }
        }
        let row_weight = (0..m)
            .map(|r| by_target[r].iter().map(|&i| terms[i].alpha).sum())
            .collect();
        Self { model, corr, terms, by_target, by_source, row_weight }
    }

    /// `h_m(t)`
    fn shape(&self, m: usize, t: f64) -> f64 {
        let s = self.row_weight[m];
        if s == 0.0 {
            return 0.0;
        }
        self.by_target[m]
            .iter()
            .map(|&i| {
                let tm = &self.terms[i];
                tm.alpha * decay(tm.beta * t)
            })
            .sum::<f64>()
            / s
    }

    /// `H_m(x) = int_0^x h_m`
    fn shape_integral(&self, m: usize, x: f64) -> f64 {
        let s = self.row_weight[m];
        if s == 0.0 {
            return 0.0;
        }
        self.by_target[m]
            .iter()
            .map(|&i| {
                let tm = &self.terms[i];
                tm.alpha / tm.beta * -(-tm.beta * x).exp_m1()
            })
            .sum::<f64>()
            / s
    }

    fn run<const GRAD: bool>(&self, series: &EventSeries) -> (LogLikValue, Option<ExpGradient>) {
        let m_dim = self.model.dimension();
        let nt = self.terms.len();
        let horizon = series.horizon();
        let baseline = self.model.baseline();
        let modified = self.corr.active();

        let mut a = vec![0.0; nt];
        let mut b = vec![0.0; nt];
        let mut counts = vec![0usize; m_dim];
        let mut ll = vec![0.0; m_dim];
        let mut floor_hits = 0usize;

        // gradient accumulators
        let mut g_base = vec![0.0; m_dim];
        let mut g_alpha = vec![0.0; nt];
        let mut g_beta = vec![0.0; nt];
        // d LL / d coef_m
        let mut d_coef = vec![0.0; m_dim];

        let mut prev = 0.0;
        for (i, &t) in series.times().iter().enumerate() {
            let c = series.component(i);
            let dt = t - prev;
            prev = t;
            if dt > 0.0 {
                for k in 0..nt {
                    if a[k] == 0.0 && b[k] == 0.0 {
                        continue;
                    }
                    let d = (-self.terms[k].beta * dt).exp();
                    if GRAD {
                        b[k] = d * (b[k] + dt * a[k]);
                    }
                    a[k] *= d;
                }
            }
            let mut lam = baseline[c];
            let h = if modified { self.shape(c, t) } else { 0.0 };
            lam += self.corr.coef[c] * h;
            for &k in &self.by_target[c] {
                lam += self.terms[k].alpha * a[k];
            }
            if !(lam > INTENSITY_FLOOR) {
                lam = INTENSITY_FLOOR;
                floor_hits += 1;
            }
            ll[c] += lam.ln();
            if GRAD {
                let inv = 1.0 / lam;
                g_base[c] += inv;
                for &k in &self.by_target[c] {
                    let tm = &self.terms[k];
                    g_alpha[k] += a[k] * inv;
                    g_beta[k] -= tm.alpha * b[k] * inv;
                }
                if modified {
                    d_coef[c] += h * inv;
                    let s = self.row_weight[c];
                    if s > 0.0 {
                        let coef = self.corr.coef[c];
                        for &k in &self.by_target[c] {
                            let tm = &self.terms[k];
                            let e = decay(tm.beta * t);
                            g_alpha[k] += coef * (e - h) / s * inv;
                            g_beta[k] -= coef * tm.alpha * t * e / s * inv;
                        }
                    }
                }
            }
            for &k in &self.by_source[c] {
                a[k] += 1.0;
            }
            counts[c] += 1;
        }

        // decay to the horizon
        let dt = horizon - prev;
        for k in 0..nt {
            let d = (-self.terms[k].beta * dt).exp();
            if GRAD {
                b[k] = d * (b[k] + dt * a[k]);
            }
            a[k] *= d;
        }

        let mut integral = vec![0.0; m_dim];
        for m in 0..m_dim {
            integral[m] += baseline[m] * horizon;
            if GRAD {
                g_base[m] -= horizon;
            }
        }
        for (k, tm) in self.terms.iter().enumerate() {
            let n_src = counts[tm.source] as f64;
            // sum_k (1 - exp(-beta (T - t_k))) over source events
            let mass = n_src - a[k];
            integral[tm.target] += tm.alpha / tm.beta * mass;
            if GRAD {
                g_alpha[k] -= mass / tm.beta;
                g_beta[k] += tm.alpha * mass / (tm.beta * tm.beta) - tm.alpha / tm.beta * b[k];
            }
        }
        if modified {
            for m in 0..m_dim {
                let big_h = self.shape_integral(m, horizon);
                integral[m] += self.corr.coef[m] * big_h;
                if GRAD {
                    d_coef[m] -= big_h;
                    let s = self.row_weight[m];
                    if s > 0.0 {
                        let coef = self.corr.coef[m];
                        for &k in &self.by_target[m] {
                            let tm = &self.terms[k];
                            let mass = -(-tm.beta * horizon).exp_m1();
                            let d_alpha = (mass / tm.beta - big_h) / s;
                            let d_beta = tm.alpha / s
                                * (-mass / (tm.beta * tm.beta) + horizon * decay(tm.beta * horizon) / tm.beta);
                            g_alpha[k] -= coef * d_alpha;
                            g_beta[k] -= coef * d_beta;
                        }
                    }
                }
            }
        }

        let per_component: Vec<f64> = ll.iter().zip(&integral).map(|(l, i)| l - i).collect();
        let value = per_component.iter().sum();
        let result = LogLikValue {
            value,
            variant: self.corr.variant,
            per_component,
            integrated_intensity: integral,
            floor_hits,
        };
        if !GRAD {
            return (result, None);
        }

        if modified {
            // coef = mu - lambda_0, d mu = (I - Gamma)^{-1} (d lambda_0 + d Gamma mu)
            let gamma = self.model.branching_matrix();
            let a_mat = DMatrix::identity(m_dim, m_dim) - gamma.matrix();
            let w = a_mat
                .transpose()
                .lu()
                .solve(&DVector::from_column_slice(&d_coef))
                .expect("stationary model has invertible I - Gamma");
            for m in 0..m_dim {
                g_base[m] += w[m] - d_coef[m];
            }
            for (k, tm) in self.terms.iter().enumerate() {
                let dg = w[tm.target] * self.corr.mu[tm.source];
                g_alpha[k] += dg / tm.beta;
                g_beta[k] -= dg * tm.alpha / (tm.beta * tm.beta);
            }
        }

        let mut alpha = vec![vec![Vec::new(); m_dim]; m_dim];
        let mut beta = vec![vec![Vec::new(); m_dim]; m_dim];
        for (k, tm) in self.terms.iter().enumerate() {
            debug_assert_eq!(alpha[tm.target][tm.source].len(), tm.j);
            alpha[tm.target][tm.source].push(g_alpha[k]);
            beta[tm.target][tm.source].push(g_beta[k]);
        }
        (result, Some(ExpGradient { baseline: g_base, alpha, beta }))
    }
}

/// `exp(-x)` that short-circuits to 0 once it underflows.
#[inline]
fn decay(x: f64) -> f64 {
    if x > 745.0 {
        0.0
    } else {
        (-x).exp()
    }
}

// ---------------------------------------------------------------------------
// generic (pairwise) path

struct RowShape<'a> {
    row: &'a [Kernel],
    at_zero: f64,
}

impl RowShape<'_> {
    fn value(&self, t: f64) -> f64 {
        if self.at_zero == 0.0 {
            return 0.0;
        }
        self.row.iter().map(|k| k.eval(t)).sum::<f64>() / self.at_zero
    }

    fn integral(&self, x: f64) -> f64 {
        if self.at_zero == 0.0 {
            return 0.0;
        }
        self.row.iter().map(|k| k.integral(x)).sum::<f64>() / self.at_zero
    }
}

fn row_shapes(model: &HawkesModel) -> Vec<RowShape<'_>> {
    model
        .kernels()
        .iter()
        .map(|row| RowShape { row, at_zero: row.iter().map(|k| k.eval(0.0)).sum() })
        .collect()
}

fn generic_loglik(model: &HawkesModel, series: &EventSeries, corr: &Correction) -> LogLikValue {
    let m_dim = model.dimension();
    let horizon = series.horizon();
    let times = series.times();
    let shapes = row_shapes(model);
    let kernels = model.kernels();
    let baseline = model.baseline();

    // per-source event times, and how many of each precede event i
    let mut by_source: Vec<Vec<f64>> = vec![Vec::new(); m_dim];
    let mut before: Vec<usize> = Vec::with_capacity(times.len() * m_dim);
    for (i, &t) in times.iter().enumerate() {
        before.extend(by_source.iter().map(Vec::len));
        by_source[series.component(i)].push(t);
    }

    let intensities: Vec<f64> = par_map_range(times.len(), |i| {
        let t = times[i];
        let c = series.component(i);
        let mut lam = baseline[c];
        if corr.active() {
            lam += corr.coef[c] * shapes[c].value(t);
        }
        let prior = &before[i * m_dim..(i + 1) * m_dim];
        let acc: f64 = kernels[c]
            .iter()
            .zip(&by_source)
            .zip(prior)
            .map(|((k, h), &n)| k.history_sum(&h[..n], t))
            .sum();
        lam + acc
    });

    let mut ll = vec![0.0; m_dim];
    let mut floor_hits = 0;
    for (i, &lam) in intensities.iter().enumerate() {
        let lam = if lam > INTENSITY_FLOOR {
            lam
        } else {
            floor_hits += 1;
            INTENSITY_FLOOR
        };
        ll[series.component(i)] += lam.ln();
    }

    let mut integral: Vec<f64> = baseline.iter().map(|b| b * horizon).collect();
    for (m, row) in kernels.iter().enumerate() {
        if corr.active() {
            integral[m] += corr.coef[m] * shapes[m].integral(horizon);
        }
        let mut acc = 0.0;
        for (k, &t) in times.iter().enumerate() {
            acc += row[series.component(k)].integral(horizon - t);
        }
        integral[m] += acc;
    }

    let per_component: Vec<f64> = ll.iter().zip(&integral).map(|(l, i)| l - i).collect();
    LogLikValue {
        value: per_component.iter().sum(),
        variant: corr.variant,
        per_component,
        integrated_intensity: integral,
        floor_hits,
    }
}

// ---------------------------------------------------------------------------
// compensators

/// `Lambda(t_{i-1}, t_i)` for consecutive events of each component, using the
/// same baseline variant as the likelihood. The interval before each
/// component's first event is not included.
pub fn compensators(
    model: &HawkesModel,
    series: &EventSeries,
    variant: LikelihoodVariant,
) -> Result<CompensatorSeries> {
    series.check_dimension(model.dimension())?;
    let corr = Correction::new(model, variant)?;
    if model.is_exponential_family() {
        Ok(exp_compensators(model, series, &corr))
    } else {
        if series.len() > LikelihoodOptions::default().quadratic_cap {
            return Err(HawkesError::InvalidParameter(format!(
                "series of {} events exceeds the quadratic-path cap",
                series.len()
            )));
        }
        Ok(generic_compensators(model, series, &corr))
    }
}

fn exp_compensators(model: &HawkesModel, series: &EventSeries, corr: &Correction) -> CompensatorSeries {
    let engine = ExpEngine::new(model, corr);
    let m_dim = model.dimension();
    let nt = engine.terms.len();
    let baseline = model.baseline();

    let mut a = vec![0.0; nt];
    let mut counts = vec![0usize; m_dim];
    // snapshot at the previous event of each target: (time, H, per-term (count, a))
    let mut last_time: Vec<Option<f64>> = vec![None; m_dim];
    let mut last_h = vec![0.0; m_dim];
    let mut snap_count = vec![0usize; nt];
    let mut snap_a = vec![0.0; nt];

    let mut values = vec![Vec::new(); m_dim];
    let mut event_index = vec![Vec::new(); m_dim];
    let mut prev = 0.0;
    for (i, &t) in series.times().iter().enumerate() {
        let c = series.component(i);
        let dt = t - prev;
        prev = t;
        for k in 0..nt {
            if a[k] != 0.0 {
                a[k] *= (-engine.terms[k].beta * dt).exp();
            }
        }
        let big_h = if corr.active() { engine.shape_integral(c, t) } else { 0.0 };
        if let Some(tp) = last_time[c] {
            let mut lam_int = baseline[c] * (t - tp) + corr.coef[c] * (big_h - last_h[c]);
            for &k in &engine.by_target[c] {
                let tm = &engine.terms[k];
                let dn = (counts[tm.source] - snap_count[k]) as f64;
                lam_int += tm.alpha / tm.beta * (dn - (a[k] - snap_a[k]));
            }
            values[c].push(lam_int);
            event_index[c].push(i);
        }
        last_time[c] = Some(t);
        last_h[c] = big_h;
        for &k in &engine.by_target[c] {
            snap_count[k] = counts[engine.terms[k].source];
            snap_a[k] = a[k];
        }
        for &k in &engine.by_source[c] {
            a[k] += 1.0;
        }
        counts[c] += 1;
    }
    CompensatorSeries { values, event_index }
}

fn generic_compensators(model: &HawkesModel, series: &EventSeries, corr: &Correction) -> CompensatorSeries {
    let m_dim = model.dimension();
    let times = series.times();
    let shapes = row_shapes(model);
    let kernels = model.kernels();
    let baseline = model.baseline();

    // previous event of the same component, per event
    let mut prev_same = vec![None; times.len()];
    let mut last: Vec<Option<usize>> = vec![None; m_dim];
    for i in 0..times.len() {
        let c = series.component(i);
        prev_same[i] = last[c];
        last[c] = Some(i);
    }

    let pieces: Vec<Option<f64>> = par_map_range(times.len(), |i| {
        let p = prev_same[i]?;
        let c = series.component(i);
        let (t, tp) = (times[i], times[p]);
        let mut v = baseline[c] * (t - tp);
        if corr.active() {
            v += corr.coef[c] * (shapes[c].integral(t) - shapes[c].integral(tp));
        }
        let row = &kernels[c];
        let mut acc = 0.0;
        for k in 0..i {
            let kern = &row[series.component(k)];
            let lo = (tp - times[k]).max(0.0);
            acc += kern.integral(t - times[k]) - kern.integral(lo);
        }
        Some(v + acc)
    });

    let mut values = vec![Vec::new(); m_dim];
    let mut event_index = vec![Vec::new(); m_dim];
    for (i, p) in pieces.into_iter().enumerate() {
        if let Some(v) = p {
            let c = series.component(i);
            values[c].push(v);
            event_index[c].push(i);
        }
    }
    CompensatorSeries { values, event_index }
}

//! Kernel estimation from the autocovariance of binned event counts, and the
//! log-linear exponential readout.
//!
//! Counts are binned on integer ticks of `ulp(T)` with bin edges placed
//! symmetrically in `[0, T]`; an event exactly on an edge is split evenly
//! between the two neighbouring bins. The autocovariance is accumulated in
//! exact integer arithmetic from the sparse nonzero bins. Reversing a
//! grid-aligned series mirrors the bins, which leaves every lag sum (and
//! hence the whole estimate) bitwise unchanged.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::series::{horizon_quantum, EventSeries};

/// Condition-number threshold above which the discretised system is regularised.
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledKernel {
    /// Lags `k * delta`, `k = 0..`.
    pub grid: Vec<f64>,
    /// Kernel estimate at each lag.
    pub values: Vec<f64>,
    /// Approximate standard error of each value under the no-excitation null.
    pub std_error: Vec<f64>,
    /// Grid resolution.
    pub delta: f64,
    /// Largest lag considered.
    pub window: f64,
    /// Tikhonov weight added to the diagonal, if the system needed it.
    pub regularization: Option<f64>,
    /// Event rate used for normalisation.
    pub rate: f64,
    pub bins: usize,
}

/// Grid settings resolved from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonparametricSettings {
    pub delta: f64,
    pub window: f64,
    pub beta_guess: f64,
}

/// Estimate of an exponential kernel read off a [`SampledKernel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ExpReadout {
    Valid { baseline: f64, alpha: f64, beta: f64, endogeneity: f64 },
    Invalid { reason: InvalidReadout },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidReadout {
    TooFewPositive,
    NonPositiveDecay,
    Supercritical,
}

impl ExpReadout {
    pub fn is_valid(&self) -> bool {
        matches!(self, ExpReadout::Valid { .. })
    }

    /// `(baseline, alpha, beta)` when valid.
    pub fn params(&self) -> Option<(f64, f64, f64)> {
        match *self {
            ExpReadout::Valid { baseline, alpha, beta, .. } => Some((baseline, alpha, beta)),
            ExpReadout::Invalid { .. } => None,
        }
    }
}

/// Pooled event positions in doubled ticks, plus the doubled horizon.
fn doubled_ticks(series: &EventSeries) -> (Vec<u64>, u64) {
    let q = horizon_quantum(series.horizon());
    let k = (series.horizon() / q).round() as u64;
    let ticks = series.times().iter().map(|&t| 2 * ((t / q).round() as u64).min(k)).collect();
    (ticks, 2 * k)
}

/// Doubled bin counts as sparse `(bin, count)` pairs in bin order, and the number of bins.
fn binned(series: &EventSeries, delta: f64) -> Result<(Vec<(u64, u64)>, u64)> {
    let q = horizon_quantum(series.horizon());
    let (ticks, k2) = doubled_ticks(series);
    let d2 = 2 * ((delta / q).round() as u64).max(1);
    let bins = k2 / d2;
    if bins < 2 {
        return Err(HawkesError::InsufficientData(format!(
            "horizon {} holds fewer than two bins of width {delta}",
            series.horizon()
        )));
    }
    let r2 = (k2 - bins * d2) / 2;
    let hi = r2 + bins * d2;
    let mut out: Vec<(u64, u64)> = Vec::new();
    let mut push = |bin: u64, c: u64| match out.last_mut() {
        Some((b, n)) if *b == bin => *n += c,
        _ => out.push((bin, c)),
    };
    for &x in &ticks {
        if x < r2 || x > hi {
            continue;
        }
        let off = x - r2;
        let (j, rem) = (off / d2, off % d2);
        if rem == 0 {
            if j > 0 {
                push(j - 1, 1);
            }
            if j < bins {
                push(j, 1);
            }
        } else {
            push(j, 2);
        }
    }
    Ok((out, bins))
}

/// Grid defaults from a decay-rate guess: `delta = 0.1 / beta`, `window = 10 / beta`.
pub fn settings_for_beta(beta_guess: f64) -> NonparametricSettings {
    NonparametricSettings { delta: 0.1 / beta_guess, window: 10.0 / beta_guess, beta_guess }
}

/// Data-driven defaults. The first guess for the decay rate is the mean event
/// rate; it is then refined from pilot estimates, since the event rate alone
/// usually underestimates the decay rate by a large factor.
pub fn default_settings(series: &EventSeries) -> Result<NonparametricSettings> {
    const PILOT_PASSES: usize = 4;
    if series.len() < 10 {
        return Err(HawkesError::InsufficientData(format!(
            "non-parametric estimation needs at least 10 events, got {}",
            series.len()
        )));
    }
    let mut settings = settings_for_beta(series.len() as f64 / series.horizon());
    for _ in 0..PILOT_PASSES {
        let Ok(pilot) = nonparametric_kernel(series, settings.delta, settings.window) else {
            break;
        };
        let Some(beta) = pilot_decay(&pilot) else {
            break;
        };
        let converged = (beta / settings.beta_guess - 1.0).abs() < 0.1;
        settings = settings_for_beta(beta);
        if converged {
            break;
        }
    }
    Ok(settings)
}

/// Decay rate from the leading run of significantly positive values. When
/// only the first value is significant the decay is faster than the grid
/// resolves, and a tenfold faster rate is returned to zoom in.
fn pilot_decay(k: &SampledKernel) -> Option<f64> {
    let run: Vec<(f64, f64)> = k
        .grid
        .iter()
        .zip(&k.values)
        .zip(&k.std_error)
        .take_while(|((_, &v), &se)| v > 3.0 * se)
        .map(|((&t, &v), _)| (t, v.ln()))
        .collect();
    match run.len() {
        0 => None,
        1 => Some(1.0 / k.delta),
        _ => {
            let n = run.len() as f64;
            let mx = run.iter().map(|p| p.0).sum::<f64>() / n;
            let my = run.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = run.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = run.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let beta = -sxy / sxx;
            (beta > 0.0 && beta.is_finite()).then_some(beta)
        }
    }
}

/// Kernel estimate on the grid `0, delta, ..., floor(window/delta) * delta`.
///
/// Labelled series are pooled; for a symmetric bivariate process the pooled
/// process is univariate Hawkes with kernel `G^{11} + G^{12}`, which is what
/// is returned.
pub fn nonparametric_kernel(series: &EventSeries, delta: f64, window: f64) -> Result<SampledKernel> {
    if !(delta > 0.0 && window >= delta && delta.is_finite() && window.is_finite()) {
        return Err(HawkesError::InvalidParameter(format!(
            "need 0 < delta <= window, got delta = {delta}, window = {window}"
        )));
    }
    let (bins_sparse, bins) = binned(series, delta)?;
    let q = horizon_quantum(series.horizon());
    let d2 = 2 * ((delta / q).round() as u64).max(1);
    let delta_eff = (d2 / 2) as f64 * q;
    let lags = (window / delta_eff).floor() as usize;
    if (lags as u64) + 2 > bins {
        return Err(HawkesError::InsufficientData(format!(
            "{bins} bins cannot support {lags} lags"
        )));
    }

    // exact lag sums sum_j c_j c_{j+k} on doubled counts
    let mut lag_sums = vec![0u128; lags + 1];
    let mut total: u128 = 0;
    for (i, &(bi, ci)) in bins_sparse.iter().enumerate() {
        total += ci as u128;
        for &(bj, cj) in &bins_sparse[i..] {
            let k = (bj - bi) as usize;
            if k > lags {
                break;
            }
            lag_sums[k] += (ci as u128) * (cj as u128);
        }
    }
    if total == 0 {
        return Err(HawkesError::InsufficientData("no events inside the binned range".into()));
    }

    let b = bins as f64;
    let used = b * delta_eff;
    let count = total as f64 / 2.0;
    let rate = count / used;
    let mean_doubled = total as f64 / b;
    // covariance of real counts = covariance of doubled counts / 4
    let cov: Vec<f64> = lag_sums
        .iter()
        .enumerate()
        .map(|(k, &s)| (s as f64 / (b - k as f64) - mean_doubled * mean_doubled) / 4.0)
        .collect();
    let scale = rate * delta_eff * delta_eff;
    let g: Vec<f64> = cov
        .iter()
        .enumerate()
        .map(|(k, &c)| if k == 0 { (c - rate * delta_eff) / scale } else { c / scale })
        .collect();

    // (I + delta * G) phi = g with G_{kl} = g_{|k-l|}
    let n = lags + 1;
    let mut a = DMatrix::from_fn(n, n, |k, l| delta_eff * g[k.abs_diff(l)]);
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let rhs = DVector::from_column_slice(&g);
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let mut regularization = None;
    if !(smin > 0.0 && smax / smin < CONDITION_LIMIT) {
        let lambda = 1e-8 * a.trace().abs();
        for i in 0..n {
            a[(i, i)] += lambda;
        }
        regularization = Some(lambda);
    }
    let phi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| HawkesError::InvalidParameter("discretised kernel system is singular".into()))?;

    let std_error = (0..n)
        .map(|k| 1.0 / (delta_eff * (b - k as f64).sqrt()) * if k == 0 { std::f64::consts::SQRT_2 } else { 1.0 })
        .collect();
    Ok(SampledKernel {
        grid: (0..n).map(|k| k as f64 * delta_eff).collect(),
        values: phi.iter().copied().collect(),
        std_error,
        delta: delta_eff,
        window,
        regularization,
        rate,
        bins: bins as usize,
    })
}

/// Least-squares fit of `ln g(tau) = ln alpha - beta tau` over positive values
/// with `tau <= window / 2`, then `lambda_0 = (N / T)(1 - alpha / beta)`.
pub fn exp_from_nonparametric(kernel: &SampledKernel, total_count: usize, horizon: f64) -> ExpReadout {
    let cutoff = kernel.window / 2.0;
    let pts: Vec<(f64, f64)> = kernel
        .grid
        .iter()
        .zip(&kernel.values)
        .filter(|(&t, &v)| v > 0.0 && t <= cutoff)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return ExpReadout::Invalid { reason: InvalidReadout::TooFewPositive };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let beta = -slope;
    if !(beta > 0.0) {
        return ExpReadout::Invalid { reason: InvalidReadout::NonPositiveDecay };
    }
    let alpha = intercept.exp();
    let endogeneity = alpha / beta;
    if !(endogeneity < 1.0) {
        return ExpReadout::Invalid { reason: InvalidReadout::Supercritical };
    }
    ExpReadout::Valid {
        baseline: total_count as f64 / horizon * (1.0 - endogeneity),
        alpha,
        beta,
        endogeneity,
    }
}

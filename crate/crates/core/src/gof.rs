//! Goodness of fit on compensator residuals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{HawkesError, Result};
use crate::likelihood::{compensators, CompensatorSeries, LikelihoodVariant};
use crate::model::HawkesModel;
use crate::series::EventSeries;

/// Smallest residual sample accepted by the KS test.
pub const MIN_KS_SAMPLE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks_statistic: f64,
    pub p_ks: f64,
    pub lb_statistic: f64,
    pub p_lb: f64,
    pub lags: usize,
    pub aic: f64,
    pub loglik: f64,
    pub parameter_count: usize,
    pub sample_size: usize,
}

/// Kolmogorov survival function `Q(x) = P(K > x)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi theta form, fast for small x
        let k = -std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut s = 0.0;
        for j in 1..=20 {
            let m = (2 * j - 1) as f64;
            s += (k * m * m).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let j = j as f64;
            let term = (-2.0 * j * j * x * x).exp();
            s += if j as u64 % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample KS test of `u` against Uniform(0, 1): `(D, p)`.
pub fn ks_uniform(u: &[f64]) -> Result<(f64, f64)> {
    if u.is_empty() {
        return Err(HawkesError::InsufficientData("KS test on an empty sample".into()));
    }
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Ok((d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)))
}

/// KS test of residuals against Exp(1), through `U = 1 - exp(-Lambda)`.
pub fn ks_exp1(residuals: &[f64]) -> Result<(f64, f64)> {
    if residuals.len() < MIN_KS_SAMPLE {
        return Err(HawkesError::InsufficientData(format!(
            "KS test needs at least {MIN_KS_SAMPLE} residuals, got {}",
            residuals.len()
        )));
    }
    let u: Vec<f64> = residuals.iter().map(|&l| -(-l).exp_m1()).collect();
    ks_uniform(&u)
}

/// Default Ljung–Box lag count for a sample of size `n`.
pub fn default_lags(n: usize) -> usize {
    (n / 10).min(20)
}

/// Ljung–Box test: `(Q, p)` with `lags` degrees of freedom.
pub fn ljung_box(residuals: &[f64], lags: usize) -> Result<(f64, f64)> {
    ljung_box_masked(residuals, lags, None)
}

/// Ljung–Box test that leaves out the lag-1 pairs flagged in `skip_lag1`
/// (`skip_lag1[t]` refers to the pair `(t, t + 1)`). Used when consecutive
/// residuals come from events whose raw timestamps shared one clock bucket
/// and were spread apart artificially.
pub fn ljung_box_masked(residuals: &[f64], lags: usize, skip_lag1: Option<&[bool]>) -> Result<(f64, f64)> {
    let n = residuals.len();
    if lags == 0 {
        return Err(HawkesError::InvalidParameter("Ljung-Box needs at least one lag".into()));
    }
    if n <= lags + 1 {
        return Err(HawkesError::InsufficientData(format!(
            "Ljung-Box with {lags} lags needs more than {} residuals, got {n}",
            lags + 1
        )));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = residuals.iter().map(|x| x - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(HawkesError::InsufficientData("residuals have zero variance".into()));
    }
    let nf = n as f64;
    let mut q = 0.0;
    for h in 1..=lags {
        let (mut num, mut pairs) = (0.0, 0usize);
        for t in 0..n - h {
            if h == 1 && skip_lag1.is_some_and(|m| m.get(t).copied().unwrap_or(false)) {
                continue;
            }
            num += dev[t] * dev[t + h];
            pairs += 1;
        }
        if pairs == 0 {
            continue;
        }
        // rescale so that skipped pairs do not shrink the estimate
        let rho = num / denom * (n - h) as f64 / pairs as f64;
        q += rho * rho / (nf - h as f64);
    }
    q *= nf * (nf + 2.0);
    let chi = ChiSquared::new(lags as f64).map_err(|e| HawkesError::InvalidParameter(e.to_string()))?;
    Ok((q, chi.sf(q).clamp(0.0, 1.0)))
}

/// `2k - 2 LL`.
pub fn aic(loglik: f64, parameter_count: usize) -> f64 {
    2.0 * parameter_count as f64 - 2.0 * loglik
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges on `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Fixed-width histogram of p-values on `[0, 1]`; `p = 1` falls in the last bin.
pub fn pvalue_histogram(ps: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(HawkesError::InvalidParameter("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0; bins];
    for &p in ps {
        if !(0.0..=1.0).contains(&p) {
            return Err(HawkesError::InvalidParameter(format!("p-value {p} outside [0, 1]")));
        }
        let b = ((p * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(), counts })
}

/// Residuals of all components, ordered by the event that closes each interval.
pub fn residuals_in_event_order(c: &CompensatorSeries) -> Vec<f64> {
    let mut v: Vec<(usize, f64)> = c
        .values
        .iter()
        .zip(&c.event_index)
        .flat_map(|(vals, idx)| idx.iter().copied().zip(vals.iter().copied()))
        .collect();
    v.sort_by_key(|p| p.0);
    v.into_iter().map(|p| p.1).collect()
}

/// KS, Ljung–Box and AIC for a fitted (or true) model on `series`.
///
/// `lags = None` uses [`default_lags`]. `skip_lag1` is passed to
/// [`ljung_box_masked`] and is indexed like the event-ordered residuals.
pub fn assess(
    model: &HawkesModel,
    series: &EventSeries,
    variant: LikelihoodVariant,
    loglik: f64,
    lags: Option<usize>,
    skip_lag1: Option<&[bool]>,
) -> Result<GofReport> {
    let c = compensators(model, series, variant)?;
    let r = residuals_in_event_order(&c);
    let (d, p_ks) = ks_exp1(&r)?;
    let lags = lags.unwrap_or_else(|| default_lags(r.len())).max(1);
    let (q, p_lb) = ljung_box_masked(&r, lags, skip_lag1)?;
    let k = model.parameter_count();
    Ok(GofReport {
        ks_statistic: d,
        p_ks,
        lb_statistic: q,
        p_lb,
        lags,
        aic: aic(loglik, k),
        loglik,
        parameter_count: k,
        sample_size: r.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kolmogorov_reference_values() {
        assert_relative_eq!(kolmogorov_survival(0.5), 0.963_945_24, epsilon = 1e-7);
        assert_relative_eq!(kolmogorov_survival(1.0), 0.269_999_67, epsilon = 1e-7);
        assert_relative_eq!(kolmogorov_survival(1.5), 0.022_217_96, epsilon = 1e-7);
        // both branches agree at the switch point
        let a = kolmogorov_survival(1.18 - 1e-12);
        let b = kolmogorov_survival(1.18);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ks_exact_quantile_grid() {
        let n = 100;
        let l: Vec<f64> = (1..=n).map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln()).collect();
        let (d, p) = ks_exp1(&l).unwrap();
        assert_relative_eq!(d, 0.005, epsilon = 1e-12);
        assert!(p > 0.999_999);
    }

    #[test]
    fn ks_degenerate_sample() {
        let (d, p) = ks_exp1(&[1.0; 100]).unwrap();
        assert!(d >= 0.36);
        assert!(p < 1e-10);
        assert!(ks_exp1(&[1.0; 9]).is_err());
    }

    #[test]
    fn ljung_box_alternating() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.5 } else { 1.5 }).collect();
        let (q, p) = ljung_box(&x, 20).unwrap();
        assert!(q > 1000.0);
        assert!(p < 1e-10);
        assert!(ljung_box(&x, 0).is_err());
        assert!(ljung_box(&x[..5], 10).is_err());
    }

    #[test]
    fn masked_lag_one_pairs_are_dropped() {
        let x: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 0.5 } else { 1.5 }).collect();
        let all = vec![true; 199];
        let (q_masked, _) = ljung_box_masked(&x, 1, Some(&all)).unwrap();
        assert_eq!(q_masked, 0.0);
    }

    #[test]
    fn aic_values() {
        assert_eq!(aic(0.0, 1), 2.0);
        assert_relative_eq!(aic(2282.04, 3), -4558.08, epsilon = 1e-9);
        assert_relative_eq!(aic(2438.63, 5), -4867.26, epsilon = 1e-9);
    }

    #[test]
    fn histogram_examples() {
        let h = pvalue_histogram(&[0.05, 0.15, 0.95], 10).unwrap();
        assert_eq!(h.counts, vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(pvalue_histogram(&[], 4).unwrap().counts, vec![0; 4]);
        assert_eq!(pvalue_histogram(&[1.0], 4).unwrap().counts, vec![0, 0, 0, 1]);
        assert!(pvalue_histogram(&[1.5], 4).is_err());
    }
}

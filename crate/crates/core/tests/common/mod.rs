//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the library's likelihood code.

#![allow(dead_code)]

use hawkes_core::{EventSeries, HawkesModel, Kernel};

/// Plain kernel formula, written out again so the oracle does not share code
/// with the library.
pub fn kernel_value(k: &Kernel, t: f64) -> f64 {
    match k {
        Kernel::SumExp(s) => s.terms().iter().map(|e| e.alpha * (-e.beta * t).exp()).sum(),
        Kernel::PowerLaw(p) => p.u * (t + p.v).powf(p.w),
    }
}

pub fn kernel_integral(k: &Kernel, x: f64) -> f64 {
    match k {
        Kernel::SumExp(s) => s.terms().iter().map(|e| e.alpha / e.beta * (1.0 - (-e.beta * x).exp())).sum(),
        Kernel::PowerLaw(p) => p.u / (p.w + 1.0) * ((x + p.v).powf(p.w + 1.0) - p.v.powf(p.w + 1.0)),
    }
}

/// Stationary mean by fixed-point iteration `mu = lambda0 + Gamma mu`.
pub fn mean_by_iteration(model: &HawkesModel) -> Vec<f64> {
    let m = model.dimension();
    let gamma: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..m).map(|b| kernel_integral(model.kernel(a, b), 1e12)).collect())
        .collect();
    let mut mu = model.baseline().to_vec();
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..m)
            .map(|a| model.baseline()[a] + (0..m).map(|b| gamma[a][b] * mu[b]).sum::<f64>())
            .collect();
        let diff = next.iter().zip(&mu).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        mu = next;
        if diff < 1e-15 * mu.iter().cloned().fold(0.0, f64::max) {
            break;
        }
    }
    mu
}

/// Intensity of component `m` at `t`, counting only events strictly before `t`.
/// With `modified`, the baseline carries the decaying stationarity correction.
pub fn intensity(model: &HawkesModel, s: &EventSeries, m: usize, t: f64, mu: Option<&[f64]>) -> f64 {
    let row = &model.kernels()[m];
    let mut lam = model.baseline()[m];
    if let Some(mu) = mu {
        let at0: f64 = row.iter().map(|k| kernel_value(k, 0.0)).sum();
        let at_t: f64 = row.iter().map(|k| kernel_value(k, t)).sum();
        lam += (mu[m] - model.baseline()[m]) * at_t / at0;
    }
    for (i, &tk) in s.times().iter().enumerate() {
        if tk >= t {
            break;
        }
        lam += kernel_value(&row[s.component(i)], t - tk);
    }
    lam
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `-int_0^T sum_m lambda^m + sum_i ln lambda^{c_i}(t_i-)`, with the integral
/// done numerically between consecutive events (where the intensity is smooth).
pub fn loglik_by_quadrature(model: &HawkesModel, s: &EventSeries, modified: bool) -> f64 {
    let mu = modified.then(|| mean_by_iteration(model));
    let mu = mu.as_deref();
    let mut knots = vec![0.0];
    knots.extend_from_slice(s.times());
    knots.push(s.horizon());
    let mut total = 0.0;
    for m in 0..model.dimension() {
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            // sub-split long gaps so the tolerance is met on fast decays
            let pieces = 8;
            for p in 0..pieces {
                let lo = a + (b - a) * p as f64 / pieces as f64;
                let hi = a + (b - a) * (p + 1) as f64 / pieces as f64;
                // events at `a` count for t > a: evaluate just inside
                total -= integrate(|t| intensity(model, s, m, t.max(lo + f64::EPSILON * lo.abs()), mu), lo, hi, 1e-13);
            }
        }
    }
    for (i, &t) in s.times().iter().enumerate() {
        total += intensity(model, s, s.component(i), t, mu).ln();
    }
    total
}

/// Straight `O(N^2)` evaluation of the closed form.
pub fn loglik_double_sum(model: &HawkesModel, s: &EventSeries) -> f64 {
    let times = s.times();
    let mut ll = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let c = s.component(i);
        let mut lam = model.baseline()[c];
        for k in 0..i {
            lam += kernel_value(model.kernel(c, s.component(k)), t - times[k]);
        }
        ll += lam.ln();
    }
    for m in 0..model.dimension() {
        ll -= model.baseline()[m] * s.horizon();
        for (k, &tk) in times.iter().enumerate() {
            ll -= kernel_integral(model.kernel(m, s.component(k)), s.horizon() - tk);
        }
    }
    ll
}

/// Kolmogorov survival function from the alternating series (valid for all `x > 0.3` to double precision).
pub fn kolmogorov_q_series(x: f64) -> f64 {
    let mut s = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        s += (if j as i64 % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * j * j * x * x).exp();
    }
    2.0 * s
}

/// Two-sided paired sign-free t statistic for `mean(a - b) > 0`; returns a one-sided p-value
/// using the normal approximation (sample sizes here are in the hundreds).
pub fn paired_one_sided_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = mean / (var / n).sqrt();
    0.5 * libm_erfc(z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes' Chebyshev fit, ~1.2e-7 relative).
pub fn libm_erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// One-sample KS statistic of `xs` against Uniform(0, 1), computed by brute force.
pub fn ks_uniform_statistic(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

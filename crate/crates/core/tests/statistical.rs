mod common;

use common::ks_uniform_statistic;
use hawkes_core::estimate::{mle_multivariate, FitOptions, Structure};
use hawkes_core::gof::{assess, kolmogorov_survival};
use hawkes_core::likelihood::{compensators, loglik, LikelihoodVariant};
use hawkes_core::nonparametric::{nonparametric_kernel, settings_for_beta};
use hawkes_core::{simulate, simulate_stationary, EventSeries, HawkesModel, Kernel};

fn uniformity_p(ps: &[f64]) -> f64 {
    let d = ks_uniform_statistic(ps);
    let n = ps.len() as f64;
    kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d)
}

#[test]
fn true_parameter_ks_p_values_are_uniform() {
    let model = HawkesModel::univariate(0.3, Kernel::exponential(1.2, 2.0).unwrap()).unwrap();
    let t = model.horizon_for_expected_events(1000.0).unwrap();
    let ps: Vec<f64> = (0..200)
        .map(|seed| {
            let s = simulate_stationary(&model, t, seed).unwrap().series;
            let ll = loglik(&model, &s, LikelihoodVariant::Standard).unwrap().value;
            assess(&model, &s, LikelihoodVariant::Standard, ll, None, None).unwrap().p_ks
        })
        .collect();
    assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
    let p = uniformity_p(&ps);
    assert!(p > 0.01, "uniformity p = {p}");
    let rejected = ps.iter().filter(|&&p| p < 0.05).count() as f64 / ps.len() as f64;
    assert!((0.01..=0.10).contains(&rejected), "rejection rate {rejected}");
}

#[test]
fn compensator_mean_is_one() {
    let model = HawkesModel::asymmetric(0.4, 0.3, 0.2, 0.45, 1.5).unwrap();
    let s = simulate(&model, 3000.0, 17).unwrap();
    for variant in [LikelihoodVariant::Standard, LikelihoodVariant::Modified] {
        let c = compensators(&model, &s, variant).unwrap().pooled();
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd / n.sqrt(), "{variant}: mean {mean}, sd {sd}, n {n}");
    }
}

#[test]
fn nonparametric_kernel_of_poisson_is_flat() {
    let model = HawkesModel::univariate(2.0, Kernel::exponential(0.0, 1.0).unwrap()).unwrap();
    let s = simulate(&model, 20_000.0, 3).unwrap();
    let set = settings_for_beta(1.0);
    let g = nonparametric_kernel(&s, set.delta, set.window).unwrap();
    let inside = g.values.iter().zip(&g.std_error).filter(|(v, e)| v.abs() <= 3.0 * **e).count();
    assert!(inside as f64 >= 0.95 * g.values.len() as f64, "{inside}/{}", g.values.len());
    let mean = g.values.iter().sum::<f64>() / g.values.len() as f64;
    assert!(mean.abs() < 0.01, "mean kernel {mean}");
}

#[test]
fn nonparametric_kernel_ignores_reversal() {
    let model = HawkesModel::univariate(0.5, Kernel::exponential(1.0, 2.0).unwrap()).unwrap();
    let s = simulate(&model, 2000.0, 8).unwrap();
    let set = settings_for_beta(2.0);
    let f = nonparametric_kernel(&s, set.delta, set.window).unwrap();
    let b = nonparametric_kernel(&s.reversed(), set.delta, set.window).unwrap();
    assert_eq!(f.values, b.values);
}

fn swap_labels(s: &EventSeries) -> EventSeries {
    let comps = s.components().unwrap().iter().map(|&c| 1 - c).collect();
    EventSeries::with_components(s.times().to_vec(), comps, s.horizon()).unwrap()
}

#[test]
fn symmetric_fit_is_label_invariant() {
    let truth = HawkesModel::symmetric(0.3, 0.4, 0.3, 1.0).unwrap();
    let s = simulate(&truth, 2000.0, 21).unwrap();
    let opts = FitOptions::default();
    let a = mle_multivariate(&s, Structure::Symmetric, &truth, &opts).unwrap();
    let b = mle_multivariate(&swap_labels(&s), Structure::Symmetric, &truth, &opts).unwrap();
    assert!((a.loglik - b.loglik).abs() < 1e-6 * a.loglik.abs());
    let ll_swapped = loglik(&a.model, &swap_labels(&s), LikelihoodVariant::Standard).unwrap().value;
    assert!((ll_swapped - a.loglik).abs() < 1e-9 * a.loglik.abs());
    assert!((a.spectral_radius - b.spectral_radius).abs() < 1e-3);
}

//! Running conditional intensity, shared by the simulator, burn-in detection
//! and intensity traces.
//!
//! Exponential-family models use the Markov recursion (`O(M^2 P)` per step);
//! any other kernel falls back to summing over the whole history.

use crate::model::{HawkesModel, Kernel};

#[derive(Debug, Clone)]
struct ExpTermState {
    target: usize,
    alpha: f64,
    beta: f64,
    /// `sum_{t_k <= now, c_k = source} exp(-beta (now - t_k))`
    value: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ExpState {
    baseline: Vec<f64>,
    terms: Vec<ExpTermState>,
    /// Term indices fed by each source component.
    by_source: Vec<Vec<usize>>,
    now: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct GenericState {
    baseline: Vec<f64>,
    kernels: Vec<Vec<Kernel>>,
    /// Event times per source component.
    history: Vec<Vec<f64>>,
    now: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum IntensityState {
    Exp(ExpState),
    Generic(GenericState),
}

impl IntensityState {
    pub(crate) fn new(model: &HawkesModel) -> Self {
        let m = model.dimension();
        if model.is_exponential_family() {
            let mut terms = Vec::new();
            let mut by_source = vec![Vec::new(); m];
            for target in 0..m {
                for (source, row) in by_source.iter_mut().enumerate() {
                    let k = model.kernel(target, source).as_sum_exp().expect("exponential family");
                    for term in k.terms() {
                        if term.alpha == 0.0 {
                            continue;
                        }
                        row.push(terms.len());
                        terms.push(ExpTermState {
                            target,
                            alpha: term.alpha,
                            beta: term.beta,
                            value: 0.0,
                        });
                    }
                }
            }
            IntensityState::Exp(ExpState {
                baseline: model.baseline().to_vec(),
                terms,
                by_source,
                now: 0.0,
            })
        } else {
            IntensityState::Generic(GenericState {
                baseline: model.baseline().to_vec(),
                kernels: model.kernels().to_vec(),
                history: vec![Vec::new(); m],
                now: 0.0,
            })
        }
    }

    pub(crate) fn dimension(&self) -> usize {
        match self {
            IntensityState::Exp(s) => s.baseline.len(),
            IntensityState::Generic(s) => s.baseline.len(),
        }
    }

    /// Moves the clock to `t >= now` and writes the left-limit intensity of
    /// every component into `out`.
    pub(crate) fn advance(&mut self, t: f64, out: &mut [f64]) {
        match self {
            IntensityState::Exp(s) => {
                debug_assert!(t >= s.now);
                let dt = t - s.now;
                out.copy_from_slice(&s.baseline);
                for term in &mut s.terms {
                    if term.value != 0.0 {
                        term.value *= (-term.beta * dt).exp();
                    }
                    out[term.target] += term.alpha * term.value;
                }
                s.now = t;
            }
            IntensityState::Generic(s) => {
                debug_assert!(t >= s.now);
                out.copy_from_slice(&s.baseline);
                for (m, o) in out.iter_mut().enumerate() {
                    let row = &s.kernels[m];
                    *o += row.iter().zip(&s.history).map(|(k, h)| k.history_sum(h, t)).sum::<f64>();
                }
                s.now = t;
            }
        }
    }

    /// Registers an event of `component` at the current clock time.
    pub(crate) fn add_event(&mut self, component: usize) {
        match self {
            IntensityState::Exp(s) => {
                for &i in &s.by_source[component] {
                    s.terms[i].value += 1.0;
                }
            }
            IntensityState::Generic(s) => s.history[component].push(s.now),
        }
    }

    /// Total jump of all intensities caused by one event of `component`.
    pub(crate) fn jump(&self, component: usize) -> f64 {
        match self {
            IntensityState::Exp(s) => s.by_source[component].iter().map(|&i| s.terms[i].alpha).sum(),
            IntensityState::Generic(s) => s.kernels.iter().map(|row| row[component].eval(0.0)).sum(),
        }
    }
}

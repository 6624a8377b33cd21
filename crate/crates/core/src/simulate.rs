//! Ogata thinning, burn-in truncation and time reversal.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::intensity::IntensityState;
use crate::model::HawkesModel;
use crate::rng::rng_from_seed;
use crate::series::{horizon_quantum, snap, EventSeries};

/// A simulated series after burn-in removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub series: EventSeries,
    /// Time `t0` (in the original clock) at which the intensity first reached its mean.
    pub burn_in_time: f64,
    /// Event count before truncation.
    pub raw_count: usize,
    pub seed: Option<u64>,
}

/// Exact simulation on `[0, T]` by thinning.
///
/// Between events every supported kernel is non-increasing, so the total
/// intensity just after the latest event or rejected candidate bounds the
/// intensity until the next event. Event times are placed on the `ulp(T)`
/// grid so that reversal is exact.
pub fn simulate(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventSeries> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(HawkesError::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let m = model.dimension();
    let mut rng = rng_from_seed(seed);
    let mut state = IntensityState::new(model);
    let q = horizon_quantum(horizon);

    let mut lam = vec![0.0; m];
    let mut times = Vec::new();
    let mut comps = Vec::new();
    let mut bound: f64 = model.baseline().iter().sum();
    let mut s = 0.0_f64;
    let mut last_event = f64::NEG_INFINITY;

    loop {
        let e: f64 = rng.sample(Exp1);
        let raw = s + e / bound;
        if raw > horizon {
            break;
        }
        let mut cand = snap(raw, q).max(s);
        if cand <= last_event {
            cand = last_event + q;
        }
        if cand > horizon {
            break;
        }
        s = cand;
        state.advance(s, &mut lam);
        let total: f64 = lam.iter().sum();
        debug_assert!(
            total <= bound * (1.0 + 1e-9),
            "thinning bound violated: intensity {total} > bound {bound}"
        );
        let u: f64 = rng.random::<f64>() * bound;
        if u < total {
            let c = if m == 1 {
                0
            } else {
                pick_component(&lam, total, rng.random::<f64>())
            };
            state.add_event(c);
            times.push(s);
            comps.push(c);
            last_event = s;
            bound = total + state.jump(c);
        } else {
            bound = total;
        }
    }

    if m == 1 {
        EventSeries::new(times, horizon)
    } else {
        EventSeries::with_components(times, comps, horizon)
    }
}

fn pick_component(lam: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    for (i, &l) in lam.iter().enumerate() {
        acc += l;
        if target < acc {
            return i;
        }
    }
    lam.len() - 1
}

/// Drops the non-stationary start of a series.
///
/// `t0` is the first event time whose left-limit total intensity reaches the
/// total stationary mean. Events at or before `t0` are removed and the rest
/// shifted by `-t0`.
pub fn burn_in_trim(series: &EventSeries, model: &HawkesModel) -> Result<SimulationRecord> {
    let mu_total: f64 = model.mean_intensity()?.iter().sum();
    series.check_dimension(model.dimension())?;
    let mut state = IntensityState::new(model);
    let mut lam = vec![0.0; model.dimension()];
    let times = series.times();
    let mut cut = None;
    for (i, &t) in times.iter().enumerate() {
        state.advance(t, &mut lam);
        if lam.iter().sum::<f64>() >= mu_total {
            cut = Some(i);
            break;
        }
        state.add_event(series.component(i));
    }
    let cut = cut.ok_or(HawkesError::NoStationarityReached)?;
    let t0 = times[cut];
    let kept: Vec<f64> = times[cut + 1..].iter().map(|&t| t - t0).collect();
    let horizon = series.horizon() - t0;
    let trimmed = match series.components() {
        Some(c) => EventSeries::with_components(kept, c[cut + 1..].to_vec(), horizon)?,
        None => EventSeries::new(kept, horizon)?,
    };
    Ok(SimulationRecord {
        series: trimmed,
        burn_in_time: t0,
        raw_count: series.len(),
        seed: None,
    })
}

/// Simulates and trims; retries with derived seeds when stationarity is never reached.
pub fn simulate_stationary(model: &HawkesModel, horizon: f64, seed: u64) -> Result<SimulationRecord> {
    const ATTEMPTS: u64 = 8;
    let mut last_err = HawkesError::NoStationarityReached;
    for attempt in 0..ATTEMPTS {
        let s = if attempt == 0 { seed } else { crate::rng::derive_seed(seed, attempt) };
        let raw = simulate(model, horizon, s)?;
        match burn_in_trim(&raw, model) {
            Ok(mut rec) => {
                rec.seed = Some(s);
                return Ok(rec);
            }
            Err(HawkesError::NoStationarityReached) => last_err = HawkesError::NoStationarityReached,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

/// `t_i^b = T - t_{N+1-i}` with the same horizon.
pub fn reverse(series: &EventSeries) -> EventSeries {
    series.reversed()
}

/// One sample of a left-limit intensity trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time: f64,
    /// Total intensity (summed over components).
    pub intensity: f64,
    pub is_event: bool,
}

/// Total intensity on a uniform grid of `points` samples over `[0, T]`,
/// interleaved with the left limits at each event.
pub fn intensity_trace(model: &HawkesModel, series: &EventSeries, points: usize) -> Vec<TracePoint> {
    let mut state = IntensityState::new(model);
    let mut lam = vec![0.0; state.dimension()];
    let mut out = Vec::with_capacity(points + series.len());
    let step = if points > 1 { series.horizon() / (points - 1) as f64 } else { 0.0 };
    let mut g = 0;
    for (i, &t) in series.times().iter().enumerate() {
        while g < points && (g as f64) * step < t {
            let gt = g as f64 * step;
            state.advance(gt, &mut lam);
            out.push(TracePoint { time: gt, intensity: lam.iter().sum(), is_event: false });
            g += 1;
        }
        state.advance(t, &mut lam);
        out.push(TracePoint { time: t, intensity: lam.iter().sum(), is_event: true });
        state.add_event(series.component(i));
    }
    while g < points {
        let gt = g as f64 * step;
        state.advance(gt, &mut lam);
        out.push(TracePoint { time: gt, intensity: lam.iter().sum(), is_event: false });
        g += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kernel;

    fn poisson(rate: f64) -> HawkesModel {
        HawkesModel::univariate(rate, Kernel::exponential(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn rejects_bad_horizon() {
        assert!(simulate(&poisson(1.0), 0.0, 1).is_err());
        assert!(simulate(&poisson(1.0), -3.0, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = HawkesModel::univariate(0.3, Kernel::exponential(0.8, 1.2).unwrap()).unwrap();
        let a = simulate(&m, 500.0, 42).unwrap();
        let b = simulate(&m, 500.0, 42).unwrap();
        let c = simulate(&m, 500.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_burn_in_drops_first_event() {
        let m = poisson(2.0);
        let s = simulate(&m, 100.0, 5).unwrap();
        let rec = burn_in_trim(&s, &m).unwrap();
        assert_eq!(rec.burn_in_time, s.times()[0]);
        assert_eq!(rec.series.len(), s.len() - 1);
        assert_eq!(rec.raw_count, s.len());
    }

    #[test]
    fn self_exciting_burn_in_is_after_first_event() {
        let m = HawkesModel::univariate(0.001, Kernel::exponential(0.01, 0.02).unwrap()).unwrap();
        for seed in 0..5 {
            let s = simulate(&m, 5e5, seed).unwrap();
            let rec = burn_in_trim(&s, &m).unwrap();
            assert!(rec.burn_in_time > s.times()[0]);
            assert!(rec.series.times().iter().all(|&t| t > 0.0));
            assert_eq!(rec.series.horizon(), s.horizon() - rec.burn_in_time);
        }
    }

    #[test]
    fn burn_in_rejects_critical_model() {
        let m = HawkesModel::univariate(1.0, Kernel::exponential(1.0, 1.0).unwrap()).unwrap();
        let s = EventSeries::new(vec![1.0, 2.0, 3.0], 4.0).unwrap();
        assert!(matches!(burn_in_trim(&s, &m), Err(HawkesError::NonStationary(_))));
    }

    #[test]
    fn burn_in_reports_unreached_threshold() {
        let m = HawkesModel::univariate(1.0, Kernel::exponential(0.5, 1.0).unwrap()).unwrap();
        // Widely spaced events: intensity never reaches mu = 2.
        let s = EventSeries::new(vec![10.0, 20.0, 30.0], 40.0).unwrap();
        assert_eq!(burn_in_trim(&s, &m), Err(HawkesError::NoStationarityReached));
    }

    #[test]
    fn simulated_reversal_is_exact_involution() {
        let m = HawkesModel::univariate(0.3, Kernel::exponential(0.8, 1.2).unwrap()).unwrap();
        let rec = simulate_stationary(&m, 2000.0, 9).unwrap();
        let twice = reverse(&reverse(&rec.series));
        assert_eq!(
            twice.times().iter().map(|t| t.to_bits()).collect::<Vec<_>>(),
            rec.series.times().iter().map(|t| t.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn trace_contains_events_and_grid() {
        let m = HawkesModel::univariate(0.3, Kernel::exponential(0.8, 1.2).unwrap()).unwrap();
        let s = simulate(&m, 50.0, 3).unwrap();
        let tr = intensity_trace(&m, &s, 11);
        assert_eq!(tr.len(), s.len() + 11);
        assert!(tr.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(tr.iter().all(|p| p.intensity >= 0.3 - 1e-12));
    }
}

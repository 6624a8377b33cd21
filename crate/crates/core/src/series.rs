//! Ordered event times on `[0, T]`, optionally labelled by component.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// Strictly increasing event times with horizon `T >= t_N`.
///
/// Component labels are zero-based in memory (`0..M`); files use `1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    times: Vec<f64>,
    components: Option<Vec<usize>>,
    horizon: f64,
}

impl EventSeries {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::build(times, None, horizon)
    }

    pub fn with_components(times: Vec<f64>, components: Vec<usize>, horizon: f64) -> Result<Self> {
        Self::build(times, Some(components), horizon)
    }

    fn build(times: Vec<f64>, components: Option<Vec<usize>>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(HawkesError::InvalidSeries(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if let Some(c) = &components {
            if c.len() != times.len() {
                return Err(HawkesError::InvalidSeries(format!(
                    "{} component labels for {} events",
                    c.len(),
                    times.len()
                )));
            }
        }
        if let Some(&first) = times.first() {
            if !(first >= 0.0) {
                return Err(HawkesError::InvalidSeries(format!("event time {first} is negative")));
            }
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(HawkesError::InvalidSeries(format!(
                    "times not strictly increasing at index {}: {} then {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        if let Some(&last) = times.last() {
            if !last.is_finite() || last > horizon {
                return Err(HawkesError::InvalidSeries(format!(
                    "last event {last} exceeds horizon {horizon}"
                )));
            }
        }
        Ok(Self { times, components, horizon })
    }

    pub fn empty(horizon: f64) -> Self {
        Self { times: Vec::new(), components: None, horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn components(&self) -> Option<&[usize]> {
        self.components.as_deref()
    }

    /// Component of event `i` (0 for unlabelled series).
    #[inline]
    pub fn component(&self, i: usize) -> usize {
        self.components.as_ref().map_or(0, |c| c[i])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest label + 1, or 1 for unlabelled series.
    pub fn dimension(&self) -> usize {
        self.components
            .as_ref()
            .and_then(|c| c.iter().max().map(|&m| m + 1))
            .unwrap_or(1)
    }

    /// Checks that every label is below `m`.
    pub fn check_dimension(&self, m: usize) -> Result<()> {
        let d = self.dimension();
        if d > m {
            return Err(HawkesError::InvalidSeries(format!(
                "series has component label {} but model dimension is {m}",
                d
            )));
        }
        Ok(())
    }

    /// Number of events per component.
    pub fn counts(&self, m: usize) -> Vec<usize> {
        let mut counts = vec![0; m];
        for i in 0..self.len() {
            counts[self.component(i)] += 1;
        }
        counts
    }

    /// Time-reversed series `t_i^b = T - t_{N+1-i}`; labels travel with their event.
    ///
    /// The subtraction is exact whenever the times lie on the grid of
    /// `ulp(T)` (see [`EventSeries::snapped`]), which makes reversal an exact
    /// involution.
    pub fn reversed(&self) -> Self {
        let t = self.horizon;
        let times = self.times.iter().rev().map(|&x| t - x).collect();
        let components = self
            .components
            .as_ref()
            .map(|c| c.iter().rev().copied().collect());
        Self { times, components, horizon: t }
    }

    /// Copy with every time rounded to the nearest multiple of `ulp(T)`.
    ///
    /// Fails if two events collapse onto the same grid point.
    pub fn snapped(&self) -> Result<Self> {
        let q = horizon_quantum(self.horizon);
        let times: Vec<f64> = self.times.iter().map(|&x| snap(x, q)).collect();
        Self::build(times, self.components.clone(), self.horizon)
    }

    /// Events in `(start, end]` shifted by `-start`, horizon `end - start`.
    pub fn shifted_window(&self, start: f64, end: f64) -> Result<Self> {
        let lo = self.times.partition_point(|&x| x <= start);
        let hi = self.times.partition_point(|&x| x <= end);
        let times = self.times[lo..hi].iter().map(|&x| x - start).collect();
        let components = self.components.as_ref().map(|c| c[lo..hi].to_vec());
        Self::build(times, components, end - start)
    }
}

/// `ulp(T)`: spacing of doubles in `[2^e, 2^(e+1))` containing `T`.
pub(crate) fn horizon_quantum(horizon: f64) -> f64 {
    if horizon <= 0.0 || !horizon.is_finite() {
        return f64::MIN_POSITIVE;
    }
    let exp = horizon.log2().floor() as i32;
    // log2 can round up at exact powers of two boundaries; keep q <= ulp(T).
    let q = 2f64.powi(exp - 52);
    if q * 2f64.powi(52) > horizon {
        q * 0.5
    } else {
        q
    }
}

#[inline]
pub(crate) fn snap(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

//! Windowed sum-of-exponential fits on recorded (clock-quantised) event files.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Direction;
use crate::error::{HawkesError, Result};
use crate::estimate::{default_sum_exp_init, mle, FitFamily, FitOptions, Optimizer};
use crate::exec::Executor;
use crate::gof::assess;
use crate::io::RawEvents;
use crate::likelihood::LikelihoodVariant;
use crate::model::{HawkesModel, Kernel};
use crate::rng::{derive_seed, rng_from_seed};
use crate::series::EventSeries;
use crate::simulate::simulate;

/// Sub-stream index of the jitter generator under the master seed.
const JITTER_STREAM: u64 = 0x6a69_7474_6572;

fn default_windows() -> Vec<f64> {
    vec![3600.0, 1800.0, 900.0, 600.0, 300.0]
}
fn default_terms() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_min_events() -> usize {
    150
}
fn default_resolution() -> f64 {
    1e-3
}
fn default_variants() -> Vec<LikelihoodVariant> {
    vec![LikelihoodVariant::Standard, LikelihoodVariant::Modified]
}
fn default_optimizer() -> Optimizer {
    Optimizer::Lbfgs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConfig {
    /// Window lengths in seconds.
    #[serde(default = "default_windows")]
    pub windows: Vec<f64>,
    /// Numbers of exponentials `P` to fit.
    #[serde(default = "default_terms")]
    pub terms: Vec<usize>,
    /// Windows with this many events or fewer are dropped.
    #[serde(default = "default_min_events")]
    pub min_events: usize,
    /// Clock resolution of the recorded timestamps.
    #[serde(default = "default_resolution")]
    pub jitter_resolution: f64,
    /// Keep only rows whose `price` differs from the previous row.
    #[serde(default)]
    pub change_filter: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<LikelihoodVariant>,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    /// Ljung–Box lags; default `min(20, n / 10)`.
    #[serde(default)]
    pub lags: Option<usize>,
    /// Leave out lag-1 residual pairs whose events shared a clock bucket.
    #[serde(default)]
    pub jitter_aware_lb: bool,
    /// `[start, end]` of the session; default from zero to the last event.
    #[serde(default)]
    pub session: Option<(f64, f64)>,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl EmpiricalConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HawkesError::Config(m));
        if self.windows.is_empty() || self.windows.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return bad(format!("window sizes must be positive, got {:?}", self.windows));
        }
        if self.terms.is_empty() || self.terms.contains(&0) {
            return bad(format!("terms must be >= 1, got {:?}", self.terms));
        }
        if !(self.jitter_resolution > 0.0) {
            return bad(format!("jitter_resolution must be > 0, got {}", self.jitter_resolution));
        }
        if self.variants.is_empty() {
            return bad("at least one likelihood variant is required".into());
        }
        if let Some((a, b)) = self.session {
            if !(b > a) {
                return bad(format!("session end {b} must exceed start {a}"));
            }
        }
        Ok(())
    }
}

/// Jittered times and, for each event, whether the next event shared its clock bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterOutcome {
    pub times: Vec<f64>,
    pub shared_with_next: Vec<bool>,
}

fn bucket_of(t: f64, resolution: f64) -> i64 {
    // tolerate decimal round-off on stamps that sit exactly on a bucket edge
    (t / resolution + 1e-6).floor() as i64
}

/// Spreads every event uniformly within its clock bucket. Within a bucket the
/// draws are sorted and assigned in file order, so the recorded order is kept.
pub fn jitter_timestamps(times: &[f64], resolution: f64, seed: u64) -> JitterOutcome {
    let mut rng = rng_from_seed(seed);
    let buckets: Vec<i64> = times.iter().map(|&t| bucket_of(t, resolution)).collect();
    let mut out = Vec::with_capacity(times.len());
    let mut i = 0;
    while i < times.len() {
        let j = i + buckets[i..].iter().take_while(|&&b| b == buckets[i]).count();
        let mut u: Vec<f64> = (i..j).map(|_| rng.random::<f64>()).collect();
        u.sort_by(f64::total_cmp);
        out.extend(u.iter().map(|x| (buckets[i] as f64 + x) * resolution));
        i = j;
    }
    for k in 1..out.len() {
        if out[k] <= out[k - 1] {
            out[k] = out[k - 1].next_up();
        }
    }
    let shared_with_next = (0..times.len()).map(|k| k + 1 < times.len() && buckets[k] == buckets[k + 1]).collect();
    JitterOutcome { times: out, shared_with_next }
}

/// Rows whose price differs from the previous row.
fn price_changes(raw: RawEvents) -> Result<RawEvents> {
    let prices = raw
        .prices
        .as_ref()
        .ok_or_else(|| HawkesError::Config("change_filter needs a `price` column".into()))?;
    let keep: Vec<usize> = (1..raw.len()).filter(|&i| prices[i] != prices[i - 1]).collect();
    Ok(RawEvents {
        times: keep.iter().map(|&i| raw.times[i]).collect(),
        components: raw.components.as_ref().map(|c| keep.iter().map(|&i| c[i]).collect()),
        prices: Some(keep.iter().map(|&i| prices[i]).collect()),
    })
}

/// `1h`, `15m`, `45s`.
pub fn window_label(seconds: f64) -> String {
    if seconds % 3600.0 == 0.0 {
        format!("{}h", seconds / 3600.0)
    } else if seconds % 60.0 == 0.0 {
        format!("{}m", seconds / 60.0)
    } else {
        format!("{seconds}s")
    }
}

/// One fit on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub window: String,
    pub index: usize,
    pub start: f64,
    pub terms: usize,
    pub direction: Direction,
    pub variant: LikelihoodVariant,
    pub events: usize,
    pub converged: bool,
    pub endogeneity: f64,
    pub loglik: f64,
    pub aic: f64,
    pub p_ks: f64,
    pub p_lb: f64,
    pub model: HawkesModel,
}

/// Averages over the windows of one size, for one `(P, direction, variant)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: String,
    pub window_seconds: f64,
    pub terms: usize,
    pub direction: Direction,
    pub variant: LikelihoodVariant,
    /// Windows averaged (converged fits only).
    pub windows: usize,
    pub nonconverged: usize,
    pub n: f64,
    pub p_ks: f64,
    pub p_lb: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Mean events per window.
    pub events: f64,
}

impl WindowRow {
    pub fn key(&self) -> String {
        format!("{}/P{}/{}", self.window, self.terms, self.variant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub rows: Vec<WindowRow>,
    pub fits: Vec<WindowFit>,
    pub verdict: Option<Verdict>,
    /// Events left after cleaning.
    pub events: usize,
    /// Windows dropped for having too few events, per window size.
    pub discarded: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

impl WindowReport {
    pub fn rows_for(&self, d: Direction) -> Vec<&WindowRow> {
        self.rows.iter().filter(|r| r.direction == d).collect()
    }

    /// Mean AIC over the converged rows with `terms` exponentials and direction `d`.
    pub fn mean_aic(&self, terms: usize, d: Direction) -> Option<f64> {
        let v: Vec<f64> =
            self.rows.iter().filter(|r| r.terms == terms && r.direction == d && r.windows > 0).map(|r| r.aic).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

struct Window {
    size: usize,
    index: usize,
    start: f64,
    series: EventSeries,
    shared: Vec<bool>,
}

/// Jitter, split into non-overlapping windows, fit every `(P, variant)` in
/// both directions and average per window size.
pub fn empirical_pipeline(raw: RawEvents, cfg: &EmpiricalConfig, exec: &Executor) -> Result<WindowReport> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let raw = if cfg.change_filter { price_changes(raw)? } else { raw };
    if raw.components.as_ref().is_some_and(|c| c.iter().any(|&m| m > 0)) {
        return Err(HawkesError::InvalidSeries("windowed fits take a single component".into()));
    }
    if raw.is_empty() {
        warnings.push("no usable events".into());
        return Ok(WindowReport { rows: Vec::new(), fits: Vec::new(), verdict: None, events: 0, discarded: Vec::new(), warnings });
    }
    let jit = jitter_timestamps(&raw.times, cfg.jitter_resolution, derive_seed(cfg.seed, JITTER_STREAM));
    let (origin, end) = cfg.session.unwrap_or((0.0, *jit.times.last().expect("non-empty")));

    let mut windows = Vec::new();
    let mut discarded = Vec::new();
    for (size, &w) in cfg.windows.iter().enumerate() {
        let count = ((end - origin) / w + 1e-9).floor() as usize;
        let mut dropped = 0;
        for k in 0..count {
            let start = origin + k as f64 * w;
            let lo = jit.times.partition_point(|&t| t < start);
            let hi = jit.times.partition_point(|&t| t < start + w);
            if hi - lo <= cfg.min_events {
                dropped += 1;
                continue;
            }
            let times: Vec<f64> = jit.times[lo..hi].iter().map(|&t| t - start).collect();
            let horizon = *times.last().expect("non-empty window");
            let mut shared = jit.shared_with_next[lo..hi].to_vec();
            *shared.last_mut().expect("non-empty window") = false;
            windows.push(Window { size, index: k, start, series: EventSeries::new(times, horizon)?, shared });
        }
        discarded.push((window_label(w), dropped));
    }
    if windows.is_empty() {
        warnings.push(format!("no window holds more than {} events", cfg.min_events));
    }

    let per_window = exec.map(&windows, |w| fit_window(w, cfg));
    let mut fits = Vec::new();
    for (w, res) in windows.iter().zip(per_window) {
        match res {
            Ok(mut v) => fits.append(&mut v),
            Err(e) => warnings.push(format!(
                "window {} #{} skipped: {e}",
                window_label(cfg.windows[w.size]),
                w.index
            )),
        }
    }

    let mut rows = Vec::new();
    for &size in &cfg.windows {
        let label = window_label(size);
        for &terms in &cfg.terms {
            for d in Direction::BOTH {
                for &variant in &cfg.variants {
                    let group: Vec<&WindowFit> = fits
                        .iter()
                        .filter(|f| f.window == label && f.terms == terms && f.direction == d && f.variant == variant)
                        .collect();
                    if group.is_empty() {
                        continue;
                    }
                    let ok: Vec<&&WindowFit> = group.iter().filter(|f| f.converged).collect();
                    let mean = |g: fn(&WindowFit) -> f64| {
                        if ok.is_empty() {
                            f64::NAN
                        } else {
                            ok.iter().map(|f| g(f)).sum::<f64>() / ok.len() as f64
                        }
                    };
                    rows.push(WindowRow {
                        window: label.clone(),
                        window_seconds: size,
                        terms,
                        direction: d,
                        variant,
                        windows: ok.len(),
                        nonconverged: group.len() - ok.len(),
                        n: mean(|f| f.endogeneity),
                        p_ks: mean(|f| f.p_ks),
                        p_lb: mean(|f| f.p_lb),
                        loglik: mean(|f| f.loglik),
                        aic: mean(|f| f.aic),
                        events: mean(|f| f.events as f64),
                    });
                }
            }
        }
    }

    let score = |d: Direction| -> Vec<ArrowScore> {
        rows.iter()
            .filter(|r| r.direction == d)
            .map(|r| ArrowScore { key: r.key(), p_ks: r.p_ks, loglik: r.loglik })
            .collect()
    };
    let verdict = if rows.is_empty() { None } else { Some(arrow_verdict(&score(Direction::Forward), &score(Direction::Backward))?) };
    Ok(WindowReport { rows, fits, verdict, events: raw.len(), discarded, warnings })
}

fn fit_window(w: &Window, cfg: &EmpiricalConfig) -> Result<Vec<WindowFit>> {
    let label = window_label(cfg.windows[w.size]);
    let forward = &w.series;
    let backward = forward.reversed();
    let n = forward.len();
    // residual j closes at event j + 1; its lag-1 partner closes at event j + 2
    let mask_f: Vec<bool> = (0..n - 1).map(|j| w.shared[j + 1]).collect();
    let mask_b: Vec<bool> = (0..n - 1).map(|j| j + 2 < n && w.shared[n - 3 - j]).collect();

    let mut out = Vec::new();
    for &terms in &cfg.terms {
        for &variant in &cfg.variants {
            let options = FitOptions::default().with_variant(variant).with_optimizer(cfg.optimizer);
            let init = default_sum_exp_init(forward, terms)?;
            let fit_f = mle(forward, FitFamily::SumExp { terms }, &init, &options)?;
            // the backward fit starts from the forward estimate
            let fit_b = mle(&backward, FitFamily::SumExp { terms }, &fit_f.model, &options)?;
            for (d, s, fit, mask) in [
                (Direction::Forward, forward, &fit_f, &mask_f),
                (Direction::Backward, &backward, &fit_b, &mask_b),
            ] {
                let g = assess(&fit.model, s, variant, fit.loglik, cfg.lags, cfg.jitter_aware_lb.then_some(&mask[..]))?;
                out.push(WindowFit {
                    window: label.clone(),
                    index: w.index,
                    start: w.start,
                    terms,
                    direction: d,
                    variant,
                    events: s.len(),
                    converged: fit.converged,
                    endogeneity: fit.spectral_radius,
                    loglik: fit.loglik,
                    aic: g.aic,
                    p_ks: g.p_ks,
                    p_lb: g.p_lb,
                    model: fit.model.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Table rows as CSV: the row keys followed by `window,n,pKS,pLB,logL,AIC,N`.
pub fn table_rows_csv(rows: &[WindowRow]) -> String {
    let mut s = String::from("P,direction,variant,window,n,pKS,pLB,logL,AIC,N\n");
    for r in rows {
        s += &format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.2},{:.2},{:.1}\n",
            r.terms, r.direction, r.variant, r.window, r.n, r.p_ks, r.p_lb, r.loglik, r.aic, r.events
        );
    }
    s
}

/// Goodness-of-fit summary of one matched fit, for [`arrow_verdict`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowScore {
    pub key: String,
    pub p_ks: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ForwardFavoured,
    BackwardFavoured,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ForwardFavoured => "forward-favoured",
            Verdict::BackwardFavoured => "backward-favoured",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Forward-favoured when the forward mean KS p-value and mean log-likelihood
/// both exceed the backward ones, backward-favoured when both fall short,
/// indeterminate otherwise (including exact ties). Entries with a non-finite
/// score are left out of both means.
pub fn arrow_verdict(forward: &[ArrowScore], backward: &[ArrowScore]) -> Result<Verdict> {
    if forward.len() != backward.len() || forward.iter().zip(backward).any(|(f, b)| f.key != b.key) {
        return Err(HawkesError::Mismatch("forward and backward fits cover different windows".into()));
    }
    let pairs: Vec<(&ArrowScore, &ArrowScore)> = forward
        .iter()
        .zip(backward)
        .filter(|(f, b)| [f.p_ks, f.loglik, b.p_ks, b.loglik].iter().all(|x| x.is_finite()))
        .collect();
    if pairs.is_empty() {
        return Ok(Verdict::Indeterminate);
    }
    let k = pairs.len() as f64;
    let mean = |g: fn(&(&ArrowScore, &ArrowScore)) -> f64| pairs.iter().map(g).sum::<f64>() / k;
    let dp = mean(|p| p.0.p_ks) - mean(|p| p.1.p_ks);
    let dl = mean(|p| p.0.loglik) - mean(|p| p.1.loglik);
    Ok(if dp > 0.0 && dl > 0.0 {
        Verdict::ForwardFavoured
    } else if dp < 0.0 && dl < 0.0 {
        Verdict::BackwardFavoured
    } else {
        Verdict::Indeterminate
    })
}

/// Parameters of the synthetic trading session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketDayConfig {
    pub baseline: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Session length in seconds.
    pub duration: f64,
    /// Clock resolution of the recorded stamps.
    pub resolution: f64,
}

impl Default for MarketDayConfig {
    fn default() -> Self {
        Self { baseline: 0.52, alphas: vec![3.5, 0.025], betas: vec![10.0, 0.1], duration: 23_400.0, resolution: 1e-3 }
    }
}

/// Simulated session with a two-exponential kernel, stamps truncated to the
/// clock resolution (so several events may share a stamp).
pub fn synthetic_market_day(cfg: &MarketDayConfig, seed: u64) -> Result<RawEvents> {
    let model = HawkesModel::univariate(cfg.baseline, Kernel::sum_exp(&cfg.alphas, &cfg.betas)?)?;
    let s = simulate(&model, cfg.duration, seed)?;
    let times = s.times().iter().map(|&t| (t / cfg.resolution).floor() * cfg.resolution).collect();
    Ok(RawEvents { times, components: None, prices: None })
}

/// Writes the table CSV to `path`.
pub fn write_table(path: &Path, rows: &[WindowRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(table_rows_csv(rows).as_bytes())?;
    Ok(())
}

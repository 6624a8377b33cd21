//! Kernel families and model algebra.
//!
//! A [`HawkesModel`] holds a baseline vector and an `M x M` matrix of kernels,
//! where entry `(m, n)` is the excitation of component `m` caused by events of
//! component `n`. Everything here is immutable once constructed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// One term `alpha * exp(-beta * t)` of an exponential-family kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub alpha: f64,
    pub beta: f64,
}

/// Sum of exponentials. A single term is the plain exponential kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SumExp {
    terms: Vec<ExpTerm>,
}

impl SumExp {
    pub fn new(alphas: &[f64], betas: &[f64]) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != betas.len() {
            return Err(HawkesError::InvalidParameter(format!(
                "sum-of-exponentials needs P >= 1 matching weights and decays, got {} and {}",
                alphas.len(),
                betas.len()
            )));
        }
        let mut terms = Vec::with_capacity(alphas.len());
        for (&alpha, &beta) in alphas.iter().zip(betas) {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(HawkesError::InvalidParameter(format!(
                    "kernel weight must be finite and >= 0, got {alpha}"
                )));
            }
            if !(beta.is_finite() && beta > 0.0) {
                return Err(HawkesError::InvalidParameter(format!(
                    "kernel decay must be finite and > 0, got {beta}"
                )));
            }
            terms.push(ExpTerm { alpha, beta });
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `u * (t + v)^w` with `w < -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl PowerLaw {
    pub fn new(u: f64, v: f64, w: f64) -> Result<Self> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "power-law amplitude must be finite and >= 0, got {u}"
            )));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "power-law shift must be finite and > 0, got {v}"
            )));
        }
        if !w.is_finite() || w >= -1.0 {
            return Err(HawkesError::Divergent(w));
        }
        Ok(Self { u, v, w })
    }

    /// Shift `v` that gives endogeneity `n` for fixed `u` and `w`.
    pub fn shift_for_endogeneity(u: f64, w: f64, n: f64) -> Result<f64> {
        if w >= -1.0 {
            return Err(HawkesError::Divergent(w));
        }
        if !(u > 0.0 && n > 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "need u > 0 and n > 0, got u = {u}, n = {n}"
            )));
        }
        // n = -u/(w+1) * v^(w+1)
        Ok((-n * (w + 1.0) / u).powf(1.0 / (w + 1.0)))
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.u * fast_pow(t + self.v, self.w)
    }

    #[inline]
    pub fn integral(&self, x: f64) -> f64 {
        let e = self.w + 1.0;
        self.u / e * (fast_pow(x + self.v, e) - fast_pow(self.v, e))
    }

    pub fn endogeneity(&self) -> f64 {
        let e = self.w + 1.0;
        -self.u / e * fast_pow(self.v, e)
    }
}

/// `x^w`, using `powi`/`sqrt` when `2w` is a small integer (the common
/// half-integer exponents) and `powf` otherwise.
#[inline]
pub(crate) fn fast_pow(x: f64, w: f64) -> f64 {
    let w2 = 2.0 * w;
    if w2.fract() == 0.0 && w2.abs() < 128.0 {
        if w.fract() == 0.0 {
            x.powi(w as i32)
        } else {
            x.powi((w - 0.5) as i32) * x.sqrt()
        }
    } else {
        x.powf(w)
    }
}

/// `sum_k (t - h_k + v)^w` over history times `h_k < t`.
///
/// Half-integer negative exponents (the common case) go through a
/// branch-free loop with four independent accumulators so the compiler can
/// vectorise it; the summation order is fixed, so results are deterministic.
pub(crate) fn power_history_sum(history: &[f64], t: f64, v: f64, w: f64) -> f64 {
    let w2 = 2.0 * w;
    if w < 0.0 && w2.fract() == 0.0 && (w2 as i64) % 2 != 0 {
        match (-w - 0.5) as i32 {
            0 => half_sum::<0>(history, t + v),
            1 => half_sum::<1>(history, t + v),
            2 => half_sum::<2>(history, t + v),
            3 => half_sum::<3>(history, t + v),
            4 => half_sum::<4>(history, t + v),
            _ => history.iter().map(|&h| fast_pow(t - h + v, w)).sum(),
        }
    } else {
        history.iter().map(|&h| fast_pow(t - h + v, w)).sum()
    }
}

/// `sum_k 1 / (x_k^K sqrt(x_k))` with `x_k = shifted - h_k`.
#[inline(always)]
fn half_sum<const K: i32>(history: &[f64], shifted: f64) -> f64 {
    let term = |h: f64| {
        let x = shifted - h;
        1.0 / (x.powi(K) * x.sqrt())
    };
    let mut acc = [0.0f64; 4];
    let chunks = history.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        for l in 0..4 {
            acc[l] += term(c[l]);
        }
    }
    let mut tail = 0.0;
    for &h in rest {
        tail += term(h);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Excitation kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelDoc", into = "KernelDoc")]
pub enum Kernel {
    SumExp(SumExp),
    PowerLaw(PowerLaw),
}

impl Kernel {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        Ok(Kernel::SumExp(SumExp::new(&[alpha], &[beta])?))
    }

    pub fn sum_exp(alphas: &[f64], betas: &[f64]) -> Result<Self> {
        Ok(Kernel::SumExp(SumExp::new(alphas, betas)?))
    }

    pub fn power_law(u: f64, v: f64, w: f64) -> Result<Self> {
        Ok(Kernel::PowerLaw(PowerLaw::new(u, v, w)?))
    }

    /// Kernel value `K(t)` for `t >= 0`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(HawkesError::NegativeTime(t));
        }
        Ok(self.eval(t))
    }

    /// Unchecked evaluation, caller guarantees `t >= 0`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Kernel::SumExp(s) => s.terms.iter().map(|e| e.alpha * (-e.beta * t).exp()).sum(),
            Kernel::PowerLaw(p) => p.value(t),
        }
    }

    /// `sum_k K(t - h_k)` over history times `h_k < t`.
    #[inline]
    pub(crate) fn history_sum(&self, history: &[f64], t: f64) -> f64 {
        match self {
            Kernel::SumExp(_) => history.iter().map(|&h| self.eval(t - h)).sum(),
            Kernel::PowerLaw(p) => p.u * power_history_sum(history, t, p.v, p.w),
        }
    }

    /// `int_0^x K(s) ds`.
    #[inline]
    pub fn integral(&self, x: f64) -> f64 {
        match self {
            Kernel::SumExp(s) => s
                .terms
                .iter()
                .map(|e| e.alpha / e.beta * -(-e.beta * x).exp_m1())
                .sum(),
            Kernel::PowerLaw(p) => p.integral(x),
        }
    }

    /// `n = int_0^inf K(s) ds`.
    pub fn endogeneity(&self) -> f64 {
        match self {
            Kernel::SumExp(s) => s.terms.iter().map(|e| e.alpha / e.beta).sum(),
            Kernel::PowerLaw(p) => p.endogeneity(),
        }
    }

    pub fn is_exponential_family(&self) -> bool {
        matches!(self, Kernel::SumExp(_))
    }

    pub fn as_sum_exp(&self) -> Option<&SumExp> {
        match self {
            Kernel::SumExp(s) => Some(s),
            Kernel::PowerLaw(_) => None,
        }
    }

    /// Number of free parameters.
    pub fn parameter_count(&self) -> usize {
        match self {
            Kernel::SumExp(s) => 2 * s.len(),
            Kernel::PowerLaw(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
enum KernelDoc {
    #[serde(rename = "exp")]
    Exp { alpha: f64, beta: f64 },
    #[serde(rename = "sumexp")]
    SumExp { alpha: Vec<f64>, beta: Vec<f64> },
    #[serde(rename = "powerlaw")]
    PowerLaw { u: f64, v: f64, w: f64 },
}

impl TryFrom<KernelDoc> for Kernel {
    type Error = HawkesError;

    fn try_from(doc: KernelDoc) -> Result<Self> {
        match doc {
            KernelDoc::Exp { alpha, beta } => Kernel::exponential(alpha, beta),
            KernelDoc::SumExp { alpha, beta } => Kernel::sum_exp(&alpha, &beta),
            KernelDoc::PowerLaw { u, v, w } => Kernel::power_law(u, v, w),
        }
    }
}

impl From<Kernel> for KernelDoc {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::SumExp(s) if s.len() == 1 => KernelDoc::Exp {
                alpha: s.terms[0].alpha,
                beta: s.terms[0].beta,
            },
            Kernel::SumExp(s) => KernelDoc::SumExp {
                alpha: s.terms.iter().map(|e| e.alpha).collect(),
                beta: s.terms.iter().map(|e| e.beta).collect(),
            },
            Kernel::PowerLaw(p) => KernelDoc::PowerLaw { u: p.u, v: p.v, w: p.w },
        }
    }
}

/// `Gamma[m][n] = int_0^inf G^{mn}(u) du`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMatrix {
    entries: DMatrix<f64>,
}

const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_MAX: usize = 100_000;

impl BranchingMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(HawkesError::InvalidParameter(
                "branching matrix must be square and non-empty".into(),
            ));
        }
        if rows.iter().flatten().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(HawkesError::InvalidParameter(
                "branching matrix entries must be finite and >= 0".into(),
            ));
        }
        Ok(Self {
            entries: DMatrix::from_fn(m, m, |i, j| rows[i][j]),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[(m, n)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Largest eigenvalue modulus. Closed form for `M <= 2`, power iteration
    /// with Collatz-Wielandt bounds on `Gamma + I` otherwise.
    pub fn spectral_radius(&self) -> f64 {
        match self.dim() {
            1 => self.entries[(0, 0)],
            2 => {
                let (a, b, c, d) = (
                    self.entries[(0, 0)],
                    self.entries[(0, 1)],
                    self.entries[(1, 0)],
                    self.entries[(1, 1)],
                );
                let half_tr = 0.5 * (a + d);
                let half_diff = 0.5 * (a - d);
                half_tr + (half_diff * half_diff + b * c).sqrt()
            }
            _ => self.spectral_radius_power_iteration(),
        }
    }

    /// Power iteration path, also used for `M <= 2` in consistency tests.
    pub fn spectral_radius_power_iteration(&self) -> f64 {
        let m = self.dim();
        let shifted = &self.entries + DMatrix::identity(m, m);
        let mut x = DVector::from_element(m, 1.0);
        let mut estimate = f64::INFINITY;
        for _ in 0..POWER_ITER_MAX {
            let y = &shifted * &x;
            let mut lo = f64::INFINITY;
            let mut hi = 0.0_f64;
            for i in 0..m {
                let r = y[i] / x[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            estimate = 0.5 * (lo + hi);
            if hi - lo <= POWER_ITER_TOL * hi.max(1.0) {
                break;
            }
            let norm = y.max();
            x = y / norm;
        }
        estimate - 1.0
    }
}

/// Multivariate Hawkes model with constant baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct HawkesModel {
    baseline: Vec<f64>,
    kernels: Vec<Vec<Kernel>>,
}

impl HawkesModel {
    pub fn new(baseline: Vec<f64>, kernels: Vec<Vec<Kernel>>) -> Result<Self> {
        let m = baseline.len();
        if m == 0 {
            return Err(HawkesError::InvalidParameter("dimension must be >= 1".into()));
        }
        if kernels.len() != m || kernels.iter().any(|row| row.len() != m) {
            return Err(HawkesError::InvalidParameter(format!(
                "kernel matrix must be {m}x{m}"
            )));
        }
        if let Some(bad) = baseline.iter().find(|&&b| !(b.is_finite() && b > 0.0)) {
            return Err(HawkesError::InvalidParameter(format!(
                "baseline intensity must be finite and > 0, got {bad}"
            )));
        }
        Ok(Self { baseline, kernels })
    }

    pub fn univariate(baseline: f64, kernel: Kernel) -> Result<Self> {
        Self::new(vec![baseline], vec![vec![kernel]])
    }

    /// Bivariate exponential model with excitation matrix
    /// `[[alpha_self, alpha_cross], [alpha_cross, alpha_self]]`, shared decay and baseline.
    pub fn symmetric(baseline: f64, alpha_self: f64, alpha_cross: f64, beta: f64) -> Result<Self> {
        Self::asymmetric(baseline, alpha_self, alpha_cross, alpha_cross, beta)
    }

    /// Bivariate exponential model with excitation matrix
    /// `[[alpha_self, alpha_12], [alpha_21, alpha_self]]`.
    pub fn asymmetric(
        baseline: f64,
        alpha_self: f64,
        alpha_12: f64,
        alpha_21: f64,
        beta: f64,
    ) -> Result<Self> {
        let k = |a| Kernel::exponential(a, beta);
        Self::new(
            vec![baseline, baseline],
            vec![vec![k(alpha_self)?, k(alpha_12)?], vec![k(alpha_21)?, k(alpha_self)?]],
        )
    }

    pub fn dimension(&self) -> usize {
        self.baseline.len()
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn kernel(&self, m: usize, n: usize) -> &Kernel {
        &self.kernels[m][n]
    }

    pub fn kernels(&self) -> &[Vec<Kernel>] {
        &self.kernels
    }

    pub fn is_exponential_family(&self) -> bool {
        self.kernels.iter().flatten().all(Kernel::is_exponential_family)
    }

    pub fn parameter_count(&self) -> usize {
        self.dimension() + self.kernels.iter().flatten().map(Kernel::parameter_count).sum::<usize>()
    }

    pub fn branching_matrix(&self) -> BranchingMatrix {
        let rows: Vec<Vec<f64>> = self
            .kernels
            .iter()
            .map(|row| row.iter().map(Kernel::endogeneity).collect())
            .collect();
        BranchingMatrix::from_rows(&rows).expect("kernel integrals are finite and non-negative")
    }

    pub fn spectral_radius(&self) -> f64 {
        self.branching_matrix().spectral_radius()
    }

    /// Univariate endogeneity (equals the spectral radius for `M = 1`).
    pub fn endogeneity(&self) -> f64 {
        self.spectral_radius()
    }

    pub fn check_stationary(&self) -> Result<f64> {
        let rho = self.spectral_radius();
        if rho < 1.0 {
            Ok(rho)
        } else {
            Err(HawkesError::NonStationary(rho))
        }
    }

    /// Stationary mean intensity `mu = (I - Gamma)^{-1} lambda_0`.
    pub fn mean_intensity(&self) -> Result<Vec<f64>> {
        self.check_stationary()?;
        let m = self.dimension();
        if m == 1 {
            let n = self.kernels[0][0].endogeneity();
            return Ok(vec![self.baseline[0] / (1.0 - n)]);
        }
        let gamma = self.branching_matrix();
        let a = DMatrix::identity(m, m) - gamma.matrix();
        let b = DVector::from_column_slice(&self.baseline);
        let mu = a
            .lu()
            .solve(&b)
            .ok_or_else(|| HawkesError::NonStationary(gamma.spectral_radius()))?;
        Ok(mu.iter().copied().collect())
    }

    /// Horizon `T` with `E[N_T] = n_target` summed over components.
    pub fn horizon_for_expected_events(&self, n_target: f64) -> Result<f64> {
        if !(n_target > 0.0 && n_target.is_finite()) {
            return Err(HawkesError::InvalidParameter(format!(
                "expected event count must be > 0, got {n_target}"
            )));
        }
        let total: f64 = self.mean_intensity()?.iter().sum();
        Ok(n_target / total)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    dimension: usize,
    baseline: Vec<f64>,
    kernels: Vec<Vec<Kernel>>,
}

impl TryFrom<ModelDoc> for HawkesModel {
    type Error = HawkesError;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.dimension != doc.baseline.len() {
            return Err(HawkesError::InvalidParameter(format!(
                "dimension {} does not match baseline length {}",
                doc.dimension,
                doc.baseline.len()
            )));
        }
        HawkesModel::new(doc.baseline, doc.kernels)
    }
}

impl From<HawkesModel> for ModelDoc {
    fn from(m: HawkesModel) -> Self {
        ModelDoc {
            dimension: m.baseline.len(),
            baseline: m.baseline,
            kernels: m.kernels,
        }
    }
}

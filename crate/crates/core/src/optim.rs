//! Derivative-free simplex search and box-constrained limited-memory
//! quasi-Newton minimisation. Both minimise; objectives may return
//! `f64::INFINITY` to mark infeasible points.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Stop when `max f - min f < f_tol * (1 + |f_best|)` ...
    pub f_tol: f64,
    /// ... and every vertex is within `x_tol` of the best one.
    pub x_tol: f64,
    pub max_evaluations: usize,
    /// Initial simplex edge length.
    pub initial_step: f64,
    /// Number of restarts from the best vertex after a converged run.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-8,
            x_tol: 1e-8,
            max_evaluations: 50_000,
            initial_step: 0.1,
            restarts: 1,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Nelder–Mead with the standard coefficients.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut iterations = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    let mut converged = false;
    let mut best_f = f64::INFINITY;
    for _round in 0..=opts.restarts {
        let r = simplex_run(&mut eval, &start, opts, &mut evals, &mut iterations);
        start = r.0;
        best_f = r.1;
        converged = r.2;
        if !converged {
            break;
        }
    }
    let message = if converged {
        "converged".to_string()
    } else if !best_f.is_finite() {
        "no finite objective value found".to_string()
    } else {
        "evaluation budget exhausted".to_string()
    };
    OptimResult { x: start, f: best_f, converged, iterations, evaluations: evals, message }
}

fn simplex_run<E>(
    eval: &mut E,
    x0: &[f64],
    opts: &NelderMeadOptions,
    evals: &mut usize,
    iterations: &mut usize,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let d = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    pts.push(x0.to_vec());
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, evals)).collect();

    loop {
        // order: best first
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let f_best = vals[0];
        let f_worst = vals[d];
        let x_spread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_best.is_finite() && f_worst - f_best < opts.f_tol * (1.0 + f_best.abs()) && x_spread < opts.x_tol {
            return (pts.swap_remove(0), f_best, true);
        }
        if *evals >= opts.max_evaluations {
            return (pts.swap_remove(0), f_best, false);
        }
        *iterations += 1;

        let mut centroid = vec![0.0; d];
        for p in &pts[..d] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[d]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr, evals);
        if fr < vals[0] {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe, evals);
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[d] {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc, evals);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc, evals);
            (xc, fc)
        };
        if fc < vals[d].min(fr) {
            pts[d] = xc;
            vals[d] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=d {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, x)| b + SHRINK * (x - b)).collect();
            vals[i] = eval(&p, evals);
            pts[i] = p;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    /// History length.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the relative decrease `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` falls below this.
    pub f_tol: f64,
    /// Stop when the projected gradient's largest component falls below this.
    pub pg_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 1000,
            f_tol: 1e-13,
            pg_tol: 1e-6,
        }
    }
}

/// Projected L-BFGS on the box `lower <= x <= upper`.
///
/// `fg` returns the objective and its gradient, or `None` for an infeasible
/// point; infeasible trial points are treated as `+inf` by the backtracking
/// line search, so iterates stay feasible whenever `x0` is.
pub fn lbfgs_box<F>(mut fg: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LbfgsOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let d = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..d {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    project(&mut x);
    evals += 1;
    let Some((mut f, mut g)) = fg(&x).filter(|(f, g)| f.is_finite() && g.iter().all(|v| v.is_finite())) else {
        return OptimResult {
            x,
            f: f64::INFINITY,
            converged: false,
            iterations: 0,
            evaluations: evals,
            message: "infeasible starting point".into(),
        };
    };

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut message = String::from("iteration limit reached");
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iterations {
        iterations = it;
        // projected gradient
        let pg = (0..d)
            .map(|i| {
                if (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                    0.0
                } else {
                    g[i]
                }
            })
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if pg < opts.pg_tol {
            converged = true;
            message = "projected gradient below tolerance".into();
            break;
        }

        // variables held at a bound this iteration
        let free: Vec<bool> = (0..d)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let mut dir = two_loop(&g, &s_hist, &y_hist, &free);
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            dir = (0..d).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
            slope = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                converged = true;
                message = "no descent direction".into();
                break;
            }
        }

        // first step of a fresh history: keep it modest
        let mut step = if s_hist.is_empty() {
            let gn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            (1.0 / gn).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            project(&mut xn);
            let dx: f64 = xn.iter().zip(&x).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            evals += 1;
            if let Some((fnew, gnew)) = fg(&xn) {
                if fnew.is_finite() && gnew.iter().all(|v| v.is_finite()) && fnew <= f + 1e-4 * dx.min(0.0) {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if !s_hist.is_empty() {
                s_hist.clear();
                y_hist.clear();
                continue;
            }
            converged = true;
            message = "line search made no progress".into();
            break;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rel = (f - fnew) / f.abs().max(fnew.abs()).max(1.0);
        x = xn;
        f = fnew;
        g = gnew;
        if sy > 1e-12 * y.iter().map(|v| v * v).sum::<f64>().sqrt() * s.iter().map(|v| v * v).sum::<f64>().sqrt() {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        if rel <= opts.f_tol {
            converged = true;
            message = "relative reduction below tolerance".into();
            iterations = it + 1;
            break;
        }
        iterations = it + 1;
    }
    OptimResult { x, f, converged, iterations, evaluations: evals, message }
}

fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], free: &[bool]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(free).filter(|(_, &f)| f).map(|((x, y), _)| x * y).sum()
    };
    let mut q: Vec<f64> = g.iter().zip(free).map(|(v, &f)| if f { *v } else { 0.0 }).collect();
    let k = s_hist.len();
    let mut alphas = vec![0.0; k];
    let mut rhos = vec![0.0; k];
    for i in (0..k).rev() {
        let sy = dot(&s_hist[i], &y_hist[i]);
        if sy <= 0.0 {
            continue;
        }
        rhos[i] = 1.0 / sy;
        alphas[i] = rhos[i] * dot(&s_hist[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
            *qj -= alphas[i] * yj;
        }
    }
    if k > 0 {
        let sy = dot(&s_hist[k - 1], &y_hist[k - 1]);
        let yy = dot(&y_hist[k - 1], &y_hist[k - 1]);
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for i in 0..k {
        if rhos[i] == 0.0 {
            continue;
        }
        let beta = rhos[i] * dot(&y_hist[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
            *qj += (alphas[i] - beta) * sj;
        }
    }
    q.iter()
        .zip(free)
        .map(|(v, &f)| if f { -v } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &[f64]) -> Vec<f64> {
        vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ]
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(r.converged, "{}", r.message);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn nelder_mead_avoids_infeasible_region() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 0.2).powi(2) + x[1] * x[1] };
        let r = nelder_mead(f, &[2.0, 1.0], &NelderMeadOptions::default());
        assert!(r.x[0] >= 0.5 && (r.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn lbfgs_unconstrained_rosenbrock() {
        let lo = [-10.0, -10.0];
        let hi = [10.0, 10.0];
        let r = lbfgs_box(
            |x| Some((rosenbrock(x), rosenbrock_grad(x))),
            &[-1.2, 1.0],
            &lo,
            &hi,
            &LbfgsOptions { pg_tol: 1e-8, f_tol: 0.0, ..Default::default() },
        );
        assert!(r.converged, "{}", r.message);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn lbfgs_respects_bounds() {
        // minimum of (x-3)^2 + (y+1)^2 on [0,2] x [0,2] is (2, 0)
        let r = lbfgs_box(
            |x| Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)])),
            &[1.0, 1.0],
            &[0.0, 0.0],
            &[2.0, 2.0],
            &LbfgsOptions::default(),
        );
        assert!(r.converged);
        assert_eq!(r.x, vec![2.0, 0.0]);
    }

    #[test]
    fn lbfgs_treats_none_as_infeasible() {
        // feasible only for x >= 1; unconstrained minimum at 0
        let r = lbfgs_box(
            |x| (x[0] >= 1.0).then(|| (x[0] * x[0], vec![2.0 * x[0]])),
            &[3.0],
            &[-10.0],
            &[10.0],
            &LbfgsOptions::default(),
        );
        assert!(r.x[0] >= 1.0 && r.x[0] < 1.01, "{:?}", r.x);
    }
}

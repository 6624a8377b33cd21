use std::path::{Path, PathBuf};

use hawkes_core::estimate::{default_sum_exp_init, mle, mle_multivariate, FitFamily, FitOptions, Optimizer, Structure};
use hawkes_core::gof::assess;
use hawkes_core::io::{meta_path, read_events, read_raw_events, write_events, write_raw_events, EventsMeta, RawEvents};
use hawkes_core::pipeline::{
    arrow_verdict, empirical_pipeline, run_sweep_with, write_sweep_outputs, write_table, ArrowScore, Direction,
    EmpiricalConfig, SweepConfig,
};
use hawkes_core::{
    reverse, simulate, simulate_stationary, EventSeries, Executor, HawkesModel, Kernel, LikelihoodVariant, PowerLaw,
};
use serde_json::{json, Value};

use crate::manifest::ManifestBuilder;
use crate::{
    CliError, DirectionArg, EmpiricalArgs, Family, FitArgs, Mode, OptimizerArg, SimulateArgs, StructureArg, SweepArgs,
};

/// Summary line and exit code of a command that ran to completion.
pub struct Outcome {
    pub summary: Value,
    pub code: u8,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, code: 0 }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Syntax and shape problems are configuration errors; parameters that fail
/// model validation are model errors.
pub fn load_model(path: &Path) -> Result<HawkesModel, CliError> {
    let text = read_text(path)?;
    serde_json::from_str::<Value>(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    HawkesModel::from_json(&text).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if msg.contains("invalid parameter") || msg.contains("not integrable") {
            CliError::model(msg)
        } else {
            CliError::config(msg)
        }
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn simulate_cmd(a: &SimulateArgs, exec: &Executor) -> Result<Outcome, CliError> {
    let mut manifest = ManifestBuilder::new("simulate", exec.jobs());
    manifest.input(&a.model);
    let model = load_model(&a.model)?;
    let rho = model.check_stationary()?;
    let horizon = match (a.horizon, a.expected_events) {
        (Some(t), _) if t.is_finite() && t > 0.0 => t,
        (Some(t), _) => return Err(CliError::config(format!("horizon must be finite and > 0, got {t}"))),
        (None, Some(n)) if n.is_finite() && n > 0.0 => model.horizon_for_expected_events(n)?,
        (None, Some(n)) => return Err(CliError::config(format!("expected events must be > 0, got {n}"))),
        (None, None) => unreachable!("clap requires one of the two"),
    };
    create_dir(&parent_dir(&a.out))?;
    eprintln!("simulating {}-dimensional model (spectral radius {rho:.4}) on [0, {horizon}]", model.dimension());
    if let Some(r) = a.resolution {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::config(format!("resolution must be > 0, got {r}")));
        }
    }
    let (series, meta) = if a.burn_in {
        let rec = simulate_stationary(&model, horizon, a.seed)?;
        if rec.seed != Some(a.seed) {
            manifest.warnings.push(format!("burn-in not reached with seed {}; used derived seed {:?}", a.seed, rec.seed));
        }
        let meta = EventsMeta::for_record(&rec);
        (rec.series, meta)
    } else {
        let s = simulate(&model, horizon, a.seed)?;
        let meta = EventsMeta { seed: Some(a.seed), ..EventsMeta::for_series(&s) };
        (s, meta)
    };
    let events = series.len();
    match a.resolution {
        Some(r) => {
            let raw = RawEvents {
                times: series.times().iter().map(|&t| (t / r).floor() * r).collect(),
                components: series.components().map(|c| c.to_vec()),
                prices: None,
            };
            let decimals = (-r.log10()).ceil().max(0.0) as usize;
            write_raw_events(&a.out, &raw, decimals)?;
            std::fs::write(meta_path(&a.out), serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n")
                .map_err(|e| CliError::io(&a.out, e))?;
        }
        None => write_events(&a.out, &series, &meta)?,
    }
    eprintln!("wrote {events} events to {}", a.out.display());

    manifest.config = json!({
        "model": serde_json::to_value(&model).expect("model serializes"),
        "horizon": horizon,
        "expected_events": a.expected_events,
        "burn_in": a.burn_in,
        "resolution": a.resolution,
        "out": a.out.display().to_string(),
    });
    manifest.seed = Some(a.seed);
    manifest.output(&a.out);
    manifest.output(&meta_path(&a.out));
    let mpath = manifest.finish(&parent_dir(&a.out))?;
    Ok(Outcome::ok(json!({
        "command": "simulate",
        "events": events,
        "horizon": horizon,
        "series_horizon": meta.horizon,
        "burn_in_time": meta.burn_in_time,
        "out": a.out.display().to_string(),
        "manifest": mpath.display().to_string(),
    })))
}

/// Starting point for a power-law fit: half the rate endogenous, exponent
/// -2.5, shift at the mean inter-event time.
fn default_power_law_init(series: &EventSeries) -> Result<HawkesModel, CliError> {
    if series.is_empty() {
        return Err(CliError::fit("cannot initialise a fit on an empty series"));
    }
    let rate = series.len() as f64 / series.horizon();
    let (w, v, n) = (-2.5f64, 1.0 / rate, 0.5);
    let u = -n * (w + 1.0) / v.powf(w + 1.0);
    Ok(HawkesModel::univariate(rate * (1.0 - n), Kernel::PowerLaw(PowerLaw::new(u, v, w)?))?)
}

/// Starting point for a multivariate exponential fit: per-component rates
/// halved, endogeneity 0.5 split evenly over sources, one shared decay.
fn default_multivariate_init(series: &EventSeries, dim: usize) -> Result<HawkesModel, CliError> {
    let counts = series.counts(dim);
    let t = series.horizon();
    let rate = series.len() as f64 / t;
    let beta = rate.max(f64::MIN_POSITIVE);
    let alpha = 0.5 / dim as f64 * beta;
    let baseline = counts.iter().map(|&c| (0.5 * c as f64 / t).max(1e-3 * rate)).collect();
    let kernels = (0..dim).map(|_| (0..dim).map(|_| Kernel::exponential(alpha, beta)).collect()).collect::<Result<_, _>>()?;
    Ok(HawkesModel::new(baseline, kernels)?)
}

pub fn fit_cmd(a: &FitArgs, exec: &Executor) -> Result<Outcome, CliError> {
    let mut manifest = ManifestBuilder::new("fit", exec.jobs());
    manifest.input(&a.events);
    let series = read_events(&a.events, a.horizon)?;
    let dim = series.dimension();
    let variant = match a.mode {
        Mode::Standard => LikelihoodVariant::Standard,
        Mode::Modified => LikelihoodVariant::Modified,
    };
    let optimizer = match a.optimizer {
        OptimizerArg::NelderMead => Optimizer::NelderMead,
        OptimizerArg::Lbfgs => Optimizer::Lbfgs,
    };
    let options = FitOptions::default().with_variant(variant).with_optimizer(optimizer);
    let family = match a.family {
        Family::Exp => FitFamily::exponential(),
        Family::Sumexp if a.terms >= 1 => FitFamily::SumExp { terms: a.terms },
        Family::Sumexp => return Err(CliError::config("--P must be at least 1")),
        Family::Powerlaw => FitFamily::PowerLaw,
    };
    if dim > 1 && a.family != Family::Exp {
        return Err(CliError::config("labelled files support only the exponential family"));
    }
    let init = match &a.init {
        Some(p) => {
            manifest.input(p);
            load_model(p)?
        }
        None if dim > 1 => default_multivariate_init(&series, dim)?,
        None => match family {
            FitFamily::PowerLaw => default_power_law_init(&series)?,
            FitFamily::SumExp { terms } => default_sum_exp_init(&series, terms)?,
        },
    };
    let structure = match a.structure {
        StructureArg::General => Structure::General,
        StructureArg::Symmetric => Structure::Symmetric,
        StructureArg::Asymmetric => Structure::Asymmetric,
    };
    let directions: &[Direction] = match a.direction {
        DirectionArg::Forward => &[Direction::Forward],
        DirectionArg::Backward => &[Direction::Backward],
        DirectionArg::Both => &Direction::BOTH,
    };
    create_dir(&a.out)?;

    let mut start = init.clone();
    let mut summaries = Vec::new();
    let mut scores = Vec::new();
    let mut nonconverged = Vec::new();
    for &d in directions {
        let s = if d == Direction::Forward { series.clone() } else { reverse(&series) };
        eprintln!("fitting {d} series ({} events, horizon {})", s.len(), s.horizon());
        let fit = if dim > 1 { mle_multivariate(&s, structure, &start, &options)? } else { mle(&s, family, &start, &options)? };
        let gof = assess(&fit.model, &s, variant, fit.loglik, None, None)?;
        eprintln!(
            "  {d}: logL {:.4}, spectral radius {:.4}, pKS {:.4}, pLB {:.4}, AIC {:.2}{}",
            fit.loglik,
            fit.spectral_radius,
            gof.p_ks,
            gof.p_lb,
            gof.aic,
            if fit.converged { "" } else { " (not converged)" }
        );
        if !fit.converged {
            nonconverged.push(d.to_string());
        }
        let path = a.out.join(format!("fit_{d}.json"));
        let doc = json!({ "direction": d, "events": s.len(), "horizon": s.horizon(), "fit": fit, "gof": gof });
        std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("fit serializes") + "\n")
            .map_err(|e| CliError::io(&path, e))?;
        manifest.output(&path);
        scores.push(ArrowScore { key: "series".into(), p_ks: gof.p_ks, loglik: fit.loglik });
        summaries.push(json!({
            "direction": d,
            "loglik": fit.loglik,
            "spectral_radius": fit.spectral_radius,
            "p_ks": gof.p_ks,
            "p_lb": gof.p_lb,
            "aic": gof.aic,
            "converged": fit.converged,
        }));
        // the backward fit starts from the forward estimate
        start = fit.model;
    }
    let verdict = if scores.len() == 2 {
        let v = arrow_verdict(&scores[..1], &scores[1..])?;
        eprintln!("verdict: {v}");
        Some(v)
    } else {
        None
    };
    if !nonconverged.is_empty() {
        manifest.warnings.push(format!("fits did not converge: {}", nonconverged.join(", ")));
    }
    manifest.config = json!({
        "events": a.events.display().to_string(),
        "family": format!("{:?}", a.family).to_lowercase(),
        "terms": a.terms,
        "mode": variant,
        "direction": format!("{:?}", a.direction).to_lowercase(),
        "optimizer": optimizer,
        "structure": if dim > 1 { Some(structure) } else { None },
        "horizon": series.horizon(),
        "init": serde_json::to_value(&init).expect("model serializes"),
        "allow_nonconverged": a.allow_nonconverged,
    });
    let mpath = manifest.finish(&a.out)?;
    let code = if nonconverged.is_empty() || a.allow_nonconverged { 0 } else { 4 };
    if code != 0 {
        eprintln!("error: fit did not converge ({}); pass --allow-nonconverged to accept", nonconverged.join(", "));
    }
    Ok(Outcome {
        summary: json!({
            "command": "fit",
            "events": series.len(),
            "fits": summaries,
            "verdict": verdict,
            "manifest": mpath.display().to_string(),
        }),
        code,
    })
}

pub fn sweep_cmd(a: &SweepArgs, exec: &Executor) -> Result<Outcome, CliError> {
    let mut manifest = ManifestBuilder::new("sweep", exec.jobs());
    manifest.input(&a.config);
    let mut cfg = SweepConfig::from_json(&read_text(&a.config)?)
        .map_err(|e| CliError::config(format!("{}: {e}", a.config.display())))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    create_dir(&a.out_dir)?;
    let total = cfg.levels.len() * cfg.runs;
    eprintln!("sweep `{}`: {} levels x {} runs, ~{} events per run", cfg.name, cfg.levels.len(), cfg.runs, cfg.expected_events);
    let step = (total / 20).max(1);
    let progress = |done: usize, total: usize| {
        if done % step == 0 || done == total {
            eprintln!("  {done}/{total} runs");
        }
    };
    let report = run_sweep_with(&cfg, exec, &progress)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let written = write_sweep_outputs(&report, &cfg, &a.out_dir)?;
    let failed: usize = report.levels.iter().map(|l| l.failed).sum();
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    manifest.seed = Some(cfg.seed);
    manifest.warnings = report.warnings.clone();
    manifest.outputs(written.iter().cloned());
    let mpath = manifest.finish(&a.out_dir)?;
    let headline: Vec<Value> = report
        .levels
        .iter()
        .map(|l| json!({ "level": l.level, "runs": l.runs, "ll_rel_diff": l.ll_rel_diff.mean, "true_backward_wins": l.true_backward_wins }))
        .collect();
    Ok(Outcome::ok(json!({
        "command": "sweep",
        "name": report.name,
        "runs": report.total_runs,
        "failed": failed,
        "levels": headline,
        "outputs": written.len(),
        "manifest": mpath.display().to_string(),
    })))
}

pub fn empirical_cmd(a: &EmpiricalArgs, exec: &Executor) -> Result<Outcome, CliError> {
    let mut manifest = ManifestBuilder::new("empirical", exec.jobs());
    manifest.input(&a.events);
    let cfg = match &a.config {
        Some(p) => {
            manifest.input(p);
            EmpiricalConfig::from_json(&read_text(p)?).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => EmpiricalConfig::default(),
    };
    cfg.validate()?;
    let raw = read_raw_events(&a.events)?;
    create_dir(&a.out_dir)?;
    eprintln!("empirical pipeline on {} rows, windows {:?}, P in {:?}", raw.len(), cfg.windows, cfg.terms);
    let report = empirical_pipeline(raw, &cfg, exec)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let table = a.out_dir.join("window_table.csv");
    write_table(&table, &report.rows)?;
    let json_path = a.out_dir.join("window_report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
        .map_err(|e| CliError::io(&json_path, e))?;
    if let Some(v) = report.verdict {
        eprintln!("verdict: {v}");
    }
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    manifest.seed = Some(cfg.seed);
    manifest.warnings = report.warnings.clone();
    manifest.output(&table);
    manifest.output(&json_path);
    let mpath = manifest.finish(&a.out_dir)?;
    Ok(Outcome::ok(json!({
        "command": "empirical",
        "events": report.events,
        "rows": report.rows.len(),
        "fits": report.fits.len(),
        "verdict": report.verdict,
        "warnings": report.warnings.len(),
        "manifest": mpath.display().to_string(),
    })))
}

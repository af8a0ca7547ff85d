//! The four subcommands. Each returns an [`Output`]; nothing touches the
//! filesystem except reading the input document.

use std::path::PathBuf;

use anyhow::{bail, Context};
use mvdrc_core::tabular::{assumption_margin, solve_fixed_point, Operator, TabularModelSpec};
use mvdrc_core::{
    conventional_lqr, empirical_vs_theoretical, evaluate_gain, synthesize, DroInstance, IterationOptions, LqSystem,
    LyapunovSolution, MomentConvention, RiccatiSolution, RolloutConfig, TildeConvention,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{load_json, ExperimentConfig};
use crate::output::{fmt_float, fmt_vector, Output};

/// Relative slack allowed in `proposed ≤ conventional`.
pub const ORDERING_TOL: f64 = 1e-9;
/// Sup-norm gap tolerated between the two tabular fixed points when the
/// equivalence condition holds.
pub const EQUIVALENCE_TOL: f64 = 1e-6;
/// Fixed-point tolerance for the tabular operators.
pub const TABULAR_TOL: f64 = 1e-12;

/// Command-line overrides applied on top of a config document.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub x0: Vec<Vec<f64>>,
}

impl RunOptions {
    fn experiment(&self) -> anyhow::Result<ExperimentConfig> {
        let Some(path) = &self.config else {
            bail!("--config is required");
        };
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(tol) = self.tol {
            cfg.tolerances.riccati_tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            cfg.tolerances.max_iter = max_iter;
        }
        if !self.x0.is_empty() {
            cfg.x0_list = self.x0.clone();
        }
        if self.out.is_some() {
            cfg.output_path = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn config_name(&self) -> Option<String> {
        self.config.as_ref().map(|p| p.display().to_string())
    }
}

fn base_metadata(command: &str, opts: &RunOptions) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": opts.config_name(),
        "float_format": "{:.16e}",
    })
}

fn merge(mut base: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(b), serde_json::Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn status_of<T>(r: &anyhow::Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e:#}"),
    }
}

struct Figure1Item {
    gamma: f64,
    proposed: anyhow::Result<RiccatiSolution>,
    conventional: anyhow::Result<LyapunovSolution>,
}

pub const FIGURE1_HEADER: [&str; 13] = [
    "gamma",
    "x0_index",
    "x0",
    "proposed_value",
    "conventional_value",
    "gap",
    "proposed_iterations",
    "proposed_residual",
    "lqr_iterations",
    "lqr_residual",
    "lyapunov_iterations",
    "lyapunov_residual",
    "status",
];

/// Worst-case value of the proposed controller against that of the
/// conventional LQR gain, per γ and initial state.
pub fn figure1(opts: &RunOptions) -> anyhow::Result<(Output, Option<PathBuf>)> {
    let cfg = opts.experiment()?;
    let iter = cfg.tolerances.iteration();
    let lqr = conventional_lqr(&cfg.system, iter).context("conventional LQR synthesis");
    let states = cfg.initial_states();

    let items: Vec<Figure1Item> = cfg
        .gamma_sweep
        .par_iter()
        .map(|&gamma| {
            let sys = cfg.system.with_gamma(gamma).map_err(anyhow::Error::from);
            let proposed = sys
                .as_ref()
                .map_err(|e| anyhow::anyhow!("{e:#}"))
                .and_then(|s| synthesize(s, iter).context("proposed synthesis"));
            let conventional = match (&sys, &lqr) {
                (Ok(s), Ok(l)) => evaluate_gain(s, &l.gain, iter).context("conventional evaluation"),
                (Err(e), _) | (_, Err(e)) => Err(anyhow::anyhow!("{e:#}")),
            };
            Figure1Item {
                gamma,
                proposed,
                conventional,
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut iterations = Vec::new();
    let (lqr_it, lqr_res) = lqr
        .as_ref()
        .map_or((None, f64::NAN), |l| (Some(l.iterations), l.residual));
    for item in &items {
        let (p_it, p_res) = item
            .proposed
            .as_ref()
            .map_or((None, f64::NAN), |s| (Some(s.iterations), s.residual));
        let (c_it, c_res) = item
            .conventional
            .as_ref()
            .map_or((None, f64::NAN), |s| (Some(s.iterations), s.residual));
        let status = match (&item.proposed, &item.conventional) {
            (Ok(_), c) => status_of(c),
            (p, _) => status_of(p),
        };
        iterations.push(json!({
            "gamma": item.gamma,
            "proposed_iterations": p_it,
            "lyapunov_iterations": c_it,
        }));
        for (k, x0) in states.iter().enumerate() {
            let x = DVector::from_column_slice(x0);
            let pv = item.proposed.as_ref().map_or(f64::NAN, |s| s.value.evaluate(&x));
            let cv = item.conventional.as_ref().map_or(f64::NAN, |s| s.value.evaluate(&x));
            if status == "ok" && pv > cv + ORDERING_TOL * cv.abs().max(1.0) {
                violations.push(format!(
                    "gamma = {}, x0 #{k}: proposed {pv} > conventional {cv}",
                    item.gamma
                ));
            }
            rows.push(vec![
                fmt_float(item.gamma),
                k.to_string(),
                fmt_vector(x0),
                fmt_float(pv),
                fmt_float(cv),
                fmt_float(cv - pv),
                p_it.map_or(String::new(), |i| i.to_string()),
                fmt_float(p_res),
                lqr_it.map_or(String::new(), |i| i.to_string()),
                fmt_float(lqr_res),
                c_it.map_or(String::new(), |i| i.to_string()),
                fmt_float(c_res),
                status.clone(),
            ]);
        }
    }
    let failed = items
        .iter()
        .filter(|i| i.proposed.is_err() || i.conventional.is_err())
        .count();
    let summary = vec![format!(
        "figure1: {} gammas x {} initial states, {failed} failed, {} ordering violations",
        items.len(),
        states.len(),
        violations.len()
    )];
    let metadata = merge(
        base_metadata("figure1", opts),
        json!({
            "seed": cfg.seed,
            "tolerances": cfg.tolerances,
            "ordering_tol": ORDERING_TOL,
            "lqr_iterations": lqr_it,
            "iterations": iterations,
            "moment_convention": MomentConvention::Gaussian.name(),
            "tilde_convention": TildeConvention::default().as_str(),
            "x0_list": states,
        }),
    );
    let out = Output {
        header: FIGURE1_HEADER.to_vec(),
        rows,
        summary,
        metadata,
        violations,
    };
    Ok((out, cfg.output_path))
}

/// Exact worst case of a finite DRO instance.
pub fn dro(opts: &RunOptions) -> anyhow::Result<Output> {
    let Some(path) = &opts.config else {
        bail!("--config is required");
    };
    let inst: DroInstance = load_json(path)?;
    let wc = inst.worst_case();
    let mv = inst.mean_variance_objective();
    let holds = inst.equality_condition_holds();
    let reference = inst.reference().weights();
    let rows = (0..reference.len())
        .map(|i| {
            vec![
                i.to_string(),
                fmt_float(reference[i]),
                fmt_float(wc.weights[i]),
                fmt_float(inst.costs()[i]),
            ]
        })
        .collect();
    let summary = vec![
        format!("worst-case weights: {:?}", wc.weights),
        format!("dual s*: {}", wc.dual),
        format!("penalized objective: {}", wc.objective),
        format!("mean-variance objective: {mv}"),
        format!("equality condition: {holds} (margin {})", inst.equality_margin()),
    ];
    let metadata = merge(
        base_metadata("dro", opts),
        json!({
            "gamma": inst.gamma(),
            "dual": wc.dual,
            "objective": wc.objective,
            "mean_variance_objective": mv,
            "equality_condition": holds,
            "equality_margin": inst.equality_margin(),
        }),
    );
    Ok(Output {
        header: vec!["atom", "reference_weight", "worst_case_weight", "cost"],
        rows,
        summary,
        metadata,
        violations: Vec::new(),
    })
}

/// Both tabular fixed points and the gap between them.
pub fn bellman(opts: &RunOptions) -> anyhow::Result<Output> {
    let spec = match &opts.config {
        Some(path) => load_json::<TabularModelSpec>(path)?,
        None => TabularModelSpec::default_verification(100.0),
    };
    let model = spec.build().context("invalid tabular model")?;
    let tol = opts.tol.unwrap_or(TABULAR_TOL);
    let max_iter = opts.max_iter.unwrap_or(IterationOptions::default().max_iter);
    let mv = solve_fixed_point(&model, Operator::MeanVariance, tol, max_iter).context("mean-variance fixed point")?;
    let drc = solve_fixed_point(&model, Operator::Drc, tol, max_iter).context("robust fixed point")?;
    let gap = mv.table.sup_distance(&drc.table);
    let margin_mv = assumption_margin(&model, &mv.table)?;
    let margin_drc = assumption_margin(&model, &drc.table)?;
    let condition = margin_mv > 0.0 && margin_drc > 0.0;

    let mut violations = Vec::new();
    if condition && gap > EQUIVALENCE_TOL {
        violations.push(format!(
            "assumption holds (margin {}) but the fixed points differ by {gap}",
            margin_mv.min(margin_drc)
        ));
    }
    let rows = model
        .grid()
        .iter()
        .zip(mv.table.values.iter().zip(&drc.table.values))
        .map(|(x, (m, d))| vec![fmt_float(*x), fmt_float(*m), fmt_float(*d), fmt_float(m - d)])
        .collect();
    let summary = vec![
        format!("sup-norm gap: {gap}"),
        format!("assumption margin: mean-variance {margin_mv}, robust {margin_drc}"),
        format!("iterations: mean-variance {}, robust {}", mv.iterations, drc.iterations),
        if condition {
            format!("equivalence asserted at tolerance {EQUIVALENCE_TOL}")
        } else {
            "assumption violated; equivalence not asserted".into()
        },
    ];
    let metadata = merge(
        base_metadata("bellman", opts),
        json!({
            "gamma": model.gamma(),
            "alpha": model.alpha(),
            "tol": tol,
            "max_iter": max_iter,
            "mean_variance_iterations": mv.iterations,
            "robust_iterations": drc.iterations,
            "mean_variance_last_change": mv.last_change(),
            "robust_last_change": drc.last_change(),
            "sup_gap": gap,
            "assumption_margin_mean_variance": margin_mv,
            "assumption_margin_robust": margin_drc,
            "equivalence_asserted": condition,
            "equivalence_tol": EQUIVALENCE_TOL,
            "moment_convention": "finite",
            "interpolation": "linear, clamped to the grid",
        }),
    );
    Ok(Output {
        header: vec!["state", "mean_variance_value", "robust_value", "difference"],
        rows,
        summary,
        metadata,
        violations,
    })
}

pub const SIMULATE_HEADER: [&str; 13] = [
    "gamma",
    "assumption_fraction",
    "mean_cost",
    "cost_stddev",
    "std_error",
    "bound",
    "within_bound",
    "num_trajectories",
    "horizon",
    "num_samples",
    "riccati_iterations",
    "tail_factor",
    "status",
];

fn simulate_one(
    cfg: &ExperimentConfig,
    gamma: f64,
    x0: &DVector<f64>,
) -> anyhow::Result<(RiccatiSolution, mvdrc_core::RolloutReport, mvdrc_core::BoundComparison)> {
    let sys: LqSystem = cfg.system.with_gamma(gamma)?;
    let sol = synthesize(&sys, cfg.tolerances.iteration()).context("proposed synthesis")?;
    let mut rc = RolloutConfig::new(sys, sol.gain.clone());
    rc.x0 = x0.clone();
    rc.horizon = cfg.simulate.horizon;
    rc.num_samples = cfg.simulate.num_samples;
    rc.num_trajectories = cfg.simulate.num_trajectories;
    rc.seed = cfg.seed;
    let (report, cmp) = empirical_vs_theoretical(&rc, &sol.value)?;
    Ok((sol, report, cmp))
}

/// Closed-loop rollouts of the proposed controller for each γ.
pub fn simulate(opts: &RunOptions) -> anyhow::Result<(Output, Option<PathBuf>)> {
    let cfg = opts.experiment()?;
    let n = cfg.system.state_dim();
    let x0 = match (opts.x0.first(), &cfg.simulate.x0) {
        (Some(x), _) | (None, Some(x)) => DVector::from_column_slice(x),
        (None, None) => DVector::zeros(n),
    };
    if x0.len() != n {
        bail!("initial state has length {}, system has {n} states", x0.len());
    }
    let results: Vec<_> = cfg
        .gamma_sweep
        .par_iter()
        .map(|&g| (g, simulate_one(&cfg, g, &x0)))
        .collect();

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut per_gamma = Vec::new();
    for (gamma, res) in &results {
        let status = status_of(res);
        match res {
            Ok((sol, report, cmp)) => {
                rows.push(vec![
                    fmt_float(*gamma),
                    fmt_float(report.assumption_fraction),
                    fmt_float(report.mean_cost),
                    fmt_float(report.cost_stddev),
                    fmt_float(cmp.std_error),
                    fmt_float(cmp.bound),
                    // a single path has no standard error to compare against
                    if report.discounted_costs.len() > 1 {
                        cmp.within_bound.to_string()
                    } else {
                        String::new()
                    },
                    report.discounted_costs.len().to_string(),
                    report.horizon.to_string(),
                    report.num_samples.to_string(),
                    sol.iterations.to_string(),
                    fmt_float(report.tail_factor),
                    status,
                ]);
                summary.push(format!(
                    "gamma {gamma:e}: assumption fraction {:.4}, mean cost {:.6e} ± {:.2e} vs bound {:.6e}",
                    report.assumption_fraction, report.mean_cost, cmp.std_error, cmp.bound
                ));
                per_gamma.push(json!({
                    "gamma": gamma,
                    "riccati_iterations": sol.iterations,
                    "riccati_residual": sol.residual,
                    "expectation_convention": report.expectation_convention,
                }));
            }
            Err(_) => {
                let mut row = vec![fmt_float(*gamma)];
                row.extend(std::iter::repeat(String::new()).take(SIMULATE_HEADER.len() - 2));
                row.push(status.clone());
                rows.push(row);
                summary.push(format!("gamma {gamma:e}: {status}"));
                per_gamma.push(json!({ "gamma": gamma, "status": status }));
            }
        }
    }
    let metadata = merge(
        base_metadata("simulate", opts),
        json!({
            "seed": cfg.seed,
            "tolerances": cfg.tolerances,
            "simulate": {
                "horizon": cfg.simulate.horizon,
                "num_samples": cfg.simulate.num_samples,
                "num_trajectories": cfg.simulate.num_trajectories,
                "x0": x0.as_slice(),
            },
            "noise": "gaussian",
            "controller": "proposed",
            "iterations": per_gamma,
            "moment_convention": MomentConvention::Gaussian.name(),
            "tilde_convention": TildeConvention::default().as_str(),
        }),
    );
    let out = Output {
        header: SIMULATE_HEADER.to_vec(),
        rows,
        summary,
        metadata,
        violations: Vec::new(),
    };
    Ok((out, cfg.output_path))
}

//! Dispatch from a validated config to the solvers, and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::compare::run_comparison;
use super::config::{AnalyticFamily, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use super::output::{emit_plot_data, fmt_f64, write_index, write_snapshots, OutputSink, Snapshot};
use crate::agents::{fit_time_scale, interpolate, run_agents, ReplicaRun};
use crate::analytic::{
    flipped_quadratic_potential_residual, heat_lorenz, heat_lorenz_curve, heat_time, heat_to_quadratic_map, ou_lorenz,
    ou_lorenz_curve, quadratic_potential_residual, scaled_time,
};
use crate::error::{Error, Result};
use crate::fpe::{run_fpe, CoefficientSpec, FpeRunConfig, InitialDensity, TimeSpec};
use crate::lorenz_core::metrics::curve_record;
use crate::lorenz_core::{LorenzCurve, MetricSeries};
use crate::lorenz_solver::run_lorenz;

/// Everything needed to reproduce a run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    /// Effective configuration after command-line overrides.
    pub config: ExperimentConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Library tolerances that govern aborts and checks.
pub fn tolerances() -> BTreeMap<String, f64> {
    use crate::fpe;
    use crate::lorenz_core;
    use crate::lorenz_solver;
    [
        ("fpe_stability_factor", fpe::STABILITY_FACTOR),
        ("fpe_tol_neg", fpe::TOL_NEG),
        ("fpe_tol_mass_step", fpe::TOL_MASS_STEP),
        ("lorenz_stability_factor", lorenz_solver::STABILITY_FACTOR),
        ("lorenz_eps_ff_relative", lorenz_solver::EPS_FF_RELATIVE),
        ("lorenz_max_floor_fraction", lorenz_solver::MAX_FLOOR_FRACTION),
        ("tol_convex", lorenz_core::TOL_CONVEX),
        ("tol_mass", lorenz_core::TOL_MASS),
        ("gini_moment_tol", lorenz_core::metrics::GINI_MOMENT_TOL),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// What a run returns to the caller besides the files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: Manifest,
}

/// Runs the experiment named by `config.kind` and writes every artifact and
/// `manifest.json` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    config
        .validate()
        .map_err(|issue| Error::invalid(format!("[{}] {}", issue.section, issue.message)))?;
    let mut sink = OutputSink::new(out_dir, config.output.format)?;
    let summary = match config.kind {
        ExperimentKind::Fpe => run_fpe_kind(config, &mut sink)?,
        ExperimentKind::Lorenz => run_lorenz_kind(config, &mut sink)?,
        ExperimentKind::Agents => run_agents_kind(config, &mut sink)?,
        ExperimentKind::Analytic => run_analytic_kind(config, &mut sink)?,
        ExperimentKind::Compare => run_compare_kind(config, &mut sink)?,
        ExperimentKind::ScaleMap => run_scale_map_kind(config, &mut sink)?,
    };
    write_index(&sink)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION,
        kind: config.kind,
        seed: config.seed,
        config: config.clone(),
        tolerances: tolerances(),
        files: sink.files().iter().map(|f| f.path.clone()).collect(),
        summary,
    };
    sink.write_unindexed_json("manifest.json", &manifest)?;
    Ok(RunOutcome { manifest })
}

fn last_gini(m: &MetricSeries) -> Option<f64> {
    m.gini.last().copied().flatten()
}

fn run_fpe_kind(config: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value> {
    let run = run_fpe(&config.fpe_config()?)?;
    let snaps: Vec<Snapshot> = run.snapshots.iter().map(Snapshot::from).collect();
    emit_plot_data(sink, "density", &snaps, &run.metrics)?;
    Ok(json!({
        "steps": run.steps,
        "snapshots": snaps.len(),
        "max_mass_defect": run.max_mass_defect,
        "final_mean": run.metrics.mean.last(),
        "final_gini": last_gini(&run.metrics),
    }))
}

fn run_lorenz_kind(config: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value> {
    let run = run_lorenz(&config.lorenz_config()?)?;
    let snaps: Vec<Snapshot> = run.snapshots.iter().map(Snapshot::from).collect();
    emit_plot_data(sink, "curve", &snaps, &run.metrics)?;
    Ok(json!({
        "steps": run.steps,
        "snapshots": snaps.len(),
        "min_convexity_margin": run.min_convexity_margin,
        "final_gini": last_gini(&run.metrics),
    }))
}

fn run_agents_kind(config: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value> {
    let agent_config = config.agent_config()?;
    let section = config.agents.as_ref().expect("validated");
    let ensemble = run_agents(&agent_config)?;
    let metrics = ensemble.metrics();
    let snaps: Vec<Snapshot> = ensemble.mean_lorenz.iter().map(Snapshot::from).collect();
    emit_plot_data(sink, "curve", &snaps, &metrics)?;
    write_final_wealths(sink, &ensemble.replicas, agent_config.t_end)?;
    let gini: Vec<Value> = ensemble
        .times
        .iter()
        .zip(ensemble.mean_gini.iter().zip(&ensemble.gini_se))
        .map(|(t, (g, se))| json!({ "time": t, "mean_gini": g, "se": se }))
        .collect();
    let mut summary = json!({
        "replicas": agent_config.replicas,
        "agents": agent_config.agents,
        "time_scale": agent_config.time_scale,
        "gini": gini,
    });
    if section.fit_time_scale {
        let shape = match &agent_config.initial {
            crate::agents::AgentInitial::Gamma { shape } => *shape as f64,
            _ => {
                return Err(Error::invalid(
                    "the mean-field fit needs a gamma agent initial condition",
                ))
            }
        };
        let grid = config
            .grid
            .ok_or_else(|| Error::invalid("[grid] is required for the fit"))?;
        // Mean-field horizon long enough for any plausible scale factor.
        let sweeps_end = agent_config.t_end * agent_config.time_scale;
        let pde = run_fpe(&FpeRunConfig {
            grid,
            initial: InitialDensity::Gamma { shape, mean: 1.0 },
            time: TimeSpec {
                t_end: 4.0 * sweeps_end,
                dt: None,
                record_interval: Some(sweeps_end / 200.0),
            },
            coefficients: CoefficientSpec::yard_sale(agent_config.gamma)?,
            boundary: config.boundary.unwrap_or_default(),
        })?;
        let pde_gini = pde.metrics.gini_values();
        let sweeps: Vec<f64> = ensemble.times.iter().map(|t| t * agent_config.time_scale).collect();
        let c = fit_time_scale(&sweeps, &ensemble.mean_gini, &pde_gini, 0.05, 20.0)?;
        let matched: Vec<Value> = sweeps
            .iter()
            .zip(ensemble.mean_gini.iter().zip(&ensemble.gini_se))
            .map(|(s, (g, se))| json!({ "sweeps": s, "agent": g, "se": se, "pde": interpolate(&pde_gini, s / c) }))
            .collect();
        summary["fitted_time_scale"] = json!(c);
        summary["mean_field"] = json!(matched);
    }
    sink.write_json("agents.json", "summary", &summary)?;
    Ok(summary)
}

/// One `agent,wealth` CSV per replica at the end of the run.
fn write_final_wealths(sink: &mut OutputSink, replicas: &[ReplicaRun], t_end: f64) -> Result<()> {
    let width = replicas.len().saturating_sub(1).to_string().len().max(2);
    for r in replicas {
        let mut body = String::from("agent,wealth\n");
        for (k, w) in r.final_wealths.iter().enumerate() {
            let _ = writeln!(body, "{k},{}", fmt_f64(*w));
        }
        sink.write(
            &format!("wealth_r{:0width$}.csv", r.replica),
            "wealth",
            Some(t_end),
            &body,
        )?;
    }
    Ok(())
}

fn run_analytic_kind(config: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value> {
    let a = config.analytic.as_ref().expect("validated");
    let ou = config.ou_params()?;
    let mut metrics = MetricSeries::default();
    let mut snaps = Vec::new();
    let mut points = Vec::new();
    for &t in &a.times {
        let curve = match (a.family, &ou) {
            (AnalyticFamily::Heat, _) => heat_lorenz_curve(a.f_count, t, a.diffusion, a.initial)?,
            (AnalyticFamily::OrnsteinUhlenbeck, Some(p)) => ou_lorenz_curve(a.f_count, t, p)?,
            _ => unreachable!("validated"),
        };
        for &f in &a.points {
            let v = match &ou {
                None => heat_lorenz(f, t, a.diffusion, a.initial)?,
                Some(p) => ou_lorenz(f, t, p)?,
            };
            points.push(json!({ "time": t, "f": f, "value": v }));
        }
        metrics.push(curve_record(&curve));
        snaps.push(Snapshot::from(&curve));
    }
    emit_plot_data(sink, "curve", &snaps, &metrics)?;
    Ok(json!({ "points": points }))
}

fn run_compare_kind(config: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value> {
    let cmp = run_comparison(config)?;
    let fpe_snaps: Vec<Snapshot> = cmp.fpe_curves.iter().map(Snapshot::from).collect();
    let lorenz_snaps: Vec<Snapshot> = cmp.lorenz.snapshots.iter().map(Snapshot::from).collect();
    emit_plot_data(sink, "fpe_curve", &fpe_snaps, &cmp.fpe.metrics)?;
    // Lorenz metrics go in the report; only one metrics table per directory.
    write_snapshots(sink, "lorenz_curve", &lorenz_snaps)?;
    if let Some(curves) = &cmp.analytic_curves {
        let snaps: Vec<Snapshot> = curves.iter().map(Snapshot::from).collect();
        write_snapshots(sink, "analytic_curve", &snaps)?;
    }
    sink.write_json("comparison.json", "report", &cmp.report)?;
    Ok(json!({
        "all_pass": cmp.report.all_pass(),
        "verdicts": cmp.report.verdicts,
        "lorenz_min_convexity_margin": cmp.lorenz.min_convexity_margin,
    }))
}

/// Maps heat curves (`D = 1`) at each time and reports the residual of the
/// quadratic-potential Lorenz equation on the window, alongside the
/// sign-flipped form as a control.
fn run_scale_map_kind(config: &ExperimentConfig, sink: &mut OutputSink) -> Result<Value> {
    let m = config.scale_map.as_ref().expect("validated");
    let mut snaps = Vec::new();
    let mut metrics = MetricSeries::default();
    let mut rows = Vec::new();
    for &t in &m.times {
        let s = scaled_time(t);
        if s < m.ds {
            return Err(Error::invalid(format!(
                "scaled time {s} at t = {t} is below the difference step {}",
                m.ds
            )));
        }
        let mapped = |si: f64| -> Result<LorenzCurve> {
            Ok(heat_to_quadratic_map(&heat_lorenz_curve(m.f_count, heat_time(si), 1.0, m.initial)?)?.0)
        };
        let (prev, mid, next) = (mapped(s - m.ds)?, mapped(s)?, mapped(s + m.ds)?);
        let window_sup = |r: Vec<f64>| {
            let h = mid.spacing();
            r.iter()
                .enumerate()
                .filter(|(k, _)| {
                    let f = (*k + 1) as f64 * h;
                    f >= m.window[0] - 1e-12 && f <= m.window[1] + 1e-12
                })
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max)
        };
        let residual = window_sup(quadratic_potential_residual(&prev, &mid, &next, m.ds)?);
        let flipped = window_sup(flipped_quadratic_potential_residual(&prev, &mid, &next, m.ds)?);
        rows.push(json!({ "t": t, "s": s, "residual_sup": residual, "flipped_residual_sup": flipped }));
        metrics.push(curve_record(&mid));
        snaps.push(Snapshot::from(&mid));
    }
    emit_plot_data(sink, "mapped_curve", &snaps, &metrics)?;
    Ok(json!({ "residuals": rows }))
}

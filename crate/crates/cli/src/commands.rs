use std::path::Path;

use curvelab_core::experiment::{self, IdentityPlan, IdentityRun};
use curvelab_core::flow::{self, FlowState, Mode, RunSummary, Sampling};
use curvelab_core::geometry;
use curvelab_core::rescale::{self, SingularityEstimate};
use curvelab_core::scenarios::{self, make_curve_with_seed};
use curvelab_core::{zelenjak, Error, Vec3};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, float, number, write_file, write_json, Table};
use crate::plot::{line_chart, Series};

/// Result of a command that ran to the end.
#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
}

fn vec3(v: Vec3) -> Value {
    json!([number(v.x), number(v.y), number(v.z)])
}

/// Metadata shared by every run directory.
fn meta(command: &str, cfg: &RunConfig, seed_used: Option<u64>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert(
        "versions".into(),
        json!({ "curvelab": env!("CARGO_PKG_VERSION"), "curvelab-core": curvelab_core::VERSION }),
    );
    m.insert("config".into(), json!(cfg.settings.entries()));
    let params: Map<String, Value> = cfg.scenario.params.iter().map(|(k, v)| (k.clone(), number(*v))).collect();
    m.insert(
        "scenario".into(),
        json!({ "name": cfg.scenario.name, "n": cfg.scenario.n, "mode": cfg.scenario.mode.name(), "params": params }),
    );
    let requested = cfg.scenario.params.get("seed").map(|&s| s as u64);
    m.insert("seed".into(), json!(requested));
    m.insert("seed_used".into(), json!(seed_used));
    m
}

fn write_run_files(dir: &Path, cfg: &RunConfig, meta: Map<String, Value>) -> CliResult<()> {
    write_json(&dir.join("meta.json"), &Value::Object(meta))?;
    write_file(&dir.join("config.txt"), cfg.settings.render())
}

fn write_plot(dir: &Path, name: &str, svg: String) -> CliResult<()> {
    let plots = ensure_dir(&dir.join("plots"))?;
    write_file(&plots.join(name), svg)
}

pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let dir = ensure_dir(&cfg.output_dir)?;
    let snapshot_dir = if cfg.write_snapshots {
        Some(ensure_dir(&dir.join("snapshots"))?)
    } else {
        None
    };
    let (curve, seed_used) = make_curve_with_seed(&cfg.scenario).map_err(|e| CliError::config(e.to_string()))?;

    let mut table = Table::new(&["clock", "length", "max_curvature", "min_speed"]);
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut write_error = None;
    let summary = flow::run_with(
        FlowState::new(curve, 0.0, cfg.scenario.mode),
        &cfg.stop,
        &cfg.control,
        Sampling::Clock(cfg.snapshot_dtau),
        |s| {
            let h = geometry::curvature_with(&s.curve, cfg.control.scheme)?.into_iter().fold(0.0, f64::max);
            let row = [s.clock, geometry::length(&s.curve), h, geometry::min_speed(&s.curve)];
            if let Some(sd) = &snapshot_dir {
                let mut nodes = Table::new(&["x", "y", "z"]);
                for p in s.curve.nodes() {
                    nodes.floats(&[p.x, p.y, p.z]);
                }
                if let Err(e) = nodes.write(&sd.join(format!("{:04}.csv", rows.len()))) {
                    write_error = Some(e);
                    return Err(Error::InvalidArgument("snapshot output failed".into()));
                }
            }
            rows.push(row);
            Ok(())
        },
    );
    if let Some(e) = write_error {
        return Err(e);
    }
    let RunSummary {
        stop_reason,
        final_state,
        failure,
    } = summary?;
    for row in &rows {
        table.floats(row);
    }
    table.write(&dir.join("trajectory.csv"))?;

    let mut m = meta("simulate", cfg, seed_used);
    m.insert("stop_reason".into(), json!(stop_reason.as_str()));
    m.insert("failure".into(), json!(failure));
    m.insert("final_clock".into(), number(final_state.clock));
    m.insert("steps".into(), json!(final_state.steps));
    m.insert("snapshots".into(), json!(rows.len()));
    write_run_files(&dir, cfg, m)?;

    if cfg.emit_plots {
        let series = |label, col: usize| Series {
            label,
            points: rows.iter().map(|r| (r[0], r[col])).collect(),
        };
        let clock = if cfg.scenario.mode == Mode::Physical { "t" } else { "τ" };
        write_plot(&dir, "length.svg", line_chart("length", clock, &[series("length", 1)]))?;
        write_plot(&dir, "curvature.svg", line_chart("max curvature", clock, &[series("max H", 2)]))?;
    }
    Ok(Outcome {
        passed: true,
        summary: format!(
            "simulate {}: stopped ({stop_reason}) at clock {} after {} steps, {} snapshots",
            cfg.scenario.name,
            float(final_state.clock),
            final_state.steps,
            rows.len()
        ),
    })
}

/// The rescaled starting state and how it was obtained.
struct Prepared {
    state: FlowState,
    estimate: Option<SingularityEstimate>,
    blowup: Option<(f64, Vec3)>,
    seed_used: Option<u64>,
}

/// Rescaled scenarios start as given at τ = 0; physical ones are rescaled
/// about the configured or estimated singularity.
fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    let (curve, seed_used) = make_curve_with_seed(&cfg.scenario).map_err(|e| CliError::config(e.to_string()))?;
    if cfg.scenario.mode == Mode::Rescaled {
        return Ok(Prepared {
            state: FlowState::new(curve, 0.0, Mode::Rescaled),
            estimate: None,
            blowup: None,
            seed_used,
        });
    }
    let (estimate, blowup) = match cfg.blowup {
        Some(b) => (None, b),
        None => {
            let est = experiment::estimate_blowup(&curve, &cfg.estimation)?;
            (Some(est.clone()), (est.blowup_time, est.blowup_point))
        }
    };
    let state = rescale::rescaled_state(&FlowState::new(curve, 0.0, Mode::Physical), blowup.0, blowup.1)?;
    Ok(Prepared {
        state,
        estimate,
        blowup: Some(blowup),
        seed_used,
    })
}

fn identity_plan(cfg: &RunConfig, snapshot_dtau: f64) -> CliResult<IdentityPlan> {
    let plan = IdentityPlan {
        control: cfg.control_for(Mode::Rescaled)?,
        tau_span: cfg.tau_span,
        snapshot_dtau,
    };
    plan.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(plan)
}

fn identity_passed(run: &IdentityRun, tolerance: f64) -> bool {
    run.completed() && !run.reports.is_empty() && run.max_relative_residual <= tolerance && run.corollary2.holds
}

fn verdict(run: &IdentityRun, cfg: &RunConfig, prepared: &Prepared, snapshot_dtau: f64) -> Value {
    let estimate = prepared.estimate.as_ref().map(|e| {
        json!({
            "blowup_time": number(e.blowup_time),
            "blowup_point": vec3(e.blowup_point),
            "fit_residual": number(e.fit_residual),
            "samples_used": e.samples_used,
        })
    });
    json!({
        "pass": identity_passed(run, cfg.identity_tolerance),
        "completed": run.completed(),
        "failure": run.failure,
        "stop_reason": run.stop_reason.as_str(),
        "max_relative_residual": number(run.max_relative_residual),
        "max_abs_residual": number(run.max_abs_residual()),
        "tolerance": number(cfg.identity_tolerance),
        "corollary2": { "pass": run.corollary2.holds, "worst_margin": number(run.corollary2.worst_margin) },
        "reports": run.reports.len(),
        "initial_tau": number(run.initial_tau),
        "snapshot_dtau": number(snapshot_dtau),
        "blowup_time": prepared.blowup.map(|b| number(b.0)),
        "blowup_point": prepared.blowup.map(|b| vec3(b.1)),
        "estimate": estimate,
    })
}

/// Writes energy.csv, verdict.json and the optional plots of one run.
fn write_identity(dir: &Path, run: &IdentityRun, cfg: &RunConfig, prepared: &Prepared, dtau: f64) -> CliResult<()> {
    let mut table = Table::new(&["tau", "E", "Pi", "D", "dE_dtau_fd", "residual"]);
    for r in &run.reports {
        table.floats(&[r.tau, r.energy, r.binormal, r.normal, r.de_dtau_fd, r.residual]);
    }
    table.write(&dir.join("energy.csv"))?;
    write_json(&dir.join("verdict.json"), &verdict(run, cfg, prepared, dtau))?;
    if cfg.emit_plots {
        let series = |label, f: fn(&curvelab_core::functionals::EnergyReport) -> f64| Series {
            label,
            points: run.reports.iter().map(|r| (r.tau, f(r))).collect(),
        };
        write_plot(
            dir,
            "energy.svg",
            line_chart(
                "weighted length and dissipation",
                "τ",
                &[series("E", |r| r.energy), series("Π", |r| r.binormal), series("D", |r| r.normal)],
            ),
        )?;
        write_plot(dir, "residual.svg", line_chart("identity residual", "τ", &[series("dE/dτ + Π + D", |r| r.residual)]))?;
    }
    Ok(())
}

pub fn verify_identity(cfg: &RunConfig) -> CliResult<Outcome> {
    let plan = identity_plan(cfg, cfg.snapshot_dtau)?;
    let dir = ensure_dir(&cfg.output_dir)?;
    let prepared = prepare(cfg)?;
    let run = experiment::monitor_identity(prepared.state.clone(), &plan)?;
    write_identity(&dir, &run, cfg, &prepared, plan.snapshot_dtau)?;
    let mut m = meta("verify-identity", cfg, prepared.seed_used);
    m.insert("stop_reason".into(), json!(run.stop_reason.as_str()));
    m.insert("final_clock".into(), number(run.final_state.clock));
    write_run_files(&dir, cfg, m)?;

    let passed = identity_passed(&run, cfg.identity_tolerance);
    let mut summary = format!(
        "verify-identity {}: {} (max |residual|/E = {:.3e}, Π ≤ −dE/dτ {} with worst margin {:.3e})",
        cfg.scenario.name,
        if passed { "pass" } else { "FAIL" },
        run.max_relative_residual,
        if run.corollary2.holds { "holds" } else { "violated" },
        run.corollary2.worst_margin
    );
    if let Some(f) = &run.failure {
        summary.push_str(&format!("; run failed at τ = {}: {f}", run.final_state.clock));
    }
    Ok(Outcome { passed, summary })
}

/// Residuals this close to the rounding noise of the centred difference of E
/// carry no information about the order.
const NOISE_FACTOR: f64 = 4.0;

fn saturated(residual: f64, energy: f64, dtau: f64) -> bool {
    residual <= NOISE_FACTOR * f64::EPSILON * energy / dtau
}

pub fn convergence(cfg: &RunConfig) -> CliResult<Outcome> {
    if cfg.levels < 2 {
        return Err(CliError::config(format!("convergence needs at least 2 levels, got {}", cfg.levels)));
    }
    let plans = (0..cfg.levels)
        .map(|k| identity_plan(cfg, cfg.snapshot_dtau / 2f64.powi(k as i32)))
        .collect::<CliResult<Vec<_>>>()?;
    let dir = ensure_dir(&cfg.output_dir)?;
    let prepared = prepare(cfg)?;

    let mut table = Table::new(&["level", "dtau", "max_abs_residual", "max_relative_residual", "order"]);
    let mut levels = Vec::new();
    let mut all_passed = true;
    let mut previous: Option<f64> = None;
    let mut last_order = Value::Null;
    for (k, plan) in plans.iter().enumerate() {
        let run = experiment::monitor_identity(prepared.state.clone(), plan)?;
        let level_dir = ensure_dir(&dir.join(format!("level_{k}")))?;
        write_identity(&level_dir, &run, cfg, &prepared, plan.snapshot_dtau)?;
        let passed = identity_passed(&run, cfg.identity_tolerance);
        all_passed &= passed;

        let residual = run.max_abs_residual();
        let energy = run.samples.first().map_or(0.0, |s| s.terms.energy);
        let order = match previous {
            None => Value::Null,
            Some(_) if saturated(residual, energy, plan.snapshot_dtau) => json!("saturated"),
            Some(prev) => number((prev / residual).log2()),
        };
        let order_cell = match &order {
            Value::Null => String::new(),
            Value::String(s) => s.clone(),
            v => float(v.as_f64().unwrap_or(f64::NAN)),
        };
        table.row(&[
            k.to_string(),
            float(plan.snapshot_dtau),
            float(residual),
            float(run.max_relative_residual),
            order_cell,
        ]);
        levels.push(json!({
            "level": k,
            "dtau": number(plan.snapshot_dtau),
            "max_abs_residual": number(residual),
            "max_relative_residual": number(run.max_relative_residual),
            "order": order,
            "pass": passed,
        }));
        if previous.is_some() {
            last_order = order;
        }
        previous = Some(residual);
    }
    table.write(&dir.join("convergence.csv"))?;
    write_json(
        &dir.join("verdict.json"),
        &json!({ "pass": all_passed, "observed_order": last_order, "levels": levels }),
    )?;
    write_run_files(&dir, cfg, meta("convergence", cfg, prepared.seed_used))?;

    let order = match &last_order {
        Value::String(s) => s.clone(),
        v => format!("{:.3}", v.as_f64().unwrap_or(f64::NAN)),
    };
    Ok(Outcome {
        passed: all_passed,
        summary: format!(
            "convergence {}: {} levels from dτ = {:e}, observed order {order}{}",
            cfg.scenario.name,
            cfg.levels,
            cfg.snapshot_dtau,
            if all_passed { "" } else { "; some level failed verification" }
        ),
    })
}

/// Runs the weight checks. The report goes to stdout and, when `write` is
/// set, to verdict.json in the output directory.
pub fn check_zelenjak(cfg: &RunConfig, write: bool) -> CliResult<Outcome> {
    if cfg.zelenjak_samples == 0 {
        return Err(CliError::config("zelenjak.samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.zelenjak_seed);
    let report = zelenjak::run_suite(cfg.zelenjak_samples, &mut rng)?;
    let tol = &cfg.tolerances;
    let check = |value: f64, tolerance: f64, ok: bool| json!({ "worst": number(value), "tolerance": number(tolerance), "pass": ok });
    let passed = report.passed(tol);
    let value = json!({
        "samples": report.samples,
        "seed": cfg.zelenjak_seed,
        "pass": passed,
        "hessian": check(report.hessian, tol.hessian, report.hessian_ok(tol)),
        "gradient": check(report.gradient, tol.gradient, report.gradient_ok(tol)),
        "gap": {
            "worst": number(report.gap),
            "tolerance": number(tol.gap),
            "min_gap": number(report.min_gap),
            "pass": report.gap_ok(tol),
        },
        "pythagoras": check(report.pythagoras, tol.pythagoras, report.pythagoras_ok(tol)),
    });
    if write {
        let dir = ensure_dir(&cfg.output_dir)?;
        write_json(&dir.join("verdict.json"), &value)?;
    }
    Ok(Outcome {
        passed,
        summary: serde_json::to_string_pretty(&value).map_err(|e| CliError::Runtime(e.to_string()))?,
    })
}

pub fn list_scenarios() -> String {
    let mut out = String::new();
    for info in scenarios::registry() {
        let params: Vec<String> = info.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("{:<16}{:<36}{}\n", info.name, params.join(" "), info.summary));
    }
    out
}

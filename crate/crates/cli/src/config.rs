//! Flat `key = value` configuration with dotted section keys.
//!
//! ```text
//! # comments and blank lines are ignored
//! scenario.name = twisted_circle
//! scenario.eps = 0.2
//! scenario.n = 256
//! run.snapshot_dtau = 1e-4
//! ```
//!
//! Files are read in order and `--set KEY=VALUE` overrides are applied last.
//! The resolved settings are echoed into every run directory as `config.txt`,
//! which reproduces the run when passed back with `--config`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use curvelab_core::experiment::EstimationPlan;
use curvelab_core::flow::{Mode, StepControl, StopRule};
use curvelab_core::geometry::{DiffScheme, Interpolant};
use curvelab_core::scenarios::ScenarioSpec;
use curvelab_core::zelenjak::Tolerances;
use curvelab_core::Vec3;

use crate::error::{CliError, CliResult};

/// Raw settings, ordered by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let mut settings = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            settings
                .assign(line)
                .map_err(|e| CliError::config(format!("{origin}:{}: {e}", lineno + 1)))?;
        }
        Ok(settings)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies one `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<(), String> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=VALUE, got '{assignment}'"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(format!("malformed key '{key}'"));
        }
        if value.is_empty() {
            return Err(format!("key '{key}' has no value"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// The settings as a config file.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Everything a command needs, resolved from [`Settings`].
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub control: StepControl,
    pub stop: StopRule,
    /// Snapshot interval in clock units.
    pub snapshot_dtau: f64,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    /// Write the node positions of every snapshot.
    pub write_snapshots: bool,
    /// Length of the monitored rescaled run.
    pub tau_span: f64,
    /// Bound on max |residual|/E for a passing identity verdict.
    pub identity_tolerance: f64,
    pub estimation: EstimationPlan,
    /// Skips the estimation run when set.
    pub blowup: Option<(f64, Vec3)>,
    pub levels: usize,
    pub zelenjak_samples: usize,
    pub zelenjak_seed: u64,
    pub tolerances: Tolerances,
    pub settings: Settings,
}

const SCENARIO_KEYS: [&str; 3] = ["scenario.name", "scenario.n", "scenario.mode"];

const KEYS: &[&str] = &[
    "control.safety",
    "control.dt_min",
    "control.redistribute_every",
    "control.scheme",
    "control.interpolant",
    "stop.clock",
    "stop.max_curvature",
    "stop.max_steps",
    "run.snapshot_dtau",
    "run.tau_span",
    "run.snapshots",
    "run.plots",
    "identity.tolerance",
    "estimate.max_curvature",
    "estimate.sample_every",
    "estimate.onset",
    "estimate.max_steps",
    "rescale.blowup_time",
    "rescale.point.x",
    "rescale.point.y",
    "rescale.point.z",
    "convergence.levels",
    "zelenjak.samples",
    "zelenjak.seed",
    "zelenjak.tol.hessian",
    "zelenjak.tol.gradient",
    "zelenjak.tol.gap",
    "zelenjak.tol.pythagoras",
];

fn parse<T: std::str::FromStr>(settings: &Settings, key: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    settings
        .get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| CliError::config(format!("{key} = {v}: {e}")))
        })
        .transpose()
}

fn real(settings: &Settings, key: &str) -> CliResult<Option<f64>> {
    let v = parse::<f64>(settings, key)?;
    match v {
        Some(x) if !x.is_finite() => Err(CliError::config(format!("{key} must be finite, got {x}"))),
        _ => Ok(v),
    }
}

fn positive(settings: &Settings, key: &str, default: f64) -> CliResult<f64> {
    let v = real(settings, key)?.unwrap_or(default);
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{key} must be positive, got {v}")))
    }
}

fn flag(settings: &Settings, key: &str) -> CliResult<bool> {
    Ok(parse::<bool>(settings, key)?.unwrap_or(false))
}

impl RunConfig {
    /// Resolves `settings`; unknown keys and malformed values are errors.
    pub fn from_settings(settings: &Settings, output_dir: PathBuf, plots: bool) -> CliResult<Self> {
        let name = settings.get("scenario.name").unwrap_or("circle");
        let n = parse::<usize>(settings, "scenario.n")?.unwrap_or(128);
        let mode: Mode = parse(settings, "scenario.mode")?.unwrap_or(Mode::Physical);
        let mut scenario = ScenarioSpec::with_defaults(name, n, mode).map_err(|e| CliError::config(e.to_string()))?;

        for (key, value) in settings.entries() {
            if SCENARIO_KEYS.contains(&key.as_str()) || KEYS.contains(&key.as_str()) {
                continue;
            }
            let Some(param) = key.strip_prefix("scenario.") else {
                return Err(CliError::config(format!("unknown key '{key}'")));
            };
            let v = real(settings, key)?.expect("key is present");
            scenario
                .set(param, v)
                .map_err(|e| CliError::config(format!("{key} = {value}: {e}")))?;
        }
        scenario.validate().map_err(|e| CliError::config(e.to_string()))?;
        if !n.is_power_of_two() || n < 8 {
            return Err(CliError::config(format!("scenario.n must be a power of two ≥ 8, got {n}")));
        }

        let mut control = StepControl::for_mode(mode);
        apply_control(settings, &mut control)?;

        let stop = StopRule {
            clock: real(settings, "stop.clock")?,
            max_curvature: real(settings, "stop.max_curvature")?,
            max_steps: parse(settings, "stop.max_steps")?,
        };
        let stop = if stop == StopRule::default() {
            match mode {
                Mode::Physical => StopRule::at_curvature(100.0),
                Mode::Rescaled => StopRule::at_clock(1.0),
            }
        } else {
            stop
        };
        stop.validate().map_err(|e| CliError::config(e.to_string()))?;

        let mut estimation = EstimationPlan::default();
        apply_control(settings, &mut estimation.control)?;
        estimation.max_curvature = positive(settings, "estimate.max_curvature", estimation.max_curvature)?;
        estimation.onset = positive(settings, "estimate.onset", estimation.onset)?;
        estimation.sample_every = parse(settings, "estimate.sample_every")?.unwrap_or(estimation.sample_every);
        estimation.max_steps = parse(settings, "estimate.max_steps")?;
        if estimation.sample_every == 0 {
            return Err(CliError::config("estimate.sample_every must be at least 1"));
        }

        let blowup = match real(settings, "rescale.blowup_time")? {
            Some(t) => {
                let coord = |axis| real(settings, &format!("rescale.point.{axis}")).map(|v| v.unwrap_or(0.0));
                Some((t, Vec3::new(coord("x")?, coord("y")?, coord("z")?)))
            }
            None => {
                if ["x", "y", "z"].iter().any(|a| settings.get(&format!("rescale.point.{a}")).is_some()) {
                    return Err(CliError::config("rescale.point needs rescale.blowup_time"));
                }
                None
            }
        };

        let levels = parse::<usize>(settings, "convergence.levels")?.unwrap_or(3);
        let zelenjak_samples = parse::<usize>(settings, "zelenjak.samples")?.unwrap_or(100);
        let defaults = Tolerances::default();
        let tol = |key: &str, default: f64| -> CliResult<f64> {
            let v = real(settings, key)?.unwrap_or(default);
            if v < 0.0 {
                return Err(CliError::config(format!("{key} must be nonnegative, got {v}")));
            }
            Ok(v)
        };

        Ok(Self {
            scenario,
            control,
            stop,
            snapshot_dtau: positive(settings, "run.snapshot_dtau", 1e-3)?,
            output_dir,
            emit_plots: plots || flag(settings, "run.plots")?,
            write_snapshots: flag(settings, "run.snapshots")?,
            tau_span: positive(settings, "run.tau_span", 1.0)?,
            identity_tolerance: positive(settings, "identity.tolerance", 1e-3)?,
            estimation,
            blowup,
            levels,
            zelenjak_samples,
            zelenjak_seed: parse(settings, "zelenjak.seed")?.unwrap_or(42),
            tolerances: Tolerances {
                hessian: tol("zelenjak.tol.hessian", defaults.hessian)?,
                gradient: tol("zelenjak.tol.gradient", defaults.gradient)?,
                gap: tol("zelenjak.tol.gap", defaults.gap)?,
                pythagoras: tol("zelenjak.tol.pythagoras", defaults.pythagoras)?,
            },
            settings: settings.clone(),
        })
    }

    /// Step control for a run in `mode`, with the configured overrides.
    pub fn control_for(&self, mode: Mode) -> CliResult<StepControl> {
        let mut control = StepControl::for_mode(mode);
        apply_control(&self.settings, &mut control)?;
        Ok(control)
    }
}

fn apply_control(settings: &Settings, control: &mut StepControl) -> CliResult<()> {
    if let Some(v) = real(settings, "control.safety")? {
        control.safety = v;
    }
    if let Some(v) = real(settings, "control.dt_min")? {
        control.dt_min = v;
    }
    if let Some(v) = parse(settings, "control.redistribute_every")? {
        control.redistribute_every = v;
    }
    if let Some(v) = parse::<DiffScheme>(settings, "control.scheme")? {
        control.scheme = v;
    }
    match settings.get("control.interpolant") {
        None => {}
        Some("trigonometric") => control.interpolant = Interpolant::Trigonometric,
        Some("spline") => control.interpolant = Interpolant::CubicSpline,
        Some(other) => {
            return Err(CliError::config(format!(
                "control.interpolant = {other}: expected trigonometric or spline"
            )))
        }
    }
    control.validate().map_err(|e| CliError::config(e.to_string()))
}

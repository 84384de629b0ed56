//! Explicit RK4 integration of the physical flow ∂ₜu = Hν and the rescaled
//! flow ∂τv = ½v + v′×(v″×v′)/|v′|⁴.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{self, CurveJet, DiffScheme, DiscreteCurve, Interpolant};
use crate::vec3::Vec3;

/// Which equation the state evolves under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Curve shortening flow in physical time t.
    Physical,
    /// Rescaled flow in τ = −log(T−t).
    Rescaled,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Physical => "physical",
            Mode::Rescaled => "rescaled",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Mode::Physical),
            "rescaled" => Ok(Mode::Rescaled),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}' (expected physical or rescaled)"
            ))),
        }
    }
}

/// A curve at a point of its evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub curve: DiscreteCurve,
    /// t in physical mode, τ in rescaled mode.
    pub clock: f64,
    pub mode: Mode,
    /// Accepted RK4 steps since the start of the run; drives redistribution.
    pub steps: u64,
}

impl FlowState {
    pub fn new(curve: DiscreteCurve, clock: f64, mode: Mode) -> Self {
        Self {
            curve,
            clock,
            mode,
            steps: 0,
        }
    }
}

/// Step size and redistribution policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    /// Fraction of the stability bound, in (0, 1].
    pub safety: f64,
    pub dt_min: f64,
    /// Resample to uniform arclength every this many accepted steps; 0 disables.
    pub redistribute_every: u64,
    pub scheme: DiffScheme,
    pub interpolant: Interpolant,
}

impl StepControl {
    pub const MAX_HALVINGS: u32 = 20;

    /// Redistributes every 10 steps in physical mode, never in rescaled mode.
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            safety: 0.5,
            dt_min: 1e-14,
            redistribute_every: match mode {
                Mode::Physical => 10,
                Mode::Rescaled => 0,
            },
            scheme: DiffScheme::Spectral,
            interpolant: Interpolant::Trigonometric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt_min must be positive, got {}",
                self.dt_min
            )));
        }
        Ok(())
    }
}

impl Default for StepControl {
    fn default() -> Self {
        Self::for_mode(Mode::Physical)
    }
}

fn velocity(curve: &DiscreteCurve, mode: Mode, scheme: DiffScheme) -> Result<Vec<Vec3>> {
    let mut v = CurveJet::filtered(curve, scheme).curvature_vector()?;
    if mode == Mode::Rescaled {
        for (vi, p) in v.iter_mut().zip(curve.nodes()) {
            *vi += *p * 0.5;
        }
    }
    Ok(v)
}

/// Node velocities u′×(u″×u′)/|u′|⁴ of curve shortening flow.
pub fn rhs_physical(curve: &DiscreteCurve) -> Result<Vec<Vec3>> {
    velocity(curve, Mode::Physical, DiffScheme::Spectral)
}

/// Node velocities ½v + v′×(v″×v′)/|v′|⁴ of the rescaled flow.
pub fn rhs_rescaled(curve: &DiscreteCurve) -> Result<Vec<Vec3>> {
    velocity(curve, Mode::Rescaled, DiffScheme::Spectral)
}

pub fn rhs(curve: &DiscreteCurve, mode: Mode, scheme: DiffScheme) -> Result<Vec<Vec3>> {
    velocity(curve, mode, scheme)
}

/// Parabolic step bound safety·(2/π²)·h²/(1 + h·max H), with h the shortest
/// chord, clamped below by `dt_min`.
///
/// π²/h² bounds the spectral second-derivative eigenvalue; RK4 is stable up
/// to about 2.78/λ, so safety = 1 keeps a margin of roughly 1.4.
pub fn stable_dt(curve: &DiscreteCurve, control: &StepControl) -> f64 {
    stability_bound(curve, control).max(control.dt_min)
}

/// The unclamped step bound; zero when curvature is unavailable.
fn stability_bound(curve: &DiscreteCurve, control: &StepControl) -> f64 {
    let h = curve.min_spacing();
    let kappa = geometry::curvature_with(curve, control.scheme)
        .map(|k| k.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    let dt = control.safety * (2.0 / (PI * PI)) * h * h / (1.0 + h * kappa);
    if dt.is_finite() {
        dt
    } else {
        0.0
    }
}

/// Message for a run whose stable step has collapsed below `dt_min`.
fn exhausted(bound: f64, control: &StepControl) -> Option<String> {
    (bound < control.dt_min).then(|| format!("stable step {bound:e} fell below dt_min = {:e}", control.dt_min))
}

fn stage(curve: &DiscreteCurve, k: &[Vec3], scale: f64) -> Result<DiscreteCurve> {
    DiscreteCurve::new(
        curve
            .nodes()
            .iter()
            .zip(k)
            .map(|(&p, &v)| p + v * scale)
            .collect(),
    )
}

fn failure(err: Error) -> Error {
    match err {
        Error::StepFailure(_) => err,
        other => Error::StepFailure(other.to_string()),
    }
}

/// One classical RK4 step of size `dt`, followed by arclength redistribution
/// when the step counter hits the configured period.
pub fn step(state: &FlowState, dt: f64, control: &StepControl) -> Result<FlowState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be >= 0, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let (mode, scheme) = (state.mode, control.scheme);
    let u = &state.curve;
    let attempt = || -> Result<DiscreteCurve> {
        let k1 = velocity(u, mode, scheme)?;
        let k2 = velocity(&stage(u, &k1, 0.5 * dt)?, mode, scheme)?;
        let k3 = velocity(&stage(u, &k2, 0.5 * dt)?, mode, scheme)?;
        let k4 = velocity(&stage(u, &k3, dt)?, mode, scheme)?;
        let w = dt / 6.0;
        let mut nodes: Vec<Vec3> = u
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &p)| p + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w)
            .collect();
        if scheme == DiffScheme::Spectral {
            geometry::remove_nyquist(&mut nodes);
        }
        DiscreteCurve::new(nodes)
    };
    let mut curve = attempt().map_err(failure)?;
    let steps = state.steps + 1;
    if control.redistribute_every > 0 && steps % control.redistribute_every == 0 {
        curve = geometry::resample_uniform_arclength_with(&curve, control.interpolant)
            .map_err(failure)?;
    }
    CurveJet::with_scheme(&curve, scheme).speeds().map_err(failure)?;
    Ok(FlowState {
        curve,
        clock: state.clock + dt,
        mode,
        steps,
    })
}

/// Integrates exactly `dt`, splitting a failed step into two halves, at
/// most [`StepControl::MAX_HALVINGS`] levels deep and never below `dt_min`.
fn advance(state: &FlowState, dt: f64, control: &StepControl, depth: u32) -> Result<FlowState> {
    match step(state, dt, control) {
        Ok(next) => Ok(next),
        Err(Error::StepFailure(msg)) => {
            let half = 0.5 * dt;
            if depth >= StepControl::MAX_HALVINGS || half < control.dt_min {
                return Err(Error::StepFailure(msg));
            }
            let mid = advance(state, half, control, depth + 1)?;
            let mut end = advance(&mid, half, control, depth + 1)?;
            end.clock = state.clock + dt;
            Ok(end)
        }
        Err(e) => Err(e),
    }
}

/// Integrates from `state` to the given clock with stable steps, the last
/// one shortened to land exactly on `clock`.
pub fn advance_to(state: &FlowState, clock: f64, control: &StepControl) -> Result<FlowState> {
    control.validate()?;
    if !(clock >= state.clock) || !clock.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "target clock {clock} is before the current clock {}",
            state.clock
        )));
    }
    let mut s = state.clone();
    while s.clock < clock {
        let dt = stable_dt(&s.curve, control);
        if s.clock + dt >= clock {
            s = advance(&s, clock - s.clock, control, 0)?;
            s.clock = clock;
        } else {
            s = advance(&s, dt, control, 0)?;
        }
    }
    Ok(s)
}

/// When to stop a run. At least one criterion must be set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StopRule {
    /// Stop once the clock reaches this value.
    pub clock: Option<f64>,
    /// Stop once max H reaches this value.
    pub max_curvature: Option<f64>,
    pub max_steps: Option<u64>,
}

impl StopRule {
    pub fn at_clock(clock: f64) -> Self {
        Self {
            clock: Some(clock),
            ..Self::default()
        }
    }

    pub fn at_curvature(max_curvature: f64) -> Self {
        Self {
            max_curvature: Some(max_curvature),
            ..Self::default()
        }
    }

    pub fn after_steps(steps: u64) -> Self {
        Self {
            max_steps: Some(steps),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clock.is_none() && self.max_curvature.is_none() && self.max_steps.is_none() {
            return Err(Error::InvalidArgument(
                "stop rule needs a clock limit, curvature threshold or step limit".into(),
            ));
        }
        if let Some(k) = self.max_curvature {
            if !(k > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "curvature threshold must be positive, got {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Snapshot schedule of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    /// Adaptive steps; snapshot every k accepted steps.
    EverySteps(u64),
    /// Snapshots exactly every `interval` of clock. Each interval is split
    /// into equal substeps no larger than the stable step.
    Clock(f64),
}

impl Sampling {
    fn validate(&self) -> Result<()> {
        match *self {
            Sampling::EverySteps(0) => Err(Error::InvalidArgument(
                "snapshot stride must be at least one step".into(),
            )),
            Sampling::Clock(dt) if !(dt > 0.0 && dt.is_finite()) => Err(Error::InvalidArgument(
                format!("snapshot interval must be positive, got {dt}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    ClockLimit,
    CurvatureThreshold,
    MaxSteps,
    /// A step kept failing after halving down to the limit.
    BlowUp,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ClockLimit => "clock-limit",
            StopReason::CurvatureThreshold => "curvature-threshold",
            StopReason::MaxSteps => "max-steps",
            StopReason::BlowUp => "blow-up",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`run_with`]: how the run ended and the state it ended in.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub stop_reason: StopReason,
    pub final_state: FlowState,
    /// Message of the step failure for [`StopReason::BlowUp`].
    pub failure: Option<String>,
}

/// Snapshots of a run, ordered by clock.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub stop_reason: StopReason,
    pub sampling: Sampling,
}

impl Trajectory {
    pub fn last(&self) -> &FlowState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// Runs the flow, collecting every snapshot.
pub fn run(
    state: FlowState,
    stop: &StopRule,
    control: &StepControl,
    sampling: Sampling,
) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let summary = run_with(state, stop, control, sampling, |s| {
        snapshots.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        snapshots,
        stop_reason: summary.stop_reason,
        sampling,
    })
}

/// Runs the flow, handing each snapshot to `observe` instead of storing it.
///
/// The initial state is always observed, and so is the final state. An
/// error from `observe` aborts the run.
pub fn run_with<F>(
    state: FlowState,
    stop: &StopRule,
    control: &StepControl,
    sampling: Sampling,
    mut observe: F,
) -> Result<RunSummary>
where
    F: FnMut(&FlowState) -> Result<()>,
{
    stop.validate()?;
    control.validate()?;
    sampling.validate()?;

    let start_clock = state.clock;
    let start_steps = state.steps;
    let mut state = state;
    observe(&state)?;

    let finish = |state: FlowState, reason: StopReason, failure: Option<String>| RunSummary {
        stop_reason: reason,
        final_state: state,
        failure,
    };

    let curvature_hit = |s: &FlowState| -> bool {
        stop.max_curvature.is_some_and(|limit| {
            geometry::curvature_with(&s.curve, control.scheme)
                .map(|k| k.into_iter().fold(0.0, f64::max) >= limit)
                .unwrap_or(true)
        })
    };
    let steps_hit = |s: &FlowState| stop.max_steps.is_some_and(|m| s.steps - start_steps >= m);

    if steps_hit(&state) {
        return Ok(finish(state, StopReason::MaxSteps, None));
    }
    if curvature_hit(&state) {
        return Ok(finish(state, StopReason::CurvatureThreshold, None));
    }
    if stop.clock.is_some_and(|c| state.clock >= c) {
        return Ok(finish(state, StopReason::ClockLimit, None));
    }

    match sampling {
        Sampling::EverySteps(stride) => {
            let mut since_snapshot = 0;
            loop {
                let mut dt = stability_bound(&state.curve, control);
                if let Some(msg) = exhausted(dt, control) {
                    if since_snapshot > 0 {
                        observe(&state)?;
                    }
                    return Ok(finish(state, StopReason::BlowUp, Some(msg)));
                }
                let mut last_step = false;
                if let Some(limit) = stop.clock {
                    if state.clock + dt >= limit {
                        dt = limit - state.clock;
                        last_step = true;
                    }
                }
                match advance(&state, dt, control, 0) {
                    Ok(next) => state = next,
                    Err(Error::StepFailure(msg)) => {
                        if since_snapshot > 0 {
                            observe(&state)?;
                        }
                        return Ok(finish(state, StopReason::BlowUp, Some(msg)));
                    }
                    Err(e) => return Err(e),
                }
                if last_step {
                    state.clock = stop.clock.unwrap_or(state.clock);
                }
                since_snapshot += 1;

                let reason = if last_step {
                    Some(StopReason::ClockLimit)
                } else if curvature_hit(&state) {
                    Some(StopReason::CurvatureThreshold)
                } else if steps_hit(&state) {
                    Some(StopReason::MaxSteps)
                } else {
                    None
                };
                if since_snapshot >= stride || reason.is_some() {
                    observe(&state)?;
                    since_snapshot = 0;
                }
                if let Some(reason) = reason {
                    return Ok(finish(state, reason, None));
                }
            }
        }
        Sampling::Clock(interval) => {
            let intervals = stop
                .clock
                .map(|limit| ((limit - start_clock) / interval - 1e-9).ceil().max(1.0) as u64);
            let mut k = 0u64;
            loop {
                k += 1;
                let mut target = start_clock + k as f64 * interval;
                if let (Some(limit), Some(total)) = (stop.clock, intervals) {
                    if k >= total {
                        target = limit;
                    }
                }
                let split = |state: &FlowState| {
                    let span = target - state.clock;
                    let substeps = (span / stable_dt(&state.curve, control)).ceil().max(1.0) as u64;
                    (substeps, span / substeps as f64)
                };
                let (mut remaining, mut dt) = split(&state);
                let mut reason = None;
                while remaining > 0 {
                    // The stable step shrinks as curvature grows within the
                    // interval; re-split what is left when it does.
                    let bound = stability_bound(&state.curve, control);
                    if let Some(msg) = exhausted(bound, control) {
                        observe(&state)?;
                        return Ok(finish(state, StopReason::BlowUp, Some(msg)));
                    }
                    if remaining > 1 && dt > bound {
                        (remaining, dt) = split(&state);
                    }
                    remaining -= 1;
                    match advance(&state, dt, control, 0) {
                        Ok(next) => state = next,
                        Err(Error::StepFailure(msg)) => {
                            observe(&state)?;
                            return Ok(finish(state, StopReason::BlowUp, Some(msg)));
                        }
                        Err(e) => return Err(e),
                    }
                    if curvature_hit(&state) {
                        reason = Some(StopReason::CurvatureThreshold);
                    } else if steps_hit(&state) {
                        reason = Some(StopReason::MaxSteps);
                    }
                    if reason.is_some() {
                        break;
                    }
                }
                if reason.is_none() {
                    state.clock = target;
                    if intervals.is_some_and(|total| k >= total) {
                        reason = Some(StopReason::ClockLimit);
                    }
                }
                observe(&state)?;
                if let Some(reason) = reason {
                    return Ok(finish(state, reason, None));
                }
            }
        }
    }
}

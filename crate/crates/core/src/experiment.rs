//! End-to-end pipelines: physical run to locate the singularity, then a
//! rescaled run of the same initial curve monitored by the energy identity.

use crate::error::{Error, Result};
use crate::flow::{self, FlowState, Mode, RunSummary, Sampling, StepControl, StopReason, StopRule};
use crate::functionals::{self, Corollary2Verdict, EnergyReport, EnergySample};
use crate::geometry::DiscreteCurve;
use crate::rescale::{self, CurvaturePeak, SingularityEstimate};
use crate::vec3::Vec3;

/// Settings of the physical run that locates the singularity.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationPlan {
    pub control: StepControl,
    /// The run stops once max H reaches this value.
    pub max_curvature: f64,
    /// Snapshot stride in steps.
    pub sample_every: u64,
    /// Snapshots below this max H are left out of the fit.
    pub onset: f64,
    pub max_steps: Option<u64>,
}

impl Default for EstimationPlan {
    fn default() -> Self {
        Self {
            control: StepControl::for_mode(Mode::Physical),
            max_curvature: 100.0,
            sample_every: 20,
            onset: rescale::DEFAULT_ONSET,
            max_steps: None,
        }
    }
}

/// Runs the physical flow from `initial` at t = 0 and fits the blow-up.
pub fn estimate_blowup(initial: &DiscreteCurve, plan: &EstimationPlan) -> Result<SingularityEstimate> {
    if !(plan.max_curvature > plan.onset) {
        return Err(Error::InvalidArgument(format!(
            "estimation threshold {} must exceed the onset {}",
            plan.max_curvature, plan.onset
        )));
    }
    let stop = StopRule {
        clock: None,
        max_curvature: Some(plan.max_curvature),
        max_steps: plan.max_steps,
    };
    let mut peaks = Vec::new();
    let summary = flow::run_with(
        FlowState::new(initial.clone(), 0.0, Mode::Physical),
        &stop,
        &plan.control,
        Sampling::EverySteps(plan.sample_every),
        |s| {
            peaks.push(CurvaturePeak::of(s)?);
            Ok(())
        },
    )?;
    if let Some(msg) = summary.failure {
        return Err(Error::StepFailure(format!(
            "physical run failed at t = {} before reaching max H = {}: {msg}",
            summary.final_state.clock, plan.max_curvature
        )));
    }
    rescale::fit_blowup(&peaks, plan.onset)
}

/// Settings of the monitored rescaled run.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityPlan {
    pub control: StepControl,
    /// Length of the τ-interval integrated from the initial rescaled time.
    pub tau_span: f64,
    /// Snapshot spacing in τ; the span is rounded to a whole number of these.
    pub snapshot_dtau: f64,
}

impl Default for IdentityPlan {
    fn default() -> Self {
        Self {
            control: StepControl::for_mode(Mode::Rescaled),
            tau_span: 1.0,
            snapshot_dtau: 1e-4,
        }
    }
}

impl IdentityPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.snapshot_dtau > 0.0 && self.snapshot_dtau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "snapshot spacing must be positive, got {}",
                self.snapshot_dtau
            )));
        }
        if !(self.tau_span > 0.0 && self.tau_span.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "τ span must be positive, got {}",
                self.tau_span
            )));
        }
        if self.intervals() < 2 {
            return Err(Error::InvalidArgument(format!(
                "τ span {} holds fewer than two snapshot intervals of {}",
                self.tau_span, self.snapshot_dtau
            )));
        }
        self.control.validate()
    }

    pub fn intervals(&self) -> u64 {
        (self.tau_span / self.snapshot_dtau).round() as u64
    }
}

/// Energy history of a monitored rescaled run.
#[derive(Clone, Debug)]
pub struct IdentityRun {
    pub initial_tau: f64,
    pub samples: Vec<EnergySample>,
    /// One report per interior sample.
    pub reports: Vec<EnergyReport>,
    pub max_relative_residual: f64,
    pub corollary2: Corollary2Verdict,
    pub stop_reason: StopReason,
    /// Why the run ended early, if it did.
    pub failure: Option<String>,
    pub final_state: FlowState,
}

impl IdentityRun {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.reports.iter().map(|r| r.residual.abs()).fold(0.0, f64::max)
    }
}

/// Integrates the rescaled flow from `state`, recording E, Π and D at every
/// snapshot. A frame or step failure ends the run and is reported in
/// [`IdentityRun::failure`]; the samples gathered until then are kept.
pub fn monitor_identity(state: FlowState, plan: &IdentityPlan) -> Result<IdentityRun> {
    plan.validate()?;
    if state.mode != Mode::Rescaled {
        return Err(Error::InvalidArgument("the identity is monitored on rescaled states".into()));
    }
    let initial_tau = state.clock;
    let stop = StopRule::at_clock(initial_tau + plan.intervals() as f64 * plan.snapshot_dtau);
    let mut samples = Vec::new();
    let mut frame_failure = None;
    let mut last_state = None;
    let result = flow::run_with(state, &stop, &plan.control, Sampling::Clock(plan.snapshot_dtau), |s| {
        match EnergySample::of(s) {
            Ok(sample) => {
                samples.push(sample);
                Ok(())
            }
            Err(e) => {
                frame_failure = Some(e.to_string());
                last_state = Some(s.clone());
                Err(e)
            }
        }
    });
    let (stop_reason, failure, final_state) = match result {
        Ok(RunSummary {
            stop_reason,
            final_state,
            failure,
        }) => (stop_reason, failure, final_state),
        Err(e) => match (frame_failure, last_state) {
            (Some(msg), Some(s)) => (StopReason::BlowUp, Some(msg), s),
            _ => return Err(e),
        },
    };
    let uniform = uniform_prefix(&samples, initial_tau, plan.snapshot_dtau);
    samples.truncate(uniform);
    let reports = if samples.len() >= 3 {
        functionals::reports_from_samples(&samples)?
    } else {
        Vec::new()
    };
    Ok(IdentityRun {
        initial_tau,
        max_relative_residual: functionals::max_relative_residual(&reports),
        corollary2: functionals::corollary2_check(&reports),
        samples,
        reports,
        stop_reason,
        failure,
        final_state,
    })
}

/// Number of leading samples sitting on the grid τ0 + k·dτ.
fn uniform_prefix(samples: &[EnergySample], tau0: f64, dtau: f64) -> usize {
    samples
        .iter()
        .enumerate()
        .take_while(|(k, s)| (s.tau - (tau0 + *k as f64 * dtau)).abs() <= 1e-9 * dtau.max(1.0))
        .count()
}

/// Rescales `initial` about (T, p), taken as the state at t = 0, and
/// monitors the identity along the rescaled flow.
pub fn identity_run(initial: &DiscreteCurve, blowup_time: f64, point: Vec3, plan: &IdentityPlan) -> Result<IdentityRun> {
    let state = FlowState::new(initial.clone(), 0.0, Mode::Physical);
    monitor_identity(rescale::rescaled_state(&state, blowup_time, point)?, plan)
}

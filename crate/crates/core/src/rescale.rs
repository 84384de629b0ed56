//! Blow-up time and point estimation, and the parabolic change of variables
//! τ = −log(T−t), v = (T−t)^{-1/2}(u − p).

use crate::error::{Error, Result};
use crate::flow::{FlowState, Mode, Trajectory};
use crate::geometry::{self, DiscreteCurve};
use crate::vec3::Vec3;

/// Snapshots with max H below this are ignored by the blow-up fit.
pub const DEFAULT_ONSET: f64 = 5.0;

/// Fewest qualifying snapshots the fit accepts.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Estimated first singularity of a physical trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularityEstimate {
    /// Estimated blow-up time T.
    pub blowup_time: f64,
    /// Estimated singular point p.
    pub blowup_point: Vec3,
    /// RMS error of the linear fit of 1/(2 max H²) against t.
    pub fit_residual: f64,
    pub samples_used: usize,
}

/// Curvature peak of one physical snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvaturePeak {
    pub t: f64,
    pub max_curvature: f64,
    /// Position of the node carrying the maximum.
    pub position: Vec3,
}

impl CurvaturePeak {
    pub fn of(state: &FlowState) -> Result<Self> {
        let h = geometry::curvature(&state.curve)?;
        let (node, &max_curvature) = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("curves have at least 16 nodes");
        Ok(Self {
            t: state.clock,
            max_curvature,
            position: state.curve.nodes()[node],
        })
    }
}

pub fn estimate_singularity(trajectory: &Trajectory) -> Result<SingularityEstimate> {
    estimate_singularity_with(trajectory, DEFAULT_ONSET)
}

pub fn estimate_singularity_with(trajectory: &Trajectory, onset: f64) -> Result<SingularityEstimate> {
    if let Some(s) = trajectory.snapshots.iter().find(|s| s.mode != Mode::Physical) {
        return Err(Error::InvalidTrajectory(format!(
            "blow-up estimation needs physical snapshots, found {} mode at clock {}",
            s.mode.name(),
            s.clock
        )));
    }
    let peaks = trajectory
        .snapshots
        .iter()
        .map(CurvaturePeak::of)
        .collect::<Result<Vec<_>>>()?;
    fit_blowup(&peaks, onset)
}

/// Least-squares fit of y = 1/(2 max H²) = b (T − t) over the peaks with
/// max H ≥ `onset`. Exact for shrinking circles; the point estimate is the
/// peak position of the latest qualifying snapshot.
pub fn fit_blowup(peaks: &[CurvaturePeak], onset: f64) -> Result<SingularityEstimate> {
    let used: Vec<&CurvaturePeak> = peaks.iter().filter(|p| p.max_curvature >= onset).collect();
    if used.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            found: used.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let m = used.len() as f64;
    let y = |p: &CurvaturePeak| 0.5 / (p.max_curvature * p.max_curvature);
    let t_mean = used.iter().map(|p| p.t).sum::<f64>() / m;
    let y_mean = used.iter().map(|p| y(p)).sum::<f64>() / m;
    let (mut sty, mut stt) = (0.0, 0.0);
    for p in &used {
        let dt = p.t - t_mean;
        sty += dt * (y(p) - y_mean);
        stt += dt * dt;
    }
    if !(stt > 0.0) {
        return Err(Error::InvalidTrajectory(
            "qualifying snapshots share a single clock value".into(),
        ));
    }
    let slope = sty / stt;
    if !(slope < 0.0) {
        return Err(Error::InvalidTrajectory(format!(
            "max curvature is not growing (fit slope {slope:e})"
        )));
    }
    let blowup_time = t_mean - y_mean / slope;
    let fit_residual = (used
        .iter()
        .map(|p| {
            let r = y(p) - (y_mean + slope * (p.t - t_mean));
            r * r
        })
        .sum::<f64>()
        / m)
        .sqrt();
    let last = used.last().expect("non-empty");
    if !(blowup_time > last.t) {
        return Err(Error::InvalidTrajectory(format!(
            "fitted blow-up time {blowup_time} does not exceed the last fitted clock {}",
            last.t
        )));
    }
    Ok(SingularityEstimate {
        blowup_time,
        blowup_point: last.position,
        fit_residual,
        samples_used: used.len(),
    })
}

/// Maps a physical curve at time t to (v, τ) with v = (u − p)/√(T−t) and
/// τ = −log(T−t).
pub fn to_rescaled(curve: &DiscreteCurve, t: f64, blowup_time: f64, point: Vec3) -> Result<(DiscreteCurve, f64)> {
    let remaining = blowup_time - t;
    if !(remaining > 0.0) || !remaining.is_finite() {
        return Err(Error::InvalidTime { t, blowup: blowup_time });
    }
    let scale = remaining.sqrt().recip();
    Ok((curve.map(|p| (p - point) * scale)?, -remaining.ln()))
}

/// Inverse of [`to_rescaled`]: t = T − e^{−τ}, u = e^{−τ/2} v + p.
pub fn from_rescaled(curve: &DiscreteCurve, tau: f64, blowup_time: f64, point: Vec3) -> Result<(DiscreteCurve, f64)> {
    if !tau.is_finite() || !blowup_time.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rescaling needs finite τ and T, got τ = {tau}, T = {blowup_time}"
        )));
    }
    let scale = (-0.5 * tau).exp();
    Ok((curve.map(|v| v * scale + point)?, blowup_time - (-tau).exp()))
}

/// Rescaled-mode state for a physical state, about the given blow-up.
pub fn rescaled_state(state: &FlowState, blowup_time: f64, point: Vec3) -> Result<FlowState> {
    let (curve, tau) = to_rescaled(&state.curve, state.clock, blowup_time, point)?;
    Ok(FlowState::new(curve, tau, Mode::Rescaled))
}

//! Gaussian-weighted length and its two dissipation integrals.
//!
//! With w = e^{−|v|²/4} and γ, ν the binormal and normal:
//!
//! ```text
//! E = ∫ w |v′| dx
//! Π = ¼ ∫ (v·γ)² w |v′| dx
//! D = ∫ (∂τv·ν)² w |v′| dx,   ∂τv·ν = ½ v·ν + H
//! ```
//!
//! Along the rescaled flow dE/dτ = −Π − D, so in particular Π ≤ −dE/dτ.

use crate::error::{Error, Result};
use crate::flow::{self, FlowState, Mode, Trajectory};
use crate::geometry::{periodic_integral, CurveJet, DiscreteCurve};
use crate::vec3::Vec3;

/// Relative tolerance on the spacing of snapshot clocks.
const SPACING_RTOL: f64 = 1e-6;

fn weight(p: Vec3) -> f64 {
    (-0.25 * p.norm_squared()).exp()
}

pub fn energy(curve: &DiscreteCurve) -> Result<f64> {
    let speeds = CurveJet::new(curve).speeds()?;
    Ok(periodic_integral(
        curve.nodes().iter().zip(&speeds).map(|(p, s)| weight(*p) * s),
    ))
}

pub fn binormal_dissipation(curve: &DiscreteCurve) -> Result<f64> {
    let frame = CurveJet::new(curve).frenet_frame()?;
    Ok(periodic_integral(curve.nodes().iter().enumerate().map(|(i, p)| {
        let a = p.dot(frame.binormal[i]);
        0.25 * a * a * weight(*p) * frame.speed[i]
    })))
}

pub fn normal_dissipation(curve: &DiscreteCurve) -> Result<f64> {
    let frame = CurveJet::new(curve).frenet_frame()?;
    let velocity = flow::rhs_rescaled(curve)?;
    Ok(periodic_integral(curve.nodes().iter().enumerate().map(|(i, p)| {
        let a = velocity[i].dot(frame.normal[i]);
        a * a * weight(*p) * frame.speed[i]
    })))
}

/// E, Π and D of one curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyTerms {
    pub energy: f64,
    pub binormal: f64,
    pub normal: f64,
}

/// All three integrals from a single derivative evaluation.
pub fn energy_terms(curve: &DiscreteCurve) -> Result<EnergyTerms> {
    let frame = CurveJet::new(curve).frenet_frame()?;
    let velocity = flow::rhs_rescaled(curve)?;
    let n = curve.n();
    let (mut e, mut pi, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (i, p) in curve.nodes().iter().enumerate() {
        let ws = weight(*p) * frame.speed[i];
        let b = p.dot(frame.binormal[i]);
        let a = velocity[i].dot(frame.normal[i]);
        e.push(ws);
        pi.push(0.25 * b * b * ws);
        d.push(a * a * ws);
    }
    Ok(EnergyTerms {
        energy: periodic_integral(e),
        binormal: periodic_integral(pi),
        normal: periodic_integral(d),
    })
}

/// Energy terms tagged with the rescaled time they were taken at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub tau: f64,
    pub terms: EnergyTerms,
}

impl EnergySample {
    pub fn of(state: &FlowState) -> Result<Self> {
        if state.mode != Mode::Rescaled {
            return Err(Error::InvalidTrajectory(format!(
                "energy identity needs rescaled states, found {} mode at clock {}",
                state.mode.name(),
                state.clock
            )));
        }
        Ok(Self {
            tau: state.clock,
            terms: energy_terms(&state.curve)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub tau: f64,
    pub energy: f64,
    pub binormal: f64,
    pub normal: f64,
    /// Centered difference of E over neighbouring snapshots.
    pub de_dtau_fd: f64,
    /// de_dtau_fd + Π + D.
    pub residual: f64,
}

/// Identity check at every interior snapshot of a rescaled trajectory.
pub fn identity_residual(trajectory: &Trajectory) -> Result<Vec<EnergyReport>> {
    check_count(trajectory.len())?;
    let samples = trajectory
        .snapshots
        .iter()
        .map(EnergySample::of)
        .collect::<Result<Vec<_>>>()?;
    reports_from_samples(&samples)
}

fn check_count(found: usize) -> Result<()> {
    if found < 3 {
        return Err(Error::InvalidTrajectory(format!(
            "the identity check needs at least 3 snapshots, got {found}"
        )));
    }
    Ok(())
}

/// As [`identity_residual`], from samples already reduced to energy terms.
pub fn reports_from_samples(samples: &[EnergySample]) -> Result<Vec<EnergyReport>> {
    check_count(samples.len())?;
    let dtau = samples[1].tau - samples[0].tau;
    if !(dtau > 0.0) {
        return Err(Error::InvalidTrajectory(format!(
            "snapshot clocks must increase, got spacing {dtau}"
        )));
    }
    for (k, w) in samples.windows(2).enumerate() {
        let gap = w[1].tau - w[0].tau;
        if (gap - dtau).abs() > SPACING_RTOL * dtau {
            return Err(Error::InvalidTrajectory(format!(
                "non-uniform snapshot spacing: {gap} after snapshot {k}, expected {dtau}"
            )));
        }
    }
    Ok(samples
        .windows(3)
        .map(|w| {
            let t = w[1].terms;
            let de = (w[2].terms.energy - w[0].terms.energy) / (w[2].tau - w[0].tau);
            EnergyReport {
                tau: w[1].tau,
                energy: t.energy,
                binormal: t.binormal,
                normal: t.normal,
                de_dtau_fd: de,
                residual: de + t.binormal + t.normal,
            }
        })
        .collect())
}

/// Largest |residual|/E over a report series.
pub fn max_relative_residual(reports: &[EnergyReport]) -> f64 {
    reports
        .iter()
        .map(|r| (r.residual / r.energy).abs())
        .fold(0.0, f64::max)
}

/// Outcome of checking Π ≤ −dE/dτ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Corollary2Verdict {
    pub holds: bool,
    /// min over snapshots of −dE/dτ − Π; infinite for an empty series.
    pub worst_margin: f64,
}

/// Checks Π ≤ −dE/dτ + tol at every report, with
/// tol = max(1e−6·E, 10·|residual|).
pub fn corollary2_check(reports: &[EnergyReport]) -> Corollary2Verdict {
    let mut verdict = Corollary2Verdict {
        holds: true,
        worst_margin: f64::INFINITY,
    };
    for r in reports {
        let margin = -r.de_dtau_fd - r.binormal;
        let tol = (1e-6 * r.energy).max(10.0 * r.residual.abs());
        verdict.worst_margin = verdict.worst_margin.min(margin);
        if !(margin >= -tol) {
            verdict.holds = false;
        }
    }
    verdict
}

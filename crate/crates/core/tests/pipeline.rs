use std::f64::consts::SQRT_2;

use curvelab_core::experiment::{estimate_blowup, identity_run, EstimationPlan, IdentityPlan};
use curvelab_core::flow::{self, rhs_rescaled, FlowState, Mode, Sampling, StepControl, StopReason, StopRule};
use curvelab_core::functionals;
use curvelab_core::rescale::{self, to_rescaled};
use curvelab_core::scenarios::{circle_oracle, make_curve, ScenarioSpec};
use curvelab_core::{DiscreteCurve, Vec3};

/// Max that propagates NaN, so a broken value cannot pass a bound.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn scenario(name: &str, n: usize) -> DiscreteCurve {
    make_curve(&ScenarioSpec::with_defaults(name, n, Mode::Physical).unwrap()).unwrap()
}

fn circle(n: usize, r: f64) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, |x| Vec3::new(r * x.cos(), r * x.sin(), 0.0)).unwrap()
}

fn physical(curve: DiscreteCurve) -> FlowState {
    FlowState::new(curve, 0.0, Mode::Physical)
}

#[test]
fn circle_radius_follows_oracle() {
    let traj = flow::run(
        physical(circle(128, 1.0)),
        &StopRule::at_clock(0.45),
        &StepControl::default(),
        Sampling::Clock(0.05),
    )
    .unwrap();
    assert_eq!(traj.len(), 10);
    for s in &traj.snapshots {
        let r = circle_oracle(1.0, s.clock).unwrap();
        let worst = s.curve.nodes().iter().map(|p| (p.norm() - r).abs()).fold(0.0, nan_max);
        assert!(worst <= 1e-6, "t = {}: {worst:e}", s.clock);
    }
}

#[test]
fn radius_two_circle_blowup() {
    let est = estimate_blowup(&circle(64, 2.0), &EstimationPlan::default()).unwrap();
    assert!((est.blowup_time - 2.0).abs() <= 4e-3, "{est:?}");
}

/// Rescaled snapshots of a physical solution satisfy the rescaled equation,
/// with a centred-difference defect of second order. Any T works; T = 0.6
/// keeps the rescaled circle moving.
#[test]
fn rescaled_physical_solution_solves_rescaled_flow() {
    let big_t = 0.6;
    let defect = |dt: f64| {
        let control = StepControl {
            redistribute_every: 0,
            ..StepControl::default()
        };
        let s0 = physical(circle(32, 1.0));
        let s0 = flow::advance_to(&s0, 0.2, &control).unwrap();
        let s1 = flow::advance_to(&s0, 0.2 + dt, &control).unwrap();
        let (v0, tau0) = to_rescaled(&s0.curve, s0.clock, big_t, Vec3::ZERO).unwrap();
        let (v1, tau1) = to_rescaled(&s1.curve, s1.clock, big_t, Vec3::ZERO).unwrap();
        let mid = v0.map(|p| p * 0.5).unwrap();
        let mid = DiscreteCurve::new(mid.nodes().iter().zip(v1.nodes()).map(|(a, b)| *a + *b * 0.5).collect()).unwrap();
        let rhs = rhs_rescaled(&mid).unwrap();
        v0.nodes()
            .iter()
            .zip(v1.nodes())
            .zip(&rhs)
            .map(|((a, b), r)| ((*b - *a) / (tau1 - tau0) - *r).norm())
            .fold(0.0, nan_max)
    };
    let (coarse, fine) = (defect(2e-3), defect(1e-3));
    assert!(coarse < 1e-4, "{coarse:e}");
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn identity_holds_with_misestimated_blowup_time() {
    let plan = IdentityPlan {
        tau_span: 0.5,
        snapshot_dtau: 1e-3,
        ..IdentityPlan::default()
    };
    for big_t in [0.45, 0.55] {
        let run = identity_run(&circle(64, 1.0), big_t, Vec3::ZERO, &plan).unwrap();
        assert!(run.completed());
        assert!(run.max_relative_residual <= 1e-5, "T = {big_t}: {:e}", run.max_relative_residual);
        assert!(run.corollary2.holds);
        assert!(run.reports.iter().all(|r| r.normal > 0.0 && r.binormal < 1e-20));
    }
}

#[test]
fn rescaled_circles_follow_the_radial_ode() {
    // R² obeys d(R²)/dτ = R² − 2, so the unit circle collapses at τ = ln 2.
    let traj = flow::run(
        FlowState::new(circle(64, 1.0), 0.0, Mode::Rescaled),
        &StopRule::at_clock(0.6),
        &StepControl::for_mode(Mode::Rescaled),
        Sampling::Clock(0.15),
    )
    .unwrap();
    assert_eq!(traj.len(), 5);
    for s in &traj.snapshots {
        let exact = (2.0 - s.clock.exp()).sqrt();
        assert!(exact.is_finite());
        let worst = s.curve.nodes().iter().map(|p| (p.norm() - exact).abs()).fold(0.0, nan_max);
        assert!(worst <= 1e-6, "τ = {}: {worst:e}", s.clock);
    }
}

#[test]
fn lifted_circle_identity_run() {
    let u = scenario("offset_circle", 64);
    let plan = IdentityPlan {
        tau_span: 0.2,
        snapshot_dtau: 1e-3,
        ..IdentityPlan::default()
    };
    let run = identity_run(&u, 0.5, Vec3::ZERO, &plan).unwrap();
    assert!(run.completed());
    assert!(run.reports.iter().all(|r| r.binormal > 0.1));
    assert!(run.max_relative_residual < 1e-5);
    assert!(run.corollary2.holds);
    assert!(run.corollary2.worst_margin >= 0.0);
}

/// Nearest distance from each point of `a` to the polygon through `b`.
fn one_sided(a: &[Vec3], b: &[Vec3]) -> f64 {
    let m = b.len();
    a.iter()
        .map(|p| {
            (0..m)
                .map(|j| {
                    let (q, r) = (b[j], b[(j + 1) % m]);
                    let d = r - q;
                    let s = ((*p - q).dot(d) / d.norm_squared()).clamp(0.0, 1.0);
                    (*p - (q + d * s)).norm()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, nan_max)
}

#[test]
fn redistribution_does_not_move_the_image() {
    let u = scenario("twisted_circle", 64);
    let image = |every: u64| {
        let control = StepControl {
            redistribute_every: every,
            ..StepControl::default()
        };
        let s = flow::advance_to(&physical(u.clone()), 0.2, &control).unwrap();
        s.curve.refine(8192).unwrap().into_nodes()
    };
    let (plain, redistributed) = (image(0), image(10));
    let h = one_sided(&plain, &redistributed).max(one_sided(&redistributed, &plain));
    assert!(h <= 1e-6, "Hausdorff {h:e}");
}

#[test]
fn stationary_states_carry_no_binormal_dissipation() {
    let traj = flow::run(
        FlowState::new(circle(64, SQRT_2), 0.0, Mode::Rescaled),
        &StopRule::at_clock(0.5),
        &StepControl::for_mode(Mode::Rescaled),
        Sampling::Clock(0.1),
    )
    .unwrap();
    for s in &traj.snapshots {
        let speed = flow::rhs_rescaled(&s.curve).unwrap().iter().map(|v| v.norm()).fold(0.0, nan_max);
        assert!(speed <= 1e-8);
        assert!(functionals::binormal_dissipation(&s.curve).unwrap() <= 1e-10);
    }
}

#[test]
fn estimate_then_rescale_lands_near_the_soliton() {
    let u = circle(64, 1.0);
    let est = estimate_blowup(&u, &EstimationPlan::default()).unwrap();
    let state = rescale::rescaled_state(&physical(u), est.blowup_time, est.blowup_point).unwrap();
    let e = functionals::energy(&state.curve).unwrap();
    assert!((e - 5.38948).abs() < 1e-2, "E = {e}");
    assert_eq!(state.mode, Mode::Rescaled);
}

#[test]
fn curvature_stop_is_reported() {
    let traj = flow::run(
        physical(scenario("ellipse", 64)),
        &StopRule::at_curvature(10.0),
        &StepControl::default(),
        Sampling::EverySteps(100),
    )
    .unwrap();
    assert_eq!(traj.stop_reason, StopReason::CurvatureThreshold);
}

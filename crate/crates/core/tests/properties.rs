use std::f64::consts::TAU;

use curvelab_core::flow::{self, FlowState, Mode, Sampling, StepControl, StopRule};
use curvelab_core::functionals::{self, energy_terms};
use curvelab_core::geometry::{self, differentiate_periodic, periodic_integral, DiffScheme};
use curvelab_core::rescale::{from_rescaled, to_rescaled};
use curvelab_core::scenarios::{make_curve, ScenarioSpec};
use curvelab_core::zelenjak::{self, PointFrame};
use curvelab_core::{DiscreteCurve, Vec3};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(20240611),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn random_curve(seed: u64, n: usize, planar: bool) -> DiscreteCurve {
    let name = if planar { "planar_random" } else { "fourier_random" };
    let spec = ScenarioSpec::with_defaults(name, n, Mode::Physical)
        .unwrap()
        .with("seed", seed as f64)
        .unwrap();
    make_curve(&spec).unwrap()
}

fn band_limited(coeffs: &[(f64, f64)], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = TAU * i as f64 / n as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let k = k as f64;
                    a * (k * x).cos() + b * (k * x).sin()
                })
                .sum()
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn summation_by_parts(
        f in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..30),
        g in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..30),
    ) {
        let n = 64;
        let (fv, gv) = (band_limited(&f, n), band_limited(&g, n));
        let df = differentiate_periodic(&fv, 1, DiffScheme::Spectral).unwrap();
        let dg = differentiate_periodic(&gv, 1, DiffScheme::Spectral).unwrap();
        let s = periodic_integral((0..n).map(|i| fv[i] * dg[i] + df[i] * gv[i]));
        prop_assert!(s.abs() <= 1e-12, "sum {s:e}");
    }

    #[test]
    fn curvature_scales_inversely(seed in 0u64..10_000, c in 0.01..100.0f64) {
        let u = random_curve(seed, 64, false);
        let h = geometry::curvature(&u).unwrap();
        let hc = geometry::curvature(&u.scaled(c).unwrap()).unwrap();
        let top = h.iter().cloned().fold(0.0, f64::max);
        for (a, b) in h.iter().zip(&hc) {
            prop_assert!((b * c - a).abs() <= 1e-12 * top);
        }
    }

    #[test]
    fn curvature_ignores_rigid_motion(seed in 0u64..10_000, shift in prop::array::uniform3(-5.0..5.0f64), angle in 0.0..TAU) {
        let u = random_curve(seed, 64, false);
        let (s, c) = angle.sin_cos();
        let moved = u.map(|p| Vec3::new(c * p.x - s * p.z, p.y, s * p.x + c * p.z) + Vec3::from(shift)).unwrap();
        let h = geometry::curvature(&u).unwrap();
        let hm = geometry::curvature(&moved).unwrap();
        for (a, b) in h.iter().zip(&hm) {
            prop_assert!(rel(*b, *a) <= 1e-10);
        }
    }

    #[test]
    fn frames_are_orthonormal(seed in 0u64..10_000) {
        let frame = geometry::frenet_frame(&random_curve(seed, 64, false)).unwrap();
        prop_assert!(frame.orthonormality_defect() <= 1e-10);
    }

    #[test]
    fn dissipations_are_nonnegative(seed in 0u64..10_000) {
        let t = energy_terms(&random_curve(seed, 64, false)).unwrap();
        prop_assert!(t.energy > 0.0);
        prop_assert!(t.binormal >= 0.0);
        prop_assert!(t.normal >= 0.0);
    }

    #[test]
    fn functionals_survive_reparametrization(seed in 0u64..10_000, warp in -0.3..0.3f64) {
        let spec = ScenarioSpec::with_defaults("fourier_random", 128, Mode::Physical).unwrap().with("seed", seed as f64).unwrap();
        let smooth = make_curve(&spec).unwrap();
        // Same image, sampled at the warped parameter x + warp·sin x.
        let dense = smooth.refine(1024).unwrap();
        let warped = DiscreteCurve::from_fn(128, |x| {
            let y = x + warp * x.sin();
            interpolate(&dense, y)
        }).unwrap();
        for u in [smooth, warped] {
            let before = energy_terms(&u).unwrap();
            let after = energy_terms(&geometry::resample_uniform_arclength(&u).unwrap()).unwrap();
            prop_assert!(rel(after.energy, before.energy) <= 1e-6);
            prop_assert!(rel(after.binormal, before.binormal) <= 1e-6);
            prop_assert!(rel(after.normal, before.normal) <= 1e-6);
        }
    }

    #[test]
    fn rescaling_round_trips(seed in 0u64..10_000, t in -1.0..0.9f64, p in prop::array::uniform3(-2.0..2.0f64)) {
        let u = random_curve(seed, 32, false);
        let p = Vec3::from(p);
        let (v, tau) = to_rescaled(&u, t, 1.0, p).unwrap();
        let (back, t2) = from_rescaled(&v, tau, 1.0, p).unwrap();
        prop_assert!((t2 - t).abs() <= 1e-14);
        prop_assert!(back.max_node_distance(&u) <= 1e-13);
    }

    #[test]
    fn inequality_gap_is_the_binormal_term(seed in any::<u64>()) {
        use rand::SeedableRng;
        let frame = zelenjak::random_frame(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let g = zelenjak::inequality_gap(&frame);
        prop_assert!(g.gap >= 0.0);
        prop_assert!((g.gap - g.expected).abs() <= 1e-12 * frame.rho());
        prop_assert!(zelenjak::pythagoras_check(frame.xi(), &frame) <= 1e-12 * frame.xi().norm_squared().max(1.0));
    }

    #[test]
    fn gap_closes_in_the_normal_plane(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        use rand::SeedableRng;
        let f = zelenjak::random_frame(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let in_plane: PointFrame = f.with_xi(f.nu() * a + f.eta() * b).unwrap();
        prop_assert!(zelenjak::inequality_gap(&in_plane).gap.abs() <= 1e-14);
    }

    #[test]
    fn weight_identities_hold_pointwise(seed in any::<u64>()) {
        use rand::SeedableRng;
        let (xi, eta) = zelenjak::random_point(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let rho = zelenjak::weight(xi, eta).unwrap();
        prop_assert!(zelenjak::hessian_identity_check(xi, eta).unwrap() <= 1e-6 * rho / eta.norm());
        prop_assert!(zelenjak::gradient_vector_identity(xi, eta).unwrap() <= 1e-6 * rho);
    }
}

/// Trigonometric interpolation of a densely refined curve by local cubic
/// Lagrange interpolation, accurate far beyond the tolerances used here.
fn interpolate(dense: &DiscreteCurve, y: f64) -> Vec3 {
    let m = dense.n();
    let t = y.rem_euclid(TAU) / TAU * m as f64;
    let i = t.floor() as isize;
    let s = t - i as f64;
    let at = |k: isize| dense.nodes()[(i + k).rem_euclid(m as isize) as usize];
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    at(-1) * w[0] + at(0) * w[1] + at(1) * w[2] + at(2) * w[3]
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn physical_length_decreases(seed in 0u64..10_000) {
        let traj = flow::run(
            FlowState::new(random_curve(seed, 64, false), 0.0, Mode::Physical),
            &StopRule::at_clock(0.05),
            &StepControl::default(),
            Sampling::EverySteps(5),
        ).unwrap();
        let lengths: Vec<f64> = traj.snapshots.iter().map(|s| geometry::length(&s.curve)).collect();
        prop_assert!(lengths.windows(2).all(|w| w[1] < w[0] + 1e-12));
    }

    #[test]
    fn planar_curves_stay_planar(seed in 0u64..10_000, rescaled in any::<bool>()) {
        let mode = if rescaled { Mode::Rescaled } else { Mode::Physical };
        let traj = flow::run(
            FlowState::new(random_curve(seed, 64, true), 0.0, mode),
            &StopRule::at_clock(0.05),
            &StepControl::for_mode(mode),
            Sampling::EverySteps(10),
        ).unwrap();
        for s in &traj.snapshots {
            prop_assert!(s.curve.nodes().iter().all(|p| p.z.abs() <= 1e-10));
        }
    }

    #[test]
    fn energy_is_monotone_along_rescaled_runs(seed in 0u64..10_000) {
        let u = random_curve(seed, 64, false);
        let traj = flow::run(
            FlowState::new(u.scaled(1.5).unwrap(), 0.0, Mode::Rescaled),
            &StopRule::at_clock(0.05),
            &StepControl::for_mode(Mode::Rescaled),
            Sampling::Clock(1e-3),
        ).unwrap();
        let reports = functionals::identity_residual(&traj).unwrap();
        let e: Vec<f64> = traj.snapshots.iter().map(|s| functionals::energy(&s.curve).unwrap()).collect();
        for (k, r) in reports.iter().enumerate() {
            prop_assert!(e[k + 2] <= e[k + 1] + r.residual.abs() * 1e-3);
        }
        prop_assert!(functionals::corollary2_check(&reports).holds);
    }
}

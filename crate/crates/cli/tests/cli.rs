use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn curvelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV file, parsed as floats.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn out_dir(tmp: &TempDir, name: &str) -> String {
    tmp.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn circle_simulation_stops_at_the_curvature_threshold() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&["simulate", "--out", &dir, "--set", "scenario.n=64", "--set", "stop.max_curvature=100", "--plots"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&Path::new(&dir).join("meta.json"));
    assert_eq!(meta["stop_reason"], "curvature-threshold");
    let t = meta["final_clock"].as_f64().unwrap();
    // max H = 100 is reached at t = (1 − 10⁻⁴)/2.
    assert!((t - 0.49995).abs() < 1e-5, "{t}");
    let traj = Path::new(&dir).join("trajectory.csv");
    assert_eq!(header(&traj), "clock,length,max_curvature,min_speed");
    let last = rows(&traj).pop().unwrap();
    assert!(last[2] >= 100.0 && last[2] < 101.0, "{last:?}");
    assert!(Path::new(&dir).join("plots/curvature.svg").exists());
    assert!(Path::new(&dir).join("config.txt").exists());
}

#[test]
fn zero_steps_gives_a_single_row() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&["simulate", "--out", &dir, "--set", "stop.max_steps=0"]);
    assert_eq!(code(&out), 0);
    assert_eq!(rows(&Path::new(&dir).join("trajectory.csv")).len(), 1);
    assert_eq!(json(&Path::new(&dir).join("meta.json"))["stop_reason"], "max-steps");
}

#[test]
fn stationary_circle_keeps_its_length() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&[
        "simulate",
        "--out",
        &dir,
        "--set",
        "scenario.mode=rescaled",
        "--set",
        "scenario.r=1.4142135623730951",
        "--set",
        "stop.clock=1",
        "--set",
        "run.snapshots=true",
    ]);
    assert_eq!(code(&out), 0);
    let traj = rows(&Path::new(&dir).join("trajectory.csv"));
    let l0 = traj[0][1];
    assert!((l0 - 2.0 * std::f64::consts::PI * 2f64.sqrt()).abs() < 1e-12);
    assert!(traj.iter().all(|r| (r[1] - l0).abs() <= 1e-8));
    assert!((traj.last().unwrap()[0] - 1.0).abs() < 1e-12);
    let snapshots = Path::new(&dir).join("snapshots");
    assert_eq!(fs::read_dir(&snapshots).unwrap().count(), traj.len());
    assert_eq!(header(&snapshots.join("0000.csv")), "x,y,z");
    assert_eq!(rows(&snapshots.join("0000.csv")).len(), 128);
}

#[test]
fn stationary_circle_satisfies_the_identity() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&[
        "verify-identity",
        "--out",
        &dir,
        "--set",
        "scenario.mode=rescaled",
        "--set",
        "scenario.r=1.4142135623730951",
        "--set",
        "run.snapshot_dtau=1e-3",
        "--plots",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let verdict = json(&Path::new(&dir).join("verdict.json"));
    assert_eq!(verdict["pass"], true);
    assert!(verdict["max_relative_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(verdict["corollary2"]["pass"], true);
    let energy = Path::new(&dir).join("energy.csv");
    assert_eq!(header(&energy), "tau,E,Pi,D,dE_dtau_fd,residual");
    assert_eq!(rows(&energy).len(), 999);
    assert!(Path::new(&dir).join("plots/energy.svg").exists());
    assert!(Path::new(&dir).join("plots/residual.svg").exists());
}

#[test]
fn twisted_circle_identity_at_full_resolution() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&[
        "verify-identity",
        "--out",
        &dir,
        "--set",
        "scenario.name=twisted_circle",
        "--set",
        "scenario.eps=0.2",
        "--set",
        "scenario.n=256",
        "--set",
        "run.snapshot_dtau=1e-4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let verdict = json(&Path::new(&dir).join("verdict.json"));
    assert!(verdict["max_relative_residual"].as_f64().unwrap() <= 1e-3);
    assert!(verdict["estimate"]["blowup_time"].as_f64().unwrap() > 0.5);
}

#[test]
fn misestimated_blowup_time_still_passes() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&[
        "verify-identity",
        "--out",
        &dir,
        "--set",
        "rescale.blowup_time=0.55",
        "--set",
        "run.snapshot_dtau=1e-3",
        "--set",
        "scenario.n=64",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let verdict = json(&Path::new(&dir).join("verdict.json"));
    assert_eq!(verdict["blowup_time"], 0.55);
    assert!(verdict["corollary2"]["worst_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn convergence_of_the_twisted_circle_is_second_order() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&[
        "convergence",
        "--out",
        &dir,
        "--levels",
        "3",
        "--set",
        "scenario.name=twisted_circle",
        "--set",
        "run.snapshot_dtau=4e-4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let table = Path::new(&dir).join("convergence.csv");
    assert_eq!(header(&table), "level,dtau,max_abs_residual,max_relative_residual,order");
    let rows = rows(&table);
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert!((1.7..=2.5).contains(&r[4]), "{rows:?}");
    }
    for k in 0..3 {
        assert!(Path::new(&dir).join(format!("level_{k}/energy.csv")).exists());
    }
}

#[test]
fn convergence_on_the_soliton_saturates() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    let out = curvelab(&[
        "convergence",
        "--out",
        &dir,
        "--set",
        "scenario.mode=rescaled",
        "--set",
        "scenario.r=1.4142135623730951",
        "--set",
        "run.snapshot_dtau=1e-3",
        "--set",
        "run.tau_span=0.1",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&Path::new(&dir).join("verdict.json"))["observed_order"], "saturated");
    let text = fs::read_to_string(Path::new(&dir).join("convergence.csv")).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with(",saturated")), "{text}");
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "run");
    for args in [
        vec!["verify-identity", "--set", "run.snapshot_dtau=0"],
        vec!["verify-identity", "--set", "run.snapshot_dtau=-1"],
        vec!["convergence", "--levels", "1"],
        vec!["simulate", "--set", "scenario.name=square"],
        vec!["simulate", "--set", "no_equals_sign"],
        vec!["simulate", "--set", "solver.kind=implicit"],
        vec!["check-zelenjak", "--samples", "0"],
        vec!["simulate", "--jobs", "0"],
        vec!["simulate", "--bogus-flag"],
    ] {
        let mut full = args.clone();
        full.extend(["--out", &dir]);
        let out = curvelab(&full);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn io_errors_exit_with_three() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let dir = blocker.join("run");
    let out = curvelab(&["simulate", "--out", dir.to_str().unwrap(), "--set", "stop.max_steps=0"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("file"));
    let out = curvelab(&["simulate", "--config", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn weight_checks_pass_and_are_deterministic() {
    let out = curvelab(&["check-zelenjak", "--samples", "100", "--seed", "42"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["samples"], 100);
    for check in ["hessian", "gradient", "gap", "pythagoras"] {
        assert!(report[check]["worst"].as_f64().unwrap() <= report[check]["tolerance"].as_f64().unwrap());
    }
    let a = curvelab(&["check-zelenjak", "--samples", "1", "--seed", "3"]);
    let b = curvelab(&["check-zelenjak", "--samples", "1", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn zero_tolerance_forces_a_failure() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "z");
    let out = curvelab(&["check-zelenjak", "--out", &dir, "--set", "zelenjak.tol.hessian=0"]);
    assert_eq!(code(&out), 1);
    let verdict = json(&Path::new(&dir).join("verdict.json"));
    assert_eq!(verdict["pass"], false);
    assert_eq!(verdict["hessian"]["pass"], false);
    assert_eq!(verdict["gap"]["pass"], true);
}

#[test]
fn identical_configs_give_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("random.cfg");
    fs::write(
        &cfg,
        "# random curve, a short run\nscenario.name = fourier_random\nscenario.n = 32\nstop.clock = 0.01\nrun.snapshots = true\n",
    )
    .unwrap();
    let run = |name: &str| {
        let dir = out_dir(&tmp, name);
        let out = curvelab(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", &dir]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        dir
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["trajectory.csv", "meta.json", "config.txt", "snapshots/0005.csv"] {
        assert_eq!(
            fs::read(Path::new(&a).join(file)).unwrap(),
            fs::read(Path::new(&b).join(file)).unwrap(),
            "{file}"
        );
    }
    let meta = json(&Path::new(&a).join("meta.json"));
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["config"]["scenario.seed"], "11");

    // The echoed config alone reproduces the run.
    let c = out_dir(&tmp, "c");
    let echoed = Path::new(&a).join("config.txt");
    assert_eq!(code(&curvelab(&["simulate", "--config", echoed.to_str().unwrap(), "--out", &c])), 0);
    assert_eq!(
        fs::read(Path::new(&a).join("trajectory.csv")).unwrap(),
        fs::read(Path::new(&c).join("trajectory.csv")).unwrap()
    );
}

#[test]
fn parallel_jobs_write_separate_directories() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("small.cfg");
    let second = tmp.path().join("ellipse.cfg");
    fs::write(&first, "scenario.n = 32\nstop.max_steps = 5\n").unwrap();
    fs::write(&second, "scenario.name = ellipse\nscenario.n = 32\nstop.max_steps = 5\n").unwrap();
    let dir = out_dir(&tmp, "runs");
    let out = curvelab(&[
        "simulate",
        "--jobs",
        "2",
        "--config",
        first.to_str().unwrap(),
        "--config",
        second.to_str().unwrap(),
        "--out",
        &dir,
    ]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("simulate circle") && lines[1].starts_with("simulate ellipse"), "{stdout}");
    for name in ["small", "ellipse"] {
        let run = Path::new(&dir).join(name);
        assert!(rows(&run.join("trajectory.csv")).len() >= 2);
        assert_eq!(json(&run.join("meta.json"))["stop_reason"], "max-steps");
    }
}

#[test]
fn scenario_listing() {
    let out = curvelab(&["list-scenarios"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["circle", "ellipse", "offset_circle", "twisted_circle", "fourier_random", "planar_random"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

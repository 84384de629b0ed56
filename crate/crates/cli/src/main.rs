//! `curvelab`: run curve shortening flows and check the weighted energy
//! identity along the rescaled flow.
//!
//! Exit status: 0 pass, 1 verification failed, 2 configuration error,
//! 3 runtime or I/O error.

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curvelab_core::scenarios;
use rayon::prelude::*;

use crate::commands::Outcome;
use crate::config::{RunConfig, Settings};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "curvelab", version, about = "Curve shortening flow, parabolic rescaling and the weighted energy identity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow and record length, curvature and speed over time.
    Simulate(Common),
    /// Rescale about the singularity and check dE/dτ = −Π − D along the flow.
    VerifyIdentity(Common),
    /// Pointwise checks of the weight |η|e^{−|ξ|²/4} on random samples.
    CheckZelenjak {
        #[command(flatten)]
        common: Common,
        /// Number of random samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Repeat verify-identity with the snapshot spacing halved at each level.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Number of levels, at least 2.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Print the registered scenarios and their default parameters.
    ListScenarios,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file of `key = value` lines. Repeat to run several
    /// configurations, each in its own subdirectory of --out.
    #[arg(long = "config", value_name = "PATH")]
    configs: Vec<PathBuf>,
    /// Override one key; applied after the config files.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory [default: curvelab-out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for random scenarios and the weight checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Configurations to run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write SVG plots.
    #[arg(long)]
    plots: bool,
}

#[derive(Clone, Copy)]
enum Kind {
    Simulate,
    VerifyIdentity,
    CheckZelenjak,
    Convergence,
}

/// One configuration to run and where its output goes.
fn plan_runs(common: &Common, extra: &[(&str, Option<usize>)]) -> CliResult<Vec<(Settings, PathBuf)>> {
    let mut overrides = Settings::default();
    for s in &common.sets {
        overrides.assign(s).map_err(|e| CliError::config(format!("--set {s}: {e}")))?;
    }
    for (key, value) in extra {
        if let Some(v) = value {
            overrides.set(key, v);
        }
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("curvelab-out"));
    let bases: Vec<(Settings, PathBuf)> = match common.configs.as_slice() {
        [] => vec![(Settings::default(), out)],
        [one] => vec![(Settings::load(one)?, out)],
        many => {
            let mut seen = BTreeSet::new();
            many.iter()
                .map(|path| {
                    let stem = path
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .ok_or_else(|| CliError::config(format!("config path {} has no file name", path.display())))?;
                    if !seen.insert(stem.to_string()) {
                        return Err(CliError::config(format!("two configs share the name '{stem}'")));
                    }
                    Ok((Settings::load(path)?, out.join(stem)))
                })
                .collect::<CliResult<_>>()?
        }
    };
    Ok(bases
        .into_iter()
        .map(|(mut settings, dir)| {
            settings.merge(&overrides);
            if let Some(seed) = common.seed {
                settings.set("zelenjak.seed", seed);
                let name = settings.get("scenario.name").unwrap_or("circle");
                if scenarios::lookup(name).is_ok_and(|i| i.params.iter().any(|&(k, _)| k == "seed")) {
                    settings.set("scenario.seed", seed);
                }
            }
            (settings, dir)
        })
        .collect())
}

fn run_one(kind: Kind, settings: &Settings, dir: PathBuf, plots: bool, write_zelenjak: bool) -> CliResult<Outcome> {
    let cfg = RunConfig::from_settings(settings, dir, plots)?;
    match kind {
        Kind::Simulate => commands::simulate(&cfg),
        Kind::VerifyIdentity => commands::verify_identity(&cfg),
        Kind::CheckZelenjak => commands::check_zelenjak(&cfg, write_zelenjak),
        Kind::Convergence => commands::convergence(&cfg),
    }
}

fn execute(kind: Kind, common: &Common, extra: &[(&str, Option<usize>)]) -> CliResult<Vec<CliResult<Outcome>>> {
    if common.jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    let runs = plan_runs(common, extra)?;
    // The weight checks write a file only when asked for one.
    let write_zelenjak = common.out.is_some();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(pool.install(|| {
        runs.into_par_iter()
            .map(|(settings, dir)| run_one(kind, &settings, dir, common.plots, write_zelenjak))
            .collect()
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, extra) = match &cli.command {
        Command::ListScenarios => {
            print!("{}", commands::list_scenarios());
            return ExitCode::SUCCESS;
        }
        Command::Simulate(c) => (Kind::Simulate, c, vec![]),
        Command::VerifyIdentity(c) => (Kind::VerifyIdentity, c, vec![]),
        Command::CheckZelenjak { common, samples } => (Kind::CheckZelenjak, common, vec![("zelenjak.samples", *samples)]),
        Command::Convergence { common, levels } => (Kind::Convergence, common, vec![("convergence.levels", *levels)]),
    };
    let results = match execute(kind, common, &extra) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("curvelab: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut status = 0;
    for result in results {
        match result {
            Ok(outcome) => {
                println!("{}", outcome.summary);
                if !outcome.passed {
                    status = status.max(1);
                }
            }
            Err(e) => {
                eprintln!("curvelab: {e}");
                status = status.max(e.exit_code());
            }
        }
    }
    ExitCode::from(status)
}

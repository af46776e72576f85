//! Command-line front end: runs configured experiments, evaluates the
//! closed forms and checks model documents.

pub mod analyze;
pub mod config;
pub mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use peano_core::analysis::selection_probabilities;
use peano_core::coeffs::{Regime, Side, SmallNoiseModel};
use peano_core::experiments::{run_selection, RunOptions};
use peano_core::extremal::extremal_solution;
use peano_core::{Error, Result};

use config::ExperimentConfig;

/// Exit status for bad input: config, parameters or model assumptions.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status for failures of the numerics.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "peano", version, about = "Small-noise selection and averaging laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config document.
    Run {
        config: PathBuf,
        /// Summary CSV, overriding `output.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a closed form or quadrature.
    Analyze {
        #[command(subcommand)]
        what: analyze::Analysis,
    },
    /// The scalar example y' = sqrt|y| sgn(y) and its two extremal solutions.
    Demo {
        #[arg(long, default_value_t = 4000)]
        n_paths: u64,
        #[arg(long, default_value_t = 1)]
        seed0: u64,
    },
    /// Parse a config document and check the model assumptions.
    Validate { config: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERIC
    }
}

fn load(path: &PathBuf) -> Result<(ExperimentConfig, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
    Ok((ExperimentConfig::parse(text)?, bytes))
}

fn cmd_run(path: &PathBuf, output: Option<PathBuf>) -> Result<()> {
    let (cfg, bytes) = load(path)?;
    let seed0 = cfg.experiment.seed0()?;
    let report = run::execute(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let table = run::with_provenance(&report.table, &run::config_hash(&bytes), seed0);
    match output.or_else(|| cfg.output.csv.clone()) {
        Some(csv) => {
            run::append_csv(&csv, &table)?;
            if cfg.output.dump_paths > 0 {
                let dir = cfg.output.dump_dir.clone().unwrap_or_else(|| {
                    csv.parent().map(|p| p.join("paths")).unwrap_or_else(|| PathBuf::from("paths"))
                });
                let files = run::dump_paths(&cfg, &dir)?;
                eprintln!("wrote {} path files to {}", files.len(), dir.display());
            }
        }
        None => {
            print!("{}", table.to_csv_string());
        }
    }
    Ok(())
}

fn cmd_validate(path: &PathBuf) -> Result<()> {
    let (cfg, _) = load(path)?;
    let model = cfg.model()?;
    let report = match &model {
        config::Model::SmallNoise(m) => m.validate(&cfg.validation),
        config::Model::TwoScale(m) => m.validate(&cfg.validation),
    };
    print!("{report}");
    if report.passed() {
        println!("config valid");
        Ok(())
    } else {
        Err(Error::Precondition("model fails its assumption checks".into()))
    }
}

fn cmd_demo(n_paths: u64, seed0: u64) -> Result<()> {
    let model = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1.0, 1.0), (1.0, 1.0), Regime::Repulsive)?;
    println!("y' = |y|^(1/2) sgn(y), y(0) = 0: solutions y = 0 and y = +-t^2/4");
    let plus = extremal_solution(&model, Side::Plus, 2.0, 1e-3)?;
    let minus = extremal_solution(&model, Side::Minus, 2.0, 1e-3)?;
    for t in [1.0, 2.0] {
        println!("Y+({t}) = {:?}", plus.eval(t).1);
        println!("Y-({t}) = {:?}", minus.eval(t).1);
    }
    let p = selection_probabilities(&model.frozen_params(&model.x0)?)?;
    println!("closed-form p+ = {}", p.plus);
    let (eps, delta) = (1e-3, 0.1);
    let est = run_selection(&model, eps, delta, n_paths, seed0, &RunOptions::default())?;
    println!(
        "estimated p+ = {} +- {} (eps = {eps}, delta = {delta}, {} paths)",
        est.p_plus_hat, est.ci_halfwidth, est.n_paths
    );
    Ok(())
}

/// Runs the parsed command and maps errors to the exit-status contract.
pub fn dispatch(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Run { config, output } => cmd_run(&config, output),
        Command::Analyze { what } => analyze::run(&what),
        Command::Demo { n_paths, seed0 } => cmd_demo(n_paths, seed0),
        Command::Validate { config } => cmd_validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

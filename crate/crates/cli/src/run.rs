use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use peano_core::analysis::{FrozenSampler, TestFunction};
use peano_core::coeffs::{Regime, TwoScaleModel};
use peano_core::experiments::{
    run_attraction, run_exit_time_scaling, run_frozen_ergodicity, run_martingale_residual, run_pathwise_selection,
    run_selection, settles_to_floor, ErgodicitySettings, GeneratorChoice, ResidualSettings, RunOptions, Table,
    BOOTSTRAP_RESAMPLES, WORKERS_ENV,
};
use peano_core::sim::{simulate_frozen, simulate_small_noise, simulate_two_scale, PathSample};
use peano_core::{Error, Result};

use crate::config::{ExperimentConfig, Harness, Model};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run produces besides the CSV files.
pub struct RunReport {
    pub table: Table,
    pub warnings: Vec<String>,
}

pub fn config_hash(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn small_noise(model: &Model) -> Result<&peano_core::coeffs::SmallNoiseModel> {
    match model {
        Model::SmallNoise(m) => Ok(m),
        Model::TwoScale(_) => Err(Error::Config("this harness needs a small-noise model".into())),
    }
}

fn workers(cfg: &ExperimentConfig) -> Option<usize> {
    // The environment overrides the document.
    if std::env::var_os(WORKERS_ENV).is_some() {
        None
    } else {
        cfg.experiment.workers
    }
}

fn append(into: &mut Option<Table>, t: Table) {
    match into {
        Some(acc) => acc.rows.extend(t.rows),
        None => *into = Some(t),
    }
}

/// Runs the configured harness and returns its summary table.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunReport> {
    let e = &cfg.experiment;
    let seed0 = e.seed0()?;
    let model = cfg.model()?;
    let report = match &model {
        Model::SmallNoise(m) => m.validate(&cfg.validation),
        Model::TwoScale(m) => m.validate(&cfg.validation),
    };
    if !report.passed() {
        return Err(Error::Precondition(format!("model fails its assumption checks:\n{report}")));
    }
    let opts = RunOptions {
        policy: e.policy()?,
        corr: e.corr,
        workers: workers(cfg),
    };
    let mut warnings = Vec::new();
    let mut table = None;
    match e.harness {
        Harness::Selection => {
            let m = small_noise(&model)?;
            let delta = e.single_delta()?;
            for &eps in e.eps_ladder()? {
                let est = run_selection(m, eps, delta, e.n_paths, seed0, &opts)?;
                if est.warning {
                    warnings.push(format!(
                        "eps = {eps}: {:.2}% of paths hit the time cap; eps may be above the validity threshold",
                        100.0 * est.capped_fraction
                    ));
                }
                append(&mut table, est.table());
            }
        }
        Harness::PathwiseSelection => {
            let m = small_noise(&model)?;
            let delta = e.single_delta()?;
            for &eps in e.eps_ladder()? {
                let r = run_pathwise_selection(m, eps, delta, e.n_paths, e.horizon()?, seed0, &opts)?;
                append(&mut table, r.table());
            }
        }
        Harness::ExitTimeScaling => {
            let m = small_noise(&model)?;
            let r = run_exit_time_scaling(m, e.single_eps()?, &e.delta, e.n_paths, seed0, &opts)?;
            for (i, ok) in r.below_bound(3.0).iter().enumerate() {
                if !ok {
                    warnings.push(format!("delta = {}: mean exit time above the bound", r.ladder.values[i]));
                }
            }
            table = Some(r.table());
        }
        Harness::Attraction => {
            let m = small_noise(&model)?;
            let r = run_attraction(m, e.eps_ladder()?, e.horizon()?, e.n_paths, seed0, &opts)?;
            table = Some(r.table());
        }
        Harness::FrozenErgodicity => {
            let m = small_noise(&model)?;
            let x = e.x.clone().unwrap_or_else(|| m.x0.clone());
            let y0 = e.y0.unwrap_or([0.0, 1.0]);
            let mut settings = ErgodicitySettings {
                workers: opts.workers,
                ..ErgodicitySettings::default()
            };
            if let Some(dt) = e.dt {
                settings.dt = dt;
            }
            if let Some(b) = e.bins {
                settings.bins = b;
            }
            let r = run_frozen_ergodicity(&x, m, &e.horizons, e.n_paths, (y0[0], y0[1]), seed0, &settings)?;
            table = Some(r.table());
        }
        Harness::MartingaleResidual => {
            let tm = two_scale(&model, e.fast_y0)?;
            let center = e.test_center.clone().unwrap_or_else(|| tm.x0.clone());
            let tests = TestFunction::registry(&center, e.test_radius.unwrap_or(1.0))?;
            let settings = ResidualSettings {
                policy: opts.policy,
                sampler: e.sampler.unwrap_or(FrozenSampler::ClosedForm {
                    samples: 100_000,
                    seed: seed0,
                }),
                grid: e.grid.unwrap_or(0.01),
                bootstrap: e.bootstrap.unwrap_or(BOOTSTRAP_RESAMPLES),
                workers: opts.workers,
            };
            let generators = [GeneratorChoice::Averaged, GeneratorChoice::UpperBranchDrift];
            let r = run_martingale_residual(
                &tm,
                e.eps_ladder()?,
                e.horizon()?,
                e.n_paths,
                &tests,
                seed0,
                &settings,
                &generators,
            )?;
            let tol = &cfg.tolerances;
            for (test, weight) in r.keys() {
                if !settles_to_floor(&r.series(GeneratorChoice::Averaged, &test, &weight), tol.residual_settle_floors) {
                    warnings.push(format!(
                        "{test}/{weight}: residual does not settle within {} noise floors",
                        tol.residual_settle_floors
                    ));
                }
                let control = r.series(GeneratorChoice::UpperBranchDrift, &test, &weight);
                if control.last().map_or(true, |c| c.ratio() <= tol.residual_control_floors) {
                    warnings.push(format!(
                        "{test}/{weight}: wrong-drift residual within {} noise floors",
                        tol.residual_control_floors
                    ));
                }
            }
            table = Some(r.table());
        }
    }
    let table = table.ok_or_else(|| Error::Config("experiment produced no rows".into()))?;
    Ok(RunReport { table, warnings })
}

fn two_scale(model: &Model, fast_y0: f64) -> Result<TwoScaleModel> {
    match model {
        Model::TwoScale(m) => Ok(m.clone()),
        Model::SmallNoise(m) => {
            m.require_regime(Regime::Attractive)?;
            TwoScaleModel::from_attractive(m, fast_y0)
        }
    }
}

/// Prepends the provenance columns to every row.
pub fn with_provenance(table: &Table, hash: &str, seed0: u64) -> Table {
    let mut columns = vec!["config_hash", "seed0", "version"];
    columns.extend(table.columns.iter().map(|c| c.as_str()));
    let mut out = Table::new(&columns);
    for r in &table.rows {
        let mut row = vec![hash.to_string(), seed0.to_string(), VERSION.to_string()];
        row.extend(r.iter().cloned());
        out.push(row);
    }
    out
}

/// First non-comment line of an existing CSV.
fn existing_header(path: &Path) -> std::io::Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let f = fs::File::open(path)?;
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.starts_with('#') && !line.is_empty() {
            return Ok(Some(line));
        }
    }
    Ok(None)
}

/// Appends the table to `path`, writing the header only for a new file.
/// The wall-clock time goes into a comment line so the CSV body stays
/// reproducible.
pub fn append_csv(path: &Path, table: &Table) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write {}: {e}", path.display()));
    let header = table.columns.join(",");
    let existing = existing_header(path).map_err(io)?;
    if let Some(h) = &existing {
        if *h != header {
            return Err(Error::Config(format!(
                "{} already holds a table with different columns",
                path.display()
            )));
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(f, "# appended at unix time {secs}").map_err(io)?;
    table
        .write_csv(&mut f, existing.is_none())
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Writes the first `cfg.output.dump_paths` paths, one CSV per seed.
pub fn dump_paths(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let e = &cfg.experiment;
    let seed0 = e.seed0()?;
    let model = cfg.model()?;
    let policy = e.policy()?;
    let io = |p: &Path, err: std::io::Error| Error::Config(format!("cannot write {}: {err}", p.display()));
    fs::create_dir_all(dir).map_err(|err| io(dir, err))?;
    let mut written = Vec::new();
    for i in 0..cfg.output.dump_paths.min(e.n_paths) {
        let seed = seed0.wrapping_add(i);
        let path: PathSample = match e.harness {
            Harness::FrozenErgodicity => {
                let m = small_noise(&model)?;
                let x = e.x.clone().unwrap_or_else(|| m.x0.clone());
                let t = *e.horizons.last().ok_or_else(|| Error::Config("experiment.horizons is empty".into()))?;
                simulate_frozen(&x, m, e.y0.unwrap_or([0.0, 1.0])[0], t, e.dt.unwrap_or(5e-3), seed)?
            }
            Harness::MartingaleResidual => {
                let tm = two_scale(&model, e.fast_y0)?;
                simulate_two_scale(&tm, e.eps_ladder()?[0], e.horizon()?, &policy, seed)?
            }
            _ => {
                let m = small_noise(&model)?;
                simulate_small_noise(m, e.eps_ladder()?[0], e.horizon.unwrap_or(1.0), &policy, seed, e.corr)?
            }
        };
        let file = dir.join(format!("path_{seed}.csv"));
        let f = fs::File::create(&file).map_err(|err| io(&file, err))?;
        path.write_csv(std::io::BufWriter::new(f)).map_err(|err| io(&file, err))?;
        written.push(file);
    }
    Ok(written)
}

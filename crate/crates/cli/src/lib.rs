//! Experiment driver behind the `gpinn` binary.

pub mod artifacts;
pub mod config;
pub mod presets;
pub mod report;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use artifacts::{unix_now, Manifest};
use config::{ConfigError, Experiment, ExperimentConfig, DEFAULT_SWEEP_SEEDS};

/// Options shared by `run`, `sweep` and `rar`.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seeds: Option<Vec<u64>>,
    /// Reference-solution cache; defaults to `<out>/cache`.
    pub cache: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Invocation {
    fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.out.join("cache"))
    }

    fn threads(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    fn load(&self) -> Result<(ExperimentConfig, Experiment)> {
        let raw = ExperimentConfig::load(&self.config)?;
        let exp = raw.resolve()?;
        Ok((raw, exp))
    }
}

fn finish(inv: &Invocation, raw: &ExperimentConfig, started: u64, entries: Vec<artifacts::RunEntry>, aggregates: &[String]) -> Result<PathBuf> {
    let failures: Vec<String> = entries
        .iter()
        .filter_map(|e| e.error.as_ref().map(|m| format!("{} seed {}: {m}", e.cell, e.seed)))
        .collect();
    Manifest::update(&inv.out, raw, started, entries, aggregates)?;
    let dir = inv.out.join(&raw.name);
    if !failures.is_empty() && aggregates.is_empty() {
        bail!("{} run(s) failed:\n  {}", failures.len(), failures.join("\n  "));
    }
    Ok(dir)
}

/// One training run per seed of the configured cell, without refinement.
pub fn cmd_run(inv: &Invocation) -> Result<PathBuf> {
    let started = unix_now();
    let (raw, exp) = inv.load()?;
    run_cells(inv, &raw, &exp, false, started)
}

/// Like [`cmd_run`] with refinement; needs a `[rar]` section or a refinement preset.
pub fn cmd_rar(inv: &Invocation) -> Result<PathBuf> {
    let started = unix_now();
    let (raw, exp) = inv.load()?;
    if exp.rar.is_none() {
        return Err(ConfigError {
            field: "rar".into(),
            message: "the rar command needs a [rar] section or a refinement preset".into(),
        }
        .into());
    }
    run_cells(inv, &raw, &exp, true, started)
}

fn run_cells(inv: &Invocation, raw: &ExperimentConfig, exp: &Experiment, refine: bool, started: u64) -> Result<PathBuf> {
    let cell = exp.base_cell();
    let jobs: Vec<_> = exp.seeds(inv.seeds.as_deref(), 1).into_iter().map(|s| (cell.clone(), s)).collect();
    let cache = inv.cache_dir();
    let entries = sweep::run_all(exp, &jobs, &inv.out, Some(&cache), refine, inv.threads());
    finish(inv, raw, started, entries, &[])
}

/// Cross product of the sweep axes and seeds, aggregated into `sweep.csv`.
pub fn cmd_sweep(inv: &Invocation) -> Result<PathBuf> {
    let started = unix_now();
    let (raw, exp) = inv.load()?;
    if raw.sweep.is_none() {
        return Err(ConfigError {
            field: "sweep".into(),
            message: "the sweep command needs a [sweep] section with at least one axis".into(),
        }
        .into());
    }
    let cells = exp.cells();
    let seeds = exp.seeds(inv.seeds.as_deref(), DEFAULT_SWEEP_SEEDS);
    let jobs: Vec<_> = cells.iter().flat_map(|c| seeds.iter().map(move |&s| (c.clone(), s))).collect();
    let cache = inv.cache_dir();
    let entries = sweep::run_all(&exp, &jobs, &inv.out, Some(&cache), exp.sweep.rar, inv.threads());
    let csv = sweep::aggregate(&exp, &cells, &entries, &inv.out)?;
    let path = inv.out.join(&exp.name).join("sweep.csv");
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    finish(inv, &raw, started, entries, &["sweep.csv".to_string()])
}

/// Markdown for each experiment under `out` that has a `sweep.csv`
/// (all of them when `experiments` is empty).
pub fn cmd_report(out: &Path, experiments: &[String]) -> Result<String> {
    let names: Vec<String> = if experiments.is_empty() {
        let mut v: Vec<String> = fs::read_dir(out)
            .with_context(|| format!("reading {}", out.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("sweep.csv").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        v.sort();
        v
    } else {
        experiments.to_vec()
    };
    if names.is_empty() {
        bail!("no sweep.csv found under {}", out.display());
    }
    let mut md = String::from("# Sweep report\n\n");
    for n in &names {
        let path = out.join(n).join("sweep.csv");
        let csv = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        md.push_str(&report::render(n, &csv)?);
        md.push('\n');
    }
    Ok(md)
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<ConfigError>().is_some()) {
        2
    } else {
        1
    }
}

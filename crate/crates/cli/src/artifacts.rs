//! Per-run output files and the experiment manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use gpinn::optimize::{rar_refine, train, LbfgsSummary, RunOptions, RunResult, TrainError};
use gpinn::problems::ProblemSpec;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, Experiment, ExperimentConfig};

/// 17 significant digits; empty for a missing value.
pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

pub const AXES: [&str; 2] = ["x", "t"];

pub const RUN_FILES: [&str; 4] = ["metrics.csv", "loss.csv", "result.json", "checkpoint.gpck"];

/// `iteration,round,n_residual,loss,...` header for a run of `spec`.
pub fn metrics_header(spec: &ProblemSpec) -> String {
    let d = spec.dim();
    let mut h = String::from("iteration,round,n_residual,loss,loss_f");
    for a in &AXES[..d] {
        write!(h, ",loss_g_{a}").unwrap();
    }
    h.push_str(",loss_b,loss_data,u_error");
    for a in &AXES[..d] {
        write!(h, ",du_{a}_error").unwrap();
    }
    h.push_str(",k_error,mean_abs_residual");
    for p in &spec.inverse {
        write!(h, ",{0},{0}_error", p.name).unwrap();
    }
    h
}

pub fn metrics_csv(spec: &ProblemSpec, r: &RunResult) -> String {
    let mut out = metrics_header(spec);
    out.push('\n');
    for s in &r.snapshots {
        let t = &s.loss.terms;
        let m = &s.metrics;
        let mut row = format!("{},{},{},{},{}", s.iteration, s.round, s.n_residual, num(Some(s.loss.total)), num(Some(t.f)));
        for g in &t.g {
            write!(row, ",{}", num(*g)).unwrap();
        }
        write!(row, ",{},{},{}", num(t.b), num(t.data), num(Some(m.u_error))).unwrap();
        for e in &m.du_errors {
            write!(row, ",{}", num(*e)).unwrap();
        }
        write!(row, ",{},{}", num(m.k_error), num(Some(m.mean_abs_residual))).unwrap();
        for (v, e) in s.lambda.iter().zip(&s.lambda_errors) {
            write!(row, ",{},{}", num(Some(*v)), num(Some(*e))).unwrap();
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn loss_csv(spec: &ProblemSpec, r: &RunResult) -> String {
    let mut out = String::from("iteration,loss,loss_f");
    for a in &AXES[..spec.dim()] {
        write!(out, ",loss_g_{a}").unwrap();
    }
    out.push_str(",loss_b,loss_data\n");
    for h in &r.loss_history {
        write!(out, "{},{},{}", h.iteration, num(Some(h.total)), num(Some(h.terms.f))).unwrap();
        for g in &h.terms.g {
            write!(out, ",{}", num(*g)).unwrap();
        }
        writeln!(out, ",{},{}", num(h.terms.b), num(h.terms.data)).unwrap();
    }
    out
}

/// Points in the training set after round `round`, with the round that added each.
pub fn points_csv(spec: &ProblemSpec, r: &RunResult, round: usize) -> String {
    let mut out = AXES[..spec.dim()].join(",");
    out.push_str(",round\n");
    for p in r.points.iter().filter(|p| p.round <= round) {
        let coords: Vec<String> = p.coords.iter().map(|&c| num(Some(c))).collect();
        writeln!(out, "{},{}", coords.join(","), p.round).unwrap();
    }
    out
}

/// Final-state summary written as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub problem: String,
    pub method: String,
    pub cell: String,
    pub seed: u64,
    pub w: f64,
    pub iterations: u64,
    pub n_residual: usize,
    pub u_error: f64,
    pub du_errors: Vec<Option<f64>>,
    pub k_error: Option<f64>,
    pub mean_abs_residual: f64,
    pub lambda: Vec<f64>,
    pub lambda_errors: Vec<f64>,
    pub final_loss: f64,
    pub rounds: usize,
    pub stopped_early: bool,
    pub lbfgs: Vec<LbfgsSummary>,
    pub divergence_events: usize,
    pub wall_clock_seconds: f64,
    pub config: gpinn::optimize::TrainConfig,
    pub rar: Option<gpinn::optimize::RarConfig>,
}

/// Outcome of one (cell, seed) run for the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub cell: String,
    pub seed: u64,
    /// Relative to the experiment directory.
    pub dir: String,
    pub artifacts: Vec<String>,
    /// `None` on success.
    pub error: Option<String>,
}

pub fn run_dir(root: &Path, exp: &Experiment, cell: &Cell, seed: u64) -> PathBuf {
    root.join(&exp.name).join(&cell.name).join(seed.to_string())
}

/// Trains one cell at one seed and writes its artifacts.
pub fn execute(exp: &Experiment, cell: &Cell, seed: u64, root: &Path, cache: Option<&Path>, refine: bool) -> Result<RunEntry> {
    let dir = run_dir(root, exp, cell, seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let spec = exp.spec();
    let mut cfg = cell.train.clone();
    cfg.seed = seed;
    let opts = RunOptions {
        cache: cache.map(Path::to_path_buf),
        checkpoint: Some(dir.join("checkpoint.gpck")),
        checkpoint_every: exp.checkpoint_every,
        resume: exp.resume,
        grid: exp.grid,
        halt_at: None,
    };
    let rar = if refine { exp.rar.as_ref() } else { None };
    let result: Result<RunResult, TrainError> = match rar {
        Some(r) => rar_refine(&spec, &cfg, r, &opts),
        None => train(&spec, &cfg, &opts),
    };
    let rel = format!("{}/{}", cell.name, seed);
    let r = match result {
        Ok(r) => r,
        Err(e) => {
            let present = RUN_FILES.iter().filter(|f| dir.join(f).exists()).map(|f| format!("{rel}/{f}")).collect();
            return Ok(RunEntry {
                cell: cell.name.clone(),
                seed,
                dir: rel,
                artifacts: present,
                error: Some(e.to_string()),
            });
        }
    };
    let write = |name: &str, body: &str| -> Result<String> {
        fs::write(dir.join(name), body).with_context(|| format!("writing {}", dir.join(name).display()))?;
        Ok(format!("{rel}/{name}"))
    };
    let mut artifacts = vec![write("metrics.csv", &metrics_csv(&spec, &r))?, write("loss.csv", &loss_csv(&spec, &r))?];
    let last = r.final_snapshot().context("run produced no snapshot")?;
    let summary = RunSummary {
        experiment: exp.name.clone(),
        problem: spec.name().to_string(),
        method: cell.method.to_string(),
        cell: cell.name.clone(),
        seed,
        w: cell.w,
        iterations: last.iteration,
        n_residual: last.n_residual,
        u_error: last.metrics.u_error,
        du_errors: last.metrics.du_errors.clone(),
        k_error: last.metrics.k_error,
        mean_abs_residual: last.metrics.mean_abs_residual,
        lambda: last.lambda.clone(),
        lambda_errors: last.lambda_errors.clone(),
        final_loss: last.loss.total,
        rounds: r.rounds.len(),
        stopped_early: r.stopped_early,
        lbfgs: r.lbfgs.clone(),
        divergence_events: r.divergence.len(),
        wall_clock_seconds: r.wall_clock_seconds,
        config: r.config.clone(),
        rar: r.rar.clone(),
    };
    artifacts.push(write("result.json", &serde_json::to_string_pretty(&summary)?)?);
    if rar.is_some() {
        for round in 0..=r.rounds.len() {
            artifacts.push(write(&format!("points_round_{round}.csv"), &points_csv(&spec, &r, round))?);
        }
    }
    artifacts.push(format!("{rel}/checkpoint.gpck"));
    Ok(RunEntry {
        cell: cell.name.clone(),
        seed,
        dir: rel,
        artifacts,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: ExperimentConfig,
    pub runs: Vec<RunEntry>,
    /// Experiment-level files such as `sweep.csv`.
    pub aggregates: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn path(root: &Path, experiment: &str) -> PathBuf {
        root.join(experiment).join(Self::FILE)
    }

    /// Merges `runs` into the manifest on disk, replacing entries for the same cell and seed.
    pub fn update(root: &Path, config: &ExperimentConfig, started: u64, runs: Vec<RunEntry>, aggregates: &[String]) -> Result<Manifest> {
        let path = Self::path(root, &config.name);
        let mut m = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            Err(_) => Manifest {
                experiment: config.name.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix: started,
                finished_unix: started,
                config: config.clone(),
                runs: Vec::new(),
                aggregates: Vec::new(),
            },
        };
        m.config = config.clone();
        m.version = env!("CARGO_PKG_VERSION").to_string();
        m.started_unix = started;
        m.finished_unix = unix_now();
        for r in runs {
            m.runs.retain(|e| !(e.cell == r.cell && e.seed == r.seed));
            m.runs.push(r);
        }
        m.runs.sort_by(|a, b| (&a.cell, a.seed).cmp(&(&b.cell, b.seed)));
        for a in aggregates {
            if !m.aggregates.contains(a) {
                m.aggregates.push(a.clone());
            }
        }
        fs::create_dir_all(root.join(&config.name))?;
        fs::write(&path, serde_json::to_string_pretty(&m)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(m)
    }
}

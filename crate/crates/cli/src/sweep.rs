//! Parallel execution of (cell, seed) runs and aggregation into `sweep.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};

use crate::artifacts::{execute, num, run_dir, RunEntry};
use crate::config::{Cell, Experiment};

/// Columns of `metrics.csv` that are aggregated.
fn is_metric(col: &str) -> bool {
    !matches!(col, "iteration" | "round" | "n_residual")
}

/// Runs every job on `threads` workers; results keep the job order.
pub fn run_all(
    exp: &Experiment,
    jobs: &[(Cell, u64)],
    root: &Path,
    cache: Option<&Path>,
    refine: bool,
    threads: usize,
) -> Vec<RunEntry> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RunEntry>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((cell, seed)) = jobs.get(i) else { break };
                let entry = execute(exp, cell, *seed, root, cache, refine).unwrap_or_else(|e| RunEntry {
                    cell: cell.name.clone(),
                    seed: *seed,
                    dir: format!("{}/{}", cell.name, seed),
                    artifacts: Vec::new(),
                    error: Some(format!("{e:#}")),
                });
                match &entry.error {
                    None => eprintln!("[{}/{}] {} seed {} done", i + 1, jobs.len(), cell.name, seed),
                    Some(e) => eprintln!("[{}/{}] {} seed {} failed: {e}", i + 1, jobs.len(), cell.name, seed),
                }
                slots.lock().unwrap()[i] = Some(entry);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|e| e.expect("every job ran")).collect()
}

/// Header and last data row of a CSV file.
pub fn read_last_row(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().context("empty csv")?.split(',').map(str::to_string).collect();
    let last = lines.filter(|l| !l.is_empty()).last().context("csv has no data rows")?;
    let row: Vec<String> = last.split(',').map(str::to_string).collect();
    if row.len() != header.len() {
        bail!("{}: row has {} fields, header {}", path.display(), row.len(), header.len());
    }
    Ok((header, row))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

/// Sample statistics; `std` is zero for a single value.
pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Stats {
        mean,
        std,
        median: median(values),
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Builds `sweep.csv` from the final row of each successful run's `metrics.csv`.
pub fn aggregate(exp: &Experiment, cells: &[Cell], entries: &[RunEntry], root: &Path) -> Result<String> {
    let mut metric_cols: Vec<String> = Vec::new();
    let mut per_cell: BTreeMap<&str, Vec<BTreeMap<String, f64>>> = BTreeMap::new();
    let mut failed: BTreeMap<&str, usize> = BTreeMap::new();
    for e in entries {
        let Some(cell) = cells.iter().find(|c| c.name == e.cell) else { continue };
        if e.error.is_some() {
            *failed.entry(&cell.name).or_default() += 1;
            continue;
        }
        let path = run_dir(root, exp, cell, e.seed).join("metrics.csv");
        let (header, row) = read_last_row(&path)?;
        let mut vals = BTreeMap::new();
        for (h, v) in header.iter().zip(&row) {
            if !is_metric(h) {
                continue;
            }
            if !metric_cols.contains(h) {
                metric_cols.push(h.clone());
            }
            if !v.is_empty() {
                vals.insert(h.clone(), v.parse::<f64>().with_context(|| format!("{}: column {h}", path.display()))?);
            }
        }
        per_cell.entry(&cell.name).or_default().push(vals);
    }
    let mut out = String::from("cell,method,n_residual,w,n_ok,n_failed");
    for c in &metric_cols {
        out.push_str(&format!(",{c}_mean,{c}_std,{c}_median"));
    }
    out.push('\n');
    for cell in cells {
        let runs = per_cell.get(cell.name.as_str()).map_or(&[][..], |v| v.as_slice());
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            cell.name,
            cell.method,
            cell.n_residual,
            num(Some(cell.w)),
            runs.len(),
            failed.get(cell.name.as_str()).copied().unwrap_or(0)
        ));
        for c in &metric_cols {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.get(c).copied()).collect();
            let s = stats(&vals);
            out.push_str(&format!(
                ",{},{},{}",
                num(s.map(|s| s.mean)),
                num(s.map(|s| s.std)),
                num(s.map(|s| s.median))
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

//! Markdown summary of a `sweep.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

struct Row {
    fields: BTreeMap<String, String>,
}

impl Row {
    fn get(&self, col: &str) -> Option<&str> {
        self.fields.get(col).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn num(&self, col: &str) -> Option<f64> {
        self.get(col).and_then(|s| s.parse().ok())
    }
}

fn parse(csv: &str) -> Result<(Vec<String>, Vec<Row>)> {
    let mut lines = csv.lines().filter(|l| !l.is_empty());
    let header: Vec<String> = lines.next().context("sweep.csv is empty")?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let vals: Vec<&str> = l.split(',').collect();
        if vals.len() != header.len() {
            bail!("sweep.csv line {}: {} fields, header has {}", i + 2, vals.len(), header.len());
        }
        rows.push(Row {
            fields: header.iter().cloned().zip(vals.iter().map(|v| v.to_string())).collect(),
        });
    }
    Ok((header, rows))
}

fn pct(v: Option<f64>) -> String {
    v.map_or("–".into(), |x| format!("{:.3}%", 100.0 * x))
}

fn pm(r: &Row, col: &str) -> String {
    match (r.num(&format!("{col}_median")), r.num(&format!("{col}_mean")), r.num(&format!("{col}_std"))) {
        (Some(med), Some(mean), Some(std)) => {
            format!("{} ({} ± {})", pct(Some(med)), pct(Some(mean)), pct(Some(std)))
        }
        _ => "–".into(),
    }
}

/// Error columns present in the sweep, in a stable order.
fn error_columns(header: &[String]) -> Vec<String> {
    header
        .iter()
        .filter_map(|h| h.strip_suffix("_median"))
        .filter(|c| c.ends_with("_error"))
        .map(str::to_string)
        .collect()
}

/// Renders a per-cell table (median, then mean ± std over seeds) followed by
/// PINN-to-gPINN error ratios at matching point counts.
pub fn render(title: &str, csv: &str) -> Result<String> {
    let (header, rows) = parse(csv)?;
    let cols = error_columns(&header);
    let mut out = format!("## {title}\n\nMedian (mean ± std) over seeds.\n\n| cell | method | points | w | runs |");
    for c in &cols {
        write!(out, " {c} |").unwrap();
    }
    out.push_str("\n|---|---|---|---|---|");
    for _ in &cols {
        out.push_str("---|");
    }
    out.push('\n');
    for r in &rows {
        let method = r.get("method").unwrap_or("?");
        let w = if matches!(method, "gpinn" | "gnn") { r.num("w").map_or("–".into(), |w| format!("{w}")) } else { "–".into() };
        write!(
            out,
            "| {} | {} | {} | {} | {}/{} |",
            r.get("cell").unwrap_or("?"),
            method,
            r.get("n_residual").unwrap_or("?"),
            w,
            r.get("n_ok").unwrap_or("0"),
            r.num("n_ok").unwrap_or(0.0) + r.num("n_failed").unwrap_or(0.0)
        )
        .unwrap();
        for c in &cols {
            write!(out, " {} |", pm(r, c)).unwrap();
        }
        out.push('\n');
    }

    let mut ratios = String::new();
    for base in rows.iter().filter(|r| matches!(r.get("method"), Some("pinn" | "nn"))) {
        for g in rows.iter().filter(|r| matches!(r.get("method"), Some("gpinn" | "gnn")) && r.get("n_residual") == base.get("n_residual")) {
            let (Some(a), Some(b)) = (base.num("u_error_median"), g.num("u_error_median")) else { continue };
            writeln!(
                ratios,
                "| {} | {} | {} | {} | {} | {:.2} |",
                base.get("n_residual").unwrap_or("?"),
                base.get("cell").unwrap_or("?"),
                g.get("cell").unwrap_or("?"),
                pct(Some(a)),
                pct(Some(b)),
                a / b
            )
            .unwrap();
        }
    }
    if !ratios.is_empty() {
        out.push_str("\n| points | baseline | gradient-enhanced | baseline u_error | enhanced u_error | ratio |\n|---|---|---|---|---|---|\n");
        out.push_str(&ratios);
    }
    Ok(out)
}

//! CSV and JSON output of analyses and Monte Carlo reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::analysis::{CurveData, ItemOutcome};
use crate::error::Result;
use crate::harness::Report;

#[derive(Serialize)]
struct Row<'a> {
    scenario: &'a str,
    n: usize,
    zeta: f64,
    method: &'a str,
    power: Option<f64>,
    power_se: Option<f64>,
    rejection_rate: f64,
    rejection_se: f64,
    rmse_weights: Option<f64>,
    diverged: usize,
    replications: usize,
    seed: u64,
}

/// One CSV row per grid cell, in grid order.
pub fn write_conditions_csv<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in &report.conditions {
        w.serialize(Row {
            scenario: &c.scenario,
            n: c.n,
            zeta: c.zeta,
            method: c.method.as_str(),
            power: c.power,
            power_se: c.power_se,
            rejection_rate: c.rejection_rate,
            rejection_se: c.rejection_se,
            rmse_weights: c.rmse_weights,
            diverged: c.diverged,
            replications: c.replicate_count,
            seed: c.seed,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and `results.json` into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_conditions_csv(report, BufWriter::new(File::create(dir.join("results.csv"))?))?;
    write_json(report, &dir.join("results.json"))
}

#[derive(Serialize)]
struct ItemRow<'a> {
    item: &'a str,
    method: &'a str,
    zeta: Option<f64>,
    t_hat: Option<f64>,
    sigma2_hat: Option<f64>,
    z: Option<f64>,
    p_value: Option<f64>,
    reject: Option<bool>,
    weight_divergence: Option<bool>,
    error: Option<&'a str>,
}

/// One CSV row per (item, method, zeta).
pub fn write_items_csv<W: Write>(outcomes: &[ItemOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in outcomes {
        let r = o.report.as_ref();
        w.serialize(ItemRow {
            item: &o.item,
            method: o.method.as_str(),
            zeta: o.zeta,
            t_hat: r.map(|r| r.result.t_hat),
            sigma2_hat: r.and_then(|r| r.result.sigma2_hat),
            z: r.and_then(|r| r.result.z),
            p_value: r.map(|r| r.result.p_value),
            reject: r.map(|r| r.reject),
            weight_divergence: r.map(|r| r.result.diagnostics.weight_divergence),
            error: o.error.as_deref(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `items.csv`, `items.json` and `curves.json` into `dir`.
pub fn emit_analysis(outcomes: &[ItemOutcome], curves: &[CurveData], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_items_csv(outcomes, BufWriter::new(File::create(dir.join("items.csv"))?))?;
    write_json(outcomes, &dir.join("items.json"))?;
    write_json(curves, &dir.join("curves.json"))
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::from)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

//! Result files: the campaign tables from the core crate, plot-ready
//! per-figure tables, and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use mpe_core::sim::{
    write_results_csv, write_selection_counts_csv, write_selections_csv, CampaignResult, CellResult, SelectionCount,
};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the campaign tables and returns the file names written.
pub fn write_campaign(dir: &Path, preset: &str, result: &CampaignResult) -> Result<Vec<String>> {
    let mut files = vec!["results.csv".to_string()];
    write_results_csv(result, create(dir, "results.csv")?)?;
    if !result.selections.is_empty() {
        write_selections_csv(&result.selections, create(dir, "selections.csv")?)?;
        files.push("selections.csv".into());
    }
    if !result.failures.is_empty() {
        let mut text = String::from("method,snr_db,realization,message\n");
        for f in &result.failures {
            writeln!(text, "{},{},{},\"{}\"", f.label, f.snr_db, f.realization, f.message.replace('"', "'"))?;
        }
        write_text(dir, "failures.csv", &text)?;
        files.push("failures.csv".into());
    }
    let columns: &[(&str, fn(&CellResult) -> f64)] = match preset {
        "fig2" => &[("ber", |c| c.ber), ("pe", |c| c.pe_theory)],
        "fig3" => &[("iters", |c| c.mean_iters)],
        "fig5" => &[("ber", |c| c.ber), ("pe", |c| c.pe_theory)],
        "fig6" => &[("l100", |c| c.throughput_l100), ("l500", |c| c.throughput_l500)],
        _ => &[],
    };
    if !columns.is_empty() {
        let name = format!("{preset}.csv");
        write_text(dir, &name, &wide_table(result, columns))?;
        files.push(name);
    }
    Ok(files)
}

/// One row per SNR, one column per (arm, quantity).
fn wide_table(result: &CampaignResult, columns: &[(&str, fn(&CellResult) -> f64)]) -> String {
    let mut labels: Vec<&str> = Vec::new();
    for c in &result.cells {
        if !labels.contains(&c.label.as_str()) {
            labels.push(&c.label);
        }
    }
    let mut snrs: Vec<f64> = Vec::new();
    for c in &result.cells {
        if !snrs.contains(&c.snr_db) {
            snrs.push(c.snr_db);
        }
    }
    let mut text = String::from("snr_db");
    for label in &labels {
        for (name, _) in columns {
            write!(text, ",{label}_{name}").unwrap();
        }
    }
    text.push('\n');
    for &snr in &snrs {
        text.push_str(&snr.to_string());
        for label in &labels {
            let cell = result.cell(label, snr);
            for (_, get) in columns {
                match cell {
                    Some(c) if c.realizations > 0 => write!(text, ",{:e}", get(c)).unwrap(),
                    _ => text.push(','),
                }
            }
        }
        text.push('\n');
    }
    text
}

/// Writes the selection-count tables: long form and `fig4.csv` with one
/// column per (rule, M).
pub fn write_sweep(dir: &Path, rows: &[SelectionCount]) -> Result<Vec<String>> {
    write_selection_counts_csv(rows, create(dir, "selection_counts.csv")?)?;
    let mut by_total: BTreeMap<usize, BTreeMap<String, f64>> = BTreeMap::new();
    let mut keys: Vec<String> = Vec::new();
    for r in rows {
        let key = format!("{}_m{}", r.method, r.antennas);
        if !keys.contains(&key) {
            keys.push(key.clone());
        }
        by_total.entry(r.total_users).or_default().insert(key, r.mean_selected);
    }
    let mut text = String::from("total_users");
    for k in &keys {
        write!(text, ",{k}")?;
    }
    text.push('\n');
    for (total, values) in &by_total {
        text.push_str(&total.to_string());
        for k in &keys {
            match values.get(k) {
                Some(v) => write!(text, ",{v}")?,
                None => text.push(','),
            }
        }
        text.push('\n');
    }
    write_text(dir, "fig4.csv", &text)?;
    Ok(vec!["selection_counts.csv".into(), "fig4.csv".into()])
}

pub fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_text(dir, "manifest.json", &text)
}

/// Human-readable summary of a campaign.
pub fn campaign_summary(result: &CampaignResult) -> String {
    let mut text = format!(
        "{:<18} {:>7} {:>11} {:>11} {:>7} {:>6} {:>9}\n",
        "method", "snr_db", "ber", "pe_theory", "iters", "K", "thr_l100"
    );
    for c in &result.cells {
        writeln!(
            text,
            "{:<18} {:>7} {:>11.3e} {:>11.3e} {:>7.2} {:>6.2} {:>9.3}{}",
            c.label,
            c.snr_db,
            c.ber,
            c.pe_theory,
            c.mean_iters,
            c.mean_selected,
            c.throughput_l100,
            if c.failures > 0 { format!("  ({} failed)", c.failures) } else { String::new() }
        )
        .unwrap();
    }
    text
}

pub fn sweep_summary(rows: &[SelectionCount]) -> String {
    let mut text = format!("{:<6} {:>3} {:>11} {:>9} {:>5}\n", "method", "M", "total_users", "mean", "mode");
    for r in rows {
        writeln!(text, "{:<6} {:>3} {:>11} {:>9.3} {:>5}", r.method, r.antennas, r.total_users, r.mean_selected, r.mode()).unwrap();
    }
    text
}

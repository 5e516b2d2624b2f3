//! `mpe-sim`: runs the precoding and user-selection experiments and writes
//! CSV tables plus a JSON manifest that can replay the run.

mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use config::{AlphaSpec, CliConfig, Job, SnrSpec};
use mpe_core::sim::{run_campaign, selection_count_sweep};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "mpe-sim", version, about = "Minimum-probability-of-error precoding experiments")]
struct Args {
    /// Experiment: fig2, fig3, fig4, fig5, fig6 or custom [default: custom].
    #[arg(long)]
    preset: Option<String>,
    /// TOML or JSON run configuration (or a manifest.json to replay); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Campaign seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// SNR grid in dB: `start:stop:step` or `a,b,c` [custom default: 0:20:5].
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Channel realizations [custom default: 100].
    #[arg(long)]
    realizations: Option<usize>,
    /// Transmit antennas M.
    #[arg(long)]
    m: Option<usize>,
    /// Fixed number of users K (no selection).
    #[arg(long)]
    k: Option<usize>,
    /// Candidate pool size K_T (runs GUS and SUS).
    #[arg(long)]
    kt: Option<usize>,
    /// GUS alpha: `adaptive` for (K-1)/K, or a number [default: adaptive].
    #[arg(long)]
    alpha: Option<String>,
    /// SUS orthogonality threshold in (0, 1) [default: 0.35].
    #[arg(long)]
    epsilon_sus: Option<f64>,
    /// Frame length of the throughput column [default: 100].
    #[arg(long)]
    frame_len: Option<usize>,
    /// Comma-separated precoders: zf, mmse, mslnr, mrt, mpe-ml, mpe-joint [custom default: all].
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

impl Args {
    fn to_config(&self) -> CliConfig {
        CliConfig {
            preset: self.preset.clone(),
            seed: self.seed,
            out: self.out.clone(),
            workers: self.workers,
            snr: self.snr.clone().map(SnrSpec::Text),
            realizations: self.realizations,
            m: self.m,
            k: self.k,
            kt: self.kt,
            alpha: self.alpha.clone().map(AlphaSpec::Named),
            epsilon_sus: self.epsilon_sus,
            frame_len: self.frame_len,
            methods: self.methods.clone(),
            ..CliConfig::default()
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: Args) -> Result<()> {
    let file = match &args.config {
        Some(path) => CliConfig::from_file(path)?,
        None => CliConfig::default(),
    };
    let mut cfg = file.merged(args.to_config());
    cfg.seed = Some(cfg.seed());

    let level = cfg.verbosity.clone().unwrap_or_else(|| "warn".into());
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MPE_LOG", level)).init();

    let job = cfg.resolve()?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        anyhow::ensure!(n > 0, "workers: must be at least 1");
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;

    let preset = cfg.preset_name().to_string();
    let started = Instant::now();
    let (files, job_echo, summary) = match &job {
        Job::Campaign(spec) => {
            log::info!("running {preset}: {} realizations, {} arms, {} SNR points", spec.realizations, spec.arms().len(), spec.snr_db.len());
            let result = pool.install(|| run_campaign(spec))?;
            let files = output::write_campaign(&out, &preset, &result)?;
            let echo = json!({
                "campaign": spec,
                "mpe": {
                    "pe_threshold": spec.mpe.pe_threshold,
                    "max_outer": spec.mpe.max_outer,
                    "multi_starts": spec.mpe.multi_starts,
                },
                "cells": result.cells.len(),
                "failures": result.failures.len(),
            });
            (files, echo, output::campaign_summary(&result))
        }
        Job::Sweep(sweep) => {
            log::info!("running {preset}: selection counts, {} realizations", sweep.realizations);
            let rows = pool.install(|| {
                selection_count_sweep(&sweep.antennas, &sweep.totals, &sweep.methods, sweep.realizations, sweep.seed)
            })?;
            let files = output::write_sweep(&out, &rows)?;
            (files, json!({ "sweep": sweep }), output::sweep_summary(&rows))
        }
    };

    let mut replay = cfg.clone();
    replay.workers = None;
    let mut all_files = files;
    all_files.push("manifest.json".into());
    let manifest = json!({
        "tool": "mpe-sim",
        "version": env!("CARGO_PKG_VERSION"),
        "preset": preset,
        "seed": cfg.seed(),
        "config": replay,
        "job": job_echo,
        "outputs": all_files,
    });
    output::write_manifest(&out, &manifest)?;

    print!("{summary}");
    println!("wrote {} to {} in {:.1?}", all_files.join(", "), out.display(), started.elapsed());
    Ok(())
}

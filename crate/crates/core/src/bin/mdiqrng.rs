use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use mdiqrng::pipeline::{self, PipelineError, RunConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "mdiqrng", version, about = "Certified randomness from weak-coherent path-encoded QRNG data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Click-count CSV for `certify` and `bin`.
    #[arg(long, global = true)]
    counts: Option<PathBuf>,
    /// Output directory (overrides the config and the environment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel sweep points.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write the solver-ready SDP as JSON.
    #[arg(long, global = true)]
    emit_sdp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Model statistics and, when `rounds` > 0, sampled counts.
    Simulate,
    /// Certify a counts file.
    Certify,
    /// Certify simulated data over the configured μ grid.
    Sweep,
    /// Bin three-detector counts to two detectors and certify the result.
    Bin,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        config.out_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &cli.out {
        config.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn counts_path(cli: &Cli) -> Result<&Path, PipelineError> {
    cli.counts.as_deref().ok_or_else(|| PipelineError::Config("this command needs --counts <path>".into()))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let out = &config.out_dir;
    match cli.command {
        Command::Simulate => {
            let sim = pipeline::run_simulate(&config)?;
            pipeline::write_file(&out.join("statistics.json"), &json(&sim.statistics))?;
            if let Some(counts) = &sim.counts {
                pipeline::write_file(&out.join("counts.csv"), &pipeline::format_counts(counts)?)?;
            }
            println!("wrote simulation for mu = {} to {}", config.mu, out.display());
        }
        Command::Certify => {
            let stats = pipeline::ingest_counts(counts_path(cli)?)?;
            if cli.emit_sdp {
                let sdp = pipeline::sdp_json(&config, &config.protocol(config.mu), &stats)?;
                pipeline::write_file(&out.join("sdp.json"), &sdp)?;
            }
            let result = pipeline::run_certify(&config, &stats)?;
            pipeline::write_file(&out.join("report.json"), &json(&result))?;
            println!("h = {:.6} bits/round (p_guess = {:.6}, gap = {:.2e})", result.min_entropy_bits, result.p_guess, result.solver.duality_gap);
        }
        Command::Sweep => {
            let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = pipeline::run_sweep(&config, workers)?;
            pipeline::write_file(&out.join("sweep.csv"), &pipeline::sweep_csv(&rows))?;
            pipeline::write_file(&out.join("sweep.svg"), &pipeline::sweep_svg(&rows))?;
            let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            println!("{:>8} {:>10} {:>10}", "mu", "qutrit", "qubit");
            for r in &rows {
                println!("{:>8.3} {:>10} {:>10}", r.mu, fmt(r.qutrit.min_entropy_bits), fmt(r.qubit.min_entropy_bits));
            }
        }
        Command::Bin => {
            let stats = pipeline::ingest_counts(counts_path(cli)?)?;
            let outcome = pipeline::run_bin(&config, &stats)?;
            if cli.emit_sdp {
                let sdp = pipeline::sdp_json(&config, &config.binned_protocol(config.mu), &outcome.binned)?;
                pipeline::write_file(&out.join("sdp_binned.json"), &sdp)?;
            }
            pipeline::write_file(&out.join("binned.json"), &json(&outcome.binned))?;
            pipeline::write_file(&out.join("report_binned.json"), &json(&outcome.result))?;
            println!("binned h = {:.6} bits/round", outcome.result.min_entropy_bits);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).context("mdiqrng failed");
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(1, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

//! The batch workflow in-process: simulate, write counts, ingest, certify.
//!
//! Run with `cargo run --release --example pipeline_round_trip`.

use mdiqrng::pipeline::{format_counts, ingest_counts, run_bin, run_certify, run_simulate, write_file, RunConfig};

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("mdiqrng-example");
    let config = RunConfig { rounds: 2_000_000, seed: 3, out_dir: dir.clone(), ..RunConfig::default() };
    let sim = run_simulate(&config)?;
    let counts = sim.counts.expect("rounds > 0 yields counts");
    let path = dir.join("counts.csv");
    write_file(&path, &format_counts(&counts)?)?;

    let ingested = ingest_counts(&path)?;
    assert_eq!(ingested, counts);
    let report = run_certify(&config, &ingested)?;
    println!("qutrit: h = {:.4} bits/round, {:.3} Mbit/s", report.min_entropy_bits, report.bitrate_bits_per_second.unwrap_or(0.0) / 1e6);
    let binned = run_bin(&config, &ingested)?;
    println!("binned qubit: h = {:.4} bits/round", binned.result.min_entropy_bits);
    write_file(&dir.join("report.json"), &report.to_json()?)?;
    println!("outputs in {}", dir.display());
    Ok(())
}

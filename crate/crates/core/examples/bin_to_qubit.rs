//! Coarse-graining the three-detector data into a two-path protocol.
//!
//! Run with `cargo run --release --example bin_to_qubit`.

use mdiqrng::certify::{bin_to_qubit, certify, BinningConfig, CertifyOptions};
use mdiqrng::pipeline::{model_statistics, RunConfig};

fn main() -> anyhow::Result<()> {
    let config = RunConfig { visibility: 0.995, ..RunConfig::default() };
    let options = CertifyOptions::default();
    for mu in [0.5, 0.91, 1.22] {
        let stats = model_statistics(&config, mu)?;
        let qutrit = certify(&config.protocol(mu), &stats, &options)?;
        let binned = bin_to_qubit(&stats, &BinningConfig::default())?;
        let qubit = certify(&config.binned_protocol(mu), &binned, &options)?;
        println!("mu = {mu:.2}: qutrit h = {:.4}, binned qubit h = {:.4}", qutrit.min_entropy_bits, qubit.min_entropy_bits);
    }
    Ok(())
}

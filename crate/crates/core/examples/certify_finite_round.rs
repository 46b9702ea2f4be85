//! Finite-round certification: sampled counts enter as confidence intervals
//! and the bound approaches the asymptotic value as the run grows.
//!
//! Run with `cargo run --release --example certify_finite_round`.

use mdiqrng::certify::{certify, Analysis, CertifyOptions, EpsilonBudget};
use mdiqrng::detector::sample_counts_per_setting;
use mdiqrng::pipeline::{model_statistics, RunConfig};

fn main() -> anyhow::Result<()> {
    let config = RunConfig { visibility: 0.995, dark_rates_cps: vec![0.0; 3], ..RunConfig::default() };
    let protocol = config.protocol(config.mu);
    let stats = model_statistics(&config, config.mu)?;

    let asymptotic = certify(&protocol, &stats, &CertifyOptions::default())?;
    println!("asymptotic: h = {:.4}", asymptotic.min_entropy_bits);

    let options = CertifyOptions { analysis: Analysis::FiniteRound { budget: EpsilonBudget::uniform(1e-6)? }, ..CertifyOptions::default() };
    for exp in 3..=6 {
        let n = 10u64.pow(exp);
        let counts = sample_counts_per_setting(&stats, &vec![n; stats.settings().len()], 7)?;
        let r = certify(&protocol, &counts, &options)?;
        let widest = r.intervals_used.as_ref().map_or(0.0, |t| t.radii.iter().flatten().copied().fold(0.0, f64::max));
        println!("n = 1e{exp} per setting: h = {:.4}  (interval radius {widest:.2e})", r.min_entropy_bits);
    }
    Ok(())
}

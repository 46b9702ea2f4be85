//! Drawing a finite run from model statistics and writing it as a counts file.
//!
//! Run with `cargo run --example sample_counts -- [rounds] [seed]`.

use mdiqrng::detector::sample_counts;
use mdiqrng::pipeline::{format_counts, model_statistics, read_counts, RunConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let rounds: u64 = args.next().map_or(Ok(100_000), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse())?;

    let config = RunConfig::default();
    let stats = model_statistics(&config, config.mu)?;
    let counts = sample_counts(&stats, &config.schedule(), rounds, seed)?;
    let text = format_counts(&counts)?;
    print!("{text}");

    let back = read_counts(text.as_bytes())?;
    assert_eq!(back, counts);
    eprintln!("{rounds} rounds, seed {seed}; per setting {:?}", counts.rounds_per_setting().unwrap_or_default());
    Ok(())
}

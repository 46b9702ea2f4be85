//! From bits per round to certified bits per second.
//!
//! Run with `cargo run --release --example bitrate`.

use mdiqrng::certify::certified_bitrate;
use mdiqrng::pipeline::{detection_fraction, model_statistics, RunConfig};

fn main() -> anyhow::Result<()> {
    let config = RunConfig::default();
    let stats = model_statistics(&config, config.mu)?;
    let f_det = detection_fraction(&stats, "G").unwrap_or(0.0);
    println!("generation rounds with a click: {f_det:.4}");
    for h in [0.92, 1.0, 1.22] {
        let rate = certified_bitrate(h, config.repetition_rate_hz * f_det, config.generation_fraction);
        println!("h = {h:.2} bits/round -> {:.3} Mbit/s", rate / 1e6);
    }
    Ok(())
}

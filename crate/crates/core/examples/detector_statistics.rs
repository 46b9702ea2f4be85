//! Click-pattern statistics of the three-path device with lossy threshold
//! detectors, dark counts and imperfect visibility.
//!
//! Run with `cargo run --example detector_statistics`.

use mdiqrng::certify::Protocol;
use mdiqrng::detector::{build_threshold_povm, simulate_statistics, DetectorParams, NoiseModel};
use mdiqrng::fock::Source;

fn main() -> anyhow::Result<()> {
    let protocol = Protocol::path_encoded(3, 3, Source::Coherent { mu: 1.22 });
    let space = protocol.space()?;
    let params = DetectorParams::from_rates(vec![0.862, 0.900, 0.751], &[19.0, 9.0, 1.3], 10e-9)?;
    let model = build_threshold_povm(&space, &params)?;
    println!("POVM completeness error: {:.1e}", model.completeness_error());

    let stats = simulate_statistics(&protocol.states(&space)?, &space, &model, NoiseModel::new(0.995)?)?;
    let patterns = stats.patterns();
    print!("{:>4}", "");
    for p in &patterns {
        print!("{:>9}", p.to_string());
    }
    println!();
    for (label, row) in stats.settings().iter().zip(stats.probabilities()) {
        print!("{label:>4}");
        for p in row {
            print!("{p:>9.5}");
        }
        println!();
    }
    Ok(())
}

//! Certification of ideal single-photon devices: perfect test rows force
//! the adversary's measurement, so the generation outcome is uniform.
//!
//! Run with `cargo run --example certify_ideal`.

use mdiqrng::certify::{certify, CertifyOptions, Protocol};
use mdiqrng::detector::{build_threshold_povm, simulate_statistics, DetectorParams, NoiseModel};
use mdiqrng::fock::Source;

fn main() -> anyhow::Result<()> {
    for modes in [3, 2] {
        let protocol = Protocol::path_encoded(modes, 1, Source::Fock { n: 1 });
        let space = protocol.space()?;
        let model = build_threshold_povm(&space, &DetectorParams::ideal(modes))?;
        let stats = simulate_statistics(&protocol.states(&space)?, &space, &model, NoiseModel::noiseless())?;
        let result = certify(&protocol, &stats, &CertifyOptions::default())?;
        println!(
            "{modes} paths: h = {:.6} bits (log2 {modes} = {:.6}), gap {:.1e}, {} iterations",
            result.min_entropy_bits,
            (modes as f64).log2(),
            result.solver.duality_gap,
            result.solver.iterations
        );
    }
    Ok(())
}

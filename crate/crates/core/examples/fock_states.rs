//! Truncated Fock spaces and phase-randomized weak coherent states.
//!
//! Run with `cargo run --example fock_states`.

use mdiqrng::fock::{build_wcs_state, coherent_sector_state, kappa, ModeVector, TruncatedFockSpace};

fn main() -> anyhow::Result<()> {
    for modes in [2, 3] {
        let space = TruncatedFockSpace::new(modes, 3)?;
        println!("{modes} modes, cutoff 3: dim {} with sectors {:?}", space.dim(), space.sector_dims());
    }

    let space = TruncatedFockSpace::new(3, 3)?;
    let uniform = ModeVector::uniform(3);
    for n in 1..=2 {
        let psi = coherent_sector_state(&uniform, n, &space)?;
        println!("\n{n}-photon generation state:");
        for (occ, amp) in space.basis()[space.sector_range(n)].iter().zip(&psi.amplitudes) {
            println!("  {:?}  {:+.6}", occ.counts(), amp.re);
        }
    }

    let mu = 1.22;
    let state = build_wcs_state(&uniform, mu, &space, true)?;
    println!("\nmu = {mu}: kappa = {:.6}, renormalised trace = {:.12}", kappa(mu, 3), state.trace());
    for (n, w) in state.sector_weights.iter().enumerate() {
        println!("  sector {n}: weight {w:.6}");
    }
    Ok(())
}

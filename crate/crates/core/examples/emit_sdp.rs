//! Exporting the solver-ready program as JSON and re-solving the reloaded copy.
//!
//! Run with `cargo run --example emit_sdp -- [path]`.

use mdiqrng::certify::{certify, solver_problem, truncation_correct, CertifyOptions};
use mdiqrng::pipeline::{model_statistics, RunConfig};
use mdiqrng::sdp::{solve, SdpProblem};

fn main() -> anyhow::Result<()> {
    let config = RunConfig { mu: 0.5, cutoff: 2, ..RunConfig::default() };
    let protocol = config.protocol(config.mu);
    let stats = model_statistics(&config, config.mu)?;
    let options = CertifyOptions::default();

    let (problem, _) = solver_problem(&protocol, &stats, &options)?;
    let json = problem.to_json()?;
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, &json)?;
        println!("wrote {path}");
    }
    let reloaded = SdpProblem::from_json(&json)?;
    println!("{} PSD variables, {} constraints, {} bytes of JSON", reloaded.psd_vars.len(), reloaded.constraints.len(), json.len());

    let sol = solve(&reloaded, &options.solver)?;
    let p = truncation_correct(sol.upper_bound().clamp(0.0, 1.0), protocol.kappa()?);
    let direct = certify(&protocol, &stats, &options)?;
    println!("reloaded: p_guess {p:.9}; direct: p_guess {:.9}", direct.p_guess);
    Ok(())
}

//! Using the solver on a hand-built program: the largest eigenvalue of a
//! Hermitian matrix `C` is `max Tr[C X]` over density operators `X`.
//!
//! Run with `cargo run --example custom_sdp`.

use mdiqrng::sdp::{solve, HermitianCoeff, LinearConstraint, PsdVariable, SdpProblem, Sense, SolverConfig, Term};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn main() -> anyhow::Result<()> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let cost = DMatrix::from_row_slice(3, 3, &[c(2.0, 0.0), c(0.5, -1.0), c(0.0, 0.0), c(0.5, 1.0), c(1.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.3, 0.0), c(-1.0, 0.0)]);

    let problem = SdpProblem {
        psd_vars: vec![PsdVariable { label: "X".into(), block_dims: vec![3] }],
        scalar_vars: vec![],
        objective: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::from_dense(&cost) }],
        constraints: vec![LinearConstraint {
            label: "trace".into(),
            terms: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::from_dense(&DMatrix::identity(3, 3)) }],
            sense: Sense::Eq,
            rhs: 1.0,
            linking: false,
        }],
        trace_bound: Some(1.0),
    };
    let sol = solve(&problem, &SolverConfig::default())?;
    let lambda_max = cost.symmetric_eigenvalues().max();
    println!("status {:?} after {} iterations", sol.status, sol.iterations);
    println!("primal {:.10}  dual {:.10}  gap {:.1e}", sol.primal_value, sol.dual_value, sol.duality_gap);
    println!("certified upper bound {:.10}", sol.upper_bound());
    println!("largest eigenvalue    {lambda_max:.10}");
    Ok(())
}

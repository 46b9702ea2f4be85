//! The guessing-probability program for an outcome-guessing adversary.
//!
//! Variables are one PSD operator `M[a,e]` per (pattern, guess) pair and a
//! non-negative weight `q[e]` per guess. The adversary's joint measurement
//! must be a valid POVM for every guess (`sum_a M[a,e] = q[e] I`), reproduce
//! the observed test statistics when averaged over guesses, and is scored on
//! the generation state by how often the guess equals the outcome.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::problem::{HermitianCoeff, LinearConstraint, PsdVariable, ScalarVariable, SdpProblem, Sense, Term};
use super::SdpError;
use crate::detector::ClickPattern;

const ROW_TOLERANCE: f64 = 1e-8;
/// Exact probabilities below this are treated as structural zeros.
const ZERO_SNAP: f64 = 1e-12;

/// How the observed statistics enter the program, one row per test setting
/// and one column per click pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum StatisticsConstraints {
    /// `sum_e Tr[rho_x M[a,e]] = p(a|x)`.
    Exact(Vec<Vec<f64>>),
    /// `lower(a|x) <= sum_e Tr[rho_x M[a,e]] <= upper(a|x)`.
    Intervals { lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>> },
}

/// A built guessing program with the bookkeeping needed to read it back.
#[derive(Debug, Clone)]
pub struct GuessingSdp {
    pub problem: SdpProblem,
    pub patterns: Vec<ClickPattern>,
    pub test_labels: Vec<String>,
    pub dim: usize,
}

impl GuessingSdp {
    /// Index of `M[a,e]` among the PSD variables.
    pub fn operator_index(&self, a: usize, e: usize) -> usize {
        e * self.patterns.len() + a
    }
}

/// `dim + 1 + n_ineq`: every `M[a,e]` sums to `q[e] I`, the weights sum to
/// one and each interval slack is at most one.
pub fn guessing_trace_bound(dim: usize, inequalities: usize) -> f64 {
    (dim + 1 + inequalities) as f64
}

fn check_hermitian(m: &DMatrix<Complex64>, dim: usize) -> Result<(), SdpError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(SdpError::DimensionMismatch(format!("state is {}x{}, expected {dim}x{dim}", m.nrows(), m.ncols())));
    }
    let dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(SdpError::NotHermitian(dev));
    }
    Ok(())
}

/// Builds the program for `detectors` threshold detectors.
///
/// `tests` pairs each test label with its density matrix; the statistics
/// rows follow the same order.
pub fn build_guessing_sdp(
    generation: &DMatrix<Complex64>,
    tests: &[(String, DMatrix<Complex64>)],
    statistics: &StatisticsConstraints,
    detectors: usize,
) -> Result<GuessingSdp, SdpError> {
    let dim = generation.nrows();
    check_hermitian(generation, dim)?;
    for (_, rho) in tests {
        check_hermitian(rho, dim)?;
    }
    let patterns = ClickPattern::all(detectors);
    let np = patterns.len();
    let check_rows = |rows: &[Vec<f64>], what: &str| -> Result<(), SdpError> {
        if rows.len() != tests.len() {
            return Err(SdpError::DimensionMismatch(format!("{what}: {} rows for {} test settings", rows.len(), tests.len())));
        }
        for r in rows {
            if r.len() != np {
                return Err(SdpError::DimensionMismatch(format!("{what}: row of length {} for {np} patterns", r.len())));
            }
        }
        Ok(())
    };
    match statistics {
        StatisticsConstraints::Exact(rows) => {
            check_rows(rows, "statistics")?;
            for ((label, _), r) in tests.iter().zip(rows) {
                let sum: f64 = r.iter().sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(SdpError::RowNotNormalized { setting: label.clone(), sum });
                }
            }
        }
        StatisticsConstraints::Intervals { lower, upper } => {
            check_rows(lower, "lower bounds")?;
            check_rows(upper, "upper bounds")?;
            for (x, (label, _)) in tests.iter().enumerate() {
                for a in 0..np {
                    if lower[x][a] > upper[x][a] {
                        return Err(SdpError::InvalidInterval {
                            label: format!("{label}/{}", patterns[a]),
                            lower: lower[x][a],
                            upper: upper[x][a],
                        });
                    }
                }
            }
        }
    }

    let mut psd_vars = Vec::with_capacity(np * np);
    for e in &patterns {
        for a in &patterns {
            psd_vars.push(PsdVariable { label: format!("M[{a},{e}]"), block_dims: vec![dim] });
        }
    }
    let scalar_vars: Vec<ScalarVariable> = patterns.iter().map(|e| ScalarVariable { label: format!("q[{e}]") }).collect();
    let var = |a: usize, e: usize| e * np + a;

    let gen_coeff = HermitianCoeff::from_dense(generation);
    let objective: Vec<Term> = (0..np).map(|a| Term::Psd { var: var(a, a), block: 0, coeff: gen_coeff.clone() }).collect();

    let mut constraints = Vec::new();
    for (e, pe) in patterns.iter().enumerate() {
        for k in 0..dim {
            for l in k..dim {
                let parts: Vec<(&str, HermitianCoeff)> = if k == l {
                    vec![("", HermitianCoeff::diagonal_unit(dim, k))]
                } else {
                    vec![("re", HermitianCoeff::real_part(dim, k, l)), ("im", HermitianCoeff::imag_part(dim, k, l))]
                };
                for (tag, coeff) in parts {
                    let mut terms: Vec<Term> = (0..np).map(|a| Term::Psd { var: var(a, e), block: 0, coeff: coeff.clone() }).collect();
                    if k == l {
                        terms.push(Term::Scalar { var: e, coeff: -1.0 });
                    }
                    constraints.push(LinearConstraint {
                        label: format!("povm[{pe}]({k},{l}){tag}"),
                        terms,
                        sense: Sense::Eq,
                        rhs: 0.0,
                        linking: false,
                    });
                }
            }
        }
    }
    constraints.push(LinearConstraint {
        label: "sum_q".into(),
        terms: (0..np).map(|e| Term::Scalar { var: e, coeff: 1.0 }).collect(),
        sense: Sense::Eq,
        rhs: 1.0,
        linking: true,
    });

    let mut inequalities = 0;
    for (x, (label, rho)) in tests.iter().enumerate() {
        let coeff = HermitianCoeff::from_dense(rho);
        let terms_for = |a: usize| -> Vec<Term> { (0..np).map(|e| Term::Psd { var: var(a, e), block: 0, coeff: coeff.clone() }).collect() };
        let unit_trace = (rho.trace().re - 1.0).abs() <= ROW_TOLERANCE;
        let implied = match statistics {
            StatisticsConstraints::Exact(rows) if unit_trace => {
                rows[x].iter().enumerate().fold(0, |best, (a, &p)| if p > rows[x][best] { a } else { best })
            }
            _ => usize::MAX,
        };
        for (a, pa) in patterns.iter().enumerate() {
            match statistics {
                StatisticsConstraints::Exact(rows) => {
                    // With a unit-trace state one pattern is implied by the others.
                    // Dropping the most likely one keeps the rest independent
                    // once zero-probability patterns are eliminated.
                    if a == implied {
                        continue;
                    }
                    let p = rows[x][a];
                    constraints.push(LinearConstraint {
                        label: format!("stat[{label},{pa}]"),
                        terms: terms_for(a),
                        sense: Sense::Eq,
                        rhs: if p < ZERO_SNAP { 0.0 } else { p },
                        linking: true,
                    });
                }
                StatisticsConstraints::Intervals { lower, upper } => {
                    if lower[x][a] > 0.0 {
                        constraints.push(LinearConstraint {
                            label: format!("stat_lo[{label},{pa}]"),
                            terms: terms_for(a),
                            sense: Sense::Ge,
                            rhs: lower[x][a],
                            linking: true,
                        });
                        inequalities += 1;
                    }
                    if upper[x][a] < 1.0 {
                        constraints.push(LinearConstraint {
                            label: format!("stat_hi[{label},{pa}]"),
                            terms: terms_for(a),
                            sense: Sense::Le,
                            rhs: upper[x][a],
                            linking: true,
                        });
                        inequalities += 1;
                    }
                }
            }
        }
    }

    let problem = SdpProblem {
        psd_vars,
        scalar_vars,
        objective,
        constraints,
        trace_bound: Some(guessing_trace_bound(dim, inequalities)),
    };
    Ok(GuessingSdp { problem, patterns, test_labels: tests.iter().map(|(l, _)| l.clone()).collect(), dim })
}

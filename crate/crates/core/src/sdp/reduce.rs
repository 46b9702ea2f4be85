//! Restriction of single-block variables to a fixed block-diagonal pattern.
//!
//! When every coefficient of the objective is block diagonal with respect
//! to a partition of the basis, pinching a feasible point onto those blocks
//! keeps it feasible and leaves the objective unchanged, so the optimum over
//! block-diagonal variables equals the full optimum.

use std::ops::Range;

use super::problem::{Entry, HermitianCoeff, LinearConstraint, PsdVariable, SdpProblem, Term};
use super::SdpError;

struct Partition {
    of: Vec<(usize, usize)>,
    dims: Vec<usize>,
}

impl Partition {
    fn new(sectors: &[Range<usize>]) -> Result<Self, SdpError> {
        let mut of = Vec::new();
        let mut dims = Vec::new();
        for (b, r) in sectors.iter().enumerate() {
            if r.start != of.len() {
                return Err(SdpError::DimensionMismatch("sectors must tile the basis contiguously".into()));
            }
            for (local, _) in r.clone().enumerate() {
                of.push((b, local));
            }
            dims.push(r.len());
        }
        Ok(Self { of, dims })
    }

    fn total(&self) -> usize {
        self.of.len()
    }
}

/// Splits a coefficient by block; `None` if any entry crosses blocks.
fn split(coeff: &HermitianCoeff, part: &Partition) -> Option<Vec<(usize, HermitianCoeff)>> {
    let mut per_block: Vec<Vec<Entry>> = vec![Vec::new(); part.dims.len()];
    for e in &coeff.entries {
        let (bi, li) = part.of[e.0];
        let (bj, lj) = part.of[e.1];
        if bi != bj {
            return None;
        }
        per_block[bi].push(Entry(li, lj, e.2, e.3));
    }
    Some(
        per_block
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(b, entries)| (b, HermitianCoeff { dim: part.dims[b], entries }))
            .collect(),
    )
}

fn only_cross(coeff: &HermitianCoeff, part: &Partition) -> bool {
    coeff.entries.iter().all(|e| part.of[e.0].0 != part.of[e.1].0)
}

/// Replaces every single-block PSD variable of size `sum |sectors|` by a
/// direct sum of one block per sector.
///
/// Constraints whose PSD terms only touch off-block entries and whose
/// right-hand side is zero are dropped, as they hold trivially. Mixing on-
/// and off-block entries in one constraint, or an off-block objective, is
/// an error.
pub fn block_reduce(problem: &SdpProblem, sectors: &[Range<usize>]) -> Result<SdpProblem, SdpError> {
    let part = Partition::new(sectors)?;
    for v in &problem.psd_vars {
        if v.block_dims != [part.total()] {
            return Err(SdpError::DimensionMismatch(format!("variable {} is not a single block of size {}", v.label, part.total())));
        }
    }
    let psd_vars = problem
        .psd_vars
        .iter()
        .map(|v| PsdVariable { label: v.label.clone(), block_dims: part.dims.clone() })
        .collect();

    let map_terms = |terms: &[Term]| -> Option<Vec<Term>> {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            match t {
                Term::Psd { var, coeff, .. } => {
                    for (b, c) in split(coeff, &part)? {
                        out.push(Term::Psd { var: *var, block: b, coeff: c });
                    }
                }
                Term::Scalar { .. } => out.push(t.clone()),
            }
        }
        Some(out)
    };

    let objective = map_terms(&problem.objective).ok_or(SdpError::CrossBlockObjective)?;
    let mut constraints = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        if let Some(terms) = map_terms(&c.terms) {
            constraints.push(LinearConstraint { label: c.label.clone(), terms, sense: c.sense, rhs: c.rhs, linking: c.linking });
            continue;
        }
        let cross_only = c.terms.iter().all(|t| match t {
            Term::Psd { coeff, .. } => only_cross(coeff, &part),
            Term::Scalar { .. } => false,
        });
        if cross_only && c.rhs == 0.0 && c.sense == super::Sense::Eq {
            continue;
        }
        return Err(SdpError::CrossBlockConstraint(c.label.clone()));
    }
    Ok(SdpProblem { psd_vars, scalar_vars: problem.scalar_vars.clone(), objective, constraints, trace_bound: problem.trace_bound })
}

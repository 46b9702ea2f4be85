//! Exact facial reduction from zero-valued PSD constraints.
//!
//! A row `sum_t <A_t, X_t> = 0` (or `<= 0`) whose coefficients are all PSD
//! forces every `X_t` onto the null space of `A_t`. Each affected block is
//! replaced by its compression `X = V N V^H` onto that null space, which
//! restores a strictly feasible interior for problems where statistics pin
//! probabilities to exactly zero.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::problem::{HermitianCoeff, LinearConstraint, PsdVariable, SdpProblem, Sense, Term};

type CMat = DMatrix<Complex64>;

const NULL_TOLERANCE: f64 = 1e-12;
const ENTRY_TOLERANCE: f64 = 1e-15;
const MAX_PASSES: usize = 4;

/// The compressed problem and the isometries needed to lift solutions.
pub(super) struct Reduced {
    pub problem: SdpProblem,
    /// Per original variable and block: `None` if untouched, otherwise the
    /// isometry `V` (possibly with zero columns) and the new block index.
    maps: Vec<Vec<BlockMap>>,
}

#[derive(Clone)]
enum BlockMap {
    Same(usize),
    Compressed { v: CMat, block: Option<usize> },
}

fn is_psd(a: &CMat) -> bool {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let lmin = a.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    lmin >= -NULL_TOLERANCE * scale
}

fn is_zero_row(c: &LinearConstraint) -> bool {
    c.rhs == 0.0
        && matches!(c.sense, Sense::Eq | Sense::Le)
        && !c.terms.is_empty()
        && c.terms.iter().all(|t| matches!(t, Term::Psd { coeff, .. } if is_psd(&coeff.to_dense())))
}

/// Orthonormal basis of the null space of the PSD matrix `s`.
fn null_basis(s: &CMat) -> CMat {
    let n = s.nrows();
    let eig = s.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= NULL_TOLERANCE * top.max(1e-300)).collect();
    CMat::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}

fn compress(coeff: &HermitianCoeff, v: &CMat) -> Option<HermitianCoeff> {
    let a = v.adjoint() * coeff.to_dense() * v;
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let orig = coeff.entries.iter().map(|e| e.value().norm()).fold(0.0, f64::max);
    if scale <= ENTRY_TOLERANCE * orig.max(1.0) {
        return None;
    }
    let cleaned = a.map(|z| {
        let re = if z.re.abs() < ENTRY_TOLERANCE * scale { 0.0 } else { z.re };
        let im = if z.im.abs() < ENTRY_TOLERANCE * scale { 0.0 } else { z.im };
        Complex64::new(re, im)
    });
    Some(HermitianCoeff::from_dense(&cleaned))
}

fn one_pass(problem: &SdpProblem) -> Option<(SdpProblem, Vec<Vec<BlockMap>>)> {
    let mut accum: Vec<Vec<Option<CMat>>> = problem.psd_vars.iter().map(|v| vec![None; v.block_dims.len()]).collect();
    let mut any = false;
    for c in problem.constraints.iter().filter(|c| is_zero_row(c)) {
        for t in &c.terms {
            if let Term::Psd { var, block, coeff } = t {
                let slot = &mut accum[*var][*block];
                let d = coeff.to_dense();
                *slot = Some(match slot.take() {
                    Some(s) => s + d,
                    None => d,
                });
                any = true;
            }
        }
    }
    if !any {
        return None;
    }
    let mut maps = Vec::with_capacity(problem.psd_vars.len());
    let mut psd_vars = Vec::with_capacity(problem.psd_vars.len());
    for (var, v) in problem.psd_vars.iter().enumerate() {
        let mut dims = Vec::new();
        let mut m = Vec::with_capacity(v.block_dims.len());
        for (block, &d) in v.block_dims.iter().enumerate() {
            match &accum[var][block] {
                None => {
                    m.push(BlockMap::Same(dims.len()));
                    dims.push(d);
                }
                Some(s) => {
                    let basis = null_basis(s);
                    let r = basis.ncols();
                    let block = if r > 0 {
                        dims.push(r);
                        Some(dims.len() - 1)
                    } else {
                        None
                    };
                    m.push(BlockMap::Compressed { v: basis, block });
                }
            }
        }
        psd_vars.push(PsdVariable { label: v.label.clone(), block_dims: dims });
        maps.push(m);
    }

    let map_terms = |terms: &[Term]| -> Vec<Term> {
        terms
            .iter()
            .filter_map(|t| match t {
                Term::Psd { var, block, coeff } => match &maps[*var][*block] {
                    BlockMap::Same(b) => Some(Term::Psd { var: *var, block: *b, coeff: coeff.clone() }),
                    BlockMap::Compressed { block: None, .. } => None,
                    BlockMap::Compressed { v, block: Some(b) } => compress(coeff, v).map(|c| Term::Psd { var: *var, block: *b, coeff: c }),
                },
                Term::Scalar { .. } => Some(t.clone()),
            })
            .collect()
    };
    let constraints = problem
        .constraints
        .iter()
        .filter(|c| !is_zero_row(c))
        .map(|c| LinearConstraint { label: c.label.clone(), terms: map_terms(&c.terms), sense: c.sense, rhs: c.rhs, linking: c.linking })
        .collect();
    let reduced = SdpProblem {
        psd_vars,
        scalar_vars: problem.scalar_vars.clone(),
        objective: map_terms(&problem.objective),
        constraints,
        trace_bound: problem.trace_bound,
    };
    Some((reduced, maps))
}

pub(super) fn facial_reduce(problem: &SdpProblem) -> Option<Reduced> {
    let mut current = problem.clone();
    let mut chain: Vec<Vec<Vec<BlockMap>>> = Vec::new();
    for _ in 0..MAX_PASSES {
        match one_pass(&current) {
            Some((p, maps)) => {
                current = p;
                chain.push(maps);
            }
            None => break,
        }
    }
    if chain.is_empty() {
        return None;
    }
    // Compose passes into a single map from original blocks.
    let mut maps: Vec<Vec<BlockMap>> = problem.psd_vars.iter().map(|v| (0..v.block_dims.len()).map(BlockMap::Same).collect()).collect();
    for step in &chain {
        for var_maps in maps.iter_mut().enumerate() {
            let (var, blocks) = var_maps;
            for m in blocks.iter_mut() {
                *m = match m.clone() {
                    BlockMap::Same(b) => step[var][b].clone(),
                    BlockMap::Compressed { v, block: Some(b) } => match &step[var][b] {
                        BlockMap::Same(nb) => BlockMap::Compressed { v, block: Some(*nb) },
                        BlockMap::Compressed { v: w, block: nb } => BlockMap::Compressed { v: &v * w, block: *nb },
                    },
                    done @ BlockMap::Compressed { block: None, .. } => done,
                };
            }
        }
    }
    Some(Reduced { problem: current, maps })
}

impl Reduced {
    /// `X = V N V^H` for every compressed block.
    pub fn lift(&self, original: &SdpProblem, values: &[Vec<CMat>]) -> Vec<Vec<CMat>> {
        original
            .psd_vars
            .iter()
            .enumerate()
            .map(|(var, v)| {
                v.block_dims
                    .iter()
                    .enumerate()
                    .map(|(block, &d)| match &self.maps[var][block] {
                        BlockMap::Same(b) => values[var][*b].clone(),
                        BlockMap::Compressed { block: None, .. } => CMat::zeros(d, d),
                        BlockMap::Compressed { v, block: Some(b) } => v * &values[var][*b] * v.adjoint(),
                    })
                    .collect()
            })
            .collect()
    }
}

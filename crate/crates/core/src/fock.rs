//! Truncated multimode Fock spaces and phase-randomized weak coherent states.
//!
//! A phase-randomized coherent preparation is block-diagonal in total photon
//! number: each sector `n` carries the Poisson weight `e^{-mu} mu^n / n!` and
//! the pure state `(a^dagger(beta))^n |0..0> / sqrt(n!)`. Only sectors up to
//! the cutoff are represented; the escaped mass `1 - kappa` is handled by the
//! caller through the truncation correction.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FockError {
    #[error("a Fock space needs at least one mode")]
    NoModes,
    #[error("sector {n} exceeds the cutoff {cutoff}")]
    SectorAboveCutoff { n: usize, cutoff: usize },
    #[error("mode vector has {got} entries but the space has {expected} modes")]
    ModeMismatch { expected: usize, got: usize },
    #[error("mode vector norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("mode vector is zero and cannot be normalized")]
    ZeroVector,
    #[error("mean photon number must be finite and non-negative, got {0}")]
    InvalidMu(f64),
}

/// Photon count per optical mode, e.g. `|210>` is `[2, 1, 0]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeOccupation(Vec<u32>);

impl ModeOccupation {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }
}

impl fmt::Display for ModeOccupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        write!(f, ">")
    }
}

/// All occupations of `modes` modes with total photon number at most `cutoff`.
///
/// Basis order: ascending total photon number, ascending lexicographic order
/// of the count tuple within a sector.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFockSpace {
    modes: usize,
    cutoff: usize,
    basis: Vec<ModeOccupation>,
    index: HashMap<ModeOccupation, usize>,
    sectors: Vec<Range<usize>>,
}

/// Builds the truncated space; see [`TruncatedFockSpace`] for the basis order.
pub fn enumerate_basis(modes: usize, cutoff: usize) -> Result<TruncatedFockSpace, FockError> {
    TruncatedFockSpace::new(modes, cutoff)
}

impl TruncatedFockSpace {
    pub fn new(modes: usize, cutoff: usize) -> Result<Self, FockError> {
        if modes == 0 {
            return Err(FockError::NoModes);
        }
        let mut basis = Vec::new();
        let mut sectors = Vec::with_capacity(cutoff + 1);
        for n in 0..=cutoff {
            let start = basis.len();
            let mut current = vec![0u32; modes];
            compositions(n as u32, 0, &mut current, &mut basis);
            basis[start..].sort();
            sectors.push(start..basis.len());
        }
        let index = basis.iter().cloned().enumerate().map(|(i, occ)| (occ, i)).collect();
        Ok(Self {
            modes,
            cutoff,
            basis,
            index,
            sectors,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ModeOccupation] {
        &self.basis
    }

    pub fn index_of(&self, occupation: &ModeOccupation) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Basis positions belonging to total photon number `n`.
    pub fn sector_range(&self, n: usize) -> Range<usize> {
        self.sectors[n].clone()
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.sectors.iter().map(|r| r.len()).collect()
    }

    /// Basis positions grouped by photon-number sector, for block reduction.
    pub fn sector_partition(&self) -> Vec<Vec<usize>> {
        self.sectors.iter().map(|r| r.clone().collect()).collect()
    }

    pub(crate) fn same_shape(&self, modes: usize, cutoff: usize) -> bool {
        self.modes == modes && self.cutoff == cutoff
    }
}

fn compositions(remaining: u32, mode: usize, current: &mut Vec<u32>, out: &mut Vec<ModeOccupation>) {
    if mode + 1 == current.len() {
        current[mode] = remaining;
        out.push(ModeOccupation(current.clone()));
        return;
    }
    for k in 0..=remaining {
        current[mode] = k;
        compositions(remaining - k, mode + 1, current, out);
    }
    current[mode] = 0;
}

/// Unit-norm vector of complex mode amplitudes (the direction of `alpha`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector(Vec<Complex64>);

impl ModeVector {
    /// Accepts amplitudes whose Euclidean norm is already 1 within 1e-12.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, FockError> {
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(FockError::NotNormalized(norm));
        }
        Ok(Self(amplitudes))
    }

    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self, FockError> {
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(FockError::ZeroVector);
        }
        Ok(Self(amplitudes.into_iter().map(|a| a / norm).collect()))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self, FockError> {
        Self::normalized(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// All photons in mode `mode`.
    pub fn basis(modes: usize, mode: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); modes];
        v[mode] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    /// Equal superposition over all modes.
    pub fn uniform(modes: usize) -> Self {
        let a = 1.0 / (modes as f64).sqrt();
        Self(vec![Complex64::new(a, 0.0); modes])
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// A pure state inside one photon-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureSectorState {
    pub sector: usize,
    /// Amplitudes over the sector's occupations, in basis order.
    pub amplitudes: Vec<Complex64>,
}

impl PureSectorState {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `(a^dagger(beta))^n |0..0> / sqrt(n!)` expanded in the sector basis.
///
/// The amplitude on `|n_1 .. n_D>` is `sqrt(n! / prod n_i!) * prod beta_i^{n_i}`.
pub fn coherent_sector_state(
    beta: &ModeVector,
    n: usize,
    space: &TruncatedFockSpace,
) -> Result<PureSectorState, FockError> {
    if n > space.cutoff {
        return Err(FockError::SectorAboveCutoff { n, cutoff: space.cutoff });
    }
    if beta.modes() != space.modes {
        return Err(FockError::ModeMismatch {
            expected: space.modes,
            got: beta.modes(),
        });
    }
    let ln_n_fact = ln_factorial(n as u32);
    let amplitudes = space.basis[space.sector_range(n)]
        .iter()
        .map(|occ| {
            let ln_multinomial = ln_n_fact - occ.counts().iter().map(|&c| ln_factorial(c)).sum::<f64>();
            let monomial = occ
                .counts()
                .iter()
                .zip(beta.amplitudes())
                .fold(Complex64::new(1.0, 0.0), |acc, (&c, b)| acc * b.powu(c));
            monomial * (0.5 * ln_multinomial).exp()
        })
        .collect();
    Ok(PureSectorState { sector: n, amplitudes })
}

/// Poisson probability of `n` photons at mean `mu`, evaluated in log space.
pub fn poisson_weight(mu: f64, n: usize) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-mu + n as f64 * mu.ln() - ln_factorial(n as u32)).exp()
}

/// In-subspace weight `e^{-mu} sum_{n<=cutoff} mu^n / n!`.
pub fn kappa(mu: f64, cutoff: usize) -> f64 {
    (0..=cutoff).map(|n| poisson_weight(mu, n)).sum::<f64>().min(1.0)
}

/// How a preparation distributes photons over sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// Phase-randomized weak coherent state with mean photon number `mu`.
    Coherent { mu: f64 },
    /// Exactly `n` photons.
    Fock { n: usize },
}

/// A density operator that is block-diagonal in total photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonalState {
    pub source: Source,
    pub beta: ModeVector,
    pub modes: usize,
    pub cutoff: usize,
    /// Weight per sector `n = 0..=cutoff`.
    pub sector_weights: Vec<f64>,
    pub sector_states: Vec<PureSectorState>,
    pub kappa: f64,
    pub renormalized: bool,
}

/// Phase-randomized WCS truncated to `space`; with `renormalize` the
/// sector weights are divided by kappa so the operator has unit trace.
pub fn build_wcs_state(
    beta: &ModeVector,
    mu: f64,
    space: &TruncatedFockSpace,
    renormalize: bool,
) -> Result<BlockDiagonalState, FockError> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(FockError::InvalidMu(mu));
    }
    let sector_states = (0..=space.cutoff)
        .map(|n| coherent_sector_state(beta, n, space))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sector_weights: Vec<f64> = (0..=space.cutoff).map(|n| poisson_weight(mu, n)).collect();
    let kappa: f64 = sector_weights.iter().sum::<f64>().min(1.0);
    if renormalize {
        if kappa > 0.0 {
            sector_weights.iter_mut().for_each(|w| *w /= kappa);
        } else {
            // All mass escaped the cutoff; keep a valid state on the top sector.
            sector_weights.iter_mut().for_each(|w| *w = 0.0);
            sector_weights[space.cutoff] = 1.0;
        }
    }
    Ok(BlockDiagonalState {
        source: Source::Coherent { mu },
        beta: beta.clone(),
        modes: space.modes,
        cutoff: space.cutoff,
        sector_weights,
        sector_states,
        kappa,
        renormalized: renormalize,
    })
}

impl BlockDiagonalState {
    /// A pure `n`-photon preparation `(a^dagger(beta))^n |0..0> / sqrt(n!)`.
    pub fn fock(beta: &ModeVector, n: usize, space: &TruncatedFockSpace) -> Result<Self, FockError> {
        let sector_states = (0..=space.cutoff)
            .map(|k| coherent_sector_state(beta, k, space))
            .collect::<Result<Vec<_>, _>>()?;
        if n > space.cutoff {
            return Err(FockError::SectorAboveCutoff { n, cutoff: space.cutoff });
        }
        let mut sector_weights = vec![0.0; space.cutoff + 1];
        sector_weights[n] = 1.0;
        Ok(Self {
            source: Source::Fock { n },
            beta: beta.clone(),
            modes: space.modes,
            cutoff: space.cutoff,
            sector_weights,
            sector_states,
            kappa: 1.0,
            renormalized: true,
        })
    }

    /// Rebuilds a state from its source description.
    pub fn from_source(
        source: Source,
        beta: &ModeVector,
        space: &TruncatedFockSpace,
    ) -> Result<Self, FockError> {
        match source {
            Source::Coherent { mu } => build_wcs_state(beta, mu, space, true),
            Source::Fock { n } => Self::fock(beta, n, space),
        }
    }

    pub fn mean_photon_number(&self) -> f64 {
        match self.source {
            Source::Coherent { mu } => mu,
            Source::Fock { n } => n as f64,
        }
    }

    pub fn trace(&self) -> f64 {
        self.sector_weights
            .iter()
            .zip(&self.sector_states)
            .map(|(w, s)| w * s.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// `w_n |psi_n><psi_n|` restricted to sector `n`.
    pub fn sector_block(&self, n: usize) -> DMatrix<Complex64> {
        let psi = &self.sector_states[n].amplitudes;
        let w = self.sector_weights[n];
        DMatrix::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj() * w)
    }

    /// Dense density operator on the truncated space.
    pub fn density_matrix(&self, space: &TruncatedFockSpace) -> DMatrix<Complex64> {
        let dim = space.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        for n in 0..=self.cutoff {
            let range = space.sector_range(n);
            let block = self.sector_block(n);
            rho.view_mut((range.start, range.start), (range.len(), range.len()))
                .copy_from(&block);
        }
        rho
    }

    /// Diagonal of the density operator (populations of the Fock basis).
    pub fn populations(&self) -> Vec<f64> {
        self.sector_weights
            .iter()
            .zip(&self.sector_states)
            .flat_map(|(w, s)| s.amplitudes.iter().map(move |a| w * a.norm_sqr()))
            .collect()
    }

    pub(crate) fn check_space(&self, space: &TruncatedFockSpace) -> Result<(), FockError> {
        if space.same_shape(self.modes, self.cutoff) {
            Ok(())
        } else {
            Err(FockError::ModeMismatch {
                expected: space.modes,
                got: self.modes,
            })
        }
    }
}

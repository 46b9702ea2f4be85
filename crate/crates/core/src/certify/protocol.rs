//! Trusted state preparations of a path-encoded protocol.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detector::{apply_visibility, NoiseModel};
use crate::fock::{BlockDiagonalState, FockError, ModeVector, Source, TruncatedFockSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preparation {
    pub label: String,
    pub beta: ModeVector,
    pub source: Source,
}

impl Preparation {
    pub fn state(&self, space: &TruncatedFockSpace) -> Result<BlockDiagonalState, FockError> {
        BlockDiagonalState::from_source(self.source, &self.beta, space)
    }
}

/// Test preparations (one per path) and the generation preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub modes: usize,
    pub cutoff: usize,
    pub tests: Vec<Preparation>,
    pub generation: Preparation,
}

impl Protocol {
    /// Tests `T1..TD` put every photon in one path; the generation state `G`
    /// is the equal superposition over all paths.
    pub fn path_encoded(modes: usize, cutoff: usize, source: Source) -> Self {
        Self::path_encoded_with(modes, cutoff, source, source)
    }

    /// As [`Protocol::path_encoded`], with separate test and generation sources.
    pub fn path_encoded_with(modes: usize, cutoff: usize, test: Source, generation: Source) -> Self {
        let tests = (0..modes)
            .map(|i| Preparation { label: format!("T{}", i + 1), beta: ModeVector::basis(modes, i), source: test })
            .collect();
        Self { modes, cutoff, tests, generation: Preparation { label: "G".into(), beta: ModeVector::uniform(modes), source: generation } }
    }

    /// Renames the tests, e.g. to match the settings of binned data.
    pub fn with_test_labels(mut self, labels: &[String]) -> Self {
        for (t, l) in self.tests.iter_mut().zip(labels) {
            t.label = l.clone();
        }
        self
    }

    pub fn space(&self) -> Result<TruncatedFockSpace, FockError> {
        TruncatedFockSpace::new(self.modes, self.cutoff)
    }

    /// Tests followed by the generation preparation.
    pub fn preparations(&self) -> impl Iterator<Item = &Preparation> {
        self.tests.iter().chain(std::iter::once(&self.generation))
    }

    pub fn labels(&self) -> Vec<String> {
        self.preparations().map(|p| p.label.clone()).collect()
    }

    /// Renormalised states on the truncated space, tests first.
    pub fn states(&self, space: &TruncatedFockSpace) -> Result<Vec<(String, BlockDiagonalState)>, FockError> {
        self.preparations().map(|p| Ok((p.label.clone(), p.state(space)?))).collect()
    }

    /// Smallest in-subspace weight over all preparations.
    pub fn kappa(&self) -> Result<f64, FockError> {
        let space = self.space()?;
        let mut k: f64 = 1.0;
        for p in self.preparations() {
            k = k.min(p.state(&space)?.kappa);
        }
        Ok(k)
    }

    /// Dense density operators, optionally mixed with white noise.
    pub(crate) fn density_matrices(
        &self,
        space: &TruncatedFockSpace,
        noise: Option<NoiseModel>,
    ) -> Result<Vec<(String, DMatrix<Complex64>)>, FockError> {
        self.states(space)?
            .into_iter()
            .map(|(l, s)| {
                let rho = match noise {
                    Some(n) => apply_visibility(&s, space, n),
                    None => s.density_matrix(space),
                };
                Ok((l, rho))
            })
            .collect()
    }
}

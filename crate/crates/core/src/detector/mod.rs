//! Threshold detectors with finite efficiency and dark counts.
//!
//! Detectors act independently on their modes, so every POVM element is
//! diagonal in the Fock basis with weight `prod_i p_i(a_i | n_i)`.

mod sampling;
mod stats;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{BlockDiagonalState, FockError, TruncatedFockSpace};

pub use sampling::{sample_counts, sample_counts_per_setting};
pub use stats::{ConditionalStats, StatsTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DetectorError {
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("{what} = {value} is outside {range}")]
    OutOfRange { what: &'static str, value: f64, range: &'static str },
    #[error("invalid click pattern {0:?}")]
    BadPattern(String),
    #[error("row for setting `{setting}` sums to {sum}")]
    RowNotNormalized { setting: String, sum: f64 },
    #[error("number of rounds must be positive")]
    ZeroRounds,
    #[error("schedule sums to {0}, expected 1")]
    BadSchedule(f64),
    #[error("unknown setting `{0}`")]
    UnknownSetting(String),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Per-detector efficiency and per-window dark-count probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiencies: Vec<f64>,
    pub dark_probs: Vec<f64>,
}

impl DetectorParams {
    pub fn new(efficiencies: Vec<f64>, dark_probs: Vec<f64>) -> Result<Self, DetectorError> {
        if efficiencies.len() != dark_probs.len() {
            return Err(DetectorError::LengthMismatch {
                what: "dark-count list",
                expected: efficiencies.len(),
                got: dark_probs.len(),
            });
        }
        for &eta in &efficiencies {
            if !(0.0..=1.0).contains(&eta) {
                return Err(DetectorError::OutOfRange { what: "efficiency", value: eta, range: "[0, 1]" });
            }
        }
        for &d in &dark_probs {
            if !(0.0..1.0).contains(&d) {
                return Err(DetectorError::OutOfRange { what: "dark-count probability", value: d, range: "[0, 1)" });
            }
        }
        Ok(Self { efficiencies, dark_probs })
    }

    /// Unit efficiency, no dark counts.
    pub fn ideal(detectors: usize) -> Self {
        Self {
            efficiencies: vec![1.0; detectors],
            dark_probs: vec![0.0; detectors],
        }
    }

    /// Converts dark-count rates (counts per second) to per-window probabilities
    /// `1 - exp(-rate * window)`.
    pub fn from_rates(efficiencies: Vec<f64>, dark_rates_cps: &[f64], window_s: f64) -> Result<Self, DetectorError> {
        if !(window_s.is_finite() && window_s >= 0.0) {
            return Err(DetectorError::OutOfRange { what: "detection window", value: window_s, range: "[0, inf)" });
        }
        for &r in dark_rates_cps {
            if !(r.is_finite() && r >= 0.0) {
                return Err(DetectorError::OutOfRange { what: "dark-count rate", value: r, range: "[0, inf)" });
            }
        }
        let dark = dark_rates_cps.iter().map(|r| -(-r * window_s).exp_m1()).collect();
        Self::new(efficiencies, dark)
    }

    pub fn detectors(&self) -> usize {
        self.efficiencies.len()
    }
}

/// Which detectors fired in one round; detector 1 is the leftmost bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ClickPattern(Vec<bool>);

impl ClickPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// All `2^D` patterns in binary counting order.
    pub fn all(detectors: usize) -> Vec<ClickPattern> {
        (0..1usize << detectors).map(|k| Self::from_index(k, detectors)).collect()
    }

    pub fn from_index(index: usize, detectors: usize) -> Self {
        Self((0..detectors).map(|i| (index >> (detectors - 1 - i)) & 1 == 1).collect())
    }

    /// Position of this pattern in [`ClickPattern::all`].
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn detectors(&self) -> usize {
        self.0.len()
    }

    pub fn clicks(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_null(&self) -> bool {
        self.clicks() == 0
    }

    /// Single click on detector `i`.
    pub fn single(detectors: usize, i: usize) -> Self {
        let mut bits = vec![false; detectors];
        bits[i] = true;
        Self(bits)
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ClickPattern {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(DetectorError::BadPattern(s.to_string()));
        }
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(DetectorError::BadPattern(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl From<ClickPattern> for String {
    fn from(p: ClickPattern) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for ClickPattern {
    type Error = DetectorError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Probability that a detector with efficiency `eta` and dark probability
/// `dark` reports `clicked` when `n` photons arrive.
pub fn click_prob(n: u32, eta: f64, dark: f64, clicked: bool) -> f64 {
    let silent = (1.0 - dark) * (1.0 - eta).powi(n as i32);
    if clicked {
        1.0 - silent
    } else {
        silent
    }
}

/// Diagonal POVM over all click patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    modes: usize,
    cutoff: usize,
    patterns: Vec<ClickPattern>,
    /// `elements[k][i]`: weight of pattern `k` on basis state `i`.
    elements: Vec<Vec<f64>>,
}

pub fn build_threshold_povm(space: &TruncatedFockSpace, params: &DetectorParams) -> Result<MeasurementModel, DetectorError> {
    if params.detectors() != space.modes() {
        return Err(DetectorError::LengthMismatch {
            what: "detector list",
            expected: space.modes(),
            got: params.detectors(),
        });
    }
    let patterns = ClickPattern::all(space.modes());
    let elements = patterns
        .iter()
        .map(|pattern| {
            space
                .basis()
                .iter()
                .map(|occ| {
                    occ.counts()
                        .iter()
                        .zip(pattern.bits())
                        .enumerate()
                        .map(|(i, (&n, &clicked))| click_prob(n, params.efficiencies[i], params.dark_probs[i], clicked))
                        .product()
                })
                .collect()
        })
        .collect();
    Ok(MeasurementModel {
        modes: space.modes(),
        cutoff: space.cutoff(),
        patterns,
        elements,
    })
}

impl MeasurementModel {
    pub fn patterns(&self) -> &[ClickPattern] {
        &self.patterns
    }

    /// Diagonal weights of the element for `pattern`.
    pub fn element(&self, pattern: &ClickPattern) -> &[f64] {
        &self.elements[pattern.index()]
    }

    pub fn elements(&self) -> &[Vec<f64>] {
        &self.elements
    }

    /// Largest deviation of `sum_a M_a` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.elements.first().map_or(0, Vec::len);
        (0..dim)
            .map(|i| (self.elements.iter().map(|e| e[i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Born-rule distribution over patterns for a density operator.
    pub fn outcome_distribution(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| e.iter().enumerate().map(|(i, w)| w * rho[(i, i)].re).sum())
            .collect()
    }
}

/// Background noise as a visibility `nu`: `nu rho + (1 - nu) I / dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub visibility: f64,
}

impl NoiseModel {
    pub fn new(visibility: f64) -> Result<Self, DetectorError> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(DetectorError::OutOfRange { what: "visibility", value: visibility, range: "[0, 1]" });
        }
        Ok(Self { visibility })
    }

    pub fn noiseless() -> Self {
        Self { visibility: 1.0 }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

pub fn apply_visibility(state: &BlockDiagonalState, space: &TruncatedFockSpace, noise: NoiseModel) -> DMatrix<Complex64> {
    let dim = space.dim();
    let nu = noise.visibility;
    let mut rho = state.density_matrix(space) * Complex64::new(nu, 0.0);
    let floor = (1.0 - nu) / dim as f64;
    for i in 0..dim {
        rho[(i, i)] += floor;
    }
    rho
}

/// Born-rule statistics `p(a|x) = Tr[rho_x~ M_a]` for each labelled setting.
pub fn simulate_statistics(
    settings: &[(String, BlockDiagonalState)],
    space: &TruncatedFockSpace,
    model: &MeasurementModel,
    noise: NoiseModel,
) -> Result<ConditionalStats, DetectorError> {
    if !space.same_shape(model.modes, model.cutoff) {
        return Err(DetectorError::LengthMismatch {
            what: "measurement space",
            expected: space.dim(),
            got: model.elements.first().map_or(0, Vec::len),
        });
    }
    let mut labels = Vec::with_capacity(settings.len());
    let mut rows = Vec::with_capacity(settings.len());
    for (label, state) in settings {
        state.check_space(space)?;
        let rho = apply_visibility(state, space, noise);
        labels.push(label.clone());
        rows.push(model.outcome_distribution(&rho));
    }
    ConditionalStats::from_probabilities(labels, model.modes, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_wcs_state, enumerate_basis, ModeOccupation, ModeVector};

    #[test]
    fn click_prob_spot_values() {
        assert_eq!(click_prob(1, 1.0, 0.0, true), 1.0);
        assert_eq!(click_prob(0, 0.37, 0.0, true), 0.0);
        assert!((click_prob(2, 0.9, 0.0, true) - 0.99).abs() < 1e-15);
        assert!((click_prob(2, 0.9, 0.0, false) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn pattern_order_is_binary_counting() {
        let all: Vec<String> = ClickPattern::all(3).iter().map(ToString::to_string).collect();
        assert_eq!(all, ["000", "001", "010", "011", "100", "101", "110", "111"]);
        for (k, p) in ClickPattern::all(3).iter().enumerate() {
            assert_eq!(p.index(), k);
        }
        assert_eq!("101".parse::<ClickPattern>().unwrap(), ClickPattern::new(vec![true, false, true]));
        assert!("1x1".parse::<ClickPattern>().is_err());
    }

    #[test]
    fn ideal_povm_is_deterministic() {
        let space = enumerate_basis(3, 3).unwrap();
        let model = build_threshold_povm(&space, &DetectorParams::ideal(3)).unwrap();
        let single = space.index_of(&ModeOccupation::new(vec![1, 0, 0])).unwrap();
        let vacuum = space.index_of(&ModeOccupation::new(vec![0, 0, 0])).unwrap();
        for p in model.patterns() {
            let w = model.element(p);
            let want_single = if p.to_string() == "100" { 1.0 } else { 0.0 };
            let want_vac = if p.is_null() { 1.0 } else { 0.0 };
            assert_eq!(w[single], want_single);
            assert_eq!(w[vacuum], want_vac);
        }
    }

    #[test]
    fn double_click_weight_is_product_of_efficiencies() {
        let space = enumerate_basis(3, 3).unwrap();
        let params = DetectorParams::new(vec![0.862, 0.900, 0.751], vec![0.0; 3]).unwrap();
        let model = build_threshold_povm(&space, &params).unwrap();
        let idx = space.index_of(&ModeOccupation::new(vec![1, 1, 0])).unwrap();
        let p: ClickPattern = "110".parse().unwrap();
        assert!((model.element(&p)[idx] - 0.7758).abs() < 1e-12);
        assert!(model.completeness_error() < 1e-12);
    }

    #[test]
    fn detector_count_must_match_modes() {
        let space = enumerate_basis(3, 2).unwrap();
        let err = build_threshold_povm(&space, &DetectorParams::ideal(2)).unwrap_err();
        assert!(matches!(err, DetectorError::LengthMismatch { .. }));
    }

    #[test]
    fn params_validate_ranges() {
        assert!(DetectorParams::new(vec![1.1], vec![0.0]).is_err());
        assert!(DetectorParams::new(vec![0.5], vec![1.0]).is_err());
        assert!(DetectorParams::new(vec![0.5, 0.5], vec![0.0]).is_err());
        let p = DetectorParams::from_rates(vec![0.9; 3], &[19.0, 9.0, 1.3], 10e-9).unwrap();
        assert!((p.dark_probs[0] - 1.9e-7).abs() < 1e-12);
    }

    #[test]
    fn visibility_limits() {
        let space = enumerate_basis(3, 3).unwrap();
        let state = build_wcs_state(&ModeVector::uniform(3), 1.0, &space, true).unwrap();
        let rho = state.density_matrix(&space);
        let same = apply_visibility(&state, &space, NoiseModel::noiseless());
        assert!((&same - &rho).norm() < 1e-15);
        let mixed = apply_visibility(&state, &space, NoiseModel::new(0.0).unwrap());
        let id = DMatrix::<Complex64>::identity(20, 20) / Complex64::new(20.0, 0.0);
        assert!((&mixed - &id).norm() < 1e-15);
        let noisy = apply_visibility(&state, &space, NoiseModel::new(0.99).unwrap());
        let tr: f64 = noisy.diagonal().iter().map(|z| z.re).sum();
        assert!((tr - 1.0).abs() < 1e-12);
        assert!(NoiseModel::new(1.5).is_err());
    }

    #[test]
    fn ideal_single_photon_statistics() {
        let space = enumerate_basis(3, 3).unwrap();
        let model = build_threshold_povm(&space, &DetectorParams::ideal(3)).unwrap();
        let test = BlockDiagonalState::fock(&ModeVector::basis(3, 0), 1, &space).unwrap();
        let gen = BlockDiagonalState::fock(&ModeVector::uniform(3), 1, &space).unwrap();
        let stats = simulate_statistics(
            &[("T1".into(), test), ("G".into(), gen)],
            &space,
            &model,
            NoiseModel::noiseless(),
        )
        .unwrap();
        let rows = stats.probabilities();
        assert!((rows[0][ClickPattern::single(3, 0).index()] - 1.0).abs() < 1e-15);
        for i in 0..3 {
            assert!((rows[1][ClickPattern::single(3, i).index()] - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}

//! Coarse-graining three-detector statistics into a two-detector protocol.

use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::detector::{ClickPattern, ConditionalStats};

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    /// The two detectors whose clicks are kept, in output bit order.
    pub kept: [usize; 2],
    /// Probability that a non-null test outcome survives the loss map.
    pub retention: f64,
    /// Label of the generation setting, which bypasses the loss map.
    pub generation: String,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self { kept: [0, 1], retention: 2.0 / 3.0, generation: "G".into() }
    }
}

impl BinningConfig {
    pub fn validate(&self, detectors: usize) -> Result<(), CertifyError> {
        if self.kept[0] == self.kept[1] || self.kept.iter().any(|&k| k >= detectors) {
            return Err(CertifyError::InvalidParameter(format!(
                "kept detectors {:?} must be two distinct indices below {detectors}",
                self.kept
            )));
        }
        if !(0.0..=1.0).contains(&self.retention) {
            return Err(CertifyError::InvalidParameter(format!("retention {} outside [0, 1]", self.retention)));
        }
        Ok(())
    }
}

/// Output pattern index after keeping the configured detectors only.
fn marginal_index(pattern: &ClickPattern, kept: [usize; 2]) -> usize {
    let bits = pattern.bits();
    ClickPattern::new(vec![bits[kept[0]], bits[kept[1]]]).index()
}

/// Marginalises the dropped detector and applies the loss map to test rows.
///
/// Settings other than `config.generation` are read as test settings aligned
/// with the detectors (the i-th test routes its photons to detector i); only
/// the tests of kept detectors survive, followed by the generation setting.
/// Empirical inputs yield frequency tables that keep their round counts.
pub fn bin_to_qubit(stats: &ConditionalStats, config: &BinningConfig) -> Result<ConditionalStats, CertifyError> {
    let detectors = stats.detectors();
    config.validate(detectors)?;
    let gen_idx = stats
        .setting_index(&config.generation)
        .ok_or_else(|| CertifyError::UnknownSetting(config.generation.clone()))?;
    let tests: Vec<usize> = (0..stats.settings().len()).filter(|&x| x != gen_idx).collect();
    if tests.len() != detectors {
        return Err(CertifyError::InvalidParameter(format!(
            "binning needs one test setting per detector, got {} tests for {detectors} detectors",
            tests.len()
        )));
    }
    let probs = stats.probabilities();
    let rounds = stats.rounds_per_setting();
    for (x, row) in probs.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        let empty = rounds.as_ref().is_some_and(|r| r[x] == 0);
        if !empty && (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(CertifyError::RowNotNormalized { setting: stats.settings()[x].clone(), sum });
        }
    }

    let patterns = stats.patterns();
    let marginal = |row: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; 4];
        for (p, v) in patterns.iter().zip(row) {
            out[marginal_index(p, config.kept)] += v;
        }
        out
    };
    let lossy = |row: Vec<f64>| -> Vec<f64> {
        let r = config.retention;
        let moved: f64 = row[1..].iter().map(|v| (1.0 - r) * v).sum();
        let mut out: Vec<f64> = row.iter().map(|v| r * v).collect();
        out[0] = row[0] + moved;
        out
    };

    let order = [tests[config.kept[0]], tests[config.kept[1]], gen_idx];
    let labels: Vec<String> = order.iter().map(|&x| stats.settings()[x].clone()).collect();
    let rows: Vec<Vec<f64>> = order
        .iter()
        .map(|&x| {
            let m = marginal(&probs[x]);
            if x == gen_idx { m } else { lossy(m) }
        })
        .collect();
    let result = match rounds {
        Some(r) => ConditionalStats::from_frequencies(labels, 2, rows, order.iter().map(|&x| r[x]).collect()),
        None => ConditionalStats::from_probabilities(labels, 2, rows),
    };
    result.map_err(CertifyError::from)
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::certify::{Analysis, BinningConfig, CertifyOptions, EpsilonBudget, Protocol};
use crate::detector::{DetectorParams, NoiseModel};
use crate::fock::Source;
use crate::sdp::SolverConfig;

/// Which statistics the certification is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    /// Exact model probabilities, equality constraints.
    Asymptotic,
    /// Observed (or sampled) counts, Chernoff-Hoeffding intervals.
    FiniteRound,
}

/// Everything a run needs. Every field has a default, so `{}` is a valid
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub modes: usize,
    pub cutoff: usize,
    /// Mean photon number for `simulate`, `certify` and `bin`.
    pub mu: f64,
    /// Grid for `sweep`, strictly increasing.
    pub mu_grid: Vec<f64>,
    pub efficiencies: Vec<f64>,
    pub dark_rates_cps: Vec<f64>,
    pub window_s: f64,
    pub visibility: f64,
    /// Probability of choosing the generation setting in a round; the rest
    /// is shared equally by the tests.
    pub generation_fraction: f64,
    pub epsilon: f64,
    pub analysis: AnalysisMode,
    /// Sampled rounds; 0 means model statistics only.
    pub rounds: u64,
    pub seed: u64,
    pub repetition_rate_hz: f64,
    pub constrain_generation: bool,
    pub binning: BinningConfig,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            modes: 3,
            cutoff: 3,
            mu: 1.22,
            mu_grid: vec![0.5, 0.91, 1.22, 1.6],
            efficiencies: vec![0.862, 0.900, 0.751],
            dark_rates_cps: vec![19.0, 9.0, 1.3],
            window_s: 10e-9,
            visibility: 1.0,
            generation_fraction: 0.97,
            epsilon: 1e-6,
            analysis: AnalysisMode::FiniteRound,
            rounds: 1_000_000,
            seed: 0,
            repetition_rate_hz: 2.2e6,
            constrain_generation: true,
            binning: BinningConfig::default(),
            solver: SolverConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: String) -> PipelineError {
    PipelineError::Config(msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(2..=3).contains(&self.modes) {
            return Err(invalid(format!("modes must be 2 or 3, got {}", self.modes)));
        }
        if self.cutoff == 0 {
            return Err(invalid("cutoff must be at least 1".into()));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(invalid(format!("mu must be non-negative, got {}", self.mu)));
        }
        if self.mu_grid.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(invalid("mu_grid entries must be non-negative".into()));
        }
        if self.mu_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("mu_grid must be strictly increasing".into()));
        }
        if self.efficiencies.len() != self.modes || self.dark_rates_cps.len() != self.modes {
            return Err(invalid(format!(
                "need one efficiency and one dark rate per mode ({}), got {} and {}",
                self.modes,
                self.efficiencies.len(),
                self.dark_rates_cps.len()
            )));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(invalid(format!("window_s must be positive, got {}", self.window_s)));
        }
        if !(self.generation_fraction > 0.0 && self.generation_fraction < 1.0) {
            return Err(invalid(format!("generation_fraction must lie in (0, 1), got {}", self.generation_fraction)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.repetition_rate_hz >= 0.0 && self.repetition_rate_hz.is_finite()) {
            return Err(invalid(format!("repetition_rate_hz must be non-negative, got {}", self.repetition_rate_hz)));
        }
        self.detector_params()?;
        NoiseModel::new(self.visibility).map_err(|e| invalid(e.to_string()))?;
        self.binning.validate(3).map_err(|e| invalid(e.to_string()))?;
        self.solver.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn detector_params(&self) -> Result<DetectorParams, PipelineError> {
        DetectorParams::from_rates(self.efficiencies.clone(), &self.dark_rates_cps, self.window_s).map_err(|e| invalid(e.to_string()))
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel { visibility: self.visibility }
    }

    /// Setting probabilities, tests first, generation last.
    pub fn schedule(&self) -> Vec<f64> {
        let test = (1.0 - self.generation_fraction) / self.modes as f64;
        let mut s = vec![test; self.modes];
        s.push(self.generation_fraction);
        s
    }

    pub fn protocol(&self, mu: f64) -> Protocol {
        Protocol::path_encoded(self.modes, self.cutoff, Source::Coherent { mu })
    }

    /// Two-path protocol matching binned data; its settings are the kept
    /// tests followed by the generation setting.
    pub fn binned_protocol(&self, mu: f64) -> Protocol {
        let labels: Vec<String> = self.binning.kept.iter().map(|k| format!("T{}", k + 1)).collect();
        Protocol::path_encoded(2, self.cutoff, Source::Coherent { mu }).with_test_labels(&labels)
    }

    pub fn certify_options(&self, analysis: AnalysisMode) -> Result<CertifyOptions, PipelineError> {
        let analysis = match analysis {
            AnalysisMode::Asymptotic => Analysis::Asymptotic,
            AnalysisMode::FiniteRound => {
                Analysis::FiniteRound { budget: EpsilonBudget::uniform(self.epsilon).map_err(|e| invalid(e.to_string()))? }
            }
        };
        Ok(CertifyOptions { analysis, solver: self.solver.clone(), block_reduce: true, constrain_generation: self.constrain_generation })
    }
}

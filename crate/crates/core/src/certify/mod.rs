//! From observed click statistics to certified min-entropy.

mod binning;
mod finite;
mod protocol;

use serde::{Deserialize, Serialize};

pub use binning::{bin_to_qubit, BinningConfig};
pub use finite::{chernoff_radius, intervals_from_counts, Allocation, EpsilonBudget, IntervalTable};
pub use protocol::{Preparation, Protocol};

use crate::detector::{ConditionalStats, DetectorError};
use crate::fock::FockError;
use crate::sdp::{self, block_reduce, build_guessing_sdp, GuessingSdp, SdpError, SdpProblem, SolveStatus, SolverConfig, StatisticsConstraints};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CertifyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("statistics table must hold counts or frequencies for finite-round analysis")]
    NotEmpirical,
    #[error("setting `{0}` has no recorded rounds")]
    NoRounds(String),
    #[error("setting `{0}` not present in the statistics")]
    UnknownSetting(String),
    #[error("row for `{setting}` sums to {sum}")]
    RowNotNormalized { setting: String, sum: f64 },
    #[error("statistics are inconsistent with the trusted preparations: {0}")]
    InconsistentStatistics(String),
    #[error("solver failed: {0}")]
    NumericalFailure(String),
    #[error("min-entropy needs a guessing probability in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// `kappa p' + (1 - kappa)`: mass outside the truncated space is conceded.
pub fn truncation_correct(p_truncated: f64, kappa: f64) -> f64 {
    kappa * p_truncated + (1.0 - kappa)
}

/// `-log2 p_guess` in bits.
pub fn min_entropy(p_guess: f64) -> Result<f64, CertifyError> {
    if !(p_guess > 0.0 && p_guess <= 1.0) {
        return Err(CertifyError::InvalidProbability(p_guess));
    }
    Ok((-p_guess.log2()).max(0.0))
}

/// `h * symbol_rate * generation_fraction` in bits per second.
pub fn certified_bitrate(h: f64, symbol_rate: f64, generation_fraction: f64) -> f64 {
    h * symbol_rate * generation_fraction
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Analysis {
    /// Statistics enter as equalities.
    Asymptotic,
    /// Statistics enter as Chernoff-Hoeffding intervals.
    FiniteRound { budget: EpsilonBudget },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    pub analysis: Analysis,
    pub solver: SolverConfig,
    /// Solve over photon-number block-diagonal operators.
    pub block_reduce: bool,
    /// Also constrain the adversary by the generation-round statistics.
    pub constrain_generation: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { analysis: Analysis::Asymptotic, solver: SolverConfig::default(), block_reduce: true, constrain_generation: true }
    }
}

/// Solver outcome as recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub duality_gap: f64,
    pub certified_bound: Option<f64>,
    pub max_residual: f64,
    pub iterations: usize,
    pub message: String,
}

/// Everything needed to rebuild and re-solve the program behind a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationResult {
    pub protocol: Protocol,
    pub options: CertifyOptions,
    pub statistics: ConditionalStats,
    pub intervals_used: Option<IntervalTable>,
    pub solver: SolverSummary,
    pub p_guess_truncated: f64,
    pub kappa: f64,
    pub p_guess: f64,
    pub min_entropy_bits: f64,
    pub bitrate_bits_per_second: Option<f64>,
}

impl CertificationResult {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn with_bitrate(mut self, symbol_rate: f64, generation_fraction: f64) -> Self {
        self.bitrate_bits_per_second = Some(certified_bitrate(self.min_entropy_bits, symbol_rate, generation_fraction));
        self
    }
}

/// The program `certify` would solve, before any block reduction.
pub fn guessing_problem(
    protocol: &Protocol,
    stats: &ConditionalStats,
    options: &CertifyOptions,
) -> Result<(GuessingSdp, Option<IntervalTable>), CertifyError> {
    if stats.detectors() != protocol.modes {
        return Err(CertifyError::InvalidParameter(format!(
            "statistics have {} detectors, protocol has {} modes",
            stats.detectors(),
            protocol.modes
        )));
    }
    let space = protocol.space()?;
    let mut rhos = protocol.density_matrices(&space, None)?;
    let (_, generation) = rhos.pop().expect("protocol has a generation state");
    let mut constrained: Vec<String> = protocol.tests.iter().map(|t| t.label.clone()).collect();
    if options.constrain_generation {
        rhos.push((protocol.generation.label.clone(), generation.clone()));
        constrained.push(protocol.generation.label.clone());
    }
    for l in &constrained {
        if stats.setting_index(l).is_none() {
            return Err(CertifyError::UnknownSetting(l.clone()));
        }
    }
    let used = stats.select(&constrained)?;
    let (constraints, intervals) = match options.analysis {
        Analysis::Asymptotic => {
            let rows = used.probabilities();
            if let Some(rounds) = used.rounds_per_setting() {
                if let Some(x) = rounds.iter().position(|&n| n == 0) {
                    return Err(CertifyError::NoRounds(constrained[x].clone()));
                }
            }
            (StatisticsConstraints::Exact(rows), None)
        }
        Analysis::FiniteRound { budget } => {
            let table = intervals_from_counts(&used, &budget)?;
            (StatisticsConstraints::Intervals { lower: table.lower.clone(), upper: table.upper.clone() }, Some(table))
        }
    };
    let sdp = build_guessing_sdp(&generation, &rhos, &constraints, protocol.modes)?;
    Ok((sdp, intervals))
}

/// The solver-ready problem: [`guessing_problem`] with optional block reduction.
pub fn solver_problem(protocol: &Protocol, stats: &ConditionalStats, options: &CertifyOptions) -> Result<(SdpProblem, Option<IntervalTable>), CertifyError> {
    let (sdp, intervals) = guessing_problem(protocol, stats, options)?;
    let problem = if options.block_reduce {
        let space = protocol.space()?;
        let sectors: Vec<_> = (0..=protocol.cutoff).map(|n| space.sector_range(n)).collect();
        block_reduce(&sdp.problem, &sectors)?
    } else {
        sdp.problem
    };
    Ok((problem, intervals))
}

/// Bounds the adversary's guessing probability and converts it to bits.
///
/// The upper bound used is the solver's certified bound, which accounts for
/// any residual dual infeasibility; it is clipped to `[0, 1]`.
pub fn certify(protocol: &Protocol, stats: &ConditionalStats, options: &CertifyOptions) -> Result<CertificationResult, CertifyError> {
    let (problem, intervals) = solver_problem(protocol, stats, options)?;
    let solution = sdp::solve(&problem, &options.solver)?;
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(CertifyError::InconsistentStatistics(solution.message)),
        SolveStatus::NumericalFailure => return Err(CertifyError::NumericalFailure(solution.message)),
    }
    let p_guess_truncated = solution.upper_bound().clamp(0.0, 1.0);
    let kappa = protocol.kappa()?;
    let p_guess = truncation_correct(p_guess_truncated, kappa).clamp(f64::MIN_POSITIVE, 1.0);
    let min_entropy_bits = min_entropy(p_guess)?;
    Ok(CertificationResult {
        protocol: protocol.clone(),
        options: options.clone(),
        statistics: stats.clone(),
        intervals_used: intervals,
        solver: SolverSummary {
            status: solution.status,
            primal_value: solution.primal_value,
            dual_value: solution.dual_value,
            duality_gap: solution.duality_gap,
            certified_bound: solution.certified_bound,
            max_residual: solution.max_residual(),
            iterations: solution.iterations,
            message: solution.message,
        },
        p_guess_truncated,
        kappa,
        p_guess,
        min_entropy_bits,
        bitrate_bits_per_second: None,
    })
}

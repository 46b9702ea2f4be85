//! Semidefinite programs over complex Hermitian blocks.
//!
//! [`SdpProblem`] is a self-contained description (maximisation, PSD
//! block variables, non-negative scalars, linear equalities and
//! inequalities). [`solve`] dispatches to a [`SdpBackend`]; the bundled
//! backend is a primal-dual interior-point method.

mod guessing;
mod ipm;
mod presolve;
mod problem;
mod reduce;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use guessing::{build_guessing_sdp, guessing_trace_bound, GuessingSdp, StatisticsConstraints};
pub use problem::{Entry, HermitianBlock, HermitianCoeff, LinearConstraint, PsdVariable, ScalarVariable, SdpProblem, Sense, Term};
pub use reduce::block_reduce;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpError {
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("constraint `{0}` couples different diagonal blocks and cannot be block-reduced")]
    CrossBlockConstraint(String),
    #[error("objective has off-block-diagonal entries and cannot be block-reduced")]
    CrossBlockObjective,
    #[error("invalid interval for `{label}`: lower {lower} > upper {upper}")]
    InvalidInterval { label: String, lower: f64, upper: f64 },
    #[error("setting `{0}` not found")]
    UnknownSetting(String),
    #[error("probability row for `{setting}` sums to {sum}")]
    RowNotNormalized { setting: String, sum: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    InteriorPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Tolerance on `|primal - dual| / (1 + |primal| + |dual|)`.
    pub gap_tolerance: f64,
    /// Tolerance on the largest primal and dual residual entries.
    pub feasibility_tolerance: f64,
    pub max_iterations: usize,
    pub backend: BackendKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { gap_tolerance: 1e-8, feasibility_tolerance: 1e-8, max_iterations: 100, backend: BackendKind::InteriorPoint }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SdpError> {
        if [self.gap_tolerance, self.feasibility_tolerance].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(SdpError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SdpError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a solve, always reported in the problem's maximisation sense.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Objective at the primal iterate.
    pub primal_value: f64,
    /// Dual objective, an upper bound on the optimum when the dual iterate
    /// is feasible.
    pub dual_value: f64,
    pub duality_gap: f64,
    /// Dual value corrected for residual dual infeasibility; a valid upper
    /// bound on the optimum whenever the problem declares `trace_bound`.
    pub certified_bound: Option<f64>,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub message: String,
    /// Per variable, per block.
    pub psd_values: Vec<Vec<DMatrix<Complex64>>>,
    pub scalar_values: Vec<f64>,
    /// Per constraint violation at the primal iterate.
    pub residuals: Vec<f64>,
    pub dual_multipliers: Vec<f64>,
}

impl SdpSolution {
    pub(crate) fn failed(problem: &SdpProblem, status: SolveStatus, iterations: usize, message: String) -> Self {
        Self {
            status,
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            duality_gap: f64::NAN,
            certified_bound: None,
            primal_infeasibility: f64::NAN,
            dual_infeasibility: f64::NAN,
            iterations,
            message,
            psd_values: problem.psd_vars.iter().map(|v| v.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect()).collect(),
            scalar_values: vec![0.0; problem.scalar_vars.len()],
            residuals: vec![f64::NAN; problem.constraints.len()],
            dual_multipliers: Vec::new(),
        }
    }

    /// The tightest valid upper bound available: the certified bound when
    /// present, otherwise the dual value.
    pub fn upper_bound(&self) -> f64 {
        self.certified_bound.unwrap_or(self.dual_value)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// A numerical method able to solve an [`SdpProblem`].
pub trait SdpBackend {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError>;
}

/// Infeasible-start primal-dual path following with Mehrotra correction.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn name(&self) -> &'static str {
        "interior-point"
    }

    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError> {
        problem.validate()?;
        let Some(reduced) = presolve::facial_reduce(problem) else {
            return ipm::solve_ipm(problem, config);
        };
        let mut sol = ipm::solve_ipm(&reduced.problem, config)?;
        sol.psd_values = reduced.lift(problem, &sol.psd_values);
        if sol.status != SolveStatus::Infeasible || sol.primal_value.is_finite() {
            sol.residuals = problem.violations(&sol.psd_values, &sol.scalar_values);
            sol.primal_value = SdpProblem::evaluate(&problem.objective, &sol.psd_values, &sol.scalar_values);
            sol.duality_gap = (sol.dual_value - sol.primal_value).abs();
        } else {
            sol.residuals = vec![f64::NAN; problem.constraints.len()];
        }
        Ok(sol)
    }
}

/// Solves with the backend selected in `config`.
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError> {
    match config.backend {
        BackendKind::InteriorPoint => InteriorPoint.solve(problem, config),
    }
}

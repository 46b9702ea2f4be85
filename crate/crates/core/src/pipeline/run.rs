use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisMode, PipelineError, RunConfig, Series};
use crate::certify::{bin_to_qubit, certify, solver_problem, CertificationResult, Protocol};
use crate::detector::{build_threshold_povm, sample_counts, simulate_statistics, ConditionalStats};

pub fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}

/// Exact click-pattern probabilities of the configured device at `mu`.
pub fn model_statistics(config: &RunConfig, mu: f64) -> Result<ConditionalStats, PipelineError> {
    let protocol = config.protocol(mu);
    let space = protocol.space()?;
    let model = build_threshold_povm(&space, &config.detector_params()?)?;
    let states = protocol.states(&space)?;
    Ok(simulate_statistics(&states, &space, &model, config.noise())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub statistics: ConditionalStats,
    /// Sampled counts, absent when `rounds` is 0.
    pub counts: Option<ConditionalStats>,
}

pub fn run_simulate(config: &RunConfig) -> Result<Simulation, PipelineError> {
    config.validate()?;
    let statistics = model_statistics(config, config.mu)?;
    let counts = if config.rounds == 0 {
        None
    } else {
        Some(sample_counts(&statistics, &config.schedule(), config.rounds, config.seed)?)
    };
    Ok(Simulation { statistics, counts })
}

/// Fraction of generation rounds in which at least one detector clicked.
pub fn detection_fraction(stats: &ConditionalStats, generation: &str) -> Option<f64> {
    let x = stats.setting_index(generation)?;
    let row = &stats.probabilities()[x];
    Some((1.0 - row[0]).clamp(0.0, 1.0))
}

fn analysis_for(config: &RunConfig, stats: &ConditionalStats) -> AnalysisMode {
    if stats.is_empirical() {
        config.analysis
    } else {
        AnalysisMode::Asymptotic
    }
}

fn certify_with(config: &RunConfig, protocol: &Protocol, stats: &ConditionalStats) -> Result<CertificationResult, PipelineError> {
    let options = config.certify_options(analysis_for(config, stats))?;
    let result = certify(protocol, stats, &options)?;
    let f_det = detection_fraction(stats, &protocol.generation.label).unwrap_or(0.0);
    Ok(result.with_bitrate(config.repetition_rate_hz * f_det, config.generation_fraction))
}

/// Certifies statistics recorded with the configured device at `config.mu`.
///
/// Count tables use the configured analysis; model probabilities are always
/// certified asymptotically.
pub fn run_certify(config: &RunConfig, stats: &ConditionalStats) -> Result<CertificationResult, PipelineError> {
    config.validate()?;
    if stats.detectors() != config.modes {
        return Err(PipelineError::Config(format!("counts have {} detectors, config has {} modes", stats.detectors(), config.modes)));
    }
    certify_with(config, &config.protocol(config.mu), stats)
}

/// JSON of the solver-ready problem certifying `stats` against `protocol`.
pub fn sdp_json(config: &RunConfig, protocol: &Protocol, stats: &ConditionalStats) -> Result<String, PipelineError> {
    let (problem, _) = solver_problem(protocol, stats, &config.certify_options(analysis_for(config, stats))?)?;
    problem.to_json().map_err(|e| PipelineError::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinOutcome {
    pub binned: ConditionalStats,
    pub result: CertificationResult,
}

/// Coarse-grains three-detector statistics and certifies the two-path protocol.
pub fn run_bin(config: &RunConfig, stats: &ConditionalStats) -> Result<BinOutcome, PipelineError> {
    config.validate()?;
    if stats.detectors() != 3 {
        return Err(PipelineError::Config(format!("binning needs three-detector statistics, got {}", stats.detectors())));
    }
    let binned = bin_to_qubit(stats, &config.binning)?;
    let result = certify_with(config, &config.binned_protocol(config.mu), &binned)?;
    Ok(BinOutcome { binned, result })
}

/// Outcome of one certification inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub min_entropy_bits: Option<f64>,
    pub p_guess: Option<f64>,
    pub duality_gap: Option<f64>,
    /// `ok`, or the error that stopped this point.
    pub status: String,
}

impl PointResult {
    fn from_result(r: Result<CertificationResult, PipelineError>) -> Self {
        match r {
            Ok(c) => Self { min_entropy_bits: Some(c.min_entropy_bits), p_guess: Some(c.p_guess), duality_gap: Some(c.solver.duality_gap), status: "ok".into() },
            Err(e) => Self { min_entropy_bits: None, p_guess: None, duality_gap: None, status: e.to_string() },
        }
    }

    fn skipped() -> Self {
        Self { min_entropy_bits: None, p_guess: None, duality_gap: None, status: "not applicable".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    /// Three-path protocol; not applicable for two-mode configs.
    pub qutrit: PointResult,
    /// Binned data for three-mode configs, the native protocol otherwise.
    pub qubit: PointResult,
}

fn sweep_point(config: &RunConfig, index: usize, mu: f64) -> SweepRow {
    let stats = model_statistics(config, mu).and_then(|s| {
        if config.analysis == AnalysisMode::FiniteRound && config.rounds > 0 {
            let seed = config.seed.wrapping_add(index as u64);
            sample_counts(&s, &config.schedule(), config.rounds, seed).map_err(PipelineError::from)
        } else {
            Ok(s)
        }
    });
    let stats = match stats {
        Ok(s) => s,
        Err(e) => {
            let failed = PointResult::from_result(Err(e));
            return SweepRow { mu, qutrit: failed.clone(), qubit: failed };
        }
    };
    if config.modes == 3 {
        let qutrit = PointResult::from_result(certify_with(config, &config.protocol(mu), &stats));
        let qubit = PointResult::from_result(
            bin_to_qubit(&stats, &config.binning).map_err(PipelineError::from).and_then(|b| certify_with(config, &config.binned_protocol(mu), &b)),
        );
        SweepRow { mu, qutrit, qubit }
    } else {
        SweepRow { mu, qutrit: PointResult::skipped(), qubit: PointResult::from_result(certify_with(config, &config.protocol(mu), &stats)) }
    }
}

/// One certification per grid point, run on up to `workers` threads.
/// Per-point failures are recorded in the row and do not stop the sweep.
pub fn run_sweep(config: &RunConfig, workers: usize) -> Result<Vec<SweepRow>, PipelineError> {
    config.validate()?;
    if config.mu_grid.is_empty() {
        return Err(PipelineError::Config("mu_grid is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| config.mu_grid.par_iter().enumerate().map(|(i, &mu)| sweep_point(config, i, mu)).collect()))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.9}"))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let header = ["mu", "h_qutrit", "p_guess_qutrit", "gap_qutrit", "status_qutrit", "h_qubit", "p_guess_qubit", "gap_qubit", "status_qubit"];
    w.write_record(header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![format!("{:.6}", r.mu)];
        for p in [&r.qutrit, &r.qubit] {
            rec.extend([cell(p.min_entropy_bits), cell(p.p_guess), p.duality_gap.map_or_else(String::new, |g| format!("{g:.3e}")), p.status.clone()]);
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn sweep_svg(rows: &[SweepRow]) -> String {
    let series = |name, color, pick: fn(&SweepRow) -> &PointResult| Series {
        name,
        color,
        points: rows.iter().map(|r| (r.mu, pick(r).min_entropy_bits.unwrap_or(f64::NAN))).collect(),
    };
    let mut all = Vec::new();
    if rows.iter().any(|r| r.qutrit.min_entropy_bits.is_some()) {
        all.push(series("qutrit", "#1f77b4", |r| &r.qutrit));
    }
    all.push(series("qubit", "#d62728", |r| &r.qubit));
    super::line_chart(&all)
}

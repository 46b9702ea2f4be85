//! Batch workflows behind the command-line tool: configuration, count files,
//! simulation, certification, μ sweeps and binning.

mod config;
mod counts;
mod plot;
mod run;

use std::path::{Path, PathBuf};

pub use config::{AnalysisMode, RunConfig};
pub use counts::{format_counts, ingest_counts, read_counts};
pub use plot::{line_chart, Series};
pub use run::{
    detection_fraction, model_statistics, run_bin, run_certify, run_simulate, run_sweep, sdp_json, sweep_csv, sweep_svg, write_file, BinOutcome,
    PointResult, Simulation, SweepRow,
};

use crate::certify::CertifyError;
use crate::detector::DetectorError;
use crate::fock::FockError;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "MDIQRNG_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    /// `line` is 1-based; 0 marks a problem with the file as a whole.
    #[error("parse error{}: {msg}", at_line(*line))]
    Parse { line: u64, msg: String },
    #[error("i/o error on {}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

fn at_line(line: u64) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

impl From<DetectorError> for PipelineError {
    fn from(e: DetectorError) -> Self {
        Self::Certify(e.into())
    }
}

impl From<FockError> for PipelineError {
    fn from(e: FockError) -> Self {
        Self::Certify(e.into())
    }
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 2 for bad input, 3 when the solver reports
    /// infeasibility or fails numerically, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } => 2,
            Self::Io { .. } => 4,
            Self::Certify(CertifyError::InconsistentStatistics(_) | CertifyError::NumericalFailure(_)) => 3,
            Self::Certify(_) => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 2);
        assert_eq!(PipelineError::Parse { line: 3, msg: "x".into() }.exit_code(), 2);
        assert_eq!(PipelineError::io(Path::new("a"), std::io::Error::other("x")).exit_code(), 4);
        assert_eq!(PipelineError::from(CertifyError::InconsistentStatistics("x".into())).exit_code(), 3);
        assert_eq!(PipelineError::from(CertifyError::NumericalFailure("x".into())).exit_code(), 3);
        assert_eq!(PipelineError::from(CertifyError::UnknownSetting("x".into())).exit_code(), 2);
    }
}

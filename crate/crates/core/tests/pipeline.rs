use std::path::Path;
use std::process::Command;

use mdiqrng::certify::{certify, CertificationResult, CertifyError};
use mdiqrng::detector::{sample_counts_per_setting, ConditionalStats};
use mdiqrng::pipeline::{
    format_counts, ingest_counts, model_statistics, run_certify, run_simulate, run_sweep, sweep_csv, write_file, AnalysisMode, PipelineError, RunConfig,
};

fn small_config(dir: &Path) -> RunConfig {
    RunConfig { rounds: 200_000, seed: 11, out_dir: dir.to_path_buf(), ..RunConfig::default() }
}

#[test]
fn simulate_ingest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let counts = run_simulate(&config).unwrap().counts.unwrap();
    let path = dir.path().join("counts.csv");
    write_file(&path, &format_counts(&counts).unwrap()).unwrap();
    assert_eq!(ingest_counts(&path).unwrap(), counts);
}

#[test]
fn zero_rounds_gives_statistics_only() {
    let config = RunConfig { rounds: 0, ..RunConfig::default() };
    let sim = run_simulate(&config).unwrap();
    assert!(sim.counts.is_none());
    assert!(!sim.statistics.is_empirical());
}

#[test]
fn sweep_csv_is_deterministic() {
    let config = RunConfig { mu_grid: vec![0.6, 1.2], cutoff: 2, rounds: 100_000, seed: 4, ..RunConfig::default() };
    let a = sweep_csv(&run_sweep(&config, 2).unwrap());
    let b = sweep_csv(&run_sweep(&config, 1).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 3);
}

#[test]
fn single_point_sweep() {
    let config = RunConfig { mu_grid: vec![0.91], cutoff: 2, analysis: AnalysisMode::Asymptotic, ..RunConfig::default() };
    let rows = run_sweep(&config, 1).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].qutrit.status, "ok");
    assert_eq!(rows[0].qubit.status, "ok");
}

#[test]
fn vacuum_certifies_nothing() {
    let config = RunConfig { mu: 0.0, ..RunConfig::default() };
    let stats = model_statistics(&config, 0.0).unwrap();
    let r = run_certify(&config, &stats).unwrap();
    assert!(r.min_entropy_bits.abs() < 1e-6, "{}", r.min_entropy_bits);
}

/// Replaces the first test row by the second, as if the first path's
/// photons were routed to the second detector.
fn misroute(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut rows = rows.to_vec();
    rows[0] = rows[1].clone();
    rows
}

#[test]
fn misrouted_statistics_never_certify() {
    let config = RunConfig { visibility: 0.995, ..RunConfig::default() };
    let stats = model_statistics(&config, config.mu).unwrap();
    let bad = ConditionalStats::from_probabilities(stats.settings().to_vec(), 3, misroute(&stats.probabilities())).unwrap();
    match run_certify(&config, &bad) {
        Ok(r) => assert!(r.min_entropy_bits < 1e-6, "{}", r.min_entropy_bits),
        Err(e) => assert!(matches!(e, PipelineError::Certify(CertifyError::InconsistentStatistics(_))), "{e}"),
    }
    let counts = sample_counts_per_setting(&bad, &[1_000_000; 4], 2).unwrap();
    match run_certify(&config, &counts) {
        Ok(r) => assert!(r.min_entropy_bits < 1e-6, "{}", r.min_entropy_bits),
        Err(e) => assert!(matches!(e, PipelineError::Certify(CertifyError::InconsistentStatistics(_))), "{e}"),
    }
}

#[test]
fn report_rebuilds_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let counts = run_simulate(&config).unwrap().counts.unwrap();
    let report = run_certify(&config, &counts).unwrap();
    let parsed: CertificationResult = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let again = certify(&parsed.protocol, &parsed.statistics, &parsed.options).unwrap();
    assert!((again.min_entropy_bits - report.min_entropy_bits).abs() < 1e-6);
    assert_eq!(parsed.intervals_used, report.intervals_used);
    assert_eq!(parsed.kappa, report.kappa);
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mdiqrng"));
    c.env_remove("MDIQRNG_OUT_DIR");
    c
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

#[test]
fn cli_outputs_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"rounds": 300000, "cutoff": 2}"#);
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = cli().args(["simulate", "--seed", "9", "--config"]).arg(&config).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        let counts = out.join("counts.csv");
        let status = cli().args(["certify", "--emit-sdp", "--config"]).arg(&config).arg("--counts").arg(&counts).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        reports.push((std::fs::read(&counts).unwrap(), std::fs::read(out.join("report.json")).unwrap()));
        assert!(out.join("sdp.json").exists());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn cli_output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let status = cli().args(["simulate", "--config"]).arg(write_config(dir.path(), r#"{"rounds": 1000}"#)).env("MDIQRNG_OUT_DIR", &out).status().unwrap();
    assert!(status.success());
    assert!(out.join("statistics.json").exists());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |c: &mut Command| c.arg("--out").arg(dir.path()).status().unwrap().code();

    let bad = write_config(dir.path(), r#"{"visibility": 2.0}"#);
    assert_eq!(code(cli().args(["simulate", "--config"]).arg(&bad)), Some(2));
    assert_eq!(code(cli().args(["certify"])), Some(2));
    assert_eq!(code(cli().args(["simulate", "--config"]).arg(dir.path().join("absent.json"))), Some(4));
    assert_eq!(code(cli().args(["certify", "--counts"]).arg(dir.path().join("absent.csv"))), Some(4));

    let garbled = dir.path().join("garbled.csv");
    std::fs::write(&garbled, "# detectors: 3\n# settings: T1,T2,T3,G\nsetting,pattern,count\nT1,1x0,3\n").unwrap();
    assert_eq!(code(cli().args(["certify", "--counts"]).arg(&garbled)), Some(2));

    // Each test always lights its own detector, which the shared vacuum
    // component of the weak coherent states rules out.
    let mut text = String::from("# detectors: 3\n# settings: T1,T2,T3,G\nsetting,pattern,count\n");
    for (s, p) in [("T1", "100"), ("T2", "010"), ("T3", "001"), ("G", "100")] {
        text.push_str(&format!("{s},{p},1000000\n"));
    }
    let impossible = dir.path().join("impossible.csv");
    std::fs::write(&impossible, text).unwrap();
    let asymptotic = write_config(dir.path(), r#"{"analysis": "asymptotic"}"#);
    assert_eq!(code(cli().args(["certify", "--config"]).arg(&asymptotic).arg("--counts").arg(&impossible)), Some(3));
}

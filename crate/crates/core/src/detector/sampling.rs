//! Finite-round count sampling from model statistics.
//!
//! One seeded ChaCha stream drives every draw, so a fixed seed reproduces
//! the same table. Settings are scheduled i.i.d. per round.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{ConditionalStats, DetectorError};

/// Multinomial draw by sequential binomials.
fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = trials;
    let mut mass: f64 = probs.iter().sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = remaining;
            break;
        }
        let frac = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if frac >= 1.0 {
            remaining
        } else if frac <= 0.0 {
            0
        } else {
            Binomial::new(remaining, frac).expect("valid binomial").sample(rng)
        };
        out[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

/// Draws `rounds` rounds with settings chosen from `schedule` (one weight per
/// setting, same order as `stats.settings()`) and outcomes from each row.
pub fn sample_counts(stats: &ConditionalStats, schedule: &[f64], rounds: u64, seed: u64) -> Result<ConditionalStats, DetectorError> {
    if rounds == 0 {
        return Err(DetectorError::ZeroRounds);
    }
    if schedule.len() != stats.settings().len() {
        return Err(DetectorError::LengthMismatch { what: "schedule", expected: stats.settings().len(), got: schedule.len() });
    }
    let total: f64 = schedule.iter().sum();
    if (total - 1.0).abs() > 1e-9 || schedule.iter().any(|&p| p < 0.0) {
        return Err(DetectorError::BadSchedule(total));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_setting = multinomial(&mut rng, rounds, schedule);
    draw_rows(stats, &per_setting, &mut rng)
}

/// Draws exactly `rounds[x]` rounds for each setting `x`.
pub fn sample_counts_per_setting(stats: &ConditionalStats, rounds: &[u64], seed: u64) -> Result<ConditionalStats, DetectorError> {
    if rounds.len() != stats.settings().len() {
        return Err(DetectorError::LengthMismatch { what: "round counts", expected: stats.settings().len(), got: rounds.len() });
    }
    if rounds.iter().all(|&n| n == 0) {
        return Err(DetectorError::ZeroRounds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_rows(stats, rounds, &mut rng)
}

fn draw_rows(stats: &ConditionalStats, per_setting: &[u64], rng: &mut ChaCha8Rng) -> Result<ConditionalStats, DetectorError> {
    let rows = stats
        .probabilities()
        .iter()
        .zip(per_setting)
        .map(|(row, &n)| multinomial(rng, n, row))
        .collect();
    ConditionalStats::from_counts(stats.settings().to_vec(), stats.detectors(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> ConditionalStats {
        ConditionalStats::from_probabilities(
            vec!["T1".into(), "T2".into(), "T3".into(), "G".into()],
            2,
            vec![
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.1, 0.2, 0.3, 0.4],
                vec![0.25; 4],
                vec![0.5, 0.0, 0.0, 0.5],
            ],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_row_gets_all_counts() {
        let s = sample_counts(&stats(), &[0.25; 4], 10_000, 7).unwrap();
        let counts = s.counts().unwrap();
        let n0: u64 = counts[0].iter().sum();
        assert_eq!(counts[0][2], n0);
        assert_eq!(counts[3][1] + counts[3][2], 0);
        assert_eq!(counts.iter().flatten().sum::<u64>(), 10_000);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = sample_counts(&stats(), &[0.97, 0.01, 0.01, 0.01], 50_000, 42).unwrap();
        let b = sample_counts(&stats(), &[0.97, 0.01, 0.01, 0.01], 50_000, 42).unwrap();
        let c = sample_counts(&stats(), &[0.97, 0.01, 0.01, 0.01], 50_000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generation_bias_within_five_sigma() {
        let n = 1_000_000u64;
        let s = sample_counts(&stats(), &[0.01, 0.01, 0.01, 0.97], n, 2024).unwrap();
        let n_g = s.rounds_per_setting().unwrap()[3] as f64;
        let sigma = (n as f64 * 0.97 * 0.03).sqrt();
        assert!((n_g - 0.97 * n as f64).abs() < 5.0 * sigma, "n_G = {n_g}");
    }

    #[test]
    fn zero_rounds_rejected() {
        assert_eq!(sample_counts(&stats(), &[0.25; 4], 0, 1), Err(DetectorError::ZeroRounds));
        assert!(matches!(sample_counts(&stats(), &[0.5; 4], 10, 1), Err(DetectorError::BadSchedule(_))));
    }
}

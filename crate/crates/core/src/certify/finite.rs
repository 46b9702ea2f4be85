//! Confidence intervals for empirical click statistics.

use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::detector::ConditionalStats;

/// How a global failure probability is split over (setting, pattern) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// `eps_{x,a} = eps_tot / (|X| |A|)`.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    pub total: f64,
    #[serde(default)]
    pub allocation: Allocation,
}

impl EpsilonBudget {
    pub fn uniform(total: f64) -> Result<Self, CertifyError> {
        let b = Self { total, allocation: Allocation::Uniform };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), CertifyError> {
        if !(self.total > 0.0 && self.total < 1.0) {
            return Err(CertifyError::InvalidParameter(format!("epsilon {} outside (0, 1)", self.total)));
        }
        Ok(())
    }

    /// Failure probability assigned to each pair; the sum over all pairs
    /// never exceeds the total.
    pub fn per_pair(&self, settings: usize, patterns: usize) -> Vec<Vec<f64>> {
        match self.allocation {
            Allocation::Uniform => {
                let share = self.total / (settings * patterns).max(1) as f64;
                vec![vec![share; patterns]; settings]
            }
        }
    }
}

/// Two-sided Chernoff-Hoeffding radius `sqrt(ln(2/eps) / (2 n))`.
pub fn chernoff_radius(rounds: u64, eps: f64) -> Result<f64, CertifyError> {
    if rounds == 0 {
        return Err(CertifyError::InvalidParameter("Chernoff radius needs at least one round".into()));
    }
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(CertifyError::InvalidParameter(format!("epsilon {eps} outside (0, 2]")));
    }
    Ok(((2.0 / eps).ln() / (2.0 * rounds as f64)).sqrt())
}

/// Per-(setting, pattern) bounds `L <= p(a|x) <= U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTable {
    pub settings: Vec<String>,
    pub estimates: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub radii: Vec<Vec<f64>>,
    pub epsilons: Vec<Vec<f64>>,
    pub rounds: Vec<u64>,
}

/// `L = max(0, p_hat - t)`, `U = min(1, p_hat + t)` from an empirical
/// table (counts, or post-processed frequencies with their round counts).
pub fn intervals_from_counts(stats: &ConditionalStats, budget: &EpsilonBudget) -> Result<IntervalTable, CertifyError> {
    budget.validate()?;
    let rounds = stats.rounds_per_setting().ok_or(CertifyError::NotEmpirical)?;
    let p_hat = stats.probabilities();
    let patterns = 1usize << stats.detectors();
    let epsilons = budget.per_pair(stats.settings().len(), patterns);
    let mut lower = Vec::with_capacity(rounds.len());
    let mut upper = Vec::with_capacity(rounds.len());
    let mut radii = Vec::with_capacity(rounds.len());
    for (x, &n) in rounds.iter().enumerate() {
        if n == 0 {
            return Err(CertifyError::NoRounds(stats.settings()[x].clone()));
        }
        let t: Vec<f64> = epsilons[x].iter().map(|&e| chernoff_radius(n, e)).collect::<Result<_, _>>()?;
        lower.push(p_hat[x].iter().zip(&t).map(|(p, t)| (p - t).max(0.0)).collect());
        upper.push(p_hat[x].iter().zip(&t).map(|(p, t)| (p + t).min(1.0)).collect());
        radii.push(t);
    }
    Ok(IntervalTable { settings: stats.settings().to_vec(), estimates: p_hat, lower, upper, radii, epsilons, rounds })
}

use serde::{Deserialize, Serialize};

use super::{ClickPattern, DetectorError};

const ROW_TOLERANCE: f64 = 1e-9;

/// Per-setting outcome table over the full click-pattern alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum StatsTable {
    /// Exact model probabilities `p(a|x)`.
    Probabilities { rows: Vec<Vec<f64>> },
    /// Observed counts `N(a,x)`; `n_x` is the row sum.
    Counts { rows: Vec<Vec<u64>> },
    /// Empirical frequencies after classical post-processing of counts,
    /// with the number of rounds they were estimated from.
    Frequencies { rows: Vec<Vec<f64>>, rounds: Vec<u64> },
}

/// `p(a|x)` or `N(a,x)` indexed by setting label and pattern index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalStats {
    settings: Vec<String>,
    detectors: usize,
    table: StatsTable,
}

fn check_shape<T>(settings: &[String], detectors: usize, rows: &[Vec<T>]) -> Result<(), DetectorError> {
    if rows.len() != settings.len() {
        return Err(DetectorError::LengthMismatch { what: "statistics table", expected: settings.len(), got: rows.len() });
    }
    let width = 1usize << detectors;
    for row in rows {
        if row.len() != width {
            return Err(DetectorError::LengthMismatch { what: "statistics row", expected: width, got: row.len() });
        }
    }
    Ok(())
}

fn check_distribution(settings: &[String], rows: &[Vec<f64>]) -> Result<(), DetectorError> {
    for (label, row) in settings.iter().zip(rows) {
        for &p in row {
            if !(-ROW_TOLERANCE..=1.0 + ROW_TOLERANCE).contains(&p) {
                return Err(DetectorError::OutOfRange { what: "probability", value: p, range: "[0, 1]" });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(DetectorError::RowNotNormalized { setting: label.clone(), sum });
        }
    }
    Ok(())
}

impl ConditionalStats {
    pub fn from_probabilities(settings: Vec<String>, detectors: usize, rows: Vec<Vec<f64>>) -> Result<Self, DetectorError> {
        check_shape(&settings, detectors, &rows)?;
        check_distribution(&settings, &rows)?;
        let rows = rows.into_iter().map(|r| r.into_iter().map(|p| p.clamp(0.0, 1.0)).collect()).collect();
        Ok(Self { settings, detectors, table: StatsTable::Probabilities { rows } })
    }

    pub fn from_counts(settings: Vec<String>, detectors: usize, rows: Vec<Vec<u64>>) -> Result<Self, DetectorError> {
        check_shape(&settings, detectors, &rows)?;
        Ok(Self { settings, detectors, table: StatsTable::Counts { rows } })
    }

    pub fn from_frequencies(
        settings: Vec<String>,
        detectors: usize,
        rows: Vec<Vec<f64>>,
        rounds: Vec<u64>,
    ) -> Result<Self, DetectorError> {
        check_shape(&settings, detectors, &rows)?;
        if rounds.len() != settings.len() {
            return Err(DetectorError::LengthMismatch { what: "round counts", expected: settings.len(), got: rounds.len() });
        }
        check_distribution(&settings, &rows)?;
        Ok(Self { settings, detectors, table: StatsTable::Frequencies { rows, rounds } })
    }

    pub fn settings(&self) -> &[String] {
        &self.settings
    }

    pub fn detectors(&self) -> usize {
        self.detectors
    }

    pub fn patterns(&self) -> Vec<ClickPattern> {
        ClickPattern::all(self.detectors)
    }

    pub fn table(&self) -> &StatsTable {
        &self.table
    }

    pub fn setting_index(&self, label: &str) -> Option<usize> {
        self.settings.iter().position(|s| s == label)
    }

    pub fn is_empirical(&self) -> bool {
        !matches!(self.table, StatsTable::Probabilities { .. })
    }

    pub fn counts(&self) -> Option<&[Vec<u64>]> {
        match &self.table {
            StatsTable::Counts { rows } => Some(rows),
            _ => None,
        }
    }

    /// `n_x` per setting for empirical tables.
    pub fn rounds_per_setting(&self) -> Option<Vec<u64>> {
        match &self.table {
            StatsTable::Probabilities { .. } => None,
            StatsTable::Counts { rows } => Some(rows.iter().map(|r| r.iter().sum()).collect()),
            StatsTable::Frequencies { rounds, .. } => Some(rounds.clone()),
        }
    }

    /// `p(a|x)` for model tables, `p_hat(a|x) = N(a,x) / n_x` for counts.
    /// A setting with no rounds yields an all-zero row.
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        match &self.table {
            StatsTable::Probabilities { rows } | StatsTable::Frequencies { rows, .. } => rows.clone(),
            StatsTable::Counts { rows } => rows
                .iter()
                .map(|r| {
                    let n: u64 = r.iter().sum();
                    r.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
                })
                .collect(),
        }
    }

    /// Keeps only the listed settings, in the given order.
    pub fn select(&self, labels: &[String]) -> Result<Self, DetectorError> {
        let idx = labels
            .iter()
            .map(|l| self.setting_index(l).ok_or_else(|| DetectorError::UnknownSetting(l.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let table = match &self.table {
            StatsTable::Probabilities { rows } => StatsTable::Probabilities { rows: idx.iter().map(|&i| rows[i].clone()).collect() },
            StatsTable::Counts { rows } => StatsTable::Counts { rows: idx.iter().map(|&i| rows[i].clone()).collect() },
            StatsTable::Frequencies { rows, rounds } => StatsTable::Frequencies {
                rows: idx.iter().map(|&i| rows[i].clone()).collect(),
                rounds: idx.iter().map(|&i| rounds[i]).collect(),
            },
        };
        Ok(Self { settings: labels.to_vec(), detectors: self.detectors, table })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_rows() {
        let err = ConditionalStats::from_probabilities(vec!["G".into()], 1, vec![vec![0.5, 0.4]]).unwrap_err();
        assert!(matches!(err, DetectorError::RowNotNormalized { .. }));
    }

    #[test]
    fn rejects_wrong_width() {
        let err = ConditionalStats::from_counts(vec!["G".into()], 2, vec![vec![1, 2, 3]]).unwrap_err();
        assert!(matches!(err, DetectorError::LengthMismatch { .. }));
    }

    #[test]
    fn counts_give_frequencies() {
        let stats = ConditionalStats::from_counts(vec!["A".into(), "B".into()], 1, vec![vec![3, 1], vec![0, 0]]).unwrap();
        assert_eq!(stats.rounds_per_setting(), Some(vec![4, 0]));
        assert_eq!(stats.probabilities(), vec![vec![0.75, 0.25], vec![0.0, 0.0]]);
        let b = stats.select(&["B".into()]).unwrap();
        assert_eq!(b.counts().unwrap(), &[vec![0, 0]]);
        assert!(stats.select(&["C".into()]).is_err());
    }
}

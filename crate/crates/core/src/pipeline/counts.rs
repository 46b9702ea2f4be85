//! Click-count tables on disk.
//!
//! ```text
//! # detectors: 3
//! # settings: T1,T2,T3,G
//! setting,pattern,count
//! T1,100,9731
//! ```
//!
//! Patterns are bit strings, detector 1 first. Missing rows count as zero and
//! repeated `(setting, pattern)` rows are summed.

use std::io::Read;
use std::path::Path;

use super::PipelineError;
use crate::detector::{ClickPattern, ConditionalStats};

fn parse_error(line: u64, msg: impl Into<String>) -> PipelineError {
    PipelineError::Parse { line, msg: msg.into() }
}

fn parse_pattern(s: &str, detectors: usize, line: u64) -> Result<usize, PipelineError> {
    if s.len() != detectors {
        return Err(parse_error(line, format!("pattern `{s}` has {} bits, expected {detectors}", s.len())));
    }
    let bits = s
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(parse_error(line, format!("pattern `{s}` must contain only 0 and 1"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClickPattern::new(bits).index())
}

/// Parses a counts table from any reader.
pub fn read_counts<R: Read>(mut reader: R) -> Result<ConditionalStats, PipelineError> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| parse_error(0, format!("unreadable input: {e}")))?;

    let mut detectors: Option<usize> = None;
    let mut settings: Option<Vec<String>> = None;
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.trim().strip_prefix('#') else { continue };
        let lineno = i as u64 + 1;
        let Some((key, value)) = body.split_once(':') else { continue };
        match key.trim() {
            "detectors" => {
                let d = value.trim().parse::<usize>().map_err(|_| parse_error(lineno, format!("bad detector count `{}`", value.trim())))?;
                if d == 0 || d > 16 {
                    return Err(parse_error(lineno, format!("detector count {d} out of range")));
                }
                detectors = Some(d);
            }
            "settings" => {
                let labels: Vec<String> = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                if labels.is_empty() {
                    return Err(parse_error(lineno, "empty settings list"));
                }
                for (k, l) in labels.iter().enumerate() {
                    if labels[..k].contains(l) {
                        return Err(parse_error(lineno, format!("setting `{l}` listed twice")));
                    }
                }
                settings = Some(labels);
            }
            _ => {}
        }
    }
    let detectors = detectors.ok_or_else(|| parse_error(0, "missing `# detectors:` header"))?;
    let settings = settings.ok_or_else(|| parse_error(0, "missing `# settings:` header"))?;

    let mut rows = vec![vec![0u64; 1 << detectors]; settings.len()];
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).has_headers(true).from_reader(text.as_bytes());
    let header = csv.headers().map_err(|e| parse_error(e.position().map_or(0, |p| p.line()), e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["setting", "pattern", "count"] {
        return Err(parse_error(0, "column header must be `setting,pattern,count`"));
    }
    for record in csv.records() {
        let record = record.map_err(|e| parse_error(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_error(line, format!("expected 3 fields, found {}", record.len())));
        }
        let x = settings.iter().position(|s| s == &record[0]).ok_or_else(|| parse_error(line, format!("unknown setting `{}`", &record[0])))?;
        let a = parse_pattern(&record[1], detectors, line)?;
        let n: u64 = record[2].parse().map_err(|_| parse_error(line, format!("count `{}` is not a non-negative integer", &record[2])))?;
        rows[x][a] = rows[x][a].checked_add(n).ok_or_else(|| parse_error(line, "count overflow"))?;
    }
    ConditionalStats::from_counts(settings, detectors, rows).map_err(|e| PipelineError::Config(e.to_string()))
}

pub fn ingest_counts(path: &Path) -> Result<ConditionalStats, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    read_counts(file).map_err(|e| match e {
        PipelineError::Parse { line, msg } => PipelineError::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })
}

/// Renders a count table; every `(setting, pattern)` row is written.
pub fn format_counts(stats: &ConditionalStats) -> Result<String, PipelineError> {
    let rows = stats.counts().ok_or_else(|| PipelineError::Config("statistics are not a count table".into()))?;
    let mut out = format!("# detectors: {}\n# settings: {}\nsetting,pattern,count\n", stats.detectors(), stats.settings().join(","));
    let patterns = stats.patterns();
    for (label, row) in stats.settings().iter().zip(rows) {
        for (p, n) in patterns.iter().zip(row) {
            out.push_str(&format!("{label},{p},{n}\n"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "# detectors: 2\n# settings: T1,T2,G\nsetting,pattern,count\n";

    #[test]
    fn fills_and_merges() {
        let text = format!("{HEAD}T1,10,5\nT1,10,2\nG,11,1\n");
        let s = read_counts(text.as_bytes()).unwrap();
        assert_eq!(s.counts().unwrap(), &[vec![0, 0, 7, 0], vec![0; 4], vec![0, 0, 0, 1]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_counts(format!("{HEAD}T1,10,5\nT9,00,1\n").as_bytes()).unwrap_err();
        assert!(matches!(err, PipelineError::Parse { line: 5, .. }), "{err}");
        let err = read_counts(format!("{HEAD}T1,102,5\n").as_bytes()).unwrap_err();
        assert!(matches!(err, PipelineError::Parse { line: 4, .. }), "{err}");
        let err = read_counts(format!("{HEAD}T1,10,-5\n").as_bytes()).unwrap_err();
        assert!(matches!(err, PipelineError::Parse { line: 4, .. }), "{err}");
        assert!(read_counts("setting,pattern,count\n".as_bytes()).is_err());
    }

    #[test]
    fn format_round_trips() {
        let s = ConditionalStats::from_counts(vec!["A".into(), "G".into()], 1, vec![vec![3, 4], vec![0, 9]]).unwrap();
        let text = format_counts(&s).unwrap();
        assert_eq!(read_counts(text.as_bytes()).unwrap(), s);
    }
}

//! Reading externally supplied beat intervals (e.g. from arrhythmia recordings).
//!
//! Files hold one value per line, in seconds, optionally comma separated (only
//! the first column is read) and optionally preceded by a non-numeric header
//! line. Lines starting with `#` are ignored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BeatIntervalSeries;
use crate::error::{Error, Result};

/// Plausible range of a single interval, seconds.
pub const PLAUSIBLE_INTERVAL: (f64, f64) = (0.2, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalFormat {
    /// One interval per line.
    #[default]
    Intervals,
    /// One beat annotation time per line; intervals are first differences.
    AnnotationTimes,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject non-positive and implausible intervals instead of warning.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedIntervals {
    pub series: BeatIntervalSeries,
    pub warnings: Vec<String>,
}

pub fn load_intervals(path: &Path, format: IntervalFormat, options: LoadOptions) -> Result<LoadedIntervals> {
    let text = std::fs::read_to_string(path)?;
    parse_intervals(&text, format, options, &path.display().to_string())
}

pub fn parse_intervals(
    text: &str,
    format: IntervalFormat,
    options: LoadOptions,
    source_name: &str,
) -> Result<LoadedIntervals> {
    let values = parse_column(text, source_name)?;
    if values.is_empty() {
        return Err(Error::InsufficientData(format!("{source_name}: no values")));
    }
    let raw: Vec<(usize, f64)> = match format {
        IntervalFormat::Intervals => values,
        IntervalFormat::AnnotationTimes => values.windows(2).map(|w| (w[1].0, w[1].1 - w[0].1)).collect(),
    };

    let mut warnings = Vec::new();
    let mut kept = Vec::with_capacity(raw.len());
    for (line, v) in raw {
        if !(v > 0.0) {
            let msg = format!("{source_name}:{line}: non-positive interval {v}");
            if options.strict {
                return Err(Error::Parse {
                    source_name: source_name.into(),
                    line,
                    message: format!("non-positive interval {v}"),
                });
            }
            log::warn!("{msg}, dropped");
            warnings.push(format!("{msg}, dropped"));
            continue;
        }
        if v < PLAUSIBLE_INTERVAL.0 || v > PLAUSIBLE_INTERVAL.1 {
            if options.strict {
                return Err(Error::Parse {
                    source_name: source_name.into(),
                    line,
                    message: format!("implausible interval {v} s"),
                });
            }
            let msg = format!("{source_name}:{line}: implausible interval {v} s");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        kept.push(v);
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!("{source_name}: no valid intervals")));
    }
    Ok(LoadedIntervals {
        series: BeatIntervalSeries::from_intervals(&kept)?,
        warnings,
    })
}

/// Parses the first column of a text file, returning (1-based line, value).
pub(crate) fn parse_column(text: &str, source_name: &str) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let field = trimmed.split([',', ';', '\t', ' ']).next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push((idx + 1, v)),
            _ if out.is_empty() && !looks_numeric(field) => continue, // header
            _ => {
                return Err(Error::Parse {
                    source_name: source_name.into(),
                    line: idx + 1,
                    message: format!("not a number: {field:?}"),
                })
            }
        }
    }
    Ok(out)
}

fn looks_numeric(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
}
